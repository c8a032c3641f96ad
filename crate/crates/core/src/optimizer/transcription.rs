//! The discretized reduced problem: real controls on each edge, exact
//! rotation steps, endpoint constraints on moduli, and the discrete adjoint.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::boundary::BoundarySpec;
use crate::control::{ControlGrid, Flavor, TimeGrid};
use crate::costs::{CostKind, CostSpec};
use crate::dynamics::AdmissiblePair;
use crate::error::{Error, Result};
use crate::linalg;
use crate::system::LevelSystem;

/// Discretization of the reduced real problem on a fixed grid.
/// Controls are stored flat as `x[step * edges + edge]`.
#[derive(Debug, Clone)]
pub(crate) struct Reduced {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub grid: TimeGrid,
    pub rho0: DVector<f64>,
}

pub(crate) struct Sweep {
    pub props: Vec<DMatrix<f64>>,
    pub states: Vec<DVector<f64>>,
}

impl Reduced {
    pub fn new(sys: &LevelSystem, grid: TimeGrid, rho0: DVector<f64>) -> Self {
        Reduced { n: sys.n, edges: sys.edges.iter().map(|e| e.key()).collect(), grid, rho0 }
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_vars(&self) -> usize {
        self.edges.len() * self.grid.steps()
    }

    pub fn step_values<'a>(&self, x: &'a [f64], step: usize) -> &'a [f64] {
        let m = self.n_edges();
        &x[step * m..(step + 1) * m]
    }

    /// `U_i dt` for one step.
    pub fn scaled_generator(&self, x: &[f64], step: usize) -> DMatrix<f64> {
        let dt = self.grid.dt();
        let mut a = DMatrix::zeros(self.n, self.n);
        for (&(j, k), &u) in self.edges.iter().zip(self.step_values(x, step)) {
            a[(j, k)] = u * dt;
            a[(k, j)] = -u * dt;
        }
        a
    }

    pub fn forward(&self, x: &[f64]) -> Sweep {
        let steps = self.grid.steps();
        let mut props = Vec::with_capacity(steps);
        let mut states = Vec::with_capacity(steps + 1);
        states.push(self.rho0.clone());
        for i in 0..steps {
            let p = linalg::expm(&self.scaled_generator(x, i));
            states.push(&p * &states[i]);
            props.push(p);
        }
        Sweep { props, states }
    }

    /// Step-averaged switching functions `phi_e = P_j rho_k - P_k rho_j`,
    /// given the covector `after` at the end of the step.
    pub fn switching(&self, x: &[f64], step: usize, rho: &DVector<f64>, after: &DVector<f64>) -> Vec<f64> {
        let a = self.scaled_generator(x, step);
        let (_, w) = linalg::expm_frechet(&a.transpose(), &(after * rho.transpose()));
        self.edges.iter().map(|&(j, k)| w[(j, k)] - w[(k, j)]).collect()
    }

    /// Gradient of `g_N . rho_N` with respect to every control, and the
    /// covector history `g_i` (nodes).
    pub fn backward(&self, x: &[f64], sweep: &Sweep, terminal: DVector<f64>) -> (Vec<f64>, Vec<DVector<f64>>) {
        let steps = self.grid.steps();
        let dt = self.grid.dt();
        let m = self.n_edges();
        let mut grad = vec![0.0; self.n_vars()];
        let mut costate = vec![DVector::zeros(self.n); steps + 1];
        costate[steps] = terminal;
        for i in (0..steps).rev() {
            let phi = self.switching(x, i, &sweep.states[i], &costate[i + 1]);
            for (e, p) in phi.into_iter().enumerate() {
                grad[i * m + e] = dt * p;
            }
            costate[i] = sweep.props[i].transpose() * &costate[i + 1];
        }
        (grad, costate)
    }

    pub fn control_grid(&self, sys: &LevelSystem, x: &[f64]) -> ControlGrid {
        ControlGrid::real_from_fn(self.grid, sys, |i, e| x[i * self.n_edges() + e])
    }
}

/// Endpoint constraints on the target moduli: `c_j = rho_j - s_j sqrt(a_j)`
/// with a sign `s_j` picked from the current endpoint. The linear form keeps
/// a first-order pull towards targets whose coordinates start at zero.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct EndpointConstraints {
    pub items: Vec<(usize, f64)>,
    pub signs: Vec<f64>,
}

impl EndpointConstraints {
    pub fn new(target: &BoundarySpec, n: usize) -> Self {
        let items = target.constraints(n);
        let signs = vec![1.0; items.len()];
        EndpointConstraints { items, signs }
    }

    /// Same constraints with signs matching `rho` (positive where it vanishes).
    pub fn oriented(&self, rho: &DVector<f64>) -> Self {
        let signs = self.items.iter().map(|&(j, _)| if rho[j] < 0.0 { -1.0 } else { 1.0 }).collect();
        EndpointConstraints { items: self.items.clone(), signs }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn values(&self, rho: &DVector<f64>) -> Vec<f64> {
        self.items.iter().zip(&self.signs).map(|(&(j, a), s)| rho[j] - s * a.sqrt()).collect()
    }

    /// `sum_j weights_j grad c_j`.
    pub fn pullback(&self, rho: &DVector<f64>, weights: &[f64]) -> DVector<f64> {
        let mut g = DVector::zeros(rho.len());
        for (&(j, _), w) in self.items.iter().zip(weights) {
            g[j] += *w;
        }
        g
    }

    /// Largest `| |rho_j| - sqrt(a_j) |`.
    pub fn violation(&self, rho: &DVector<f64>) -> f64 {
        self.items.iter().map(|&(j, a)| (rho[j].abs() - a.sqrt()).abs()).fold(0.0, f64::max)
    }
}

/// Integrand and its gradient in the edge controls of one step.
pub(crate) fn integrand_grad(kind: CostKind, u: &[f64], mu: &[f64]) -> (f64, Vec<f64>) {
    let w: Vec<f64> = u.iter().zip(mu).map(|(u, m)| u / m).collect();
    match kind {
        CostKind::Energy => (w.iter().map(|w| w * w).sum(), w.iter().zip(mu).map(|(w, m)| 2.0 * w / m).collect()),
        CostKind::Length => {
            let f = w.iter().map(|w| w * w).sum::<f64>().sqrt();
            let g = if f > 0.0 { w.iter().zip(mu).map(|(w, m)| w / (m * f)).collect() } else { vec![0.0; w.len()] };
            (f, g)
        }
        CostKind::Area => (w.iter().map(|w| w.abs()).sum(), w.iter().zip(mu).map(|(w, m)| w.signum() * (*w != 0.0) as u8 as f64 / m).collect()),
        CostKind::TimeMax => {
            let mut g = vec![0.0; w.len()];
            let best = w.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()));
            match best {
                Some((e, &we)) if we != 0.0 => {
                    g[e] = we.signum() / mu[e];
                    (we.abs(), g)
                }
                _ => (0.0, g),
            }
        }
    }
}

/// Multipliers and quadratic weight of the endpoint penalty
/// `sum_j lambda_j c_j + weight / 2 * sum_j c_j^2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltyState {
    #[serde(skip)]
    pub target: BoundarySpec,
    pub multipliers: Vec<f64>,
    pub weight: f64,
}

impl PenaltyState {
    pub fn new(target: BoundarySpec, n: usize, weight: f64) -> Self {
        let m = target.constraints(n).len();
        PenaltyState { target, multipliers: vec![0.0; m], weight }
    }
}

pub(crate) fn real_pair_parts(sys: &LevelSystem, pair: &AdmissiblePair) -> Result<(Reduced, Vec<f64>)> {
    if pair.control.flavor != Flavor::RealU {
        return Err(Error::InvalidControl { invariant: "flavor", detail: "expected a real (U) control".into() });
    }
    let rho0 = pair.trajectory.real_state(0);
    if pair.trajectory.initial().iter().any(|z| z.im != 0.0) {
        return Err(Error::InvalidState("reduced problem requires a real initial state".into()));
    }
    let red = Reduced::new(sys, pair.control.grid, rho0);
    let m = red.n_edges();
    let mut x = vec![0.0; red.n_vars()];
    for (i, row) in pair.control.values.iter().enumerate() {
        for (e, z) in row.iter().enumerate() {
            x[i * m + e] = z.re;
        }
    }
    Ok((red, x))
}

fn objective_and_gradient(
    red: &Reduced,
    kind: Option<CostKind>,
    mu: &[f64],
    cons: &EndpointConstraints,
    penalty: &PenaltyState,
    x: &[f64],
) -> (f64, Vec<f64>) {
    let dt = red.grid.dt();
    let m = red.n_edges();
    let sweep = red.forward(x);
    let last = &sweep.states[red.grid.steps()];
    let c = cons.values(last);
    let mut value = 0.0;
    let mut weights = Vec::with_capacity(c.len());
    for (cj, lj) in c.iter().zip(&penalty.multipliers) {
        value += lj * cj + 0.5 * penalty.weight * cj * cj;
        weights.push(lj + penalty.weight * cj);
    }
    let (mut grad, _) = red.backward(x, &sweep, cons.pullback(last, &weights));
    let Some(kind) = kind else { return (value, grad) };
    for i in 0..red.grid.steps() {
        let (f, g) = integrand_grad(kind, red.step_values(x, i), mu);
        value += dt * f;
        for e in 0..m {
            grad[i * m + e] += dt * g[e];
        }
    }
    (value, grad)
}

/// Discretized cost plus endpoint penalty for a real pair.
pub fn penalized_objective(sys: &LevelSystem, spec: &CostSpec, pair: &AdmissiblePair, penalty: &PenaltyState) -> Result<f64> {
    let (red, x) = real_pair_parts(sys, pair)?;
    let mu = spec.edge_weights(&pair.control)?;
    let cons = EndpointConstraints::new(&penalty.target, sys.n);
    Ok(objective_and_gradient(&red, Some(spec.kind), &mu, &cons, penalty, &x).0)
}

/// Gradient of [`penalized_objective`] with respect to each `U_e(t_i)`,
/// as `[step][edge]`, by a backward sweep through the transposed steps.
pub fn adjoint_gradient(sys: &LevelSystem, spec: &CostSpec, pair: &AdmissiblePair, penalty: &PenaltyState) -> Result<Vec<Vec<f64>>> {
    let (red, x) = real_pair_parts(sys, pair)?;
    let mu = spec.edge_weights(&pair.control)?;
    let cons = EndpointConstraints::new(&penalty.target, sys.n);
    if penalty.multipliers.len() != cons.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} multipliers for {} endpoint constraints",
            penalty.multipliers.len(),
            cons.len()
        )));
    }
    let (_, g) = objective_and_gradient(&red, Some(spec.kind), &mu, &cons, penalty, &x);
    Ok(g.chunks(red.n_edges().max(1)).map(|c| c.to_vec()).collect())
}

pub(crate) struct Objective<'a> {
    pub red: &'a Reduced,
    /// `None` leaves only the endpoint penalty.
    pub kind: Option<CostKind>,
    pub mu: &'a [f64],
    pub cons: &'a EndpointConstraints,
}

impl Objective<'_> {
    pub fn eval(&self, penalty: &PenaltyState, x: &[f64]) -> (f64, Vec<f64>) {
        objective_and_gradient(self.red, self.kind, self.mu, self.cons, penalty, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::propagate_real;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pair(seed: u64, n: usize, steps: usize) -> (LevelSystem, AdmissiblePair) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = LevelSystem::ladder(vec![0.0; n]);
        let g = TimeGrid::new(1.0, steps).unwrap();
        let u = ControlGrid::real_from_fn(g, &sys, |_, _| rng.gen_range(-1.5..1.5));
        let mut rho = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        rho /= rho.norm();
        let traj = propagate_real(&sys, &u, &rho).unwrap();
        (sys, AdmissiblePair { trajectory: traj, control: u })
    }

    #[test]
    fn gradient_matches_central_differences() {
        for (seed, kind) in [(1, CostKind::Energy), (2, CostKind::Length), (3, CostKind::Area), (4, CostKind::TimeMax)] {
            let (sys, pair) = random_pair(seed, 3, 12);
            let spec = CostSpec::from_system(kind, &sys);
            let mut pen = PenaltyState::new(BoundarySpec::Eigenstate { index: 2 }, 3, 7.0);
            pen.multipliers = vec![0.3, -0.2, 0.5];
            let g = adjoint_gradient(&sys, &spec, &pair, &pen).unwrap();
            let h = 1e-5;
            let mut worst: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for i in 0..12 {
                for e in 0..2 {
                    let bump = |d: f64| {
                        let mut p = pair.clone();
                        p.control.values[i][e].re += d;
                        let rho0 = p.trajectory.real_state(0);
                        p.trajectory = propagate_real(&sys, &p.control, &rho0).unwrap();
                        penalized_objective(&sys, &spec, &p, &pen).unwrap()
                    };
                    let fd = (bump(h) - bump(-h)) / (2.0 * h);
                    worst = worst.max((fd - g[i][e]).abs());
                    scale = scale.max(fd.abs());
                }
            }
            assert!(worst / scale < 1e-5, "{kind}: {worst} / {scale}");
        }
    }

    #[test]
    fn stationary_at_zero_control_between_equal_endpoints() {
        let sys = LevelSystem::ladder(vec![0.0; 2]);
        let g = TimeGrid::new(1.0, 10).unwrap();
        let u = ControlGrid::real_from_fn(g, &sys, |_, _| 0.0);
        let rho = DVector::from_vec(vec![1.0, 0.0]);
        let pair = AdmissiblePair { trajectory: propagate_real(&sys, &u, &rho).unwrap(), control: u };
        let pen = PenaltyState::new(BoundarySpec::Eigenstate { index: 0 }, 2, 10.0);
        let grad = adjoint_gradient(&sys, &CostSpec::from_system(CostKind::Energy, &sys), &pair, &pen).unwrap();
        assert!(grad.iter().flatten().all(|g| g.abs() < 1e-15));
    }

    #[test]
    fn analytic_optimum_is_stationary() {
        use std::f64::consts::FRAC_PI_2;
        let sys = LevelSystem::ladder(vec![0.0; 2]);
        let g = TimeGrid::new(1.0, 20).unwrap();
        let u = ControlGrid::real_from_fn(g, &sys, |_, _| -FRAC_PI_2);
        let rho = DVector::from_vec(vec![1.0, 0.0]);
        let pair = AdmissiblePair { trajectory: propagate_real(&sys, &u, &rho).unwrap(), control: u };
        // multiplier on rho_1 balancing the energy gradient 2u dt
        let mut pen = PenaltyState::new(BoundarySpec::Eigenstate { index: 1 }, 2, 0.0);
        pen.multipliers = vec![std::f64::consts::PI, 0.0];
        let grad = adjoint_gradient(&sys, &CostSpec::from_system(CostKind::Energy, &sys), &pair, &pen).unwrap();
        let norm = grad.iter().flatten().map(|g| g * g).sum::<f64>().sqrt();
        assert!(norm <= 1e-6, "{norm}");
    }
}
