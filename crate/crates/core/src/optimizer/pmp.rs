//! Pontryagin lifts of reduced solutions and their residuals.
//!
//! Switching functions are averaged over each step (exactly, through the
//! Fréchet derivative of the step), which is what the discrete stationarity
//! conditions of the transcription constrain.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::boundary::BoundarySpec;
use crate::costs::{CostKind, CostSpec};
use crate::dynamics::AdmissiblePair;
use crate::error::{Error, Result};
use crate::linalg;
use crate::optimizer::transcription::{real_pair_parts, Reduced};
use crate::system::LevelSystem;

/// How the Hamiltonian of a lift is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LiftScale {
    /// `H = <P, U rho> + p0 f0(U)` for the pair's own cost.
    Cost,
    /// Minimum-time form `H = <P, U rho> + p0` for controls divided by
    /// `control_scale`, maximized over the unit constraint set.
    MinimumTime { control_scale: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmpLift {
    pub p0: f64,
    pub kind: CostKind,
    pub scale: LiftScale,
    pub times: Vec<f64>,
    /// Covector at every node.
    pub costate: Vec<DVector<f64>>,
    /// Hamiltonian on every step.
    pub hamiltonian: Vec<f64>,
    pub normal_candidate: bool,
    pub abnormal_candidate: bool,
}

impl PmpLift {
    pub fn n(&self) -> usize {
        self.costate.first().map_or(0, |p| p.len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PmpReport {
    /// Largest mismatch of the state recursion.
    pub dynamics: f64,
    /// Largest mismatch of the costate recursion, relative to `max |P|`.
    pub costate: f64,
    /// Largest `H_M - H` over steps.
    pub maximality_gap: f64,
    pub hamiltonian_mean: f64,
    /// Standard deviation of `H` over the larger of `|mean|` and the mean of `|p0 f0|`.
    pub hamiltonian_spread: f64,
    /// Component of the end covectors along the boundary sets.
    pub transversality: f64,
    /// Pairing of the covector with the phase-torus directions.
    pub torus_defect: f64,
    pub abnormal_candidate: bool,
}

impl PmpReport {
    /// Largest of the residuals that must vanish (the spread has its own threshold).
    pub fn max_residual(&self) -> f64 {
        [self.dynamics, self.costate, self.maximality_gap, self.transversality, self.torus_defect]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Largest value of `sum_e w_e mu_e phi_e` over the unit constraint set of `kind`,
/// intersected with the box `|w_e| <= bounds_e`.
pub(crate) fn support(kind: CostKind, phi: &[f64], mu: &[f64], bounds: &[f64]) -> f64 {
    let gains: Vec<f64> = phi.iter().zip(mu).map(|(p, m)| (p * m).abs()).collect();
    match kind {
        CostKind::TimeMax => gains.iter().zip(bounds).map(|(g, b)| g * b.min(1.0)).sum(),
        CostKind::Area => {
            let mut order: Vec<usize> = (0..gains.len()).collect();
            order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]));
            let mut budget = 1.0;
            let mut total = 0.0;
            for e in order {
                let take = bounds[e].min(budget);
                total += take * gains[e];
                budget -= take;
                if budget <= 0.0 {
                    break;
                }
            }
            total
        }
        CostKind::Energy | CostKind::Length => gains.iter().map(|g| g * g).sum::<f64>().sqrt(),
    }
}

pub(crate) struct StepTerms {
    pub hamiltonian: f64,
    pub gap: f64,
    /// `|p0 f0|`, the size the Hamiltonian is measured against.
    pub cost_term: f64,
}

pub(crate) fn step_terms(kind: CostKind, scale: LiftScale, p0: f64, u: &[f64], phi: &[f64], mu: &[f64], bounds: &[f64]) -> StepTerms {
    let pair: f64 = u.iter().zip(phi).map(|(u, p)| u * p).sum();
    match scale {
        LiftScale::MinimumTime { control_scale } => {
            let h = pair / control_scale + p0;
            let unit_bounds: Vec<f64> = bounds.iter().zip(mu).map(|(b, m)| b / m).collect();
            let hm = support(kind, phi, mu, &unit_bounds) + p0;
            StepTerms { hamiltonian: h, gap: hm - h, cost_term: p0.abs() }
        }
        LiftScale::Cost => match kind {
            CostKind::Energy => {
                let f0: f64 = u.iter().zip(mu).map(|(u, m)| (u / m).powi(2)).sum();
                let h = pair + p0 * f0;
                let hm = if p0 < 0.0 {
                    phi.iter().zip(mu).map(|(p, m)| (m * m * p * p) / (4.0 * -p0)).sum()
                } else {
                    h + phi.iter().map(|p| p.abs()).fold(0.0, f64::max)
                };
                StepTerms { hamiltonian: h, gap: hm - h, cost_term: (p0 * f0).abs() }
            }
            _ => {
                let f0 = kind.integrand(u.iter().zip(mu).map(|(u, m)| (u / m).abs()));
                let h = pair + p0 * f0;
                let dual = support(kind, phi, mu, &vec![f64::INFINITY; mu.len()]);
                let hm = f0 * (dual + p0).max(0.0);
                StepTerms { hamiltonian: h, gap: hm - h, cost_term: (p0 * f0).abs() }
            }
        },
    }
}

/// Covector history `P_{i+1} = Phi_i P_i` along the pair's steps.
pub(crate) fn transport(red: &Reduced, x: &[f64], p_start: &DVector<f64>) -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(red.grid.nodes());
    out.push(p_start.clone());
    for i in 0..red.grid.steps() {
        let phi = linalg::expm(&red.scaled_generator(x, i));
        let next = phi * &out[i];
        out.push(next);
    }
    out
}

/// Smallest singular value ratio of the map `P(0) -> (switching functions,
/// P(0) . rho(0))`. A ratio below `1e-7` signals a covector with `p0 = 0`
/// that annihilates every control field along the trajectory.
pub(crate) fn abnormal_ratio(red: &Reduced, x: &[f64]) -> f64 {
    let sweep = red.forward(x);
    let n = red.n;
    let m = red.n_edges();
    let steps = red.grid.steps();
    let mut mat = DMatrix::zeros(steps * m + 1, n);
    for b in 0..n {
        let mut start = DVector::zeros(n);
        start[b] = 1.0;
        let p = transport(red, x, &start);
        for i in 0..steps {
            let phi = red.switching(x, i, &sweep.states[i], &p[i + 1]);
            for e in 0..m {
                mat[(i * m + e, b)] = phi[e];
            }
        }
        mat[(steps * m, b)] = red.rho0[b];
    }
    let sv = mat.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if max > 0.0 {
        min / max
    } else {
        0.0
    }
}

pub(crate) const ABNORMAL_THRESHOLD: f64 = 1e-7;

pub(crate) fn edge_bounds(sys: &LevelSystem, red: &Reduced) -> Vec<f64> {
    red.edges
        .iter()
        .map(|&(j, k)| sys.edge_index(j, k).map_or(f64::INFINITY, |e| sys.edges[e].bound))
        .collect()
}

/// Builds a lift from a starting covector, filling the Hamiltonian history.
pub(crate) fn build_lift(
    sys: &LevelSystem,
    red: &Reduced,
    x: &[f64],
    mu: &[f64],
    kind: CostKind,
    scale: LiftScale,
    p0: f64,
    p_start: &DVector<f64>,
) -> PmpLift {
    let costate = transport(red, x, p_start);
    let sweep = red.forward(x);
    let bounds = edge_bounds(sys, red);
    let hamiltonian = (0..red.grid.steps())
        .map(|i| {
            let phi = red.switching(x, i, &sweep.states[i], &costate[i + 1]);
            step_terms(kind, scale, p0, red.step_values(x, i), &phi, mu, &bounds).hamiltonian
        })
        .collect();
    let abnormal_candidate = abnormal_ratio(red, x) <= ABNORMAL_THRESHOLD;
    PmpLift {
        p0,
        kind,
        scale,
        times: (0..red.grid.nodes()).map(|i| red.grid.node(i)).collect(),
        costate,
        hamiltonian,
        normal_candidate: p0 < 0.0,
        abnormal_candidate,
    }
}

fn tangent_defect(boundary: &BoundarySpec, rho: &DVector<f64>, p: &DVector<f64>) -> f64 {
    let free = boundary.free_levels(rho.len());
    if free.is_empty() {
        return 0.0;
    }
    // directions supported on the free levels, tangent to the sphere
    let mut v = DVector::zeros(rho.len());
    let mut r = DVector::zeros(rho.len());
    for &j in &free {
        v[j] = p[j];
        r[j] = rho[j];
    }
    let rn = r.norm_squared();
    if rn > 0.0 {
        v -= &r * (v.dot(&r) / rn);
    }
    v.norm() / p.norm().max(1.0)
}

/// Residuals of a lift along a real pair.
pub fn pmp_residual(
    sys: &LevelSystem,
    spec: &CostSpec,
    pair: &AdmissiblePair,
    lift: &PmpLift,
    source: &BoundarySpec,
    target: &BoundarySpec,
) -> Result<PmpReport> {
    let (red, x) = real_pair_parts(sys, pair)?;
    if lift.costate.len() != red.grid.nodes() || lift.n() != sys.n {
        return Err(Error::DimensionMismatch(format!(
            "lift has {} covectors of size {}, pair has {} nodes of size {}",
            lift.costate.len(),
            lift.n(),
            red.grid.nodes(),
            sys.n
        )));
    }
    let mu = spec.edge_weights(&pair.control)?;
    let bounds = edge_bounds(sys, &red);
    let sweep = red.forward(&x);
    let p_scale = lift.costate.iter().map(|p| p.amax()).fold(0.0, f64::max).max(1e-300);
    let mut dynamics: f64 = 0.0;
    let mut costate: f64 = 0.0;
    let mut gap: f64 = 0.0;
    let mut hs = Vec::with_capacity(red.grid.steps());
    let mut cost_terms = 0.0;
    for i in 0..red.grid.steps() {
        let rho_i = pair.trajectory.real_state(i);
        let rho_next = pair.trajectory.real_state(i + 1);
        dynamics = dynamics.max((&sweep.props[i] * &rho_i - rho_next).amax());
        costate = costate.max((&sweep.props[i] * &lift.costate[i] - &lift.costate[i + 1]).amax() / p_scale);
        let phi = red.switching(&x, i, &rho_i, &lift.costate[i + 1]);
        let terms = step_terms(lift.kind, lift.scale, lift.p0, red.step_values(&x, i), &phi, &mu, &bounds);
        gap = gap.max(terms.gap);
        hs.push(terms.hamiltonian);
        cost_terms += terms.cost_term;
    }
    let (mean, spread) = spread(&hs, cost_terms / hs.len().max(1) as f64);
    let last = red.grid.steps();
    let transversality = tangent_defect(source, &pair.trajectory.real_state(0), &lift.costate[0])
        .max(tangent_defect(target, &pair.trajectory.real_state(last), &lift.costate[last]));
    let torus_defect = lift
        .costate
        .iter()
        .zip(&pair.trajectory.states)
        .flat_map(|(p, psi)| p.iter().zip(psi.iter()).map(|(pj, z)| (Complex64::new(*pj, 0.0).conj() * Complex64::i() * z).re.abs()))
        .fold(0.0, f64::max)
        / p_scale;
    Ok(PmpReport {
        dynamics,
        costate,
        maximality_gap: gap,
        hamiltonian_mean: mean,
        hamiltonian_spread: spread,
        transversality,
        torus_defect,
        abnormal_candidate: lift.abnormal_candidate,
    })
}

/// `(mean, stdev / max(|mean|, scale))`, or the absolute stdev when both vanish.
pub(crate) fn spread(values: &[f64], scale: f64) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / values.len() as f64;
    let sd = var.sqrt();
    let size = mean.abs().max(scale);
    (mean, if size > 1e-12 { sd / size } else { sd })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{ControlGrid, TimeGrid};
    use crate::dynamics::propagate_real;

    fn zero_pair() -> (LevelSystem, AdmissiblePair) {
        let sys = LevelSystem::ladder(vec![0.0; 2]);
        let g = TimeGrid::new(1.0, 10).unwrap();
        let u = ControlGrid::real_from_fn(g, &sys, |_, _| 0.0);
        let rho = DVector::from_vec(vec![1.0, 0.0]);
        (sys.clone(), AdmissiblePair { trajectory: propagate_real(&sys, &u, &rho).unwrap(), control: u })
    }

    #[test]
    fn zero_control_has_constant_zero_hamiltonian() {
        let (sys, pair) = zero_pair();
        let spec = CostSpec::from_system(CostKind::Energy, &sys);
        let (red, x) = real_pair_parts(&sys, &pair).unwrap();
        let p = DVector::from_vec(vec![0.3, -0.7]);
        let lift = build_lift(&sys, &red, &x, &[1.0], CostKind::Energy, LiftScale::Cost, -1.0, &p);
        let b = BoundarySpec::Eigenstate { index: 0 };
        let report = pmp_residual(&sys, &spec, &pair, &lift, &b, &b).unwrap();
        assert!(lift.hamiltonian.iter().all(|h| *h == 0.0));
        assert_eq!(report.hamiltonian_spread, 0.0);
        assert_eq!(report.dynamics, 0.0);
    }

    #[test]
    fn lift_size_is_checked() {
        let (sys, pair) = zero_pair();
        let spec = CostSpec::from_system(CostKind::Energy, &sys);
        let (red, x) = real_pair_parts(&sys, &pair).unwrap();
        let mut lift = build_lift(&sys, &red, &x, &[1.0], CostKind::Energy, LiftScale::Cost, -1.0, &DVector::zeros(2));
        lift.costate.pop();
        let b = BoundarySpec::Eigenstate { index: 0 };
        assert!(matches!(pmp_residual(&sys, &spec, &pair, &lift, &b, &b), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn box_support_is_bang() {
        assert_eq!(support(CostKind::TimeMax, &[0.5, -2.0], &[1.0, 1.0], &[1.0, 1.0]), 2.5);
        assert_eq!(support(CostKind::Area, &[0.5, -2.0], &[1.0, 1.0], &[1.0, 1.0]), 2.0);
        assert_eq!(support(CostKind::Area, &[0.5, -2.0], &[1.0, 1.0], &[1.0, 0.25]), 0.25 * 2.0 + 0.75 * 0.5);
    }
}
