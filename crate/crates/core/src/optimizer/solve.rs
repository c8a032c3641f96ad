//! Direct-transcription solver for the reduced real problem.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::BoundarySpec;
use crate::control::{ControlGrid, TimeGrid};
use crate::costs::{evaluate_cost, CostKind, CostSpec};
use crate::dynamics::{propagate_real, AdmissiblePair};
use crate::error::{Error, Result};
use crate::optimizer::minimize::{lbfgs, project_box, project_l1_box, spg, InnerOptions, InnerResult};
use crate::optimizer::pmp::{build_lift, LiftScale, PmpLift};
use crate::optimizer::transcription::{EndpointConstraints, Objective, PenaltyState, Reduced};
use crate::system::LevelSystem;

/// Environment variable capping the number of solver threads.
/// Cap on the penalty weight; past it the inner problems stop being solvable to tolerance.
const MAX_WEIGHT: f64 = 1e8;

pub const THREADS_ENV: &str = "QOC_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveOptions {
    /// Grid of the fixed-time problem; for minimum-time problems its final
    /// time is the first guess of the bisection and its step count is kept.
    #[serde(skip)]
    pub grid: TimeGrid,
    /// Inner iterations per penalty round.
    pub max_iterations: usize,
    /// Tolerance on the gradient divided by the step length.
    pub gradient_tol: f64,
    /// Tolerance on `| |rho_j(T)| - sqrt(a_j) |`.
    pub endpoint_tol: f64,
    pub penalty_initial: f64,
    pub penalty_growth: f64,
    pub max_rounds: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Relative width at which the bisection on the final time stops.
    pub time_tol: f64,
    /// Worker threads for the restarts; `None` reads `QOC_THREADS`.
    pub threads: Option<usize>,
}

impl SolveOptions {
    pub fn new(grid: TimeGrid) -> Self {
        SolveOptions {
            grid,
            max_iterations: 3000,
            gradient_tol: 1e-6,
            endpoint_tol: 1e-9,
            penalty_initial: 100.0,
            penalty_growth: 10.0,
            max_rounds: 30,
            restarts: 8,
            seed: 0,
            time_tol: 1e-6,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.gradient_tol, self.endpoint_tol, self.penalty_initial, self.time_tol];
        if positive.iter().any(|v| !(*v > 0.0)) || !(self.penalty_growth > 1.0) || self.restarts == 0 {
            return Err(Error::InvalidCost("solver tolerances and penalty parameters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveDiagnostics {
    pub endpoint_violation: f64,
    /// Gradient sup-norm over the step length at the returned iterate.
    pub gradient_norm: f64,
    pub rounds: usize,
    pub restart: usize,
    pub restarts: usize,
    /// Minimal final time found by bisection, for area and time-max costs.
    pub minimal_time: Option<f64>,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub pair: AdmissiblePair,
    pub lift: PmpLift,
    pub cost: f64,
    pub converged: bool,
    pub diagnostics: SolveDiagnostics,
}

pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n: &usize| n > 0)
}

fn run_parallel<T: Send>(threads: Option<usize>, count: usize, job: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    let threads = threads.or_else(threads_from_env);
    match threads.map(|t| rayon::ThreadPoolBuilder::new().num_threads(t).build()) {
        Some(Ok(pool)) => pool.install(|| (0..count).into_par_iter().map(&job).collect()),
        _ => (0..count).into_par_iter().map(&job).collect(),
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    restart: usize,
    x: Vec<f64>,
    cost: f64,
    violation: f64,
    gradient_norm: f64,
    rounds: usize,
    converged: bool,
    penalty: PenaltyState,
    /// Constraints as oriented for the final inner solve.
    cons: EndpointConstraints,
}

/// Feasible first, then lowest cost, then smallest violation, then index.
fn better(a: &Candidate, b: &Candidate) -> bool {
    if a.converged != b.converged {
        return a.converged;
    }
    let key = |c: &Candidate| if c.converged { (c.cost, c.violation) } else { (c.violation, c.cost) };
    match key(a).partial_cmp(&key(b)) {
        Some(std::cmp::Ordering::Less) => true,
        Some(std::cmp::Ordering::Greater) => false,
        _ => a.restart < b.restart,
    }
}

fn pick(cands: Vec<Candidate>) -> Candidate {
    let mut it = cands.into_iter();
    let mut best = it.next().expect("at least one restart");
    for c in it {
        if better(&c, &best) {
            best = c;
        }
    }
    best
}

fn random_start(restart: usize, seed: u64, len: usize, amplitude: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(restart as u64 + 1)));
    (0..len).map(|_| rng.gen_range(-amplitude..amplitude)).collect()
}

struct Setup<'a> {
    sys: &'a LevelSystem,
    spec: &'a CostSpec,
    source: &'a BoundarySpec,
    target: &'a BoundarySpec,
    rho0: DVector<f64>,
    mu: Vec<f64>,
    bounds: Vec<f64>,
    cons: EndpointConstraints,
    opts: SolveOptions,
}

pub fn solve_reduced(
    sys: &LevelSystem,
    spec: &CostSpec,
    source: &BoundarySpec,
    target: &BoundarySpec,
    opts: &SolveOptions,
) -> Result<SolveOutcome> {
    sys.validate().into_result()?;
    if !sys.is_controllable() {
        return Err(Error::NotControllable { components: sys.connected_components().len() });
    }
    spec.validate()?;
    opts.validate()?;
    source.validate(sys.n)?;
    target.validate(sys.n)?;
    let rho0 = source
        .point(sys.n)
        .ok_or_else(|| Error::InvalidBoundary("the reduced solver needs a point source (moduli-point or eigenstate)".into()))?;
    let mu: Vec<f64> = sys.edges.iter().map(|e| spec.weight(e.j, e.k)).collect::<Result<_>>()?;
    let bounds: Vec<f64> = sys.edges.iter().map(|e| e.bound).collect();
    let setup = Setup {
        sys,
        spec,
        source,
        target,
        rho0,
        mu,
        bounds,
        cons: EndpointConstraints::new(target, sys.n),
        opts: *opts,
    };
    if setup.cons.violation(&setup.rho0) <= opts.endpoint_tol {
        return setup.stay_put();
    }
    match spec.kind {
        CostKind::Energy | CostKind::Length => setup.solve_energy(),
        CostKind::Area | CostKind::TimeMax => setup.solve_minimum_time(),
    }
}

impl Setup<'_> {
    fn reduced(&self, grid: TimeGrid) -> Reduced {
        Reduced::new(self.sys, grid, self.rho0.clone())
    }

    fn finish(&self, red: &Reduced, x: &[f64], lift: PmpLift, converged: bool, diagnostics: SolveDiagnostics) -> Result<SolveOutcome> {
        let control = red.control_grid(self.sys, x);
        let trajectory = propagate_real(self.sys, &control, &self.rho0)?;
        let pair = AdmissiblePair { trajectory, control };
        let cost = evaluate_cost(self.spec, &pair.control)?;
        Ok(SolveOutcome { pair, lift, cost, converged, diagnostics })
    }

    fn stay_put(&self) -> Result<SolveOutcome> {
        let red = self.reduced(self.opts.grid);
        let x = vec![0.0; red.n_vars()];
        let scale = match self.spec.kind {
            CostKind::Area | CostKind::TimeMax => LiftScale::MinimumTime { control_scale: 1.0 },
            _ => LiftScale::Cost,
        };
        let lift = build_lift(self.sys, &red, &x, &self.mu, self.spec.kind, scale, -1.0, &DVector::zeros(self.sys.n));
        let diagnostics = SolveDiagnostics {
            endpoint_violation: self.cons.violation(&self.rho0),
            gradient_norm: 0.0,
            rounds: 0,
            restart: 0,
            restarts: 0,
            minimal_time: self.spec.kind.is_homogeneous().then_some(0.0),
            message: "source already satisfies the target".into(),
        };
        self.finish(&red, &x, lift, true, diagnostics)
    }

    fn inner(&self, obj: &Objective, penalty: &PenaltyState, x: Vec<f64>, bounded: bool) -> InnerResult {
        let dt = obj.red.grid.dt();
        let io = InnerOptions { max_iterations: self.opts.max_iterations, gradient_tol: self.opts.gradient_tol * dt, value_target: f64::NEG_INFINITY };
        let f = |x: &[f64]| obj.eval(penalty, x);
        if bounded {
            let b = self.bounds.clone();
            spg(f, move |x| project_box(x, &b), x, io)
        } else {
            lbfgs(f, x, io)
        }
    }

    /// Augmented-Lagrangian rounds from one starting point.
    fn energy_run(&self, red: &Reduced, restart: usize, x0: Vec<f64>) -> Candidate {
        let bounded = self.bounds.iter().any(|b| b.is_finite());
        let dt = red.grid.dt();
        let mut penalty = PenaltyState::new(self.target.clone(), self.sys.n, self.opts.penalty_initial);
        let mut x = x0;
        let mut cons = self.cons.oriented(red.forward(&x).states.last().expect("nonempty"));
        let mut previous = f64::INFINITY;
        let mut cand = None;
        for round in 0..self.opts.max_rounds {
            let obj = Objective { red, kind: Some(CostKind::Energy), mu: &self.mu, cons: &cons };
            let res = self.inner(&obj, &penalty, x, bounded);
            x = res.x;
            let last = red.forward(&x).states.pop().expect("nonempty");
            let c = cons.values(&last);
            let violation = cons.violation(&last);
            let gradient_norm = res.gradient_norm / dt;
            let converged = violation <= self.opts.endpoint_tol && gradient_norm <= self.opts.gradient_tol;
            cand = Some((round + 1, violation, gradient_norm, converged, penalty.clone(), cons.clone()));
            if converged {
                break;
            }
            let size = c.iter().map(|v| v.abs()).fold(0.0, f64::max);
            for (l, cj) in penalty.multipliers.iter_mut().zip(&c) {
                *l += penalty.weight * cj;
            }
            if size > 0.25 * previous {
                penalty.weight = (penalty.weight * self.opts.penalty_growth).min(MAX_WEIGHT);
            }
            previous = size;
            cons = cons.oriented(&last);
        }
        let (rounds, violation, gradient_norm, converged, penalty, cons) = cand.expect("at least one round");
        let cost = (0..red.grid.steps())
            .map(|i| dt * CostKind::Energy.integrand(red.step_values(&x, i).iter().zip(&self.mu).map(|(u, m)| (u / m).abs())))
            .sum();
        Candidate { restart, x, cost, violation, gradient_norm, rounds, converged, penalty, cons }
    }

    fn solve_energy(&self) -> Result<SolveOutcome> {
        let grid = self.opts.grid;
        let red = self.reduced(grid);
        let amplitude = (std::f64::consts::PI / grid.t_final()).min(self.bounds.iter().cloned().fold(f64::INFINITY, f64::min));
        let cands = run_parallel(self.opts.threads, self.opts.restarts, |r| {
            let x0 = if r == 0 { vec![0.0; red.n_vars()] } else { random_start(r, self.opts.seed, red.n_vars(), amplitude) };
            self.energy_run(&red, r, x0)
        });
        let best = pick(cands);

        // normal lift from the converged multipliers, P = -g, p0 = -1
        let sweep = red.forward(&best.x);
        let last = &sweep.states[grid.steps()];
        let c = best.cons.values(last);
        let weights: Vec<f64> = best.penalty.multipliers.iter().zip(&c).map(|(l, c)| l + best.penalty.weight * c).collect();
        let (_, costate) = red.backward(&best.x, &sweep, best.cons.pullback(last, &weights));
        let mut p_start = -&costate[0];
        if self.spec.kind == CostKind::Length {
            // rescale to the length normalization |mu phi| = 1
            let speed = (best.cost / grid.t_final()).sqrt();
            if speed > 0.0 {
                p_start /= 2.0 * speed;
            }
        }
        let lift = build_lift(self.sys, &red, &best.x, &self.mu, self.spec.kind, LiftScale::Cost, -1.0, &p_start);
        let diagnostics = SolveDiagnostics {
            endpoint_violation: best.violation,
            gradient_norm: best.gradient_norm,
            rounds: best.rounds,
            restart: best.restart,
            restarts: self.opts.restarts,
            minimal_time: None,
            message: if best.converged { "converged".into() } else { "no restart met the tolerances; best iterate returned".into() },
        };
        self.finish(&red, &best.x, lift, best.converged, diagnostics)
    }

    /// Unit constraint set in the scaled variables `w = u / mu`.
    fn unit_bounds(&self) -> Vec<f64> {
        self.bounds
            .iter()
            .zip(&self.mu)
            .map(|(b, m)| match self.spec.kind {
                CostKind::TimeMax => (b / m).min(1.0),
                _ => b / m,
            })
            .collect()
    }

    /// Least endpoint residual reachable in time `t` with unit-rate controls.
    fn feasibility(&self, t: f64, warm: Option<&[f64]>) -> Result<Candidate> {
        let grid = TimeGrid::new(t, self.opts.grid.steps())?;
        let red = self.reduced(grid);
        let ub = self.unit_bounds();
        let kind = self.spec.kind;
        let project = |w: &mut [f64]| match kind {
            CostKind::Area => project_l1_box(w, &ub),
            _ => project_box(w, &ub),
        };
        let penalty = PenaltyState::new(self.target.clone(), self.sys.n, 1.0);
        let m = red.n_edges();
        let to_u = |w: &[f64]| -> Vec<f64> { w.iter().enumerate().map(|(i, w)| w * self.mu[i % m]).collect() };
        let restarts = self.opts.restarts;
        let tol = self.opts.endpoint_tol;
        let attempt = |r: usize| {
            let mut w = match (r, warm) {
                (0, Some(w)) => w.to_vec(),
                _ => random_start(r, self.opts.seed, red.n_vars(), 1.0),
            };
            let mut cons = self.cons.oriented(red.forward(&to_u(&w)).states.last().expect("nonempty"));
            let io = InnerOptions { max_iterations: self.opts.max_iterations, gradient_tol: 1e-14, value_target: 0.5 * (0.1 * tol).powi(2) };
            let mut iterations = 0;
            let mut gradient_norm = 0.0;
            // re-solve while the endpoint settles on other signs
            for _ in 0..3 {
                let obj = Objective { red: &red, kind: None, mu: &self.mu, cons: &cons };
                let eval = |w: &[f64]| {
                    let (f, g) = obj.eval(&penalty, &to_u(w));
                    (f, g.iter().enumerate().map(|(i, g)| g * self.mu[i % m]).collect::<Vec<_>>())
                };
                let res = spg(eval, project, w, io);
                w = res.x;
                iterations += res.iterations;
                gradient_norm = res.gradient_norm;
                let next = cons.oriented(red.forward(&to_u(&w)).states.last().expect("nonempty"));
                if next.signs == cons.signs {
                    break;
                }
                cons = next;
            }
            let last = red.forward(&to_u(&w)).states.pop().expect("nonempty");
            let violation = cons.violation(&last);
            Candidate {
                restart: r,
                x: w,
                cost: t,
                violation,
                gradient_norm,
                rounds: iterations,
                converged: violation <= tol,
                penalty: penalty.clone(),
                cons,
            }
        };
        // Restarts run in order, in batches of the pool width. The cut is
        // decided on the ordered prefix so the result is independent of
        // the batch size: stop at the first feasible restart, or once three
        // restarts agree on the least residual.
        let settled = |prefix: &[Candidate]| -> Option<usize> {
            let mut least = f64::INFINITY;
            for (i, c) in prefix.iter().enumerate() {
                if c.converged {
                    return Some(i + 1);
                }
                least = least.min(c.violation);
                let agree = prefix[..=i].iter().filter(|d| d.violation <= least * (1.0 + 1e-6) + 1e-15).count();
                if agree >= 3 {
                    return Some(i + 1);
                }
            }
            None
        };
        let width = self.opts.threads.or_else(threads_from_env).unwrap_or_else(rayon::current_num_threads).max(1);
        let mut cands: Vec<Candidate> = Vec::with_capacity(restarts);
        while cands.len() < restarts {
            let start = cands.len();
            let count = width.min(restarts - start);
            cands.extend(run_parallel(self.opts.threads, count, |r| attempt(start + r)));
            if let Some(cut) = settled(&cands) {
                cands.truncate(cut);
                break;
            }
        }
        Ok(pick(cands))
    }

    fn solve_minimum_time(&self) -> Result<SolveOutcome> {
        let mut hi = self.opts.grid.t_final();
        let mut lo = 0.0;
        let mut feasible = None;
        let mut infeasible: Option<(f64, Candidate)> = None;
        for _ in 0..16 {
            let c = self.feasibility(hi, None)?;
            if c.converged {
                feasible = Some(c);
                break;
            }
            lo = hi;
            infeasible = Some((hi, c));
            hi *= 2.0;
        }
        let Some(mut best) = feasible else {
            return Err(Error::NoConvergence(format!("target not reached within final time {hi}")));
        };
        // Bisection, accelerated by extrapolating the residual of the last
        // two infeasible times; the residual falls off linearly in t.
        let mut below: Vec<(f64, f64)> = infeasible.iter().map(|(t, c)| (*t, c.violation)).collect();
        let mut width = hi - lo;
        let mut shrank = true;
        while hi - lo > self.opts.time_tol * hi {
            let delta = 0.4 * self.opts.time_tol * hi;
            let mut trial = 0.5 * (lo + hi);
            if shrank && below.len() >= 2 {
                let (t1, v1) = below[below.len() - 2];
                let (t2, v2) = below[below.len() - 1];
                if v1 > v2 && t2 > t1 {
                    let est = t2 + v2 * (t2 - t1) / (v1 - v2);
                    if est + delta < hi && est + delta > lo {
                        trial = est + delta;
                    } else if est - delta > lo && est - delta < hi {
                        trial = est - delta;
                    }
                }
            }
            let c = self.feasibility(trial, Some(&best.x))?;
            if c.converged {
                hi = trial;
                best = c;
            } else {
                lo = trial;
                below.push((trial, c.violation));
                infeasible = Some((trial, c));
            }
            shrank = hi - lo <= 0.5 * width;
            width = hi - lo;
        }
        let t_min = hi;
        let m = self.sys.edges.len();
        let unit_u: Vec<f64> = best.x.iter().enumerate().map(|(i, w)| w * self.mu[i % m]).collect();

        // controls on the requested horizon
        let (grid, x, control_scale) = match self.spec.final_time {
            crate::costs::FinalTime::Free => (TimeGrid::new(t_min, self.opts.grid.steps())?, unit_u.clone(), 1.0),
            crate::costs::FinalTime::Fixed => {
                let t = self.opts.grid.t_final();
                let k = t_min / t;
                let scaled: Vec<f64> = unit_u.iter().map(|u| u * k).collect();
                let over = scaled.iter().enumerate().any(|(i, u)| u.abs() > self.bounds[i % m] * (1.0 + 1e-12));
                if over {
                    return Err(Error::NoConvergence(format!(
                        "requested final time {t} is below the minimal time {t_min} allowed by the control bounds"
                    )));
                }
                (self.opts.grid, scaled, k)
            }
        };
        let red = self.reduced(grid);

        // covector direction from the residual minimizer just below the minimal time
        let p_start = match &infeasible {
            Some((t_lo, c)) => {
                let red_lo = self.reduced(TimeGrid::new(*t_lo, self.opts.grid.steps())?);
                let u_lo: Vec<f64> = c.x.iter().enumerate().map(|(i, w)| w * self.mu[i % m]).collect();
                let sweep = red_lo.forward(&u_lo);
                let last = &sweep.states[red_lo.grid.steps()];
                let cv = c.cons.values(last);
                let (_, costate) = red_lo.backward(&u_lo, &sweep, c.cons.pullback(last, &cv));
                -&costate[0]
            }
            None => DVector::zeros(self.sys.n),
        };
        let scale = LiftScale::MinimumTime { control_scale };
        let mut lift = build_lift(self.sys, &red, &x, &self.mu, self.spec.kind, scale, 0.0, &p_start);
        // normalize <P, U rho> to one on average so that H = <P, U rho> - 1
        let mean = lift.hamiltonian.iter().sum::<f64>() / lift.hamiltonian.len().max(1) as f64;
        if mean.abs() > 1e-300 {
            lift = build_lift(self.sys, &red, &x, &self.mu, self.spec.kind, scale, -1.0, &(p_start / mean));
        }
        let diagnostics = SolveDiagnostics {
            endpoint_violation: best.violation,
            gradient_norm: best.gradient_norm,
            rounds: best.rounds,
            restart: best.restart,
            restarts: self.opts.restarts,
            minimal_time: Some(t_min),
            message: format!("minimal time bracketed in [{lo}, {hi}]"),
        };
        let _ = self.source;
        self.finish(&red, &x, lift, true, diagnostics)
    }
}

/// Convenience: a real control grid on a fresh grid, for callers building
/// warm starts.
pub fn zero_real_control(sys: &LevelSystem, grid: TimeGrid) -> ControlGrid {
    ControlGrid::real_from_fn(grid, sys, |_, _| 0.0)
}
