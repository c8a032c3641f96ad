use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use crate::boundary::BoundarySpec;
use crate::control::{ControlGrid, Flavor, TimeGrid};
use crate::costs::{constant_speed_residual, evaluate_cost, CostKind, CostSpec};
use crate::dynamics::{eliminate_drift, propagate_drift, propagate_driftless, propagate_real, AdmissiblePair, StateTrajectory};
use crate::error::{Error, Result};
use crate::io::eigenstate;
use crate::linalg::CVector;
use crate::optimizer::{
    adjoint_gradient, classify_extremal, clean_windows, distribution_rank, partition_indexes, penalized_objective, pmp_residual,
    spanning_tree_ranks, PenaltyState,
};
use crate::resonance::{classify_resonance, decompose_intervals, resonance_transform, rot_alpha, uv_decompose, ResonanceStatus, TransformOptions, DEFAULT_EPSILON};
use crate::system::{lie_rank_oracle, Edge, LevelSystem};
use crate::verify::pool::{self, Case};
use crate::verify::random::{connected_system, real_unit_on, smooth_control, stream, unit_state};
use crate::verify::{Fixtures, Measurement, Relation};

/// Residual bound on the extended lift of a window.
const LIFT_TOL: f64 = 1e-4;

pub(crate) struct Context {
    pub seed: u64,
    pub fixtures: Fixtures,
    pool: OnceLock<Vec<Case>>,
}

impl Context {
    pub fn new(seed: u64, fixtures: Fixtures) -> Self {
        Context { seed, fixtures, pool: OnceLock::new() }
    }

    pub fn pool(&self) -> &[Case] {
        self.pool.get_or_init(|| pool::solve_all(&self.fixtures, self.seed))
    }
}

#[derive(Default)]
pub(crate) struct Found {
    pub measurements: Vec<Measurement>,
    pub detail: String,
}

impl Found {
    fn push(&mut self, m: Measurement) {
        self.measurements.push(m);
    }

    fn note(&mut self, text: impl AsRef<str>) {
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        self.detail.push_str(text.as_ref());
    }
}

pub(crate) fn check(id: u8, ctx: &Context) -> Result<Found> {
    match id {
        1 => controllability(ctx),
        2 => drift_elimination(ctx),
        3 => resonance_construction(ctx),
        4 => rotation_isometry(ctx),
        5 => counterexample(ctx),
        6 => oracles(ctx),
        7 => gradient_check(ctx),
        8 => pmp_consistency(ctx),
        9 => window_machinery(ctx),
        10 => minimizer_resonance(ctx),
        _ => Err(Error::Parse { context: "criterion".into(), detail: format!("no criterion {id}") }),
    }
}

fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|j| (j + 1..n).map(move |k| (j, k))).collect()
}

fn controllability(ctx: &Context) -> Result<Found> {
    let start = Instant::now();
    let mut rng = stream(ctx.seed, 1);
    let mut found = Found::default();
    let (mut graphs, mut disagreements) = (0, 0);
    for n in 2..=4 {
        let pairs = all_pairs(n);
        for mask in 0..1u32 << pairs.len() {
            let edges = pairs
                .iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .map(|(_, &(j, k))| Edge::new(j, k, rng.gen_range(0.5..2.0)))
                .collect();
            let sys = LevelSystem::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(), edges);
            let oracle = lie_rank_oracle(&sys)?;
            graphs += 1;
            if oracle.transitive != sys.is_controllable() {
                disagreements += 1;
                found.note(format!("n={n} mask {mask:b}: graph says {}, oracle {}", sys.is_controllable(), oracle.transitive));
            }
        }
    }
    found.push(Measurement::count("disagreements", disagreements));
    found.push(Measurement::new("seconds", start.elapsed().as_secs_f64(), Relation::Below, 30.0));
    found.note(format!("{graphs} graphs"));
    Ok(found)
}

fn drift_elimination(ctx: &Context) -> Result<Found> {
    let mut rng = stream(ctx.seed, 2);
    let mut found = Found::default();
    let (mut worst, mut fewest) = (0.0_f64, usize::MAX);
    for _ in 0..100 {
        let n = rng.gen_range(2..=4);
        let sys = connected_system(&mut rng, n, 0.4, 1.5);
        let t = rng.gen_range(0.5..1.5);
        let gap = sys.edges.iter().map(|e| (sys.energies[e.j] - sys.energies[e.k]).abs()).fold(0.0, f64::max);
        // the midpoint sampling of the frame phase is second order in the step
        let grid = TimeGrid::resolving(t, gap + 1.4, 4e-4, 200)?;
        let v = smooth_control(&mut rng, &sys, grid, Flavor::HermitianV, 1.0);
        let psi0 = unit_state(&mut rng, n);
        let drifted = propagate_drift(&sys, &v, &psi0)?;
        let h = eliminate_drift(&sys, &v)?;
        let driftless = propagate_driftless(&sys, &h, &psi0)?;
        worst = worst.max(drifted.max_moduli_deviation(&driftless));
        fewest = fewest.min(grid.steps());
    }
    found.push(Measurement::at_most("max-modulus-deviation", worst, 1e-8));
    found.push(Measurement::new("min-steps", fewest as f64, Relation::AtLeast, 200.0));
    Ok(found)
}

/// A random driftless pair on a connected graph; every fourth start state
/// has vanishing levels.
fn random_skew_pair(rng: &mut impl Rng, index: usize) -> Result<(LevelSystem, AdmissiblePair)> {
    let n = rng.gen_range(2..=4);
    let sys = connected_system(rng, n, 0.4, 0.0);
    let grid = TimeGrid::new(rng.gen_range(0.5..1.5), 200)?;
    let h = smooth_control(rng, &sys, grid, Flavor::SkewH, 1.5);
    let mut psi0 = unit_state(rng, n);
    if index % 4 == 0 {
        let keep = rng.gen_range(0..n);
        psi0 = eigenstate(n, keep) * Complex64::from_polar(1.0, rng.gen_range(0.0..6.0));
    }
    let pair = AdmissiblePair::from_control(&sys, h, &psi0)?;
    Ok((sys, pair))
}

fn populations_deviation(a: &StateTrajectory, b: &StateTrajectory) -> f64 {
    a.states
        .iter()
        .zip(&b.states)
        .flat_map(|(x, y)| x.iter().zip(y.iter()).map(|(p, q)| (p.norm_sqr() - q.norm_sqr()).abs()))
        .fold(0.0, f64::max)
}

/// Largest angle (mod pi) between a level's phase and its phase at the
/// node where it is largest, over nodes where the level exceeds `epsilon`.
fn phase_variation(traj: &StateTrajectory, epsilon: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..traj.n() {
        let Some(reference) = traj.states.iter().map(|s| s[j]).max_by(|a, b| a.norm().total_cmp(&b.norm())) else {
            continue;
        };
        if reference.norm() <= epsilon {
            continue;
        }
        let rot = Complex64::from_polar(1.0, -reference.arg());
        for s in &traj.states {
            let z = s[j];
            if z.norm() > epsilon {
                worst = worst.max(((z * rot).im / z.norm()).clamp(-1.0, 1.0).asin().abs());
            }
        }
    }
    worst
}

fn costs(sys: &LevelSystem, ctrl: &ControlGrid) -> Result<Vec<f64>> {
    CostKind::ALL.iter().map(|&k| evaluate_cost(&CostSpec::from_system(k, sys), ctrl)).collect()
}

fn resonance_construction(ctx: &Context) -> Result<Found> {
    let mut rng = stream(ctx.seed, 3);
    let mut found = Found::default();
    let eps = DEFAULT_EPSILON;
    let (mut pop, mut phase, mut not_resonant, mut cost_up, mut failed) = (0.0_f64, 0.0_f64, 0, 0, 0);
    let (mut least_gain, mut with_v) = (f64::INFINITY, 0);
    for index in 0..100 {
        let (sys, pair) = random_skew_pair(&mut rng, index)?;
        let out = match resonance_transform(&sys, &pair, TransformOptions { epsilon: eps, tol: 1e-8 }) {
            Ok(out) => out,
            Err(e) => {
                failed += 1;
                found.note(format!("instance {index}: {e}"));
                continue;
            }
        };
        let again = propagate_driftless(&sys, &out.pair.control, out.pair.trajectory.initial())?;
        pop = pop.max(populations_deviation(&again, &pair.trajectory));
        phase = phase.max(phase_variation(&again, eps));
        let verdict = classify_resonance(&sys, &out.pair, eps, 1e-6)?;
        if verdict.status != ResonanceStatus::Resonant {
            not_resonant += 1;
            found.note(format!("instance {index}: output classified {}", verdict.status));
        }
        let before = costs(&sys, &pair.control)?;
        let after = costs(&sys, &out.pair.control)?;
        for ((kind, b), a) in CostKind::ALL.iter().zip(&before).zip(&after) {
            if *a > b * (1.0 + 1e-12) {
                cost_up += 1;
                found.note(format!("instance {index}: {kind} cost rose from {b} to {a}"));
            }
        }
        let dec = decompose_intervals(&sys, &pair.trajectory, eps);
        let v2 = uv_decompose(&sys, &pair, &dec)?.integrated_v_squared(pair.control.grid.dt());
        if v2 > 1e-6 {
            with_v += 1;
            least_gain = least_gain.min(before[0] - after[0]);
        }
    }
    found.push(Measurement::count("transform-failures", failed));
    found.push(Measurement::at_most("population-deviation", pop, 1e-8));
    found.push(Measurement::at_most("phase-variation-rad", phase, 1e-6));
    found.push(Measurement::count("not-resonant", not_resonant));
    found.push(Measurement::count("cost-increases", cost_up));
    found.push(Measurement::new("least-energy-gain", least_gain, Relation::Above, 1e-8));
    found.note(format!("{with_v} of 100 inputs carry v"));
    Ok(found)
}

fn rotation_isometry(ctx: &Context) -> Result<Found> {
    let mut rng = stream(ctx.seed, 4);
    let mut found = Found::default();
    let (mut cost_gap, mut residual, mut state_gap) = (0.0_f64, 0.0_f64, 0.0_f64);
    for index in 0..100 {
        let (sys, pair) = random_skew_pair(&mut rng, index)?;
        let alpha: Vec<f64> = (0..sys.n).map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)).collect();
        let rotated = rot_alpha(&sys, &pair, &alpha)?;
        for (a, b) in costs(&sys, &pair.control)?.iter().zip(costs(&sys, &rotated.control)?) {
            cost_gap = cost_gap.max((a - b).abs());
        }
        let again = propagate_driftless(&sys, &rotated.control, rotated.trajectory.initial())?;
        residual = residual.max(again.max_state_deviation(&rotated.trajectory));
        let phases = CVector::from_iterator(sys.n, alpha.iter().map(|&a| Complex64::from_polar(1.0, a)));
        for (r, s) in rotated.trajectory.states.iter().zip(&pair.trajectory.states) {
            state_gap = state_gap.max((r - s.component_mul(&phases)).iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
    }
    found.push(Measurement::at_most("cost-difference", cost_gap, 1e-12));
    found.push(Measurement::at_most("admissibility-residual", residual, 1e-10));
    found.push(Measurement::at_most("state-rotation-mismatch", state_gap, 1e-10));
    Ok(found)
}

fn counterexample(ctx: &Context) -> Result<Found> {
    let mut found = Found::default();
    let f = &ctx.fixtures;
    let sys = f.system("counterexample_system.json")?;
    let psi0 = eigenstate(sys.n, 0);
    let mut worst: f64 = 0.0;
    let mut verdicts = Vec::new();
    for name in ["counterexample_a.json", "counterexample_b.json"] {
        let pair = AdmissiblePair::from_control(&sys, f.control(name, &sys)?, &psi0)?;
        for (i, s) in pair.trajectory.states.iter().enumerate() {
            let t = pair.control.grid.node(i);
            let expected = [t.cos(), t.sin(), 0.0, 0.0];
            for (z, e) in s.iter().zip(expected) {
                worst = worst.max((z - Complex64::new(e, 0.0)).norm());
            }
        }
        verdicts.push(classify_resonance(&sys, &pair, DEFAULT_EPSILON, 1e-9)?.status);
    }
    found.push(Measurement::at_most("trajectory-deviation", worst, 1e-10));
    found.push(Measurement::count("pair-a-not-resonant", usize::from(verdicts[0] != ResonanceStatus::Resonant)));
    found.push(Measurement::count("pair-b-not-neither", usize::from(verdicts[1] != ResonanceStatus::Neither)));
    found.note(format!("pair a {}, pair b {}", verdicts[0], verdicts[1]));
    Ok(found)
}

fn case<'a>(ctx: &'a Context, name: &str) -> Option<&'a Case> {
    ctx.pool().iter().find(|c| c.name == name)
}

fn oracles(ctx: &Context) -> Result<Found> {
    let mut found = Found::default();
    let oracle = ctx.fixtures.oracles()?;
    let energy = case(ctx, "two-level energy").expect("pool case");
    let time = case(ctx, "two-level minimum time").expect("pool case");
    let cost_error = match energy.converged() {
        Some(o) => (o.cost - oracle.energy_cost).abs(),
        None => f64::NAN,
    };
    let time_error = match time.converged().and_then(|o| o.diagnostics.minimal_time) {
        Some(t) => (t - oracle.minimal_time).abs(),
        None => f64::NAN,
    };
    for c in [energy, time] {
        if let Some(why) = c.failure() {
            found.note(why);
        }
    }
    found.push(Measurement::at_most("energy-cost-error", cost_error, 1e-3));
    found.push(Measurement::new("energy-seconds", energy.seconds, Relation::Below, 10.0));
    found.push(Measurement::at_most("minimal-time-error", time_error, 1e-3));
    found.push(Measurement::new("minimal-time-seconds", time.seconds, Relation::Below, 10.0));
    Ok(found)
}

fn gradient_check(ctx: &Context) -> Result<Found> {
    let mut rng = stream(ctx.seed, 7);
    let mut found = Found::default();
    let mut worst: f64 = 0.0;
    let h = 1e-6;
    for index in 0..20 {
        let n = rng.gen_range(2..=4);
        let sys = connected_system(&mut rng, n, 0.4, 0.0);
        let grid = TimeGrid::new(rng.gen_range(0.5..1.5), 16)?;
        let u = smooth_control(&mut rng, &sys, grid, Flavor::RealU, 1.5);
        let levels: Vec<usize> = (0..n).collect();
        let rho0 = real_unit_on(&mut rng, n, &levels);
        let pair = AdmissiblePair { trajectory: propagate_real(&sys, &u, &rho0)?, control: u };
        let kind = CostKind::ALL[index % 4];
        let spec = CostSpec::from_system(kind, &sys);
        let target = if index % 2 == 0 {
            BoundarySpec::Eigenstate { index: rng.gen_range(0..n) }
        } else {
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
            let total: f64 = w.iter().sum();
            BoundarySpec::ModuliPoint { moduli: w.iter().map(|x| x / total).collect() }
        };
        let mut penalty = PenaltyState::new(target, n, rng.gen_range(1.0..10.0));
        for l in penalty.multipliers.iter_mut() {
            *l = rng.gen_range(-1.0..1.0);
        }
        let g = adjoint_gradient(&sys, &spec, &pair, &penalty)?;
        let bumped = |i: usize, e: usize, d: f64| -> Result<f64> {
            let mut c = pair.control.clone();
            c.values[i][e].re += d;
            let p = AdmissiblePair { trajectory: propagate_real(&sys, &c, &rho0)?, control: c };
            penalized_objective(&sys, &spec, &p, &penalty)
        };
        let (mut diff, mut scale) = (0.0_f64, 0.0_f64);
        for (i, row) in g.iter().enumerate() {
            for (e, gi) in row.iter().enumerate() {
                let fd = (bumped(i, e, h)? - bumped(i, e, -h)?) / (2.0 * h);
                diff = diff.max((gi - fd).abs());
                scale = scale.max(fd.abs());
            }
        }
        let rel = diff / scale.max(1e-12);
        if rel > 1e-5 {
            found.note(format!("instance {index} ({kind}): relative error {rel:e}"));
        }
        worst = worst.max(rel);
    }
    found.push(Measurement::at_most("relative-error", worst, 1e-5));
    Ok(found)
}

fn unconverged(ctx: &Context, found: &mut Found, keep: impl Fn(&Case) -> bool) -> usize {
    let mut missing = 0;
    for c in ctx.pool().iter().filter(|c| keep(c)) {
        if let Some(why) = c.failure() {
            missing += 1;
            found.note(why);
        }
    }
    missing
}

fn pmp_consistency(ctx: &Context) -> Result<Found> {
    let mut found = Found::default();
    let (mut residual, mut spread, mut speed) = (0.0_f64, 0.0_f64, 0.0_f64);
    let missing = unconverged(ctx, &mut found, |_| true);
    for c in ctx.pool() {
        let Some(out) = c.converged() else { continue };
        let report = pmp_residual(&c.sys, &c.spec, &out.pair, &out.lift, &c.source, &c.target)?;
        residual = residual.max(report.max_residual());
        spread = spread.max(report.hamiltonian_spread);
        if c.spec.kind == CostKind::Energy {
            speed = speed.max(constant_speed_residual(&c.spec, &out.pair.control)?);
        }
        found.note(format!("{}: residual {:.1e}, spread {:.1e}", c.name, report.max_residual(), report.hamiltonian_spread));
    }
    found.push(Measurement::count("unconverged", missing));
    found.push(Measurement::at_most("max-residual", residual, 1e-4));
    found.push(Measurement::at_most("hamiltonian-spread", spread, 1e-3));
    found.push(Measurement::at_most("constant-speed-residual", speed, 1e-3));
    Ok(found)
}

/// Random real trajectory on a connected graph with `frozen` levels held at
/// zero: they start empty and every edge touching them carries no control.
fn frozen_trajectory(rng: &mut impl Rng) -> Result<(LevelSystem, StateTrajectory)> {
    let n = rng.gen_range(3..=4);
    let sys = connected_system(rng, n, 0.5, 0.0);
    let frozen: Vec<usize> = {
        let count = rng.gen_range(1..=n - 2);
        let mut levels: Vec<usize> = (0..n).collect();
        for _ in 0..n - count {
            levels.remove(rng.gen_range(0..levels.len()));
        }
        levels
    };
    let grid = TimeGrid::new(rng.gen_range(1.0..3.0), 200)?;
    let mut u = smooth_control(rng, &sys, grid, Flavor::RealU, 2.0);
    for row in u.values.iter_mut() {
        for (z, e) in row.iter_mut().zip(&sys.edges) {
            if frozen.iter().any(|&f| e.touches(f)) {
                *z = Complex64::new(0.0, 0.0);
            }
        }
    }
    let live: Vec<usize> = (0..n).filter(|j| !frozen.contains(j)).collect();
    let rho0 = real_unit_on(rng, n, &live);
    Ok((sys.clone(), propagate_real(&sys, &u, &rho0)?))
}

/// Connected components of the graph restricted to `levels`.
fn components(sys: &LevelSystem, levels: &[usize]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; sys.n];
    let mut out = Vec::new();
    for &start in levels {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut class = vec![start];
        let mut i = 0;
        while i < class.len() {
            let j = class[i];
            for e in &sys.edges {
                let other = if e.j == j { e.k } else if e.k == j { e.j } else { continue };
                if levels.contains(&other) && !seen[other] {
                    seen[other] = true;
                    class.push(other);
                }
            }
            i += 1;
        }
        class.sort_unstable();
        out.push(class);
    }
    out.sort();
    out
}

fn window_machinery(ctx: &Context) -> Result<Found> {
    let mut rng = stream(ctx.seed, 9);
    let mut found = Found::default();
    let eps = DEFAULT_EPSILON;
    let (mut drift, mut windows) = (0.0_f64, 0);
    let (mut without, mut partition_errors, mut class_mismatch, mut tree_deficits, mut rank_mismatch) = (0, 0, 0, 0, 0);
    for index in 0..50 {
        let (sys, traj) = frozen_trajectory(&mut rng)?;
        let found_windows = clean_windows(&traj, eps)?;
        if found_windows.is_empty() {
            without += 1;
        }
        for w in found_windows {
            windows += 1;
            let live: Vec<usize> = (0..sys.n).filter(|&j| traj.modulus(w.first, j) > eps).collect();
            let classes = components(&sys, &live);
            for class in &classes {
                let norms: Vec<f64> = (w.first..=w.last)
                    .map(|i| class.iter().map(|&j| traj.modulus(i, j).powi(2)).sum::<f64>().sqrt())
                    .collect();
                let spread = norms.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - norms.iter().cloned().fold(f64::INFINITY, f64::min);
                drift = drift.max(spread);
            }
            let part = match partition_indexes(&sys, &traj, w, eps) {
                Ok(p) => p,
                Err(e) => {
                    partition_errors += 1;
                    found.note(format!("trajectory {index}, window {}..{}: {e}", w.first, w.last));
                    continue;
                }
            };
            let mut theirs = part.classes.clone();
            theirs.iter_mut().for_each(|c| c.sort_unstable());
            theirs.sort();
            if theirs != classes {
                class_mismatch += 1;
            }
            let expected: usize = classes.iter().map(|c| c.len() - 1).sum();
            for node in [w.first, (w.first + w.last) / 2, w.last] {
                let rho: DVector<f64> = traj.real_state(node);
                tree_deficits += spanning_tree_ranks(&part, &rho, &sys)?.iter().filter(|(r, d)| r != d).count();
                if distribution_rank(&part, &rho, &sys)?.0 != expected {
                    rank_mismatch += 1;
                }
            }
        }
    }

    // extremal classification on the converged smooth-cost minimizers
    let smooth = |c: &Case| matches!(c.spec.kind, CostKind::Energy | CostKind::Length);
    let missing = unconverged(ctx, &mut found, smooth);
    let (mut full_rank, mut unverified) = (0, 0);
    for c in ctx.pool().iter().filter(|c| smooth(c)) {
        let Some(out) = c.converged() else { continue };
        let report = classify_extremal(&c.sys, &out.pair, &c.spec, eps)?;
        for w in report.full_rank_windows() {
            full_rank += 1;
            let lifted = w.lift.as_ref().is_some_and(|l| l.max_residual() <= LIFT_TOL);
            if !(w.verdict.rules_out_strict_abnormality() && lifted) {
                unverified += 1;
                found.note(format!("{} window {:.3}..{:.3}: {} ({})", c.name, w.t_start, w.t_end, w.verdict.name(), w.detail));
            }
        }
    }
    found.push(Measurement::count("trajectories-without-windows", without));
    found.push(Measurement::at_most("class-norm-drift", drift, 1e-8));
    found.push(Measurement::count("partition-errors", partition_errors));
    found.push(Measurement::count("class-mismatches", class_mismatch));
    found.push(Measurement::count("spanning-tree-rank-deficits", tree_deficits));
    found.push(Measurement::count("distribution-rank-mismatches", rank_mismatch));
    found.push(Measurement::count("unconverged-minimizers", missing));
    found.push(Measurement::new("full-rank-windows", full_rank as f64, Relation::AtLeast, 1.0));
    found.push(Measurement::count("unverified-windows", unverified));
    found.note(format!("{windows} random windows"));
    Ok(found)
}

fn minimizer_resonance(ctx: &Context) -> Result<Found> {
    let mut found = Found::default();
    let energy = |c: &Case| c.spec.kind == CostKind::Energy;
    let missing = unconverged(ctx, &mut found, energy);
    let (mut checked, mut neither) = (0, 0);
    for c in ctx.pool().iter().filter(|c| energy(c)) {
        let Some(out) = c.converged() else { continue };
        checked += 1;
        let verdict = classify_resonance(&c.sys, &out.pair, DEFAULT_EPSILON, 1e-4)?;
        if verdict.status == ResonanceStatus::Neither {
            neither += 1;
            found.note(format!("{} is neither resonant nor weakly resonant", c.name));
        }
    }
    found.push(Measurement::count("unconverged", missing));
    found.push(Measurement::new("solutions-checked", checked as f64, Relation::AtLeast, 1.0));
    found.push(Measurement::count("neither", neither));
    Ok(found)
}
