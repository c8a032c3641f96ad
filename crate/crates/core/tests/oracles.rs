use std::f64::consts::{FRAC_PI_2, PI};

use approx::assert_abs_diff_eq;
use num_complex::Complex64;
use qoc_core::costs::evaluate_cost;
use qoc_core::dynamics::{eliminate_drift, propagate};
use qoc_core::io::eigenstate;
use qoc_core::optimizer::{solve_reduced, SolveOptions};
use qoc_core::resonance::{classify_resonance, counterexample_pair, ResonanceStatus, COUNTEREXAMPLE_STEPS};
use qoc_core::system::lie_rank_oracle;
use qoc_core::{
    AdmissiblePair, BoundarySpec, ControlGrid, CostKind, CostSpec, Edge, FinalTime, Flavor, LevelSystem, TimeGrid,
};

fn eig(index: usize) -> BoundarySpec {
    BoundarySpec::Eigenstate { index }
}

#[test]
fn rabi_swap_in_a_quarter_period() {
    let sys = LevelSystem::ladder(vec![0.0, 0.0]);
    let grid = TimeGrid::new(FRAC_PI_2, 10).unwrap();
    let h = ControlGrid::from_fn(grid, Flavor::SkewH, &sys, |_, _| Complex64::new(1.0, 0.0));
    let traj = propagate(&sys, &h, &eigenstate(2, 0)).unwrap();
    let end = &traj.states[traj.states.len() - 1];
    assert_abs_diff_eq!(end[0].re, 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(end[1].re, -1.0, epsilon = 1e-12);
}

#[test]
fn resonant_drive_with_drift_completes_the_transfer() {
    // V_12 = e^{i w t} with w = E_2 - E_1 is resonant: the interaction picture sees a constant coupling
    let sys = LevelSystem::ladder(vec![0.0, 3.0]);
    let grid = TimeGrid::new(FRAC_PI_2, 4000).unwrap();
    let v = ControlGrid::from_fn(grid, Flavor::HermitianV, &sys, |i, _| Complex64::from_polar(1.0, 3.0 * grid.midpoint(i)));
    let traj = propagate(&sys, &v, &eigenstate(2, 0)).unwrap();
    assert_abs_diff_eq!(traj.populations(traj.states.len() - 1)[1], 1.0, epsilon = 1e-6);
    let h = eliminate_drift(&sys, &v).unwrap();
    let phases: Vec<f64> = h.values.iter().map(|row| row[0].arg()).collect();
    let spread = phases.iter().map(|p| (p - phases[0]).abs()).fold(0.0, f64::max);
    assert!(spread < 1e-9, "{spread}");
}

#[test]
fn connectivity_matches_the_lie_oracle_on_a_star_and_a_split() {
    let star = LevelSystem::new(vec![0.0, 1.0, 2.0, 4.0], vec![Edge::new(0, 1, 1.0), Edge::new(0, 2, 1.0), Edge::new(0, 3, 1.0)]);
    let split = LevelSystem::new(vec![0.0, 1.0, 2.0], vec![Edge::new(0, 1, 1.0)]);
    for sys in [star, split] {
        assert_eq!(lie_rank_oracle(&sys).unwrap().transitive, sys.is_controllable());
    }
}

#[test]
fn energy_oracle_for_two_levels() {
    let sys = LevelSystem::ladder(vec![0.0, 0.0]);
    let spec = CostSpec::from_system(CostKind::Energy, &sys);
    for t in [0.5, 1.0, 2.0] {
        let opts = SolveOptions::new(TimeGrid::new(t, 32).unwrap());
        let out = solve_reduced(&sys, &spec, &eig(0), &eig(1), &opts).unwrap();
        assert!(out.converged);
        // quarter turn at constant speed: (pi/2)^2 / T
        assert_abs_diff_eq!(out.cost, PI * PI / (4.0 * t), epsilon = 1e-6);
    }
}

#[test]
fn minimum_time_oracle_scales_with_the_weight() {
    // the time-max constraint set is |V| <= mu, intersected with the edge bound
    for (mu, bound) in [(1.0, 1.0), (2.0, 2.0), (2.0, 1.0)] {
        let sys = LevelSystem::new(vec![0.0, 0.0], vec![Edge::new(0, 1, mu).with_bound(bound)]);
        let spec = CostSpec { final_time: FinalTime::Free, ..CostSpec::from_system(CostKind::TimeMax, &sys) };
        let out = solve_reduced(&sys, &spec, &eig(0), &eig(1), &SolveOptions::new(TimeGrid::new(1.0, 32).unwrap())).unwrap();
        let t = out.diagnostics.minimal_time.unwrap();
        assert_abs_diff_eq!(t, FRAC_PI_2 / f64::min(mu, bound), epsilon = 1e-4);
    }
}

#[test]
fn counterexample_pairs_differ_only_in_phase() {
    let c = counterexample_pair(COUNTEREXAMPLE_STEPS).unwrap();
    for node in 0..c.a.trajectory.states.len() {
        let (pa, pb) = (c.a.trajectory.populations(node), c.b.trajectory.populations(node));
        for (x, y) in pa.iter().zip(&pb) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-10);
        }
    }
    let status = |p: &AdmissiblePair| classify_resonance(&c.system, p, 1e-6, 1e-9).unwrap().status;
    assert_eq!(status(&c.a), ResonanceStatus::Resonant);
    assert_eq!(status(&c.b), ResonanceStatus::Neither);
    let energy = CostSpec::from_system(CostKind::Energy, &c.system);
    assert!(evaluate_cost(&energy, &c.a.control).unwrap() < evaluate_cost(&energy, &c.b.control).unwrap());
}
