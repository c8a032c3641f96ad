//! Propagation of the Schrödinger system with and without drift, the
//! interaction-picture transform between the two, and the reduced real system.
//!
//! Controls are piecewise constant, so every step is an exact matrix
//! exponential: `exp(-i (D + V_i) dt)` with drift, `exp(H_i dt)` without it,
//! and the rotation `exp(U_i dt)` on the real sphere.

use nalgebra::DVector;
use num_complex::Complex64;
use std::f64::consts::FRAC_PI_2;

use crate::control::{ControlGrid, Flavor, TimeGrid};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::system::LevelSystem;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Unit-norm states on the nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub grid: TimeGrid,
    pub states: Vec<CVector>,
    /// True when every state is real (the reduced problem).
    pub real: bool,
}

impl StateTrajectory {
    pub fn n(&self) -> usize {
        self.states[0].len()
    }

    pub fn modulus(&self, node: usize, level: usize) -> f64 {
        self.states[node][level].norm()
    }

    pub fn moduli(&self, node: usize) -> Vec<f64> {
        self.states[node].iter().map(|z| z.norm()).collect()
    }

    pub fn populations(&self, node: usize) -> Vec<f64> {
        self.states[node].iter().map(|z| z.norm_sqr()).collect()
    }

    /// Real parts as a real vector (meaningful for real trajectories).
    pub fn real_state(&self, node: usize) -> DVector<f64> {
        self.states[node].map(|z| z.re)
    }

    pub fn initial(&self) -> &CVector {
        &self.states[0]
    }

    pub fn last(&self) -> &CVector {
        self.states.last().expect("trajectory has at least one node")
    }

    /// Largest deviation of `|psi|` from 1 over all nodes.
    pub fn norm_drift(&self) -> f64 {
        self.states
            .iter()
            .map(|s| (linalg::complex_norm(s) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `| |a_j(t)| - |b_j(t)| |` over nodes and levels.
    pub fn max_moduli_deviation(&self, other: &StateTrajectory) -> f64 {
        self.states
            .iter()
            .zip(&other.states)
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x.norm() - y.norm()).abs()))
            .fold(0.0, f64::max)
    }

    pub fn max_state_deviation(&self, other: &StateTrajectory) -> f64 {
        self.states
            .iter()
            .zip(&other.states)
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max)
    }
}

/// A trajectory together with the control that generates it.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissiblePair {
    pub trajectory: StateTrajectory,
    pub control: ControlGrid,
}

impl AdmissiblePair {
    /// Propagates `psi0` under `control`.
    pub fn from_control(sys: &LevelSystem, control: ControlGrid, psi0: &CVector) -> Result<Self> {
        let trajectory = propagate(sys, &control, psi0)?;
        Ok(AdmissiblePair { trajectory, control })
    }

    /// Sup-norm mismatch between each node and the propagation of the
    /// previous node by one step.
    pub fn residual(&self, sys: &LevelSystem) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.control.grid.steps() {
            let step = step_propagator(sys, &self.control, i);
            let next = &step * &self.trajectory.states[i];
            let dev = (next - &self.trajectory.states[i + 1])
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            worst = worst.max(dev);
        }
        worst
    }
}

pub fn check_unit(psi0: &CVector, n: usize) -> Result<()> {
    if psi0.len() != n {
        return Err(Error::DimensionMismatch(format!("state has {} entries, system has {n} levels", psi0.len())));
    }
    let norm = linalg::complex_norm(psi0);
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidState(format!("initial state has norm {norm}")));
    }
    Ok(())
}

/// Generator `G_i` such that the step is `exp(G_i dt)`.
pub fn step_generator(sys: &LevelSystem, ctrl: &ControlGrid, step: usize) -> CMatrix {
    let m = ctrl.assemble(step, sys.n);
    match ctrl.flavor {
        Flavor::HermitianV => (sys.drift() + m) * (-I),
        Flavor::SkewH | Flavor::RealU => m,
    }
}

pub fn step_propagator(sys: &LevelSystem, ctrl: &ControlGrid, step: usize) -> CMatrix {
    let dt = ctrl.grid.dt();
    match ctrl.flavor {
        Flavor::RealU => {
            let u = ctrl.assemble_real(step, sys.n) * dt;
            linalg::expm(&u).map(|x| Complex64::new(x, 0.0))
        }
        _ => linalg::expm_c(&(step_generator(sys, ctrl, step) * Complex64::new(dt, 0.0))),
    }
}

/// Propagator over the first half of a step.
pub fn half_step_propagator(sys: &LevelSystem, ctrl: &ControlGrid, step: usize) -> CMatrix {
    let dt = 0.5 * ctrl.grid.dt();
    linalg::expm_c(&(step_generator(sys, ctrl, step) * Complex64::new(dt, 0.0)))
}

/// Propagates `psi0` with whichever flavor `ctrl` carries.
pub fn propagate(sys: &LevelSystem, ctrl: &ControlGrid, psi0: &CVector) -> Result<StateTrajectory> {
    check_unit(psi0, sys.n)?;
    ctrl.check(sys)?;
    let mut states = Vec::with_capacity(ctrl.grid.nodes());
    states.push(psi0.clone());
    for i in 0..ctrl.grid.steps() {
        let next = step_propagator(sys, ctrl, i) * &states[i];
        states.push(next);
    }
    let real = ctrl.flavor == Flavor::RealU && psi0.iter().all(|z| z.im == 0.0);
    Ok(StateTrajectory { grid: ctrl.grid, states, real })
}

fn require(ctrl: &ControlGrid, flavor: Flavor) -> Result<()> {
    if ctrl.flavor != flavor {
        return Err(Error::InvalidControl {
            invariant: "flavor",
            detail: format!("expected a {} control, got {}", flavor.code(), ctrl.flavor.code()),
        });
    }
    Ok(())
}

/// Schrödinger propagation with drift `D = diag(E)` under Hermitian controls.
pub fn propagate_drift(sys: &LevelSystem, v: &ControlGrid, psi0: &CVector) -> Result<StateTrajectory> {
    require(v, Flavor::HermitianV)?;
    propagate(sys, v, psi0)
}

/// Drift-free propagation `d psi / dt = H psi`.
pub fn propagate_driftless(sys: &LevelSystem, h: &ControlGrid, psi0: &CVector) -> Result<StateTrajectory> {
    require(h, Flavor::SkewH)?;
    propagate(sys, h, psi0)
}

/// Rotation steps on the real sphere.
pub fn propagate_real(sys: &LevelSystem, u: &ControlGrid, rho0: &DVector<f64>) -> Result<StateTrajectory> {
    require(u, Flavor::RealU)?;
    propagate(sys, u, &linalg::realify(rho0))
}

/// Phase `(E_k - E_j) t + pi/2` relating the two pictures on edge `(j, k)`.
fn frame_phase(sys: &LevelSystem, j: usize, k: usize, t: f64) -> f64 {
    (sys.energies[k] - sys.energies[j]) * t + FRAC_PI_2
}

/// Interaction-picture controls: `H_{j,k} = V_{j,k} exp(-i[(E_k - E_j) t + pi/2])`
/// with the phase sampled at step midpoints.
pub fn eliminate_drift(sys: &LevelSystem, v: &ControlGrid) -> Result<ControlGrid> {
    require(v, Flavor::HermitianV)?;
    v.check(sys)?;
    Ok(apply_frame(sys, v, Flavor::SkewH, -1.0))
}

/// Inverse of [`eliminate_drift`] on the same grid.
pub fn restore_drift(sys: &LevelSystem, h: &ControlGrid) -> Result<ControlGrid> {
    let h = match h.flavor {
        Flavor::RealU => h.to_skew(),
        Flavor::SkewH => h.clone(),
        Flavor::HermitianV => {
            return Err(Error::InvalidControl {
                invariant: "flavor",
                detail: "expected a H control, got V".into(),
            })
        }
    };
    h.check(sys)?;
    Ok(apply_frame(sys, &h, Flavor::HermitianV, 1.0))
}

/// Same as [`restore_drift`] but also checks that `h` lives on `grid`.
pub fn restore_drift_on(sys: &LevelSystem, h: &ControlGrid, grid: &TimeGrid) -> Result<ControlGrid> {
    h.grid.ensure_same(grid)?;
    restore_drift(sys, h)
}

fn apply_frame(sys: &LevelSystem, c: &ControlGrid, flavor: Flavor, sign: f64) -> ControlGrid {
    let mut out = c.clone();
    out.flavor = flavor;
    for (i, row) in out.values.iter_mut().enumerate() {
        let t = c.grid.midpoint(i);
        for (e, z) in row.iter_mut().enumerate() {
            let (j, k) = c.edges[e];
            *z *= Complex64::from_polar(1.0, sign * frame_phase(sys, j, k, t));
        }
    }
    out
}

/// Step count for a drifted problem: `max |E_j - E_k| dt <= 0.1` and
/// `max |V| dt <= 0.1`.
pub fn default_grid(sys: &LevelSystem, t_final: f64, max_control: f64) -> Result<TimeGrid> {
    let gap = sys
        .edges
        .iter()
        .map(|e| (sys.energies[e.j] - sys.energies[e.k]).abs())
        .fold(0.0, f64::max);
    TimeGrid::resolving(t_final, gap.max(max_control), 0.1, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::Edge;

    fn two_level(e: [f64; 2]) -> LevelSystem {
        LevelSystem::new(e.to_vec(), vec![Edge::new(0, 1, 1.0)])
    }

    fn e1() -> CVector {
        CVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)])
    }

    #[test]
    fn free_evolution_only_rotates_phases() {
        let sys = two_level([1.0, 2.0]);
        let g = TimeGrid::new(3.0, 30).unwrap();
        let v = ControlGrid::zeros(g, Flavor::HermitianV, &sys);
        let traj = propagate_drift(&sys, &v, &e1()).unwrap();
        for (i, s) in traj.states.iter().enumerate() {
            let t = g.node(i);
            assert!((s[0] - Complex64::from_polar(1.0, -t)).norm() < 1e-12);
            assert!(s[1].norm() < 1e-15);
        }
    }

    #[test]
    fn resonant_two_level_rotation_with_and_without_drift() {
        // H_{12} = -1 gives (cos t, sin t); the matching V with D = 0 is V = i H.
        let sys = two_level([0.0, 0.0]);
        let g = TimeGrid::new(1.5, 15).unwrap();
        let v = ControlGrid::from_fn(g, Flavor::HermitianV, &sys, |_, _| Complex64::new(0.0, -1.0));
        let traj = propagate_drift(&sys, &v, &e1()).unwrap();
        for (i, s) in traj.states.iter().enumerate() {
            let t = g.node(i);
            assert!((s[0].norm() - t.cos().abs()).abs() < 1e-12);
            assert!((s[1].norm() - t.sin().abs()).abs() < 1e-12);
        }
        let h = ControlGrid::from_fn(g, Flavor::SkewH, &sys, |_, _| Complex64::new(-1.0, 0.0));
        let traj = propagate_driftless(&sys, &h, &e1()).unwrap();
        for (i, s) in traj.states.iter().enumerate() {
            let t = g.node(i);
            assert!((s[0] - Complex64::new(t.cos(), 0.0)).norm() < 1e-12);
            assert!((s[1] - Complex64::new(t.sin(), 0.0)).norm() < 1e-12);
        }
        let u = ControlGrid::real_from_fn(g, &sys, |_, _| -1.0);
        let rho = propagate_real(&sys, &u, &DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert!(rho.real);
        assert!(rho.max_state_deviation(&traj) < 1e-12);
    }

    #[test]
    fn zero_control_is_constant() {
        let sys = two_level([0.0, 3.0]);
        let g = TimeGrid::new(1.0, 5).unwrap();
        let h = ControlGrid::zeros(g, Flavor::SkewH, &sys);
        let traj = propagate_driftless(&sys, &h, &e1()).unwrap();
        assert!(traj.states.iter().all(|s| (s - e1()).norm() < 1e-15));
    }

    #[test]
    fn drift_elimination_with_zero_energies_is_a_quarter_turn() {
        let sys = two_level([0.0, 0.0]);
        let g = TimeGrid::new(1.0, 4).unwrap();
        let z = Complex64::new(0.2, -0.7);
        let v = ControlGrid::from_fn(g, Flavor::HermitianV, &sys, |_, _| z);
        let h = eliminate_drift(&sys, &v).unwrap();
        for row in &h.values {
            assert!((row[0] - z * (-I)).norm() < 1e-15);
        }
        let back = restore_drift(&sys, &h).unwrap();
        assert!(back.values.iter().flatten().zip(v.values.iter().flatten()).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn real_control_maps_to_imaginary_v_without_drift() {
        let sys = two_level([0.0, 0.0]);
        let g = TimeGrid::new(1.0, 3).unwrap();
        let u = ControlGrid::real_from_fn(g, &sys, |i, _| i as f64 - 1.3);
        let v = restore_drift(&sys, &u).unwrap();
        assert!(v.values.iter().flatten().all(|z| z.re.abs() < 1e-15));
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let sys = two_level([0.0, 1.0]);
        let h = ControlGrid::zeros(TimeGrid::new(1.0, 4).unwrap(), Flavor::SkewH, &sys);
        let other = TimeGrid::new(1.0, 5).unwrap();
        assert!(matches!(restore_drift_on(&sys, &h, &other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn wrong_flavor_is_rejected() {
        let sys = two_level([0.0, 1.0]);
        let h = ControlGrid::zeros(TimeGrid::new(1.0, 4).unwrap(), Flavor::SkewH, &sys);
        assert!(propagate_drift(&sys, &h, &e1()).is_err());
        assert!(eliminate_drift(&sys, &h).is_err());
    }

    #[test]
    fn default_grid_resolves_gaps_and_amplitudes() {
        let sys = two_level([0.0, 5.0]);
        let g = default_grid(&sys, 2.0, 1.0).unwrap();
        assert!(5.0 * g.dt() <= 0.1 + 1e-12);
    }
}
