//! Replacement of an admissible pair by a resonant pair with the same moduli.
//!
//! On each step the phase-driving part of the control is dropped and the
//! remaining real generator is corrected so that it maps the signed moduli at
//! one node exactly onto the signed moduli at the next. Steps outside every
//! interval of an edge carry no control on that edge.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::control::{ControlGrid, Flavor};
use crate::dynamics::AdmissiblePair;
use crate::error::{Error, Result};
use crate::linalg;
use crate::resonance::intervals::{decompose_intervals, DEFAULT_EPSILON};
use crate::resonance::uv::{midpoint_states, require_driftless};
use crate::system::LevelSystem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformOptions {
    pub epsilon: f64,
    /// Allowed sup-norm deviation between input and output moduli.
    pub tol: f64,
}

impl Default for TransformOptions {
    fn default() -> Self {
        TransformOptions { epsilon: DEFAULT_EPSILON, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResonantPair {
    pub pair: AdmissiblePair,
    /// Constant level phases `theta_j` of the output.
    pub phases: Vec<f64>,
    pub moduli_deviation: f64,
}

const NEWTON_ITERS: usize = 30;

fn sign(x: f64, keep: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        keep
    }
}

fn generator(n: usize, edges: &[(usize, usize)], u: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for (&(j, k), &x) in edges.iter().zip(u) {
        m[(j, k)] = x;
        m[(k, j)] = -x;
    }
    m
}

/// Corrects the active entries of `u` so that `exp(U dt) s = target`.
fn newton_step(
    n: usize,
    edges: &[(usize, usize)],
    active: &[usize],
    u: &mut [f64],
    dt: f64,
    s: &DVector<f64>,
    target: &DVector<f64>,
) {
    if active.is_empty() {
        return;
    }
    let mut best = f64::INFINITY;
    let mut best_u = u.to_vec();
    for _ in 0..NEWTON_ITERS {
        let a = generator(n, edges, u) * dt;
        let res = linalg::expm(&a) * s - target;
        let r = res.amax();
        if r >= best {
            break;
        }
        best = r;
        best_u.copy_from_slice(u);
        if r <= 1e-15 {
            break;
        }
        let mut jac = DMatrix::zeros(n, active.len());
        for (c, &e) in active.iter().enumerate() {
            let (j, k) = edges[e];
            let mut dir = DMatrix::zeros(n, n);
            dir[(j, k)] = dt;
            dir[(k, j)] = -dt;
            let (_, l) = linalg::expm_frechet(&a, &dir);
            jac.set_column(c, &(l * s));
        }
        let delta = linalg::lstsq(&jac, &(-res), 1e-12);
        for (c, &e) in active.iter().enumerate() {
            u[e] += delta[c];
        }
    }
    u.copy_from_slice(&best_u);
}

pub fn resonance_transform(sys: &LevelSystem, pair: &AdmissiblePair, opts: TransformOptions) -> Result<ResonantPair> {
    require_driftless(&pair.control)?;
    let traj = &pair.trajectory;
    let grid = pair.control.grid;
    let n = sys.n;
    let dt = grid.dt();
    let dec = decompose_intervals(sys, traj, opts.epsilon);
    let active: Vec<Vec<bool>> = (0..dec.edges.len()).map(|e| dec.active_steps(e)).collect();
    let mids = midpoint_states(sys, pair);
    let edges = pair.control.edges.clone();

    let psi0 = traj.initial();
    let phases: Vec<f64> = (0..n)
        .map(|j| if psi0[j].norm() > opts.epsilon { psi0[j].arg() } else { 0.0 })
        .collect();

    let mut sigma = vec![1.0; n];
    let mut s = DVector::from_iterator(n, (0..n).map(|j| traj.modulus(0, j)));
    let mut values = Vec::with_capacity(grid.steps());
    for i in 0..grid.steps() {
        let here = &traj.states[i];
        let mid = &mids[i];
        let next = &traj.states[i + 1];
        let sigma_mid: Vec<f64> = (0..n).map(|j| sign((mid[j] * here[j].conj()).re, sigma[j])).collect();
        let sigma_next: Vec<f64> = (0..n).map(|j| sign((next[j] * mid[j].conj()).re, sigma_mid[j])).collect();

        let on: Vec<usize> = (0..edges.len()).filter(|&e| active[e][i]).collect();
        let mut u = vec![0.0; edges.len()];
        for &e in &on {
            let (j, k) = edges[e];
            let beta = mid[j].arg() - mid[k].arg();
            let w = pair.control.values[i][e] * Complex64::from_polar(1.0, -beta);
            u[e] = sigma_mid[j] * sigma_mid[k] * w.re;
        }
        let target = DVector::from_iterator(n, (0..n).map(|j| sigma_next[j] * traj.modulus(i + 1, j)));
        newton_step(n, &edges, &on, &mut u, dt, &s, &target);

        let a = generator(n, &edges, &u) * dt;
        s = linalg::expm(&a) * &s;
        sigma = sigma_next;
        values.push(
            edges
                .iter()
                .zip(&u)
                .map(|(&(j, k), &x)| Complex64::from_polar(x, phases[j] - phases[k]))
                .collect(),
        );
    }

    let control = ControlGrid { grid, flavor: Flavor::SkewH, edges, values };
    let out = AdmissiblePair::from_control(sys, control, psi0)?;
    let moduli_deviation = out.trajectory.max_moduli_deviation(traj);
    if moduli_deviation > opts.tol {
        return Err(Error::AdmissibilityResidualExceeded { measured: moduli_deviation, tol: opts.tol });
    }
    Ok(ResonantPair { pair: out, phases, moduli_deviation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::TimeGrid;
    use crate::linalg::CVector;
    use crate::resonance::uv::uv_decompose;
    use crate::system::Edge;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn unit(v: &[(f64, f64)]) -> CVector {
        let c = CVector::from_iterator(v.len(), v.iter().map(|&(a, b)| Complex64::new(a, b)));
        let n = linalg::complex_norm(&c);
        c / Complex64::new(n, 0.0)
    }

    #[test]
    fn real_pair_is_a_fixed_point() {
        let sys = LevelSystem::ladder(vec![0.0; 3]);
        let g = TimeGrid::new(0.8, 80).unwrap();
        let h = ControlGrid::from_fn(g, Flavor::SkewH, &sys, |i, e| Complex64::new(0.4 + 0.2 * e as f64 + 0.005 * i as f64, 0.0));
        let psi0 = unit(&[(0.6, 0.0), (0.5, 0.0), (0.4, 0.0)]);
        let pair = AdmissiblePair::from_control(&sys, h.clone(), &psi0).unwrap();
        let out = resonance_transform(&sys, &pair, TransformOptions::default()).unwrap();
        for (a, b) in out.pair.control.values.iter().flatten().zip(h.values.iter().flatten()) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(out.pair.trajectory.max_state_deviation(&pair.trajectory) < 1e-12);
    }

    #[test]
    fn complex_controls_become_resonant_with_equal_moduli() {
        let sys = LevelSystem::new(vec![0.0; 3], vec![Edge::new(0, 1, 1.0), Edge::new(1, 2, 1.0), Edge::new(0, 2, 1.0)]);
        let g = TimeGrid::new(1.2, 300).unwrap();
        let h = ControlGrid::from_fn(g, Flavor::SkewH, &sys, |i, e| {
            Complex64::from_polar(0.7 + 0.1 * e as f64, 2.0 * g.midpoint(i) + e as f64)
        });
        let psi0 = unit(&[(0.6, 0.2), (0.5, -0.3), (0.1, 0.4)]);
        let pair = AdmissiblePair::from_control(&sys, h, &psi0).unwrap();
        let out = resonance_transform(&sys, &pair, TransformOptions::default()).unwrap();
        assert!(out.moduli_deviation <= 1e-8);
        let dec = decompose_intervals(&sys, &out.pair.trajectory, DEFAULT_EPSILON);
        let uv = uv_decompose(&sys, &out.pair, &dec).unwrap();
        for iv in uv.edges.iter().flat_map(|e| &e.intervals) {
            assert!(iv.max_abs_v() < 1e-10, "v = {}", iv.max_abs_v());
        }
        // phases stay at their initial values
        for node in [0, 100, 300] {
            for j in 0..3 {
                let z = out.pair.trajectory.states[node][j];
                let d = (z * Complex64::from_polar(1.0, -out.phases[j])).im;
                assert!(d.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transition_through_zero_keeps_moduli() {
        // H = -1 then -e^{i gamma}: psi_1 vanishes at pi/2 and the control
        // on the second half carries a different phase.
        let sys = LevelSystem::new(vec![0.0, 0.0], vec![Edge::new(0, 1, 1.0)]);
        let g = TimeGrid::new(PI, 400).unwrap();
        let h = ControlGrid::from_fn(g, Flavor::SkewH, &sys, |i, _| {
            if i < 200 {
                Complex64::new(-1.0, 0.0)
            } else {
                -Complex64::from_polar(1.0, 0.7)
            }
        });
        let psi0 = unit(&[(1.0, 0.0), (0.0, 0.0)]);
        let pair = AdmissiblePair::from_control(&sys, h, &psi0).unwrap();
        let out = resonance_transform(&sys, &pair, TransformOptions::default()).unwrap();
        assert!(out.moduli_deviation <= 1e-8);
        let _ = FRAC_PI_2;
    }

    #[test]
    fn drift_flavor_is_rejected() {
        let sys = LevelSystem::new(vec![0.0, 1.0], vec![Edge::new(0, 1, 1.0)]);
        let g = TimeGrid::new(1.0, 10).unwrap();
        let v = ControlGrid::zeros(g, Flavor::HermitianV, &sys);
        let pair = AdmissiblePair::from_control(&sys, v, &unit(&[(1.0, 0.0), (0.0, 0.0)])).unwrap();
        assert!(resonance_transform(&sys, &pair, TransformOptions::default()).is_err());
    }
}
