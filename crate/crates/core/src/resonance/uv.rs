//! Decomposition of each control into a modulus-driving part `u` and a
//! phase-driving part `v` on the intervals where both coupled levels are
//! populated, together with the associated vector fields.

use std::ops::Range;

use num_complex::Complex64;
use serde::Serialize;

use crate::control::{ControlGrid, Flavor};
use crate::dynamics::{half_step_propagator, AdmissiblePair};
use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::resonance::intervals::{IntervalDecomposition, NodeRun};
use crate::system::LevelSystem;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `u` and `v` on one interval, sampled at the midpoints of its steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalUv {
    pub run: NodeRun,
    pub steps: Range<usize>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// `beta = arg psi_j - arg psi_k` at the step midpoints.
    pub beta: Vec<f64>,
    /// Phase difference at the first node of the run.
    pub anchor: f64,
}

impl IntervalUv {
    pub fn max_abs_v(&self) -> f64 {
        self.v.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeUv {
    pub edge: (usize, usize),
    pub intervals: Vec<IntervalUv>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UvDecomposition {
    pub edges: Vec<EdgeUv>,
}

impl UvDecomposition {
    /// `sum over edges and intervals of dt * v^2`.
    pub fn integrated_v_squared(&self, dt: f64) -> f64 {
        self.edges
            .iter()
            .flat_map(|e| &e.intervals)
            .flat_map(|iv| &iv.v)
            .map(|v| dt * v * v)
            .sum()
    }
}

/// States at the midpoint of every step.
pub fn midpoint_states(sys: &LevelSystem, pair: &AdmissiblePair) -> Vec<CVector> {
    (0..pair.control.grid.steps())
        .map(|i| half_step_propagator(sys, &pair.control, i) * &pair.trajectory.states[i])
        .collect()
}

pub(crate) fn require_driftless(ctrl: &ControlGrid) -> Result<()> {
    if ctrl.flavor == Flavor::HermitianV {
        return Err(Error::InvalidControl {
            invariant: "flavor",
            detail: "expected a drift-free (H or U) control; eliminate the drift first".into(),
        });
    }
    Ok(())
}

fn phase_difference(psi: &CVector, j: usize, k: usize) -> f64 {
    wrap(psi[j].arg() - psi[k].arg())
}

/// Wraps an angle to `[-pi, pi]`.
pub fn wrap(a: f64) -> f64 {
    a.sin().atan2(a.cos())
}

pub fn uv_decompose(sys: &LevelSystem, pair: &AdmissiblePair, dec: &IntervalDecomposition) -> Result<UvDecomposition> {
    require_driftless(&pair.control)?;
    pair.control.grid.ensure_same(&dec.grid)?;
    let mids = midpoint_states(sys, pair);
    let traj = &pair.trajectory;
    let mut edges = Vec::with_capacity(dec.edges.len());
    for (e, ei) in dec.edges.iter().enumerate() {
        let (j, k) = ei.edge;
        let mut intervals = Vec::new();
        for run in &ei.runs {
            for node in run.first..=run.last {
                for level in [j, k] {
                    let m = traj.modulus(node, level);
                    if m <= dec.epsilon {
                        return Err(Error::PhaseUndefined { level, node, modulus: m });
                    }
                }
            }
            let steps = run.steps(&dec.grid);
            let mut u = Vec::with_capacity(steps.len());
            let mut v = Vec::with_capacity(steps.len());
            let mut beta = Vec::with_capacity(steps.len());
            for s in steps.clone() {
                let b = phase_difference(&mids[s], j, k);
                let w = pair.control.values[s][e] * Complex64::from_polar(1.0, -b);
                u.push(w.re);
                v.push(w.im);
                beta.push(b);
            }
            let anchor = phase_difference(&traj.states[run.first], j, k);
            intervals.push(IntervalUv { run: *run, steps, u, v, beta, anchor });
        }
        edges.push(EdgeUv { edge: (j, k), intervals });
    }
    Ok(UvDecomposition { edges })
}

/// The field driven by `u` on edge `(j, k)`:
/// `e^{i beta} psi_k d/dpsi_j - e^{-i beta} psi_j d/dpsi_k`.
pub fn field_f(psi: &CVector, j: usize, k: usize) -> CVector {
    let beta = phase_difference(psi, j, k);
    let mut out = CVector::zeros(psi.len());
    out[j] = Complex64::from_polar(1.0, beta) * psi[k];
    out[k] = -Complex64::from_polar(1.0, -beta) * psi[j];
    out
}

/// The field driven by `v` on edge `(j, k)`:
/// `i (e^{i beta} psi_k d/dpsi_j + e^{-i beta} psi_j d/dpsi_k)`.
pub fn field_g(psi: &CVector, j: usize, k: usize) -> CVector {
    let beta = phase_difference(psi, j, k);
    let mut out = CVector::zeros(psi.len());
    out[j] = I * Complex64::from_polar(1.0, beta) * psi[k];
    out[k] = I * Complex64::from_polar(1.0, -beta) * psi[j];
    out
}
