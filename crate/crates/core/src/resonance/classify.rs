use std::collections::VecDeque;
use std::fmt;

use num_complex::Complex64;
use serde::Serialize;

use crate::control::Flavor;
use crate::dynamics::{eliminate_drift, AdmissiblePair};
use crate::error::Result;
use crate::resonance::intervals::decompose_intervals;
use crate::resonance::uv::uv_decompose;
use crate::system::LevelSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResonanceStatus {
    Resonant,
    WeaklyResonant,
    Neither,
}

impl fmt::Display for ResonanceStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResonanceStatus::Resonant => "resonant",
            ResonanceStatus::WeaklyResonant => "weakly-resonant",
            ResonanceStatus::Neither => "neither",
        })
    }
}

/// Per-edge evidence behind a verdict. Edge indices are zero-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeEvidence {
    pub edge: (usize, usize),
    pub intervals: usize,
    /// Largest `|v|` over the edge's intervals.
    pub max_v: f64,
    /// Largest phase spread (mod pi) of the control over a bad run.
    pub bad_phase_drift: f64,
    /// Largest deviation of the control from one phase (mod pi) over the
    /// whole horizon.
    pub global_phase_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResonanceVerdict {
    pub status: ResonanceStatus,
    pub edges: Vec<EdgeEvidence>,
    /// Largest inconsistency of the level phases with the control phases.
    pub phase_mismatch: f64,
}

/// Largest `|Im(z e^{-i phi})|` over `zs`, with `phi` the phase of the
/// largest entry.
fn phase_spread<'a>(zs: impl Iterator<Item = &'a Complex64> + Clone) -> (f64, Option<f64>) {
    let Some(reference) = zs.clone().max_by(|a, b| a.norm().total_cmp(&b.norm())) else {
        return (0.0, None);
    };
    if reference.norm() == 0.0 {
        return (0.0, None);
    }
    let rot = Complex64::from_polar(1.0, -reference.arg());
    let spread = zs.map(|z| (z * rot).im.abs()).fold(0.0, f64::max);
    (spread, Some(reference.arg()))
}

/// Distance of `a` to the nearest multiple of `pi`, as `|sin a|`.
fn off_line(a: f64) -> f64 {
    a.sin().abs()
}

/// Decides whether an admissible pair is resonant, weakly resonant or neither.
///
/// Controls given with drift are first moved to the interaction picture.
pub fn classify_resonance(sys: &LevelSystem, pair: &AdmissiblePair, epsilon: f64, tol: f64) -> Result<ResonanceVerdict> {
    let moved;
    let pair = if pair.control.flavor == Flavor::HermitianV {
        let h = eliminate_drift(sys, &pair.control)?;
        moved = AdmissiblePair::from_control(sys, h, pair.trajectory.initial())?;
        &moved
    } else {
        pair
    };
    let ctrl = &pair.control;
    let dec = decompose_intervals(sys, &pair.trajectory, epsilon);
    let uv = uv_decompose(sys, pair, &dec)?;

    let mut weak = true;
    let mut edges = Vec::with_capacity(ctrl.n_edges());
    let mut line_phase = Vec::with_capacity(ctrl.n_edges());
    for (e, euv) in uv.edges.iter().enumerate() {
        let max_v = euv.intervals.iter().map(|iv| iv.max_abs_v()).fold(0.0, f64::max);
        let bad_phase_drift = dec
            .bad_runs(e)
            .into_iter()
            .map(|r| phase_spread(ctrl.values[r].iter().map(|row| &row[e])).0)
            .fold(0.0, f64::max);
        let (global_phase_drift, phase) = phase_spread(ctrl.values.iter().map(|row| &row[e]));
        weak &= max_v <= tol && bad_phase_drift <= tol;
        line_phase.push(if global_phase_drift <= tol { phase } else { None });
        edges.push(EdgeEvidence {
            edge: euv.edge,
            intervals: euv.intervals.len(),
            max_v,
            bad_phase_drift,
            global_phase_drift,
        });
    }

    if !weak {
        return Ok(ResonanceVerdict { status: ResonanceStatus::Neither, edges, phase_mismatch: f64::NAN });
    }
    if edges.iter().any(|e| e.global_phase_drift > tol) {
        return Ok(ResonanceVerdict { status: ResonanceStatus::WeaklyResonant, edges, phase_mismatch: f64::NAN });
    }

    // Look for level phases theta with theta_j - theta_k = phase_e (mod pi)
    // on every edge carrying control, fixed where the initial state is populated.
    let n = sys.n;
    let psi0 = pair.trajectory.initial();
    let mut theta: Vec<Option<f64>> = (0..n).map(|j| (psi0[j].norm() > epsilon).then(|| psi0[j].arg())).collect();
    let fixed: Vec<bool> = theta.iter().map(|t| t.is_some()).collect();
    let mut adj: Vec<Vec<(usize, f64, f64)>> = vec![Vec::new(); n];
    for (e, &(j, k)) in ctrl.edges.iter().enumerate() {
        if let Some(phi) = line_phase[e] {
            let weight = ctrl.values.iter().map(|row| row[e].norm()).fold(0.0, f64::max);
            adj[j].push((k, -phi, weight));
            adj[k].push((j, phi, weight));
        }
    }
    let mut mismatch: f64 = 0.0;
    let mut queue: VecDeque<usize> = (0..n).filter(|&j| fixed[j]).collect();
    let mut seeds = (0..n).filter(|&j| !fixed[j]);
    loop {
        while let Some(j) = queue.pop_front() {
            let tj = theta[j].expect("queued levels carry a phase");
            for &(k, shift, weight) in &adj[j] {
                // theta_k = theta_j + shift (mod pi)
                match theta[k] {
                    Some(tk) => mismatch = mismatch.max(weight * off_line(tk - tj - shift)),
                    None => {
                        theta[k] = Some(tj + shift);
                        queue.push_back(k);
                    }
                }
            }
        }
        match seeds.by_ref().find(|&j| theta[j].is_none()) {
            Some(j) => {
                theta[j] = Some(0.0);
                queue.push_back(j);
            }
            None => break,
        }
    }
    let status = if mismatch <= tol { ResonanceStatus::Resonant } else { ResonanceStatus::WeaklyResonant };
    Ok(ResonanceVerdict { status, edges, phase_mismatch: mismatch })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{ControlGrid, TimeGrid};
    use crate::linalg::CVector;
    use crate::resonance::transform::{resonance_transform, TransformOptions};
    use crate::system::Edge;
    use std::f64::consts::PI;

    const EPS: f64 = 1e-6;
    const TOL: f64 = 1e-9;

    fn basis(n: usize, j: usize) -> CVector {
        let mut v = CVector::zeros(n);
        v[j] = Complex64::new(1.0, 0.0);
        v
    }

    #[test]
    fn real_pair_is_resonant() {
        let sys = LevelSystem::ladder(vec![0.0; 3]);
        let g = TimeGrid::new(1.0, 50).unwrap();
        let u = ControlGrid::real_from_fn(g, &sys, |i, e| 0.3 + 0.1 * e as f64 + 0.01 * i as f64);
        let psi0 = CVector::from_vec(vec![Complex64::new(0.8, 0.0), Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.0)]);
        let pair = AdmissiblePair::from_control(&sys, u, &psi0).unwrap();
        assert_eq!(classify_resonance(&sys, &pair, EPS, TOL).unwrap().status, ResonanceStatus::Resonant);
    }

    #[test]
    fn phase_jump_after_a_zero_is_only_weakly_resonant() {
        let sys = LevelSystem::new(vec![0.0, 0.0], vec![Edge::new(0, 1, 1.0)]);
        let g = TimeGrid::new(PI, 400).unwrap();
        let h = ControlGrid::from_fn(g, Flavor::SkewH, &sys, |i, _| {
            if i < 200 {
                Complex64::new(-1.0, 0.0)
            } else {
                -Complex64::from_polar(1.0, 0.9)
            }
        });
        let pair = AdmissiblePair::from_control(&sys, h, &basis(2, 0)).unwrap();
        let verdict = classify_resonance(&sys, &pair, EPS, TOL).unwrap();
        assert_eq!(verdict.status, ResonanceStatus::WeaklyResonant);
        assert_eq!(verdict.edges[0].intervals, 2);
    }

    #[test]
    fn rotating_phase_is_neither() {
        let sys = LevelSystem::new(vec![0.0, 0.0], vec![Edge::new(0, 1, 1.0)]);
        let g = TimeGrid::new(1.0, 100).unwrap();
        let h = ControlGrid::from_fn(g, Flavor::SkewH, &sys, |i, _| -Complex64::from_polar(1.0, 3.0 * g.midpoint(i)));
        let pair = AdmissiblePair::from_control(&sys, h, &basis(2, 0)).unwrap();
        assert_eq!(classify_resonance(&sys, &pair, EPS, TOL).unwrap().status, ResonanceStatus::Neither);
    }

    #[test]
    fn transform_output_is_resonant() {
        let sys = LevelSystem::ladder(vec![0.0; 3]);
        let g = TimeGrid::new(1.0, 200).unwrap();
        let h = ControlGrid::from_fn(g, Flavor::SkewH, &sys, |i, e| Complex64::from_polar(0.9, 1.7 * g.midpoint(i) - e as f64));
        let pair = AdmissiblePair::from_control(&sys, h, &basis(3, 0)).unwrap();
        let out = resonance_transform(&sys, &pair, TransformOptions::default()).unwrap();
        let verdict = classify_resonance(&sys, &out.pair, EPS, TOL).unwrap();
        assert_eq!(verdict.status, ResonanceStatus::Resonant, "{verdict:?}");
    }

    #[test]
    fn drift_controls_are_classified_in_the_interaction_picture() {
        let sys = LevelSystem::new(vec![0.0, 1.5], vec![Edge::new(0, 1, 1.0)]);
        let g = TimeGrid::new(1.0, 100).unwrap();
        let h = ControlGrid::from_fn(g, Flavor::SkewH, &sys, |_, _| Complex64::new(-0.8, 0.0));
        let v = crate::dynamics::restore_drift(&sys, &h).unwrap();
        let pair = AdmissiblePair::from_control(&sys, v, &basis(2, 0)).unwrap();
        assert_eq!(classify_resonance(&sys, &pair, EPS, TOL).unwrap().status, ResonanceStatus::Resonant);
    }
}
