use num_complex::Complex64;

use crate::control::Flavor;
use crate::dynamics::AdmissiblePair;
use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::system::LevelSystem;

/// Rotates level phases: `psi_j -> psi_j e^{i alpha_j}` and
/// `H_{j,k} -> H_{j,k} e^{i(alpha_j - alpha_k)}`. The result is again an
/// admissible pair, with the same moduli and cost.
pub fn rot_alpha(sys: &LevelSystem, pair: &AdmissiblePair, alpha: &[f64]) -> Result<AdmissiblePair> {
    if alpha.len() != sys.n {
        return Err(Error::DimensionMismatch(format!("{} angles for {} levels", alpha.len(), sys.n)));
    }
    let mut control = pair.control.clone();
    if control.flavor == Flavor::RealU && alpha.iter().any(|&a| a != alpha[0]) {
        control.flavor = Flavor::SkewH;
    }
    let shifts: Vec<Complex64> = control
        .edges
        .iter()
        .map(|&(j, k)| Complex64::from_polar(1.0, alpha[j] - alpha[k]))
        .collect();
    for row in control.values.iter_mut() {
        for (z, s) in row.iter_mut().zip(&shifts) {
            *z *= s;
        }
    }
    let phase: Vec<Complex64> = alpha.iter().map(|&a| Complex64::from_polar(1.0, a)).collect();
    let mut trajectory = pair.trajectory.clone();
    for state in trajectory.states.iter_mut() {
        for (z, p) in state.iter_mut().zip(&phase) {
            *z *= p;
        }
    }
    trajectory.real = trajectory.real && control.flavor == Flavor::RealU && alpha.iter().all(|&a| a == 0.0);
    Ok(AdmissiblePair { trajectory, control })
}

/// Phases that make a pair start at `psi1` and end at `psi2` when `psi1`
/// and `psi2` have disjoint supports and the pair's endpoint moduli match.
///
/// Returns the rotated pair and the angles used.
pub fn eigenstate_bridge(
    sys: &LevelSystem,
    pair: &AdmissiblePair,
    psi1: &CVector,
    psi2: &CVector,
    epsilon: f64,
) -> Result<(AdmissiblePair, Vec<f64>)> {
    let n = sys.n;
    if psi1.len() != n || psi2.len() != n {
        return Err(Error::DimensionMismatch("bridge states must have one entry per level".into()));
    }
    for j in 0..n {
        if psi1[j].norm() > epsilon && psi2[j].norm() > epsilon {
            return Err(Error::SupportOverlap { level: j, product: psi1[j].norm() * psi2[j].norm() });
        }
    }
    let start = pair.trajectory.initial();
    let end = pair.trajectory.last();
    let deviation = (0..n)
        .map(|j| (start[j].norm() - psi1[j].norm()).abs().max((end[j].norm() - psi2[j].norm()).abs()))
        .fold(0.0, f64::max);
    if deviation > 1e-6 {
        return Err(Error::EndpointMismatch(deviation));
    }
    let alpha: Vec<f64> = (0..n)
        .map(|j| {
            if psi1[j].norm() > epsilon {
                psi1[j].arg() - start[j].arg()
            } else if psi2[j].norm() > epsilon {
                psi2[j].arg() - end[j].arg()
            } else {
                0.0
            }
        })
        .collect();
    Ok((rot_alpha(sys, pair, &alpha)?, alpha))
}
