//! Source and target sets, described by conditions on the moduli.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A subset of the population simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BoundarySpec {
    /// A single point `a` with `a_i >= 0` and `sum a_i = 1` (populations).
    ModuliPoint { moduli: Vec<f64> },
    /// `|psi_index| = 1`. The index is zero-based in memory, one-based on disk.
    Eigenstate { index: usize },
    /// The populations of the listed levels are prescribed, the rest are free.
    ModuliSet {
        fixed: Vec<(usize, f64)>,
        #[serde(default)]
        description: String,
    },
}

impl BoundarySpec {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            BoundarySpec::ModuliPoint { moduli } => {
                if moduli.len() != n {
                    return Err(Error::InvalidBoundary(format!("{} moduli for {n} levels", moduli.len())));
                }
                if moduli.iter().any(|&a| !(a >= 0.0)) {
                    return Err(Error::InvalidBoundary("negative population".into()));
                }
                let sum: f64 = moduli.iter().sum();
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidBoundary(format!("populations sum to {sum}")));
                }
            }
            BoundarySpec::Eigenstate { index } => {
                if *index >= n {
                    return Err(Error::InvalidBoundary(format!("eigenstate {} out of range", index + 1)));
                }
            }
            BoundarySpec::ModuliSet { fixed, .. } => {
                let mut sum = 0.0;
                for &(j, a) in fixed {
                    if j >= n || !(a >= 0.0) {
                        return Err(Error::InvalidBoundary(format!("bad entry for level {}", j + 1)));
                    }
                    sum += a;
                }
                if sum > 1.0 + 1e-12 {
                    return Err(Error::InvalidBoundary(format!("prescribed populations sum to {sum}")));
                }
                if fixed.len() == n && (sum - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidBoundary(format!("populations sum to {sum}")));
                }
            }
        }
        Ok(())
    }

    /// Prescribed populations `(level, a_level)`.
    pub fn constraints(&self, n: usize) -> Vec<(usize, f64)> {
        match self {
            BoundarySpec::ModuliPoint { moduli } => moduli.iter().copied().enumerate().collect(),
            BoundarySpec::Eigenstate { index } => {
                (0..n).map(|j| (j, if j == *index { 1.0 } else { 0.0 })).collect()
            }
            BoundarySpec::ModuliSet { fixed, .. } => fixed.clone(),
        }
    }

    /// The nonnegative real representative `sqrt(a)` of a point set.
    pub fn point(&self, n: usize) -> Option<DVector<f64>> {
        match self {
            BoundarySpec::ModuliPoint { moduli } => Some(DVector::from_iterator(n, moduli.iter().map(|a| a.sqrt()))),
            BoundarySpec::Eigenstate { index } => {
                let mut v = DVector::zeros(n);
                v[*index] = 1.0;
                Some(v)
            }
            BoundarySpec::ModuliSet { .. } => None,
        }
    }

    /// Levels whose population is not prescribed.
    pub fn free_levels(&self, n: usize) -> Vec<usize> {
        let fixed: Vec<usize> = self.constraints(n).iter().map(|&(j, _)| j).collect();
        (0..n).filter(|j| !fixed.contains(j)).collect()
    }

    /// Largest `| |rho_j| - sqrt(a_j) |` over prescribed levels.
    pub fn violation(&self, rho: &DVector<f64>) -> f64 {
        self.constraints(rho.len())
            .iter()
            .map(|&(j, a)| (rho[j].abs() - a.sqrt()).abs())
            .fold(0.0, f64::max)
    }
}
