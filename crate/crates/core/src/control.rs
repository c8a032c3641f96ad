//! Time grids and piecewise-constant control schedules.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::system::LevelSystem;

/// Uniform grid on `[0, T]` with nodes `t_i = i T / N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_final: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::GridMismatch(format!("final time must be positive, got {t_final}")));
        }
        if steps == 0 {
            return Err(Error::GridMismatch("step count must be at least 1".into()));
        }
        Ok(TimeGrid { t_final, steps })
    }

    /// Step count such that `max_rate * dt <= max_phase`, at least `min_steps`.
    pub fn resolving(t_final: f64, max_rate: f64, max_phase: f64, min_steps: usize) -> Result<Self> {
        let needed = (t_final * max_rate / max_phase).ceil() as usize;
        TimeGrid::new(t_final, needed.max(min_steps).max(1))
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn nodes(&self) -> usize {
        self.steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.t_final * i as f64 / self.steps as f64
    }

    pub fn midpoint(&self, step: usize) -> f64 {
        self.t_final * (step as f64 + 0.5) / self.steps as f64
    }

    /// Index of the node closest to `t`, clamped to the grid.
    pub fn nearest_node(&self, t: f64) -> usize {
        ((t / self.dt()).round().max(0.0) as usize).min(self.steps)
    }

    pub fn same_as(&self, other: &TimeGrid) -> bool {
        self.steps == other.steps && (self.t_final - other.t_final).abs() <= 1e-12 * self.t_final
    }

    pub fn ensure_same(&self, other: &TimeGrid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "(T={}, N={}) vs (T={}, N={})",
                self.t_final, self.steps, other.t_final, other.steps
            )))
        }
    }

    /// The same step count on `[0, t_final]`.
    pub fn rescaled(&self, t_final: f64) -> Result<Self> {
        TimeGrid::new(t_final, self.steps)
    }
}

/// Which of the three control representations a grid carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flavor {
    /// Hermitian coupling `V` of the Hamiltonian with drift.
    #[serde(rename = "V")]
    HermitianV,
    /// Skew-Hermitian generator `H` of the drift-free system.
    #[serde(rename = "H")]
    SkewH,
    /// Real antisymmetric generator `U` of the reduced real system.
    #[serde(rename = "U")]
    RealU,
}

impl Flavor {
    pub fn code(self) -> &'static str {
        match self {
            Flavor::HermitianV => "V",
            Flavor::SkewH => "H",
            Flavor::RealU => "U",
        }
    }

    /// The `(k, j)` entry given the `(j, k)` entry.
    pub fn mirror(self, z: Complex64) -> Complex64 {
        match self {
            Flavor::HermitianV => z.conj(),
            Flavor::SkewH => -z.conj(),
            Flavor::RealU => -z,
        }
    }
}

/// Piecewise-constant controls: one value per step and per edge.
///
/// Only the upper entry `(j, k)` with `j < k` is stored; the lower entry
/// follows from the flavor's symmetry, and entries off the coupling graph
/// are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlGrid {
    pub grid: TimeGrid,
    pub flavor: Flavor,
    pub edges: Vec<(usize, usize)>,
    /// `values[step][edge]`.
    pub values: Vec<Vec<Complex64>>,
}

impl ControlGrid {
    pub fn zeros(grid: TimeGrid, flavor: Flavor, sys: &LevelSystem) -> Self {
        let edges: Vec<_> = sys.edges.iter().map(|e| e.key()).collect();
        let values = vec![vec![Complex64::new(0.0, 0.0); edges.len()]; grid.steps()];
        ControlGrid { grid, flavor, edges, values }
    }

    /// Fills every step with `f(step, edge_index)`.
    pub fn from_fn(
        grid: TimeGrid,
        flavor: Flavor,
        sys: &LevelSystem,
        mut f: impl FnMut(usize, usize) -> Complex64,
    ) -> Self {
        let mut c = ControlGrid::zeros(grid, flavor, sys);
        for (i, row) in c.values.iter_mut().enumerate() {
            for (e, v) in row.iter_mut().enumerate() {
                *v = f(i, e);
            }
        }
        c
    }

    /// Real controls from `f(step, edge_index)`.
    pub fn real_from_fn(
        grid: TimeGrid,
        sys: &LevelSystem,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Self {
        Self::from_fn(grid, Flavor::RealU, sys, |i, e| Complex64::new(f(i, e), 0.0))
    }

    /// Builds a grid from full matrices, checking the flavor's symmetry,
    /// the zero diagonal and that off-graph entries vanish.
    pub fn from_matrices(
        grid: TimeGrid,
        flavor: Flavor,
        sys: &LevelSystem,
        mats: &[CMatrix],
    ) -> Result<Self> {
        if mats.len() != grid.steps() {
            return Err(Error::GridMismatch(format!(
                "{} matrices for {} steps",
                mats.len(),
                grid.steps()
            )));
        }
        let mut c = ControlGrid::zeros(grid, flavor, sys);
        let tol = 1e-12;
        for (i, m) in mats.iter().enumerate() {
            if m.nrows() != sys.n || m.ncols() != sys.n {
                return Err(Error::DimensionMismatch(format!("control matrix at step {i}")));
            }
            for a in 0..sys.n {
                if m[(a, a)].norm() > tol {
                    return Err(invalid(flavor, format!("nonzero diagonal at step {i}, level {}", a + 1)));
                }
                for b in (a + 1)..sys.n {
                    let upper = m[(a, b)];
                    let lower = m[(b, a)];
                    if (lower - flavor.mirror(upper)).norm() > tol * (1.0 + upper.norm()) {
                        return Err(invalid(
                            flavor,
                            format!("entries ({},{}) and ({},{}) at step {i}", a + 1, b + 1, b + 1, a + 1),
                        ));
                    }
                    match sys.edge_index(a, b) {
                        Some(e) => c.values[i][e] = upper,
                        None if upper.norm() > tol => {
                            return Err(Error::InvalidControl {
                                invariant: "off-edge",
                                detail: format!("entry ({},{}) at step {i} is not a coupling", a + 1, b + 1),
                            })
                        }
                        None => {}
                    }
                }
            }
        }
        c.check(sys)?;
        Ok(c)
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn value(&self, step: usize, edge: usize) -> Complex64 {
        self.values[step][edge]
    }

    /// Full `n x n` matrix for one step.
    pub fn assemble(&self, step: usize, n: usize) -> CMatrix {
        let mut m = CMatrix::zeros(n, n);
        for (e, &(j, k)) in self.edges.iter().enumerate() {
            let z = self.values[step][e];
            m[(j, k)] = z;
            m[(k, j)] = self.flavor.mirror(z);
        }
        m
    }

    /// Real antisymmetric matrix for one step of a `RealU` grid.
    pub fn assemble_real(&self, step: usize, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        for (e, &(j, k)) in self.edges.iter().enumerate() {
            let u = self.values[step][e].re;
            m[(j, k)] = u;
            m[(k, j)] = -u;
        }
        m
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Checks the control against the system's coupling graph and bounds.
    pub fn check(&self, sys: &LevelSystem) -> Result<()> {
        let expected: Vec<_> = sys.edges.iter().map(|e| e.key()).collect();
        if self.edges != expected {
            return Err(Error::InvalidControl {
                invariant: "edge-set",
                detail: "control edges do not match the coupling graph".into(),
            });
        }
        if self.values.len() != self.grid.steps() {
            return Err(Error::GridMismatch(format!(
                "{} value rows for {} steps",
                self.values.len(),
                self.grid.steps()
            )));
        }
        for (i, row) in self.values.iter().enumerate() {
            if row.len() != self.edges.len() {
                return Err(Error::DimensionMismatch(format!("value row {i} has wrong length")));
            }
            for (e, z) in row.iter().enumerate() {
                let (j, k) = self.edges[e];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(invalid(self.flavor, format!("non-finite value on ({},{}) at step {i}", j + 1, k + 1)));
                }
                if self.flavor == Flavor::RealU && z.im != 0.0 {
                    return Err(invalid(self.flavor, format!("imaginary part on ({},{}) at step {i}", j + 1, k + 1)));
                }
                let bound = sys.edges[e].bound;
                if bound.is_finite() && z.norm() > bound * (1.0 + 1e-12) {
                    return Err(Error::InvalidControl {
                        invariant: "bound",
                        detail: format!(
                            "|c| = {} exceeds bound {} on ({},{}) at step {i}",
                            z.norm(),
                            bound,
                            j + 1,
                            k + 1
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    /// Embeds a real control into the skew-Hermitian flavor (same matrices).
    pub fn to_skew(&self) -> ControlGrid {
        let mut c = self.clone();
        if self.flavor == Flavor::RealU {
            c.flavor = Flavor::SkewH;
        }
        c
    }

    /// Same values on a grid with the same step count and final time `t_final`,
    /// scaled by `scale`.
    pub fn rescaled(&self, t_final: f64, scale: f64) -> Result<ControlGrid> {
        let mut c = self.clone();
        c.grid = self.grid.rescaled(t_final)?;
        for z in c.values.iter_mut().flatten() {
            *z *= scale;
        }
        Ok(c)
    }
}

fn invalid(flavor: Flavor, detail: String) -> Error {
    let invariant = match flavor {
        Flavor::HermitianV => "hermitian",
        Flavor::SkewH => "skew-hermitian",
        Flavor::RealU => "real-antisymmetric",
    };
    Error::InvalidControl { invariant, detail }
}
