//! The n-level system: energies, coupling graph, coupling strengths and bounds.

use std::collections::VecDeque;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

/// A coupling between two levels. Indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub j: usize,
    pub k: usize,
    /// Coupling strength `mu_{j,k} > 0`.
    pub mu: f64,
    /// Control-modulus bound, `f64::INFINITY` when unconstrained.
    pub bound: f64,
}

impl Edge {
    pub fn new(j: usize, k: usize, mu: f64) -> Self {
        Edge { j, k, mu, bound: f64::INFINITY }
    }

    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = bound;
        self
    }

    /// The unordered pair as `(min, max)`.
    pub fn key(&self) -> (usize, usize) {
        (self.j.min(self.k), self.j.max(self.k))
    }

    pub fn touches(&self, level: usize) -> bool {
        self.j == level || self.k == level
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSystem {
    pub n: usize,
    pub energies: Vec<f64>,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    LevelCount { n: usize },
    EnergyCount { expected: usize, got: usize },
    NonFiniteEnergy { level: usize },
    SelfLoop { level: usize },
    IndexOutOfRange { j: usize, k: usize },
    DuplicateEdge { j: usize, k: usize },
    NonPositiveCoupling { j: usize, k: usize },
    NonPositiveBound { j: usize, k: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LevelCount { n } => write!(f, "level count: n = {n} < 2"),
            Violation::EnergyCount { expected, got } => {
                write!(f, "energy count: expected {expected}, got {got}")
            }
            Violation::NonFiniteEnergy { level } => write!(f, "non-finite energy at level {}", level + 1),
            Violation::SelfLoop { level } => write!(f, "self-loop at level {}", level + 1),
            Violation::IndexOutOfRange { j, k } => {
                write!(f, "index out of range in edge {{{},{}}}", j + 1, k + 1)
            }
            Violation::DuplicateEdge { j, k } => write!(f, "duplicate edge {{{},{}}}", j + 1, k + 1),
            Violation::NonPositiveCoupling { j, k } => {
                write!(f, "non-positive coupling on edge {{{},{}}}", j + 1, k + 1)
            }
            Violation::NonPositiveBound { j, k } => {
                write!(f, "non-positive bound on edge {{{},{}}}", j + 1, k + 1)
            }
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::InvalidSystem(self.violations.iter().map(|v| v.to_string()).collect()))
        }
    }
}

impl LevelSystem {
    pub fn new(energies: Vec<f64>, edges: Vec<Edge>) -> Self {
        LevelSystem { n: energies.len(), energies, edges }
    }

    /// The ladder system with couplings `{j, j+1}` and unit strengths.
    pub fn ladder(energies: Vec<f64>) -> Self {
        let n = energies.len();
        let edges = (0..n.saturating_sub(1)).map(|j| Edge::new(j, j + 1, 1.0)).collect();
        LevelSystem { n, energies, edges }
    }

    pub fn edge_index(&self, j: usize, k: usize) -> Option<usize> {
        let key = (j.min(k), j.max(k));
        self.edges.iter().position(|e| e.key() == key)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        if self.n < 2 {
            report.violations.push(Violation::LevelCount { n: self.n });
        }
        if self.energies.len() != self.n {
            report
                .violations
                .push(Violation::EnergyCount { expected: self.n, got: self.energies.len() });
        }
        for (level, e) in self.energies.iter().enumerate() {
            if !e.is_finite() {
                report.violations.push(Violation::NonFiniteEnergy { level });
            }
        }
        let mut seen = Vec::new();
        for e in &self.edges {
            if e.j == e.k {
                report.violations.push(Violation::SelfLoop { level: e.j });
            } else if e.j >= self.n || e.k >= self.n {
                report.violations.push(Violation::IndexOutOfRange { j: e.j, k: e.k });
            } else if seen.contains(&e.key()) {
                report.violations.push(Violation::DuplicateEdge { j: e.j, k: e.k });
            } else {
                seen.push(e.key());
            }
            if !(e.mu > 0.0) {
                report.violations.push(Violation::NonPositiveCoupling { j: e.j, k: e.k });
            }
            if !(e.bound > 0.0) {
                report.violations.push(Violation::NonPositiveBound { j: e.j, k: e.k });
            }
        }
        for e in &self.edges {
            if e.j < self.energies.len()
                && e.k < self.energies.len()
                && e.j != e.k
                && self.energies[e.j] == self.energies[e.k]
            {
                report.warnings.push(format!(
                    "levels {} and {} have coinciding energies",
                    e.j + 1,
                    e.k + 1
                ));
            }
        }
        report
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            if e.j < self.n && e.k < self.n && e.j != e.k {
                adj[e.j].push(e.k);
                adj[e.k].push(e.j);
            }
        }
        adj
    }

    /// Partition of the levels into maximal connected sets, each sorted,
    /// ordered by smallest member.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        components_of(self.n, &self.adjacency(), |_| true)
    }

    pub fn is_controllable(&self) -> bool {
        self.connected_components().len() == 1
    }

    pub fn drift(&self) -> DMatrix<Complex64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.n,
            self.energies.iter().map(|&e| Complex64::new(e, 0.0)),
        ))
    }
}

/// Connected components of the subgraph induced by the levels accepted by
/// `keep`, via breadth-first search.
pub(crate) fn components_of(
    n: usize,
    adj: &[Vec<usize>],
    keep: impl Fn(usize) -> bool,
) -> Vec<Vec<usize>> {
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] || !keep(start) {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] && keep(w) {
                    seen[w] = true;
                    comp.push(w);
                    queue.push_back(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

pub const LIE_ORACLE_MAX_N: usize = 6;

#[derive(Debug, Clone, Serialize)]
pub struct LieRank {
    /// Real dimension of the Lie algebra generated by the edge generators.
    pub algebra_dim: usize,
    /// Rank of the algebra evaluated at a generic state, phase direction removed.
    pub orbit_rank: usize,
    /// Whether the action is transitive on the sphere up to global phase.
    pub transitive: bool,
}

/// Brute-force bracket closure of the edge generators, then an evaluation
/// test at a generic point of the sphere.
pub fn lie_rank_oracle(sys: &LevelSystem) -> Result<LieRank> {
    let n = sys.n;
    if n > LIE_ORACLE_MAX_N {
        return Err(Error::DimensionExceeded { n, max: LIE_ORACLE_MAX_N });
    }
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let mut gens = Vec::new();
    for e in &sys.edges {
        let mut x = CMatrix::zeros(n, n);
        x[(e.j, e.k)] = one;
        x[(e.k, e.j)] = -one;
        let mut y = CMatrix::zeros(n, n);
        y[(e.j, e.k)] = i;
        y[(e.k, e.j)] = i;
        gens.push(x);
        gens.push(y);
    }

    let mut basis = SpanBasis::new(1e-9);
    let mut frontier: Vec<CMatrix> = gens.into_iter().filter_map(|g| basis.insert(g)).collect();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        let snapshot: Vec<CMatrix> = basis.elements.clone();
        for a in &frontier {
            for b in &snapshot {
                let c = a * b - b * a;
                if let Some(added) = basis.insert(c) {
                    next.push(added);
                }
            }
        }
        frontier = next;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1e5);
    let psi = {
        let v = linalg::CVector::from_fn(n, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let norm = linalg::complex_norm(&v);
        v / Complex64::new(norm, 0.0)
    };
    let phase_dir = to_real(&(&psi * i));
    let phase_dir = &phase_dir / phase_dir.norm();
    let cols: Vec<nalgebra::DVector<f64>> = basis
        .elements
        .iter()
        .map(|a| {
            let v = to_real(&(a * &psi));
            let proj = v.dot(&phase_dir);
            v - &phase_dir * proj
        })
        .collect();
    let orbit_rank = if cols.is_empty() {
        0
    } else {
        linalg::rank(&DMatrix::from_columns(&cols), 1e-9)
    };
    Ok(LieRank {
        algebra_dim: basis.elements.len(),
        orbit_rank,
        transitive: orbit_rank >= 2 * n - 2,
    })
}

fn to_real(v: &linalg::CVector) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_iterator(2 * v.len(), v.iter().flat_map(|z| [z.re, z.im]))
}

/// Orthonormal basis (in the real Frobenius inner product) of a span of
/// complex matrices.
struct SpanBasis {
    tol: f64,
    elements: Vec<CMatrix>,
    ortho: Vec<CMatrix>,
}

impl SpanBasis {
    fn new(tol: f64) -> Self {
        SpanBasis { tol, elements: Vec::new(), ortho: Vec::new() }
    }

    fn inner(a: &CMatrix, b: &CMatrix) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
    }

    /// Adds `m` if it is independent of the current span; returns the
    /// normalized new element.
    fn insert(&mut self, m: CMatrix) -> Option<CMatrix> {
        let norm = Self::inner(&m, &m).sqrt();
        if norm <= self.tol {
            return None;
        }
        let mut r = m / Complex64::new(norm, 0.0);
        for _ in 0..2 {
            for q in &self.ortho {
                let c = Self::inner(&r, q);
                r -= q * Complex64::new(c, 0.0);
            }
        }
        let rn = Self::inner(&r, &r).sqrt();
        if rn <= self.tol {
            return None;
        }
        let q = r / Complex64::new(rn, 0.0);
        self.ortho.push(q.clone());
        self.elements.push(q.clone());
        Some(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(n: usize, pairs: &[(usize, usize)]) -> LevelSystem {
        LevelSystem::new(
            vec![0.0; n],
            pairs.iter().map(|&(j, k)| Edge::new(j - 1, k - 1, 1.0)).collect(),
        )
    }

    #[test]
    fn minimal_system_is_valid() {
        assert!(sys(2, &[(1, 2)]).validate().is_ok());
    }

    #[test]
    fn self_loop_and_zero_coupling_are_reported() {
        let r = sys(2, &[(1, 1)]).validate();
        assert!(r.violations.iter().any(|v| v.to_string().contains("self-loop")));
        let mut s = sys(2, &[(1, 2)]);
        s.edges[0].mu = 0.0;
        let r = s.validate();
        assert!(r.violations.iter().any(|v| v.to_string().contains("non-positive coupling")));
    }

    #[test]
    fn duplicate_edges_and_bad_bounds() {
        let mut s = sys(3, &[(1, 2), (2, 1)]);
        assert!(matches!(s.validate().violations[0], Violation::DuplicateEdge { .. }));
        s.edges.pop();
        s.edges[0].bound = -1.0;
        assert!(matches!(s.validate().violations[0], Violation::NonPositiveBound { .. }));
    }

    #[test]
    fn coinciding_energies_only_warn() {
        let r = sys(2, &[(1, 2)]).validate();
        assert!(r.is_ok());
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn components() {
        assert_eq!(sys(3, &[(1, 2), (2, 3)]).connected_components(), vec![vec![0, 1, 2]]);
        assert_eq!(sys(3, &[(1, 2)]).connected_components(), vec![vec![0, 1], vec![2]]);
        assert_eq!(
            sys(4, &[(1, 2), (3, 4)]).connected_components(),
            vec![vec![0, 1], vec![2, 3]]
        );
    }

    #[test]
    fn controllability_examples() {
        assert!(sys(3, &[(1, 2), (2, 3)]).is_controllable());
        assert!(!sys(3, &[(1, 2)]).is_controllable());
        assert!(sys(2, &[(1, 2)]).is_controllable());
    }

    #[test]
    fn lie_oracle_examples() {
        let two = lie_rank_oracle(&sys(2, &[(1, 2)])).unwrap();
        assert_eq!(two.algebra_dim, 3);
        assert!(two.transitive);

        let partial = lie_rank_oracle(&sys(3, &[(1, 2)])).unwrap();
        assert!(partial.algebra_dim < 8);
        assert!(!partial.transitive);

        let ladder = lie_rank_oracle(&sys(3, &[(1, 2), (2, 3)])).unwrap();
        assert_eq!(ladder.algebra_dim, 8);
        assert!(ladder.transitive);

        assert!(matches!(
            lie_rank_oracle(&LevelSystem::ladder(vec![0.0; 7])),
            Err(Error::DimensionExceeded { .. })
        ));
    }
}
