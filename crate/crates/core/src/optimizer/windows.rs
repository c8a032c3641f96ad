//! Clean windows, index partitions and the per-window test for strictly
//! abnormal extremals of the reduced problem.
//!
//! On a clean window every coordinate either stays below `epsilon` or keeps
//! a fixed sign. The vanishing coordinates form `I`; the others split into
//! classes linked by edges, and the squared norm of each class is conserved.
//! The state then lives on a product of spheres, and the extremal cannot be
//! strictly abnormal there when the control fields span its tangent space.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::boundary::BoundarySpec;
use crate::control::{ControlGrid, Flavor, TimeGrid};
use crate::costs::{CostKind, CostSpec};
use crate::dynamics::{AdmissiblePair, StateTrajectory};
use crate::error::{Error, Result};
use crate::linalg;
use crate::optimizer::pmp::{build_lift, pmp_residual, transport, LiftScale, PmpReport};
use crate::optimizer::transcription::real_pair_parts;
use crate::system::{Edge, LevelSystem};

/// Allowed drift of a class norm inside a window.
pub const CLASS_NORM_TOL: f64 = 1e-8;
/// Relative singular-value threshold for field ranks.
pub const RANK_TOL: f64 = 1e-9;
/// Largest residual accepted for an extended lift.
pub const LIFT_TOL: f64 = 1e-4;

/// Inclusive range of grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Window {
    pub first: usize,
    pub last: usize,
}

impl Window {
    pub fn new(first: usize, last: usize) -> Self {
        Window { first, last }
    }

    pub fn nodes(&self) -> usize {
        self.last + 1 - self.first
    }

    pub fn contains(&self, node: usize) -> bool {
        (self.first..=self.last).contains(&node)
    }

    pub fn times(&self, grid: &TimeGrid) -> (f64, f64) {
        (grid.node(self.first), grid.node(self.last))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexPartition {
    pub window: Window,
    pub epsilon: f64,
    /// Levels that stay below `epsilon`.
    pub vanishing: Vec<usize>,
    /// Levels bounded away from zero.
    pub nonvanishing: Vec<usize>,
    /// Components of the coupling graph restricted to the nonvanishing levels.
    pub classes: Vec<Vec<usize>>,
    /// `M_l = m_1 + ... + m_l`.
    pub offsets: Vec<usize>,
    /// Class radii at the window start.
    pub radii: Vec<f64>,
}

impl IndexPartition {
    pub fn sizes(&self) -> Vec<usize> {
        self.classes.iter().map(|c| c.len()).collect()
    }

    /// Dimension of the product of class spheres.
    pub fn manifold_dim(&self) -> usize {
        self.classes.iter().map(|c| c.len() - 1).sum()
    }

    pub fn class_of(&self, level: usize) -> Option<usize> {
        self.classes.iter().position(|c| c.contains(&level))
    }

    /// Edges with both ends in one class.
    pub fn class_edges(&self, sys: &LevelSystem) -> Vec<usize> {
        (0..sys.edges.len())
            .filter(|&e| {
                let Edge { j, k, .. } = sys.edges[e];
                matches!((self.class_of(j), self.class_of(k)), (Some(a), Some(b)) if a == b)
            })
            .collect()
    }
}

fn require_real(traj: &StateTrajectory) -> Result<()> {
    if traj.real {
        Ok(())
    } else {
        Err(Error::InvalidState("window analysis needs a real trajectory".into()))
    }
}

/// `-1`, `0` or `+1` per level at one node.
fn signature(traj: &StateTrajectory, node: usize, epsilon: f64) -> Vec<i8> {
    traj.states[node]
        .iter()
        .map(|z| if z.re.abs() <= epsilon { 0 } else if z.re > 0.0 { 1 } else { -1 })
        .collect()
}

/// Maximal runs of nodes sharing one signature, as windows of two or more nodes.
pub fn clean_windows(traj: &StateTrajectory, epsilon: f64) -> Result<Vec<Window>> {
    require_real(traj)?;
    let mut out = Vec::new();
    let mut start = 0;
    let mut current = signature(traj, 0, epsilon);
    for i in 1..traj.states.len() {
        let s = signature(traj, i, epsilon);
        if s != current {
            if i - 1 > start {
                out.push(Window::new(start, i - 1));
            }
            start = i;
            current = s;
        }
    }
    if traj.states.len() - 1 > start {
        out.push(Window::new(start, traj.states.len() - 1));
    }
    Ok(out)
}

fn classes_on(sys: &LevelSystem, levels: &[usize]) -> Vec<Vec<usize>> {
    let adj = sys.adjacency();
    let mut seen = vec![false; sys.n];
    let mut classes = Vec::new();
    for &start in levels {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut class = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(a) = queue.pop_front() {
            for &b in &adj[a] {
                if !seen[b] && levels.contains(&b) {
                    seen[b] = true;
                    class.push(b);
                    queue.push_back(b);
                }
            }
        }
        class.sort_unstable();
        classes.push(class);
    }
    classes
}

/// Splits the levels on a window into vanishing and nonvanishing ones and
/// groups the latter into classes, checking that class norms are conserved.
pub fn partition_indexes(sys: &LevelSystem, traj: &StateTrajectory, window: Window, epsilon: f64) -> Result<IndexPartition> {
    require_real(traj)?;
    if window.first > window.last || window.last >= traj.states.len() {
        return Err(Error::GridMismatch(format!(
            "window {}..={} outside {} nodes",
            window.first,
            window.last,
            traj.states.len()
        )));
    }
    let mut vanishing = Vec::new();
    let mut nonvanishing = Vec::new();
    for j in 0..sys.n {
        let values: Vec<f64> = (window.first..=window.last).map(|i| traj.states[i][j].re).collect();
        let max = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let positive = values.iter().all(|&v| v > epsilon);
        let negative = values.iter().all(|&v| v < -epsilon);
        if max <= epsilon {
            vanishing.push(j);
        } else if positive || negative {
            nonvanishing.push(j);
        } else {
            return Err(Error::MixedWindow { level: j });
        }
    }
    let classes = classes_on(sys, &nonvanishing);
    let class_norm = |class: &[usize], i: usize| class.iter().map(|&j| traj.states[i][j].re.powi(2)).sum::<f64>();
    let mut drift: f64 = 0.0;
    for class in &classes {
        let start = class_norm(class, window.first);
        for i in window.first..=window.last {
            drift = drift.max((class_norm(class, i) - start).abs());
        }
    }
    if drift > CLASS_NORM_TOL {
        return Err(Error::ClassNormDrift { drift });
    }
    let offsets = classes
        .iter()
        .scan(0, |acc, c| {
            *acc += c.len();
            Some(*acc)
        })
        .collect();
    let radii = classes.iter().map(|c| class_norm(c, window.first).sqrt()).collect();
    Ok(IndexPartition { window, epsilon, vanishing, nonvanishing, classes, offsets, radii })
}

/// A window of at least two nodes near `t` on which [`partition_indexes`]
/// succeeds: the longest clean run through the nearest node, else the
/// longer clean run next to it, shrunk around `t` if class norms drift.
pub fn find_clean_window(sys: &LevelSystem, traj: &StateTrajectory, t: f64, epsilon: f64) -> Result<Window> {
    require_real(traj)?;
    let nodes = traj.states.len();
    let center = traj.grid.nearest_node(t);
    let run_through = |i: usize| {
        let s = signature(traj, i, epsilon);
        let mut a = i;
        while a > 0 && signature(traj, a - 1, epsilon) == s {
            a -= 1;
        }
        let mut b = i;
        while b + 1 < nodes && signature(traj, b + 1, epsilon) == s {
            b += 1;
        }
        Window::new(a, b)
    };
    let mut candidates = vec![run_through(center)];
    if candidates[0].nodes() < 2 {
        candidates.clear();
        if center > 0 {
            candidates.push(run_through(center - 1));
        }
        if center + 1 < nodes {
            candidates.push(run_through(center + 1));
        }
        candidates.retain(|w| w.nodes() >= 2);
        candidates.sort_by_key(|w| std::cmp::Reverse(w.nodes()));
    }
    for mut w in candidates {
        loop {
            match partition_indexes(sys, traj, w, epsilon) {
                Ok(_) => return Ok(w),
                Err(Error::ClassNormDrift { .. }) if w.nodes() > 2 => {
                    // drop the end farther from the center
                    if center.abs_diff(w.first) > center.abs_diff(w.last) {
                        w.first += 1;
                    } else {
                        w.last -= 1;
                    }
                }
                Err(_) => break,
            }
        }
    }
    Err(Error::NoneFound(t))
}

/// Edges of a spanning tree of `class`, found by breadth-first search.
pub fn spanning_tree(class: &[usize], edges: &[(usize, usize)]) -> Result<Vec<(usize, usize)>> {
    let Some(&root) = class.first() else { return Ok(Vec::new()) };
    let mut reached = vec![root];
    let mut tree = Vec::new();
    let mut queue = VecDeque::from([root]);
    while let Some(a) = queue.pop_front() {
        for &(j, k) in edges {
            let other = if j == a { k } else if k == a { j } else { continue };
            if class.contains(&other) && !reached.contains(&other) {
                reached.push(other);
                tree.push((j, k));
                queue.push_back(other);
            }
        }
    }
    if reached.len() == class.len() {
        Ok(tree)
    } else {
        Err(Error::NotConnected)
    }
}

/// `F_{j,k}(rho) = rho_k e_j - rho_j e_k`.
fn field(n: usize, j: usize, k: usize, rho: &DVector<f64>) -> DVector<f64> {
    let mut f = DVector::zeros(n);
    f[j] = rho[k];
    f[k] = -rho[j];
    f
}

fn check_consistent(partition: &IndexPartition, rho: &DVector<f64>, n: usize) -> Result<()> {
    if rho.len() != n {
        return Err(Error::InconsistentState(format!("state has {} entries for {n} levels", rho.len())));
    }
    for &i in &partition.vanishing {
        if rho[i].abs() > partition.epsilon {
            return Err(Error::InconsistentState(format!("level {} has modulus {:e} but is vanishing", i + 1, rho[i].abs())));
        }
    }
    Ok(())
}

fn field_rank(fields: &[DVector<f64>], n: usize) -> usize {
    if fields.is_empty() {
        return 0;
    }
    linalg::rank(&DMatrix::from_columns(fields), RANK_TOL).min(n)
}

/// Rank of the control fields of all in-class edges at `rho`, and the
/// dimension of the product of class spheres.
pub fn distribution_rank(partition: &IndexPartition, rho: &DVector<f64>, sys: &LevelSystem) -> Result<(usize, usize)> {
    check_consistent(partition, rho, sys.n)?;
    let fields: Vec<_> = partition
        .class_edges(sys)
        .into_iter()
        .map(|e| field(sys.n, sys.edges[e].j, sys.edges[e].k, rho))
        .collect();
    Ok((field_rank(&fields, sys.n), partition.manifold_dim()))
}

/// For each class: the rank of its spanning-tree fields at `rho`, and `m_l - 1`.
pub fn spanning_tree_ranks(partition: &IndexPartition, rho: &DVector<f64>, sys: &LevelSystem) -> Result<Vec<(usize, usize)>> {
    check_consistent(partition, rho, sys.n)?;
    let keys: Vec<(usize, usize)> = sys.edges.iter().map(|e| e.key()).collect();
    partition
        .classes
        .iter()
        .map(|class| {
            let tree = spanning_tree(class, &keys)?;
            let fields: Vec<_> = tree.iter().map(|&(j, k)| field(sys.n, j, k, rho)).collect();
            Ok((field_rank(&fields, sys.n), class.len() - 1))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowVerdict {
    /// The fields span the tangent space and an extended normal lift passes the residual check.
    NotStrictlyAbnormal,
    /// All classes are singletons: nothing to span.
    VacuouslyFullRank,
    /// The fields do not span the tangent space somewhere in the window.
    RankDeficient,
    /// Full rank, but no verdict: bound-active, nonsmooth cost, or a failed lift.
    Inconclusive,
}

impl WindowVerdict {
    pub fn name(self) -> &'static str {
        match self {
            WindowVerdict::NotStrictlyAbnormal => "not strictly abnormal",
            WindowVerdict::VacuouslyFullRank => "vacuously full rank",
            WindowVerdict::RankDeficient => "rank deficient",
            WindowVerdict::Inconclusive => "inconclusive",
        }
    }

    pub fn rules_out_strict_abnormality(self) -> bool {
        matches!(self, WindowVerdict::NotStrictlyAbnormal | WindowVerdict::VacuouslyFullRank)
    }
}

impl std::fmt::Display for WindowVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WindowReport {
    pub window: Window,
    pub t_start: f64,
    pub t_end: f64,
    pub partition: IndexPartition,
    /// Smallest field rank over the window's nodes.
    pub rank: usize,
    pub dim: usize,
    pub verdict: WindowVerdict,
    /// Residuals of the extended normal lift, when one was built.
    pub lift: Option<PmpReport>,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtremalReport {
    pub epsilon: f64,
    pub windows: Vec<WindowReport>,
    /// Windows that failed to partition, with the reason.
    pub skipped: Vec<(Window, String)>,
}

impl ExtremalReport {
    pub fn full_rank_windows(&self) -> impl Iterator<Item = &WindowReport> {
        self.windows.iter().filter(|w| w.rank == w.dim)
    }
}

/// The window as a pair of the class-restricted system: only edges inside
/// a class are kept.
fn restricted_pair(sys: &LevelSystem, pair: &AdmissiblePair, part: &IndexPartition) -> Result<(LevelSystem, AdmissiblePair)> {
    let kept = part.class_edges(sys);
    let rsys = LevelSystem::new(sys.energies.clone(), kept.iter().map(|&e| sys.edges[e]).collect());
    let w = part.window;
    let dt = pair.control.grid.dt();
    let steps = w.last - w.first;
    let grid = TimeGrid::new(dt * steps as f64, steps)?;
    let keys: Vec<(usize, usize)> = sys.edges.iter().map(|e| e.key()).collect();
    let columns: Vec<usize> = kept
        .iter()
        .map(|&e| pair.control.edges.iter().position(|&k| k == keys[e]).expect("control covers the graph"))
        .collect();
    let control = ControlGrid::real_from_fn(grid, &rsys, |i, c| pair.control.values[w.first + i][columns[c]].re);
    let trajectory = StateTrajectory { grid, states: pair.trajectory.states[w.first..=w.last].to_vec(), real: true };
    Ok((rsys, AdmissiblePair { trajectory, control }))
}

/// Fits a normal lift (`p0 = -1`) of the restricted window pair whose
/// switching functions realize the controls, with the class-radial and
/// vanishing components of the covector set to zero.
fn extended_lift(rsys: &LevelSystem, spec: &CostSpec, rpair: &AdmissiblePair, part: &IndexPartition) -> Result<PmpReport> {
    let (red, x) = real_pair_parts(rsys, rpair)?;
    let mu = spec.edge_weights(&rpair.control)?;
    let n = rsys.n;
    let m = red.n_edges();
    let steps = red.grid.steps();
    let sweep = red.forward(&x);
    // maximality in closed form: energy u = mu^2 phi / 2, length u = speed mu^2 phi
    let mut targets: Vec<Option<f64>> = Vec::with_capacity(steps * m);
    for i in 0..steps {
        let u = red.step_values(&x, i);
        let speed = u.iter().zip(&mu).map(|(u, m)| (u / m).powi(2)).sum::<f64>().sqrt();
        for e in 0..m {
            targets.push(match spec.kind {
                CostKind::Energy => Some(2.0 * u[e] / (mu[e] * mu[e])),
                _ if speed > 0.0 => Some(u[e] / (mu[e] * mu[e] * speed)),
                _ => None,
            });
        }
    }
    let rows_fit: Vec<usize> = (0..targets.len()).filter(|&r| targets[r].is_some()).collect();
    let rho_a = &red.rho0;
    let extra = part.vanishing.len() + part.classes.len();
    let mut a = DMatrix::zeros(rows_fit.len() + extra, n);
    let mut b = DVector::zeros(rows_fit.len() + extra);
    for col in 0..n {
        let mut start = DVector::zeros(n);
        start[col] = 1.0;
        let p = transport(&red, &x, &start);
        let mut all = Vec::with_capacity(steps * m);
        for i in 0..steps {
            all.extend(red.switching(&x, i, &sweep.states[i], &p[i + 1]));
        }
        for (r, &src) in rows_fit.iter().enumerate() {
            a[(r, col)] = all[src];
        }
    }
    for (r, &src) in rows_fit.iter().enumerate() {
        b[r] = targets[src].expect("filtered");
    }
    let mut row = rows_fit.len();
    for &i in &part.vanishing {
        a[(row, i)] = 1.0;
        row += 1;
    }
    for class in &part.classes {
        for &j in class {
            a[(row, j)] = rho_a[j];
        }
        row += 1;
    }
    let p_start = linalg::lstsq(&a, &b, 1e-12);
    let lift = build_lift(rsys, &red, &x, &mu, spec.kind, LiftScale::Cost, -1.0, &p_start);
    let ends = |node: usize| BoundarySpec::ModuliPoint { moduli: rpair.trajectory.populations(node) };
    pmp_residual(rsys, spec, rpair, &lift, &ends(0), &ends(steps))
}

/// Per-window test of the reduced extremal `pair` for strict abnormality.
pub fn classify_extremal(sys: &LevelSystem, pair: &AdmissiblePair, spec: &CostSpec, epsilon: f64) -> Result<ExtremalReport> {
    if pair.control.flavor != Flavor::RealU {
        return Err(Error::InvalidControl { invariant: "flavor", detail: "expected a real (U) control".into() });
    }
    let traj = &pair.trajectory;
    let mut windows = Vec::new();
    let mut skipped = Vec::new();
    for w in clean_windows(traj, epsilon)? {
        let part = match partition_indexes(sys, traj, w, epsilon) {
            Ok(p) => p,
            Err(e) => {
                skipped.push((w, e.to_string()));
                continue;
            }
        };
        let mut rank = usize::MAX;
        for i in w.first..=w.last {
            rank = rank.min(distribution_rank(&part, &traj.real_state(i), sys)?.0);
        }
        let dim = part.manifold_dim();
        let (t_start, t_end) = w.times(&traj.grid);
        let (rsys, rpair) = restricted_pair(sys, pair, &part)?;
        let bound_active = rpair.control.values.iter().any(|row| {
            row.iter()
                .zip(&rsys.edges)
                .any(|(z, e)| e.bound.is_finite() && z.re.abs() >= e.bound * (1.0 - 1e-9))
        });
        let (verdict, lift, detail) = if rank < dim {
            (WindowVerdict::RankDeficient, None, format!("fields have rank {rank} < {dim}"))
        } else if bound_active {
            (WindowVerdict::Inconclusive, None, "a control bound is active".into())
        } else if !matches!(spec.kind, CostKind::Energy | CostKind::Length) {
            (WindowVerdict::Inconclusive, None, format!("{} cost has no smooth maximality condition", spec.kind.name()))
        } else {
            let report = extended_lift(&rsys, spec, &rpair, &part)?;
            let worst = report.max_residual();
            if worst > LIFT_TOL {
                (WindowVerdict::Inconclusive, Some(report), format!("extended lift residual {worst:e}"))
            } else if dim == 0 {
                (WindowVerdict::VacuouslyFullRank, Some(report), "all classes are singletons".into())
            } else {
                (WindowVerdict::NotStrictlyAbnormal, Some(report), format!("rank {rank} = dim {dim}; extended lift residual {worst:e}"))
            }
        };
        windows.push(WindowReport { window: w, t_start, t_end, partition: part, rank, dim, verdict, lift, detail });
    }
    Ok(ExtremalReport { epsilon, windows, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::propagate_real;
    use num_complex::Complex64;

    fn circle(n: usize, t: f64, steps: usize) -> StateTrajectory {
        let grid = TimeGrid::new(t, steps).unwrap();
        let states = (0..=steps)
            .map(|i| {
                let s = grid.node(i);
                let mut v = vec![Complex64::new(0.0, 0.0); n];
                v[0] = Complex64::new(s.cos(), 0.0);
                v[1] = Complex64::new(s.sin(), 0.0);
                DVector::from_vec(v)
            })
            .collect();
        StateTrajectory { grid, states, real: true }
    }

    #[test]
    fn partition_of_the_counterexample_curve() {
        let sys = LevelSystem::ladder(vec![0.0; 4]);
        let traj = circle(4, 1.0, 100);
        let w = Window::new(10, 100);
        let p = partition_indexes(&sys, &traj, w, 1e-6).unwrap();
        assert_eq!(p.vanishing, vec![2, 3]);
        assert_eq!(p.classes, vec![vec![0, 1]]);
        assert_eq!(p.offsets, vec![2]);
        assert!((p.radii[0] - 1.0).abs() < 1e-12);
        let (rank, dim) = distribution_rank(&p, &traj.real_state(50), &sys).unwrap();
        assert_eq!((rank, dim), (1, 1));
    }

    #[test]
    fn no_vanishing_levels_gives_graph_components() {
        let sys = LevelSystem::new(vec![0.0; 4], vec![Edge::new(0, 1, 1.0), Edge::new(2, 3, 1.0)]);
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let state = DVector::from_element(4, Complex64::new(0.5, 0.0));
        let traj = StateTrajectory { grid, states: vec![state; 5], real: true };
        let p = partition_indexes(&sys, &traj, Window::new(0, 4), 1e-6).unwrap();
        assert!(p.vanishing.is_empty());
        assert_eq!(p.classes, vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(p.manifold_dim(), 2);
    }

    #[test]
    fn sign_change_is_a_mixed_window() {
        let sys = LevelSystem::ladder(vec![0.0; 2]);
        let traj = circle(2, 3.0, 30);
        assert!(matches!(partition_indexes(&sys, &traj, Window::new(0, 30), 1e-6), Err(Error::MixedWindow { level: 0 })));
    }

    #[test]
    fn class_norm_drift_is_detected() {
        let sys = LevelSystem::ladder(vec![0.0; 2]);
        let mut traj = circle(2, 1.0, 10);
        traj.states[5][0] *= Complex64::new(1.01, 0.0);
        assert!(matches!(partition_indexes(&sys, &traj, Window::new(1, 9), 1e-6), Err(Error::ClassNormDrift { .. })));
    }

    #[test]
    fn window_search_avoids_zeros() {
        let sys = LevelSystem::ladder(vec![0.0; 2]);
        // zero of the cosine at node 10
        let traj = circle(2, std::f64::consts::PI, 20);
        let w = find_clean_window(&sys, &traj, 0.3, 1e-6).unwrap();
        assert_eq!(w, Window::new(1, 9));
        let at_zero = find_clean_window(&sys, &traj, std::f64::consts::FRAC_PI_2, 1e-6).unwrap();
        assert!(!at_zero.contains(10) && (at_zero.last == 9 || at_zero.first == 11));
    }

    #[test]
    fn identically_zero_level_is_vanishing_everywhere() {
        let sys = LevelSystem::ladder(vec![0.0; 3]);
        let traj = circle(3, 1.0, 20);
        let w = find_clean_window(&sys, &traj, 0.5, 1e-6).unwrap();
        let p = partition_indexes(&sys, &traj, w, 1e-6).unwrap();
        assert_eq!(p.vanishing, vec![2]);
    }

    #[test]
    fn spanning_trees() {
        let tri = [(0, 1), (1, 2), (0, 2)];
        let t = spanning_tree(&[0, 1, 2], &tri).unwrap();
        assert_eq!(t.len(), 2);
        assert!(spanning_tree(&[1], &tri).unwrap().is_empty());
        assert!(matches!(spanning_tree(&[0, 3], &tri), Err(Error::NotConnected)));
    }

    #[test]
    fn full_rank_on_spheres() {
        let sys = LevelSystem::ladder(vec![0.0; 3]);
        let grid = TimeGrid::new(1.0, 2).unwrap();
        let state = DVector::from_vec(vec![0.6, 0.48, 0.64]).map(|v| Complex64::new(v, 0.0));
        let traj = StateTrajectory { grid, states: vec![state; 3], real: true };
        let p = partition_indexes(&sys, &traj, Window::new(0, 2), 1e-6).unwrap();
        assert_eq!(distribution_rank(&p, &traj.real_state(0), &sys).unwrap(), (2, 2));
        assert_eq!(spanning_tree_ranks(&p, &traj.real_state(0), &sys).unwrap(), vec![(2, 2)]);
        let off = DVector::from_vec(vec![0.6, 0.8, 0.0]);
        let p1 = partition_indexes(&sys, &circle(3, 1.0, 10), Window::new(1, 10), 1e-6).unwrap();
        assert!(distribution_rank(&p1, &off, &sys).is_ok());
        let bad = DVector::from_vec(vec![0.6, 0.0, 0.8]);
        assert!(matches!(distribution_rank(&p1, &bad, &sys), Err(Error::InconsistentState(_))));
    }

    #[test]
    fn eigenstate_at_rest_is_vacuously_full_rank() {
        let sys = LevelSystem::ladder(vec![0.0; 3]);
        let g = TimeGrid::new(1.0, 10).unwrap();
        let u = ControlGrid::real_from_fn(g, &sys, |_, _| 0.0);
        let rho = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let pair = AdmissiblePair { trajectory: propagate_real(&sys, &u, &rho).unwrap(), control: u };
        let spec = CostSpec::from_system(CostKind::Energy, &sys);
        let report = classify_extremal(&sys, &pair, &spec, 1e-6).unwrap();
        assert_eq!(report.windows.len(), 1);
        let w = &report.windows[0];
        assert_eq!((w.rank, w.dim), (0, 0));
        assert_eq!(w.verdict, WindowVerdict::VacuouslyFullRank);
    }

    #[test]
    fn analytic_energy_optimum_is_not_strictly_abnormal() {
        let sys = LevelSystem::ladder(vec![0.0; 2]);
        let g = TimeGrid::new(1.0, 50).unwrap();
        let u = ControlGrid::real_from_fn(g, &sys, |_, _| -std::f64::consts::FRAC_PI_2);
        let rho = DVector::from_vec(vec![1.0, 0.0]);
        let pair = AdmissiblePair { trajectory: propagate_real(&sys, &u, &rho).unwrap(), control: u };
        let spec = CostSpec::from_system(CostKind::Energy, &sys);
        let report = classify_extremal(&sys, &pair, &spec, 1e-6).unwrap();
        assert!(!report.windows.is_empty());
        for w in &report.windows {
            assert_eq!(w.verdict, WindowVerdict::NotStrictlyAbnormal, "{}", w.detail);
            assert!(w.lift.as_ref().unwrap().max_residual() <= LIFT_TOL);
        }
    }

    #[test]
    fn bound_active_windows_are_inconclusive() {
        let sys = LevelSystem::new(vec![0.0; 2], vec![Edge::new(0, 1, 1.0).with_bound(1.0)]);
        let g = TimeGrid::new(1.0, 20).unwrap();
        let u = ControlGrid::real_from_fn(g, &sys, |_, _| 1.0);
        let rho = DVector::from_vec(vec![0.8, 0.6]);
        let pair = AdmissiblePair { trajectory: propagate_real(&sys, &u, &rho).unwrap(), control: u };
        let spec = CostSpec::from_system(CostKind::Energy, &sys);
        let report = classify_extremal(&sys, &pair, &spec, 1e-6).unwrap();
        assert!(report.windows.iter().all(|w| w.verdict == WindowVerdict::Inconclusive));
    }
}
