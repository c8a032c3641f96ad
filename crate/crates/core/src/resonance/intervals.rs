use std::ops::Range;

use serde::Serialize;

use crate::control::TimeGrid;
use crate::dynamics::StateTrajectory;
use crate::system::LevelSystem;

pub const DEFAULT_EPSILON: f64 = 1e-6;

/// A maximal run of consecutive nodes on which both coupled moduli exceed
/// the threshold. `first..=last` are the good nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NodeRun {
    pub first: usize,
    pub last: usize,
}

impl NodeRun {
    /// The open interval `]a, b[`, whose endpoints are the neighbouring
    /// nodes (clamped to the grid).
    pub fn open_interval(&self, grid: &TimeGrid) -> (f64, f64) {
        (grid.node(self.first.saturating_sub(1)), grid.node((self.last + 1).min(grid.steps())))
    }

    /// Steps covered by the interval: every step touching a good node.
    pub fn steps(&self, grid: &TimeGrid) -> Range<usize> {
        self.first.saturating_sub(1)..(self.last + 1).min(grid.steps())
    }

    pub fn len(&self) -> usize {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeIntervals {
    pub edge: (usize, usize),
    pub runs: Vec<NodeRun>,
}

/// The intervals `I_{j,k,l}` of every edge; their complement in `]0, T[`
/// is the edge's bad set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalDecomposition {
    pub epsilon: f64,
    #[serde(skip)]
    pub grid: TimeGrid,
    pub edges: Vec<EdgeIntervals>,
}

impl IntervalDecomposition {
    /// `active[step]` is true when the step lies in one of the edge's intervals.
    pub fn active_steps(&self, edge: usize) -> Vec<bool> {
        let mut active = vec![false; self.grid.steps()];
        for run in &self.edges[edge].runs {
            for s in run.steps(&self.grid) {
                active[s] = true;
            }
        }
        active
    }

    /// Maximal runs of steps outside every interval of the edge.
    pub fn bad_runs(&self, edge: usize) -> Vec<Range<usize>> {
        let active = self.active_steps(edge);
        let mut out = Vec::new();
        let mut start = None;
        for (s, &a) in active.iter().enumerate() {
            match (a, start) {
                (false, None) => start = Some(s),
                (true, Some(b)) => {
                    out.push(b..s);
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(b) = start {
            out.push(b..active.len());
        }
        out
    }

    /// Open intervals `]a, b[` of one edge in time units.
    pub fn intervals(&self, edge: usize) -> Vec<(f64, f64)> {
        self.edges[edge].runs.iter().map(|r| r.open_interval(&self.grid)).collect()
    }
}

/// Maximal runs of nodes with `min(|psi_j|, |psi_k|) > epsilon`, per edge.
/// Runs shorter than two nodes are dropped.
pub fn decompose_intervals(sys: &LevelSystem, traj: &StateTrajectory, epsilon: f64) -> IntervalDecomposition {
    let edges = sys
        .edges
        .iter()
        .map(|e| {
            let (j, k) = e.key();
            let good: Vec<bool> = (0..traj.grid.nodes())
                .map(|i| traj.modulus(i, j).min(traj.modulus(i, k)) > epsilon)
                .collect();
            let mut runs = Vec::new();
            let mut i = 0;
            while i < good.len() {
                if good[i] {
                    let first = i;
                    while i + 1 < good.len() && good[i + 1] {
                        i += 1;
                    }
                    if i > first {
                        runs.push(NodeRun { first, last: i });
                    }
                }
                i += 1;
            }
            EdgeIntervals { edge: (j, k), runs }
        })
        .collect();
    IntervalDecomposition { epsilon, grid: traj.grid, edges }
}
