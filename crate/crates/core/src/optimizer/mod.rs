//! The reduced real problem: transcription solver, Pontryagin residuals and
//! the window analysis of abnormal extremals.

mod minimize;
pub mod pmp;
pub mod solve;
pub mod transcription;
pub mod windows;

pub use pmp::{pmp_residual, LiftScale, PmpLift, PmpReport};
pub use solve::{solve_reduced, threads_from_env, SolveDiagnostics, SolveOptions, SolveOutcome, THREADS_ENV};
pub use transcription::{adjoint_gradient, penalized_objective, PenaltyState};
pub use windows::{
    classify_extremal, clean_windows, distribution_rank, find_clean_window, partition_indexes, spanning_tree,
    spanning_tree_ranks, ExtremalReport, IndexPartition, Window, WindowReport, WindowVerdict,
};
