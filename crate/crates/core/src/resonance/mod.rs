//! Resonant controls: constant phases on every edge, time-independent level
//! phases, and the reduction of arbitrary admissible pairs to that form.

pub mod classify;
pub mod counterexample;
pub mod intervals;
pub mod rotation;
pub mod transform;
pub mod uv;

pub use classify::{classify_resonance, EdgeEvidence, ResonanceStatus, ResonanceVerdict};
pub use counterexample::{counterexample_pair, Counterexample, COUNTEREXAMPLE_STEPS};
pub use intervals::{decompose_intervals, IntervalDecomposition, NodeRun, DEFAULT_EPSILON};
pub use rotation::{eigenstate_bridge, rot_alpha};
pub use transform::{resonance_transform, ResonantPair, TransformOptions};
pub use uv::{field_f, field_g, midpoint_states, uv_decompose, UvDecomposition};
