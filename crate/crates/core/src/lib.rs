//! Optimal control of n-level quantum systems with controls on a coupling graph.
//!
//! The crate follows one pipeline:
//!
//! * [`system`]: the level system, its coupling graph and controllability;
//! * [`dynamics`]: propagation with and without drift, and the interaction
//!   picture that removes the drift;
//! * [`resonance`]: the reduction of any admissible pair to one with
//!   constant-phase controls and time-independent state phases, plus the
//!   resonance predicates;
//! * [`costs`]: cost functionals on control moduli;
//! * [`optimizer`]: a direct-transcription solver for the reduced real
//!   problem, Pontryagin residuals, and the analysis of abnormal extremals.

pub mod boundary;
pub mod control;
pub mod costs;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod linalg;
pub mod optimizer;
pub mod resonance;
pub mod system;
pub mod verify;

pub use boundary::BoundarySpec;
pub use control::{ControlGrid, Flavor, TimeGrid};
pub use costs::{CostKind, CostSpec, FinalTime};
pub use dynamics::{AdmissiblePair, StateTrajectory};
pub use error::{Error, Result};
pub use system::{Edge, LevelSystem};
