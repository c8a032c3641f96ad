use thiserror::Error;

/// Errors raised by the library.
///
/// Level indices carried by variants are zero-based; user-facing formatting
/// (files, CLI messages) converts them to one-based.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid system: {}", .0.join("; "))]
    InvalidSystem(Vec<String>),

    #[error("invalid control ({invariant}): {detail}")]
    InvalidControl { invariant: &'static str, detail: String },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("time grid mismatch: {0}")]
    GridMismatch(String),

    #[error("lie-rank oracle supports n <= {max}, got n = {n}")]
    DimensionExceeded { n: usize, max: usize },

    #[error("phase undefined for level {level} at node {node}: modulus {modulus:e} below threshold")]
    PhaseUndefined { level: usize, node: usize, modulus: f64 },

    #[error("re-propagated moduli drift {measured:e} exceeds tolerance {tol:e}")]
    AdmissibilityResidualExceeded { measured: f64, tol: f64 },

    #[error("states overlap on level {level}: |psi1_j psi2_j| = {product:e}")]
    SupportOverlap { level: usize, product: f64 },

    #[error("pair endpoints do not match the requested moduli (deviation {0:e})")]
    EndpointMismatch(f64),

    #[error("no cost weight for edge ({0}, {1})")]
    MissingWeight(usize, usize),

    #[error("operation requires cost kind {expected}, got {got}")]
    WrongKind { expected: &'static str, got: &'static str },

    #[error("invalid cost spec: {0}")]
    InvalidCost(String),

    #[error("invalid boundary: {0}")]
    InvalidBoundary(String),

    #[error("system is not controllable: coupling graph has {components} components")]
    NotControllable { components: usize },

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("window is mixed: level {level} crosses the zero threshold inside the window")]
    MixedWindow { level: usize },

    #[error("class norm drifts by {drift:e} inside the window")]
    ClassNormDrift { drift: f64 },

    #[error("no clean window found near t = {0}")]
    NoneFound(f64),

    #[error("class is not connected by the given edges")]
    NotConnected,

    #[error("state inconsistent with partition: {0}")]
    InconsistentState(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("parse error in {context}: {detail}")]
    Parse { context: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
