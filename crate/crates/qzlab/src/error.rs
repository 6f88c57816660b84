use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}, expected 2 or 3")]
    InvalidDimension(usize),
    #[error("domain radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("grid too small: n = {0}, need at least 16 nodes")]
    GridTooSmall(usize),
    #[error("parity mismatch: {0}")]
    ParityMismatch(String),
    #[error("grid mismatch between profiles")]
    GridMismatch,
    #[error("profile is complex-valued where a real profile is required")]
    ComplexValued,
    #[error("singular or ill-conditioned system (condition estimate {cond:.3e})")]
    SingularSystem { cond: f64 },
    #[error("shooting bracket failure on [{lo}, {hi}]: {what}")]
    ShootingBracket { lo: f64, hi: f64, what: String },
    #[error("Newton iteration diverged: residual {residual:.3e} after {iters} iterations")]
    NewtonDiverged { residual: f64, iters: usize },
    #[error("continuation step failed at parameter {at}")]
    ContinuationFailed { at: f64 },
    #[error("converged profile changes sign; ground-state branch rejected")]
    SignChange,
    #[error("variant mismatch: expected {expected}, got {got}")]
    VariantMismatch { expected: String, got: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no real turning points: quantum coefficient above threshold")]
    AboveThreshold,
    #[error("negative radicand at lambda = {0}; not in the classically allowed region")]
    NegativeRadicand(f64),
    #[error("orbit is unbounded; no oscillation period")]
    UnboundedOrbit,
    #[error("numerical instability detected at t = {0}")]
    Instability(f64),
    #[error("missing profile {0} in bundle")]
    MissingProfile(String),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
