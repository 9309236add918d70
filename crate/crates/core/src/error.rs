use thiserror::Error;

/// Failures raised by the numerical kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("Hamiltonian is not convex: second derivative {d2:.3e} at p = {p}")]
    NonConvexInput { p: f64, d2: f64 },
    #[error("no admissible bump half-width above {floor:e}")]
    NoDeltaFound { floor: f64 },
    #[error("argument {p} outside the domain [0, 1)")]
    DomainError { p: f64 },
    #[error("trajectory left |f| <= {guard:e} at x = {x} (lambda = {lambda}, p0 = {p0})")]
    Blowup { x: f64, lambda: f64, p0: f64, guard: f64 },
    #[error("no sign change found while bracketing {what} (last tried {last})")]
    BracketFailure { what: &'static str, last: f64 },
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("mix parameter tuning failed: {0}")]
    TuningFailure(String),
    #[error("power iteration lost positivity of the principal eigenvector")]
    NoPositiveEigenvector,
    #[error("parabolic run unstable after {retries} dt halvings: {reason}")]
    Instability { retries: usize, reason: String },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("expected a positive constant, got {0}")]
    NonPositive(f64),
    #[error("sublevel set not convex: midpoint of {p:?} and {q:?} has value {value} > {level}")]
    ConvexityViolation { p: Vec<f64>, q: Vec<f64>, value: f64, level: f64 },
    #[error("momentum {theta:?} outside the validity box")]
    OutOfBox { theta: Vec<f64> },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
