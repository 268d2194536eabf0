use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("mode index {index} out of range for a space with {modes} modes")]
    ModeIndex { index: usize, modes: usize },

    #[error("Fock truncation too small on mode {mode}: |amplitude|^2 = {amplitude_sq:.4} exceeds dim/4 = {limit:.4}")]
    Truncation {
        mode: usize,
        amplitude_sq: f64,
        limit: f64,
    },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("state has zero norm")]
    ZeroState,

    #[error("step size underflow at t = {t:.6} (dt = {dt:.3e})")]
    StepUnderflow { t: f64, dt: f64 },

    #[error("positivity violated at t = {t:.6}: density matrix has an eigenvalue below -{tol:.1e}")]
    Positivity { t: f64, tol: f64 },

    #[error("trace drifted to {trace:.12} at t = {t:.6}")]
    TraceDrift { t: f64, trace: f64 },

    #[error("total dimension {dim} exceeds the guard {max}")]
    DimensionGuard { dim: usize, max: usize },

    #[error("steady-state null space has dimension {0}, expected 1")]
    DegenerateNullSpace(usize),

    #[error("steady-state residual {residual:.3e} exceeds {tol:.1e}")]
    Residual { residual: f64, tol: f64 },

    #[error("sector is not invariant under the generator: {0}")]
    SectorLeak(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("malformed dump: {0}")]
    Dump(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
