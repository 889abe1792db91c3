use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("configuration parse error at line {line}, column {column}: {message}")]
    ConfigParse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("configuration is missing required fields: {}", .0.join(", "))]
    MissingFields(Vec<String>),

    #[error("unstable Mathieu parameters a={a}, q={q}: |Floquet multiplier| = {modulus}")]
    UnstableTrap { a: f64, q: f64, modulus: f64 },

    #[error("secular frequency branch is ambiguous (omega_s = {omega_s})")]
    BranchAmbiguous { omega_s: f64 },

    #[error("Floquet solution check failed: {0}")]
    FloquetCheck(String),

    #[error("matrix element quadrature did not converge (n={n}, k={k}, l={l}, change {change:e})")]
    QuadratureNotConverged { n: usize, k: i64, l: i64, change: f64 },

    #[error("step size underflow at t={t}: dt={dt:e} below minimum {dt_min:e} (error estimate {error:e})")]
    StepUnderflow {
        t: f64,
        dt: f64,
        dt_min: f64,
        error: f64,
    },

    #[error("probability leaked to the {space} boundary at t={t}: occupancy {occupancy:e} exceeds {tolerance:e}")]
    BoundaryLeak {
        space: &'static str,
        t: f64,
        occupancy: f64,
        tolerance: f64,
    },

    #[error("wrong basis: expected {expected}, found {found}")]
    WrongBasis {
        expected: &'static str,
        found: &'static str,
    },

    #[error("quantum jump attempted with zero excited population")]
    EmptyExcitedState,

    #[error("field has zero norm")]
    ZeroNorm,

    #[error("no recorded samples fall inside the window [{t_a}, {t_b}]")]
    EmptyWindow { t_a: f64, t_b: f64 },

    #[error("degenerate fit window: {0}")]
    DegenerateFit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
