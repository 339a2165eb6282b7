use thiserror::Error;

use crate::exprdsl::{EvalError, ParseError};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error("degenerate Lagrangian: |det M| = {det:e} below {threshold:e}{}", at_time(*.t))]
    DegenerateLagrangian { det: f64, threshold: f64, t: Option<f64> },

    #[error("non-finite derivative of the Lagrangian")]
    NonFiniteDerivative,

    #[error("Jacobian not symmetric: |df{i}/dx{j} - df{j}/dx{i}| = {max_asymmetry:e} at sample {sample}")]
    NonSymmetricJacobian { max_asymmetry: f64, sample: usize, i: usize, j: usize },

    #[error("coordinate q{} is not ignorable", .index + 1)]
    NotIgnorable { index: usize },

    #[error("unknown system `{0}`")]
    UnknownSystem(String),

    #[error("system `{system}` requires parameter `{name}`")]
    MissingParameter { system: String, name: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("metric is not positive definite at q = {at:?}")]
    NonPositiveDefiniteMetric { at: Vec<f64> },

    #[error("radius of curvature is not positive at s = {s}")]
    NonPositiveCurvatureRadius { s: f64 },

    #[error("rotation matrix is not skew-symmetric (max |Ω + Ωᵀ| = {max_asymmetry:e})")]
    NonSkewOmega { max_asymmetry: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("maximum number of steps ({steps}) exceeded at t = {t}")]
    MaxStepsExceeded { t: f64, steps: usize },

    #[error("point transformation has a singular Jacobian at t = {t}")]
    SingularTransformJacobian { t: f64 },

    #[error("inverse transformation does not invert the forward map (error {error:e})")]
    InverseMismatch { error: f64 },

    #[error("state is not an equilibrium (|q̈| = {residual:e})")]
    NotAnEquilibrium { residual: f64 },

    #[error("{what}: expected length {expected}, got {got}")]
    DimensionMismatch { what: String, expected: usize, got: usize },

    #[error("operation requires a {expected} model")]
    WrongModelKind { expected: &'static str },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("scenario error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn at_time(t: Option<f64>) -> String {
    t.map(|t| format!(" at t = {t}")).unwrap_or_default()
}

impl Error {
    pub(crate) fn dims(what: impl Into<String>, expected: usize, got: usize) -> Self {
        Error::DimensionMismatch { what: what.into(), expected, got }
    }

    /// Attach the integration time to errors raised inside a right-hand side.
    pub(crate) fn at(self, time: f64) -> Self {
        match self {
            Error::DegenerateLagrangian { det, threshold, t: None } => {
                Error::DegenerateLagrangian { det, threshold, t: Some(time) }
            }
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
