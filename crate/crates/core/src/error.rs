use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("singular right-hand side on edge {edge}: kappa = {kappa} <= gamma = {gamma} with zero transport activity")]
    SingularRhs { edge: usize, kappa: f64, gamma: f64 },

    #[error("mass conservation violated: sum of sources is {sum:e} (tolerance {tol:e})")]
    ConservationViolation { sum: f64, tol: f64 },

    #[error("singular Kirchhoff system: {0}")]
    SingularSystem(String),

    #[error("stiff integration failure at t = {t:e} (h = {h:e}): {reason}")]
    StiffFailure { t: f64, h: f64, reason: String },

    #[error("numerical blow-up at t = {t:e}: non-finite value in right-hand side")]
    NumericalBlowup { t: f64 },

    #[error("degenerate operator: {0}")]
    DegenerateOperator(String),

    #[error("linear solver did not converge after {iterations} iterations (residual {:e})", .residual_history.last().copied().unwrap_or(f64::NAN))]
    LinearSolver {
        iterations: usize,
        residual_history: Vec<f64>,
    },

    #[error("transport step rejected: h = {h:e} exceeds reaction stability bound {h_max:e}")]
    StepRejected { h: f64, h_max: f64 },

    #[error("minimization did not converge after {iterations} iterations (gradient norm {:e})", .gradient_history.last().copied().unwrap_or(f64::NAN))]
    NotConverged {
        iterations: usize,
        gradient_history: Vec<f64>,
    },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
