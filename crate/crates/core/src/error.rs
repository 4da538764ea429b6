use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("invalid initial data: {0}")]
    InvalidInitialData(String),

    #[error("negative density {value:.6e} at index {index}")]
    NegativeDensity { value: f64, index: usize },

    #[error("density {value:.6e} at index {index} does not exceed the floor {floor:.3e}")]
    DensityBelowFloor { value: f64, floor: f64, index: usize },

    #[error("CFL violation: Courant number {courant:.4} exceeds {limit}; try dt <= {suggested_dt:.3e}")]
    Cfl {
        courant: f64,
        limit: f64,
        suggested_dt: f64,
    },

    #[error("Picard iteration did not converge in {iterations} iterations (residuals: {history:?})")]
    PicardNonConvergence {
        iterations: usize,
        history: Vec<f64>,
    },

    #[error("singular momentum system: {0}")]
    SingularSystem(String),

    #[error("linear solver failed: {0}")]
    SolverFailure(String),

    #[error("interface collapse: Z = {value:.6e} at index {index}")]
    InterfaceCollapse { value: f64, index: usize },

    #[error("zero denominator: {0}")]
    ZeroDenominator(String),

    #[error("manufactured solution rejected: {0}")]
    InvalidManufactured(String),
}

impl Error {
    /// True for failures of the numerics (CFL, Picard, density) as opposed
    /// to malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NegativeDensity { .. }
                | Error::DensityBelowFloor { .. }
                | Error::Cfl { .. }
                | Error::PicardNonConvergence { .. }
                | Error::SingularSystem(_)
                | Error::SolverFailure(_)
                | Error::InterfaceCollapse { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
