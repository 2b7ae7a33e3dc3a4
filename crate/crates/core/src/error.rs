use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid potential configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate energy {energy}: too close to E=0 or E=V0 (threshold {threshold:e})")]
    DegenerateEnergy { energy: Complex64, threshold: f64 },

    #[error("energy {0} lies on the real axis; the resolvent kernel needs Im(E) != 0")]
    OnRealAxis(Complex64),

    #[error("step too large at r={r}: local error estimate {estimate:e} exceeds {tolerance:e}")]
    StepTooLarge { r: f64, estimate: f64, tolerance: f64 },

    #[error("quadrature failed on [{lo}, {hi}]: error estimate {estimate:e} above tolerance {tolerance:e}")]
    QuadratureFailure { lo: f64, hi: f64, estimate: f64, tolerance: f64 },

    #[error("test-function support violation: {0}")]
    SupportViolation(String),

    #[error("derivative order {order} exceeds the budget {max}")]
    OrderTooHigh { order: usize, max: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
