use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the numerical layer.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("symbol is not a self-map of the polydisc: component {component} reaches modulus {modulus} at angles {angles:?}")]
    SymbolNotSelfMap {
        component: usize,
        modulus: f64,
        angles: Vec<f64>,
    },

    #[error("invalid symbol literal: {0}")]
    InvalidLiteral(String),

    #[error("weight parameter β = {0} is outside the supported range [-0.95, ∞)")]
    InvalidWeight(f64),

    #[error("invalid Carleson box: {0}")]
    InvalidBox(String),

    #[error("invalid proposal region: {0}")]
    InvalidRegion(String),

    #[error("proposal region has zero mass")]
    EmptyRegion,

    #[error("quadrature did not converge: error estimate {error:e} after {intervals} subintervals")]
    QuadratureBudget { error: f64, intervals: usize },

    #[error("not a contact point: residual {residual:e} exceeds tolerance {tol:e}")]
    ContactRequired { residual: f64, tol: f64 },

    #[error("fit needs at least {needed} trusted points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("Jacobian floor violated in region: |det| = {found} <= {floor}")]
    JacobianFloor { found: f64, floor: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = core::result::Result<T, Error>;
