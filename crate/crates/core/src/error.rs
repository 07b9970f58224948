use thiserror::Error;

/// Errors raised by the discretization, solvers and experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no interior degrees of freedom")]
    NoInteriorDofs,
    #[error("non-interpolable: non-finite value at vertex {vertex}")]
    NonInterpolable { vertex: usize },
    #[error("not coercive: symmetric part has eigenvalue {eigenvalue:e} on element {element}")]
    NotCoercive { element: usize, eigenvalue: f64 },
    #[error("CG stagnation after {iterations} iterations (relative residual {residual:e})")]
    CgStagnation { iterations: usize, residual: f64 },
    #[error("invalid load: non-finite entry")]
    InvalidLoad,
    #[error("operator is not symmetric; CG and Cholesky require symmetry")]
    NotSymmetric,
    #[error("operator is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("signed density rejected: value {value:e} at ({x}, {y})")]
    SignedDensity { x: f64, y: f64, value: f64 },
    #[error("pairing divergent: boundary exponent s = {s} must be below 2")]
    PairingDivergent { s: f64 },
    #[error("atoms charge capacity-null sets in dimension 2")]
    AtomInTwoDimensions,
    #[error("atom position {position} is not interior")]
    AtomNotInterior { position: f64 },
    #[error("incompatible measures: {0}")]
    IncompatibleMeasures(&'static str),
    #[error("margin too large: {margin} leaves an empty core")]
    MarginTooLarge { margin: f64 },
    #[error("exponent out of range: lambda = {lambda} must lie in [0, 1]")]
    ExponentOutOfRange { lambda: f64 },
    #[error("out of scope regime: lambda = {lambda} > 1")]
    OutOfScopeRegime { lambda: f64 },
    #[error("weight singularity: potential vanishes where the measure charges")]
    WeightSingularity,
    #[error("existence requires σ ≠ 0")]
    ZeroMeasure,
    #[error("stage failure at eps = {eps:e} after {steps} Newton steps (residual {residual:e})")]
    StageFailure {
        eps: f64,
        steps: usize,
        residual: f64,
    },
    #[error("functional undefined at λ=1")]
    FunctionalUndefined,
    #[error("variational form requires symmetry")]
    RequiresSymmetry,
    #[error("mesh must resolve ε: h = {h} > ε/16 = {limit}")]
    UnresolvedOscillation { h: f64, limit: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("expression error: {0}")]
    Expression(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
