use thiserror::Error;

/// Errors raised by the numerical laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension must be odd and at least 5, got {0}")]
    InvalidDimension(i64),
    #[error("exponent must satisfy p > 1, got {0}")]
    InvalidExponent(f64),
    #[error("exponent p = {p} is not superconformal for d = {d} (need p > {threshold})")]
    Subconformal { d: u32, p: f64, threshold: f64 },
    #[error("rate loss epsilon must lie in (0, {upper}), got {epsilon}")]
    InvalidEpsilon { epsilon: f64, upper: f64 },
    #[error("time t = {t} is not before the blowup time T = {blowup}")]
    PastBlowup { t: f64, blowup: f64 },
    #[error("profile covers [0, {available}] but [0, {required}] is needed")]
    DomainNotCovered { required: f64, available: f64 },
    #[error("grid needs N >= {min}, got {n}")]
    GridTooSmall { n: usize, min: usize },
    #[error("evaluation point {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("profile radii not strictly increasing at row {row}")]
    NonMonotoneRadii { row: usize },
    #[error("parse failure at row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("profile file contains no data rows")]
    EmptyProfile,
    #[error("io error: {0}")]
    Io(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("degenerate Hardy quotient: derivative norm vanishes for nonzero function")]
    DegenerateHardy,
    #[error("extension order {m} not in {{{low}, {high}}}")]
    InvalidExtensionOrder { m: u32, low: u32, high: u32 },
    #[error("quadrature failure near rho = 1: {0}")]
    Quadrature(String),
    #[error("no eigenvalue within {tolerance} of 1 (closest {found})")]
    EigenvalueNotFound { found: f64, tolerance: f64 },
    #[error("eigenvalue solver failed: {0}")]
    EigenSolver(String),
    #[error("degenerate fit window: {0}")]
    DegenerateWindow(String),
    #[error("hypergeometric parameters not supported: {0}")]
    HypergeometricDegenerate(String),
    #[error("hypergeometric series did not converge after {terms} terms")]
    HypergeometricNonConvergence { terms: usize },
    #[error("lambda = {re}{im:+}i is not an eigenvalue root")]
    NotARoot { re: f64, im: f64 },
    #[error("time step {dt} exceeds stability bound {bound}")]
    CflViolation { dt: f64, bound: f64 },
    #[error("no sign change of unstable coefficient in bracket: c({lo}) = {c_lo}, c({hi}) = {c_hi}")]
    NoSignChange { lo: f64, hi: f64, c_lo: f64, c_hi: f64 },
    #[error("shooting did not converge after {iterations} iterations")]
    ShootingNonConvergence { iterations: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
