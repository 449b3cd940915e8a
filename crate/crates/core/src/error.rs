use thiserror::Error;

use crate::expr::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("shape mismatch: expected {expected} values, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("non-finite value in grid data")]
    NonFinite,
    #[error("expression error: {0}")]
    Expr(#[from] ParseError),
    #[error("exponent `{field}` is not in C+: sampled value {value} <= 1")]
    RejectsNonCPlus { field: String, value: f64 },
    #[error("critical exponent undefined: m(x) = {value} >= N = {dim}")]
    CriticalUndefined { value: f64, dim: usize },
    #[error("could not bracket the Luxemburg norm root (scale {scale:e})")]
    BracketFailure { scale: f64 },
    #[error("field must vanish on the boundary")]
    NotZeroBoundary,
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("subdomain must lie strictly inside the domain")]
    SubdomainTouchesBoundary,
    #[error("hypotheses of theorem {0} do not hold")]
    HypothesesFailed(&'static str),
    #[error("no lambda on the grid makes the energy negative (largest tried {max_lambda})")]
    GridExhausted { max_lambda: f64 },
    #[error("grid lambda {found} exceeds the analytic bound {bound}")]
    LambdaBoundViolated { found: f64, bound: f64 },
    #[error("energy stayed nonnegative along the ray after {doublings} doublings")]
    ScheduleExhausted { doublings: usize },
    #[error(
        "mountain-pass path collapsed: max energy {max_energy} fell below endpoint level {floor}"
    )]
    Collapse { max_energy: f64, floor: f64 },
    #[error("no sphere radius with positive energy on every sampled direction")]
    NoPositiveSphere,
    #[error("ray {ray} stayed in the nonnegative set through the whole radius schedule")]
    RayExhausted { ray: usize },
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
