use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("velocity lies (numerically) in ker ω: |ω(v)| = {omega_v:e}")]
    KernelDirection { omega_v: f64 },
    #[error("metric is singular at the query point")]
    DegenerateMetric,
    #[error("metric is not positive definite; the indicatrix is not compact")]
    NonCompactIndicatrix,
    #[error("g restricted to ker ω is degenerate (bordered determinant {det:e})")]
    DegenerateOnKernel { det: f64 },
    #[error("Euler-Lagrange system is inconsistent: residual {residual:e} exceeds bound {bound:e}")]
    InconsistentSystem { residual: f64, bound: f64 },
    #[error("arclength gauge is singular: g(ξ,ξ) = {g_xi_xi:e}")]
    GaugeSingular { g_xi_xi: f64 },
    #[error("trajectory approached ker ω at t = {t}")]
    KernelApproach { t: f64 },
    #[error("1-form is not closed: max |dω| = {defect:e}")]
    NotClosed { defect: f64 },
    #[error("|ω|²_g vanishes")]
    NullOmega,
    #[error("direction lies in the exceptional set")]
    InExceptionalSet,
    #[error("direction is not tangent to ker ω: |ω(ξ₀)| = {omega_xi:e}")]
    NotInKernel { omega_xi: f64 },
    #[error("curve is not forward admissible at sample {index} (ω(ξ) = {omega_xi:e})")]
    NotAdmissible { index: usize, omega_xi: f64 },
    #[error("no connecting geodesic found (best endpoint residual {best_residual:e})")]
    NotFound { best_residual: f64 },
    #[error("point lies on the singular set of the conformal factor")]
    SingularPoint,
    #[error("the origin is excluded")]
    OriginExcluded,
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unknown symbol `{name}` at {line}:{column}")]
    UnknownSymbol { name: String, line: usize, column: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("time {t} is outside the trajectory span [{start}, {end}]")]
    OutOfSpan { t: f64, start: f64, end: f64 },
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
