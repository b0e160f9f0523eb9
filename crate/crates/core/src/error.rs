use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty spectrum")]
    EmptySpectrum,
    #[error("negative eigenvalue {0}")]
    NegativeEigenvalue(f64),
    #[error("beta too large: head mass {head_mass} cannot dominate the tail shape")]
    InfeasibleBeta { head_mass: f64 },
    #[error("invalid spectrum parameters: {0}")]
    InvalidParameter(String),
    #[error("eps must lie in (0,1), got {0}")]
    InvalidEps(f64),
    #[error("eps1 < eps2 required, got {0} and {1}")]
    BadEpsilonOrder(f64, f64),
    #[error("more than {0} lattice points needed")]
    CapExceeded(u64),
    #[error("enumeration would materialize {0} products")]
    TooLarge(f64),
    #[error("two-atom spectrum requires 0.5 < a < 1, got {0}")]
    InvalidAtom(f64),
    #[error("truncation defect {0} exceeds the certification budget")]
    DefectTooLarge(f64),
    #[error("grid truncation drops {0} mass, over the budget")]
    GridOverflow(f64),
    #[error("quantile lies outside the grid")]
    QuantileOutsideGrid,
    #[error("quantile level {0} beyond the tabulated range")]
    QuantileBeyondGrid(f64),
    #[error("step must divide 1 and be at most 1/64, got {0}")]
    BadStep(f64),
    #[error("quadrature did not converge (error estimate {0})")]
    QuadratureFailure(f64),
    #[error("regime fit inconclusive (residual {0})")]
    InconclusiveFit(f64),
    #[error("law required by the prediction is missing: {0}")]
    MissingLaw(&'static str),
    #[error("unsupported regime for this operation: {0}")]
    UnsupportedRegime(String),
    #[error("fixed-point iteration did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error("integrand not locally integrable near the lower cutoff")]
    IntegrableSingularity,
    #[error("io: {0}")]
    Io(String),
    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
