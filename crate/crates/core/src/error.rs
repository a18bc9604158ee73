use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid step law: {0}")]
    InvalidLaw(String),
    #[error("degenerate law: period undefined for a single atom at 0")]
    DegenerateLaw,
    #[error("operation needs a lattice (integer-valued) law")]
    NonLattice,
    #[error("law is not centered (mean = {0})")]
    NonCentered(f64),
    #[error("law is not left-continuous: atom {0} < -1")]
    NotLeftContinuous(i64),
    #[error("window too small: lost mass {loss:e} exceeds tolerance {tol:e}")]
    WindowTooSmall { loss: f64, tol: f64 },
    #[error("conditioning event has zero probability")]
    ZeroSurvival,
    #[error("enumeration of {0} paths exceeds the limit")]
    EnumerationTooLarge(u128),
    #[error("ladder law has all its mass at 0; renewal sum diverges")]
    NonSummable,
    #[error("fit range too short: {0}")]
    InsufficientRange(String),
    #[error("superharmonicity violated at x = {x}: drift {delta:e}")]
    SuperharmonicityViolated { x: f64, delta: f64 },
    #[error("table does not cover state {0}")]
    GridTooCoarse(f64),
    #[error("too few surviving trials ({0})")]
    TooFewSurvivors(usize),
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("no valid R up to {0}")]
    NoValidR(f64),
    #[error("harmonic function unavailable at state {0}")]
    VUnavailable(f64),
    #[error("log of a series with non-positive constant term {0}")]
    SeriesDomain(f64),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Process exit code: 2 for violated model assumptions, 3 for numeric
    /// certificate failures, 1 for everything that is a usage problem.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            InvalidLaw(_) | DegenerateLaw | NonLattice | NonCentered(_) | NotLeftContinuous(_)
            | ZeroSurvival | NonSummable | AssumptionViolated(_) | NoValidR(_)
            | TooFewSurvivors(_) => 2,
            WindowTooSmall { .. } | SuperharmonicityViolated { .. } | GridTooCoarse(_)
            | VUnavailable(_) | SeriesDomain(_) | InsufficientRange(_) => 3,
            EnumerationTooLarge(_) | Parse(_) | InvalidArgument(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
