use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad class of an [`Error`], used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input data or a violated precondition.
    Validation,
    /// The numerical machinery did not reach a certified answer.
    Solver,
    /// The market has an arbitrage or a nontrivial riskless portfolio.
    Pathology,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("NonPositiveProbability: state {state} has probability {value}")]
    NonPositiveProbability { state: usize, value: f64 },
    #[error("ProbabilitySumNotOne: probabilities sum to {sum}")]
    ProbabilitySumNotOne { sum: f64 },
    #[error("NegativePayoff: state {state}, asset {asset} pays {value}")]
    NegativePayoff { state: usize, asset: usize, value: f64 },
    #[error("NonPositivePrice: {what} is {value}")]
    NonPositivePrice { what: String, value: f64 },
    #[error("DimensionMismatch: {what} (expected {expected}, found {found})")]
    DimensionMismatch { what: String, expected: usize, found: usize },
    #[error("NonFiniteInput: {0}")]
    NonFinite(String),

    #[error("DegenerateGauge: origin is not interior to the vertex hull")]
    DegenerateGauge,
    #[error("NonSmoothPoint: finite differences disagree for coordinate {coordinate}")]
    NonSmoothPoint { coordinate: usize },
    #[error("DomainViolation: expected utility is -inf at the given portfolio")]
    DomainViolation,

    #[error("SolverFailure: {0}")]
    SolverFailure(String),
    #[error("Infeasible: level {level} exceeds the attainable supremum {supremum}")]
    Infeasible { level: f64, supremum: f64 },
    #[error("MarketPathology: {0}")]
    MarketPathology(String),
    #[error("Unsupported: {0}")]
    Unsupported(String),

    #[error("SingularCovariance: covariance matrix is not positive definite")]
    SingularCovariance,
    #[error("ProportionalMeans: expected payoffs are proportional to prices")]
    ProportionalMeans,
    #[error("NoMarketPortfolio: beta - gamma*R = {0} is not positive")]
    NoMarketPortfolio(f64),
    #[error("DegenerateExcess: expected excess payoff vanishes")]
    DegenerateExcess,
    #[error("ZeroRisk: ratio undefined for zero risk")]
    ZeroRisk,
    #[error("DegeneratePair: the two funds coincide")]
    DegeneratePair,

    #[error("NotHomogeneous: risk measure lacks {0}")]
    NotHomogeneous(String),
    #[error("FlatMarket: every asset has expected payoff equal to R times its price")]
    FlatMarket,
    #[error("BelowRiskless: mu = {mu} is below R = {r}")]
    BelowRiskless { mu: f64, r: f64 },
    #[error("NoMasterFund: basic fund holds exactly one unit of bond")]
    NoMasterFund,

    #[error("AlphaTooSmall: alpha = {0} must exceed 9/22")]
    AlphaTooSmall(f64),
    #[error("OutOfRange: {0}")]
    OutOfRange(String),
    #[error("NonPositivePayoff: state {state}, asset {asset}")]
    NonPositivePayoff { state: usize, asset: usize },

    #[error("IncompatibleCurves: {0}")]
    IncompatibleCurves(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::SolverFailure(_) | Error::NonSmoothPoint { .. } => ErrorClass::Solver,
            Error::MarketPathology(_) => ErrorClass::Pathology,
            _ => ErrorClass::Validation,
        }
    }

    pub(crate) fn dims(what: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch { what: what.into(), expected, found }
    }
}
