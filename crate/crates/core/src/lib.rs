//! Risk/utility trade-off analysis for one-period finite-state markets.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closedform;
pub mod error;
pub mod fixtures;
pub mod frontier;
pub mod growth;
pub mod homogeneous;
pub mod linalg;
pub mod market;
pub mod measures;
pub mod solver;

pub use error::{Error, ErrorClass, Result};
pub use market::{Market, Portfolio, PortfolioStats, StructureReport};
pub use measures::{AxiomFlags, MeasureKind, RiskMeasure, Utility, UtilityFlags};
pub use solver::{
    Admissible, KktReport, ProblemForm, SolverConfig, TradeoffProblem, TradeoffSolution, UtilityMax,
};
