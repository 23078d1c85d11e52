//! Risk/utility trade-off problems over unit-cost portfolios.
//!
//! The budget is eliminated: a unit-cost portfolio is determined by its
//! risky part `x̂`, and its payoff is `R + Gx̂`. For the purely risky
//! admissible set the extra constraint `Ŝ₀·x̂ = 1` is handled by writing
//! `x̂ = a + Bz` with `B` an orthonormal basis of `Ŝ₀^⊥`.

pub mod lp;

mod kkt;
mod polyhedral;
mod smooth;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::market::{Market, Portfolio};
use crate::measures::{RiskMeasure, Utility};

pub use kkt::{kkt_residual, kkt_residual_for};
pub(crate) use smooth::{maximize_log, LogMaxStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Admissible {
    /// `S₀·x = 1`
    #[default]
    UnitCost,
    /// `S₀·x = 1` and `x₀ = 0`
    RiskyOnly,
}

impl Admissible {
    pub fn name(&self) -> &'static str {
        match self {
            Admissible::UnitCost => "unit_cost",
            Admissible::RiskyOnly => "unit_cost_risky_only",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Target accuracy on the binding constraint.
    pub tol: f64,
    /// Iteration cap for inner Newton loops.
    pub max_newton: usize,
    /// Optional start for the inner minimization, as a risky position.
    pub start: Option<DVector<f64>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_newton: 200, start: None }
    }
}

/// Multipliers and optimality residuals at a reported solution.
///
/// For `min 𝔯` the Lagrangian is `𝔯(x) − λ₁(E[u(S₁·x)] − μ) − λ₂(S₀·x − 1)`;
/// for `max E[u]` it is `−E[u(S₁·x)] + λ₁(𝔯(x) − r) − λ₂(S₀·x − 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    pub lambda1: f64,
    pub lambda2: f64,
    pub stationarity_residual: f64,
    pub complementary_slackness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffSolution {
    pub portfolio: Portfolio,
    pub risk: f64,
    pub utility: f64,
    /// Whether the level constraint is active at the solution.
    pub binding: bool,
    pub kkt: KktReport,
    /// Strict convexity of the risk measure or strict concavity of the
    /// utility makes the optimal portfolio unique.
    pub uniqueness_guaranteed: bool,
}

/// Supremum of expected utility over the admissible set.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityMax {
    pub value: f64,
    pub attained: bool,
    pub portfolio: Option<Portfolio>,
    pub gradient_residual: f64,
}

/// One instance of the trade-off problem; cheap to solve repeatedly.
#[derive(Debug, Clone)]
pub struct TradeoffProblem<'a> {
    pub(crate) market: &'a Market,
    pub(crate) measure: &'a RiskMeasure,
    pub(crate) utility: Utility,
    pub(crate) admissible: Admissible,
    pub(crate) config: SolverConfig,
    pub(crate) g: DMatrix<f64>,
    /// `x̂ = a + Bz`
    pub(crate) a: DVector<f64>,
    pub(crate) b: DMatrix<f64>,
}

impl<'a> TradeoffProblem<'a> {
    /// Validates dimensions and rejects markets with an arbitrage or a
    /// nontrivial riskless portfolio.
    pub fn new(market: &'a Market, measure: &'a RiskMeasure, utility: Utility) -> Result<Self> {
        market.check_dim(measure.dim())?;
        market.require_all_clear()?;
        Ok(Self::unchecked(market, measure, utility))
    }

    /// Skips the structural market check.
    pub fn unchecked(market: &'a Market, measure: &'a RiskMeasure, utility: Utility) -> Self {
        let m = market.num_assets();
        Self {
            market,
            measure,
            utility,
            admissible: Admissible::UnitCost,
            config: SolverConfig::default(),
            g: market.excess_matrix(),
            a: DVector::zeros(m),
            b: DMatrix::identity(m, m),
        }
    }

    pub fn admissible(mut self, admissible: Admissible) -> Self {
        self.admissible = admissible;
        let m = self.market.num_assets();
        match admissible {
            Admissible::UnitCost => {
                self.a = DVector::zeros(m);
                self.b = DMatrix::identity(m, m);
            }
            Admissible::RiskyOnly => {
                let s0 = self.market.s0_hat();
                self.a = s0 / s0.norm_squared();
                self.b = linalg::orthonormal_complement(s0);
            }
        }
        self
    }

    pub fn config(mut self, config: SolverConfig) -> Self {
        self.config = config;
        self
    }

    pub fn market(&self) -> &Market {
        self.market
    }

    pub fn measure(&self) -> &RiskMeasure {
        self.measure
    }

    pub fn utility(&self) -> Utility {
        self.utility
    }

    pub fn admissible_set(&self) -> Admissible {
        self.admissible
    }

    pub fn uniqueness_guaranteed(&self) -> bool {
        let f = self.measure.flags;
        let u = self.utility.flags();
        (f.r1 && f.r2s && u.u1 && u.u2) || (f.r1 && f.r2 && u.u1 && u.u2s)
    }

    pub(crate) fn x_hat(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.a + &self.b * z
    }

    pub(crate) fn z_of(&self, x_hat: &DVector<f64>) -> DVector<f64> {
        self.b.transpose() * (x_hat - &self.a)
    }

    pub(crate) fn portfolio(&self, x_hat: DVector<f64>) -> Portfolio {
        match self.admissible {
            Admissible::UnitCost => Portfolio::unit_cost(self.market, x_hat),
            Admissible::RiskyOnly => Portfolio::new(0.0, x_hat),
        }
    }

    /// Payoff `R + Gx̂` of the admissible portfolio with risky part `x̂`.
    pub(crate) fn payoff(&self, x_hat: &DVector<f64>) -> DVector<f64> {
        let n = self.market.num_states();
        DVector::from_element(n, self.market.r()) + &self.g * x_hat
    }

    pub(crate) fn expected_utility(&self, x_hat: &DVector<f64>) -> f64 {
        self.utility.expected(self.market.probs(), &self.payoff(x_hat))
    }

    pub fn risk_of(&self, x_hat: &DVector<f64>) -> Result<f64> {
        self.measure.eval(x_hat)
    }

    /// `u(R)`, the utility of the pure bond.
    pub fn bond_utility(&self) -> f64 {
        self.utility.value(self.market.r())
    }

    fn bond_available(&self) -> bool {
        self.admissible == Admissible::UnitCost
    }

    /// `γ(μ) = min{𝔯(x) : E[u(S₁·x)] ≥ μ}`.
    pub fn min_risk(&self, mu: f64) -> Result<TradeoffSolution> {
        if !mu.is_finite() {
            return Err(Error::NonFinite("utility level".into()));
        }
        if self.bond_available() && self.measure.flags.r1n && mu <= self.bond_utility() {
            return Ok(self.bond_solution(mu, ProblemForm::MinRisk));
        }
        if self.measure.is_polyhedral() {
            match self.utility {
                Utility::Identity => polyhedral::lp_min_risk(self, mu),
                Utility::Log => polyhedral::barrier_min_risk(self, mu),
            }
        } else {
            smooth::min_risk(self, mu)
        }
    }

    /// `ν(r) = max{E[u(S₁·x)] : 𝔯(x) ≤ r}`.
    pub fn max_utility(&self, r: f64) -> Result<TradeoffSolution> {
        if !r.is_finite() {
            return Err(Error::NonFinite("risk level".into()));
        }
        if r < 0.0 {
            return Err(Error::Infeasible { level: r, supremum: 0.0 });
        }
        if self.bond_available() && self.measure.flags.r1n && r == 0.0 {
            return Ok(self.bond_solution(r, ProblemForm::MaxUtility));
        }
        if self.measure.is_polyhedral() {
            match self.utility {
                Utility::Identity => polyhedral::lp_max_utility(self, r),
                Utility::Log => polyhedral::barrier_max_utility(self, r),
            }
        } else {
            smooth::max_utility(self, r)
        }
    }

    /// `μ_max` and its maximizer, when attained.
    pub fn utility_max(&self) -> Result<UtilityMax> {
        smooth::utility_max(self)
    }

    /// `r_min` and the risk-minimal admissible portfolio.
    pub fn min_risk_portfolio(&self) -> Result<TradeoffSolution> {
        if self.bond_available() && self.measure.flags.r1n {
            return Ok(self.bond_solution(f64::NEG_INFINITY, ProblemForm::MinRisk));
        }
        if self.measure.is_polyhedral() {
            polyhedral::lp_min_risk_unconstrained(self)
        } else {
            smooth::min_risk_unconstrained(self)
        }
    }

    fn bond_solution(&self, level: f64, form: ProblemForm) -> TradeoffSolution {
        let m = self.market.num_assets();
        let x_hat = DVector::zeros(m);
        let utility = self.expected_utility(&x_hat);
        let binding = match form {
            ProblemForm::MinRisk => level == utility,
            ProblemForm::MaxUtility => true,
        };
        // zero risk pins x̂ = 0, so the risk multiplier of the max form is unbounded
        let (lambda1, lambda2) = match form {
            ProblemForm::MinRisk => (0.0, 0.0),
            ProblemForm::MaxUtility => {
                (f64::INFINITY, -self.market.r() * self.utility.derivative(self.market.r()))
            }
        };
        TradeoffSolution {
            portfolio: Portfolio::bond(m),
            risk: 0.0,
            utility,
            binding,
            kkt: KktReport { lambda1, lambda2, stationarity_residual: 0.0, complementary_slackness: 0.0 },
            uniqueness_guaranteed: self.uniqueness_guaranteed(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemForm {
    MinRisk,
    MaxUtility,
}

/// Risk-minimal unit-cost portfolio reaching expected utility `mu`.
pub fn min_risk_given_utility(
    market: &Market,
    measure: &RiskMeasure,
    utility: Utility,
    mu: f64,
) -> Result<TradeoffSolution> {
    TradeoffProblem::new(market, measure, utility)?.min_risk(mu)
}

/// Utility-maximal unit-cost portfolio with risk at most `r`.
pub fn max_utility_given_risk(
    market: &Market,
    measure: &RiskMeasure,
    utility: Utility,
    r: f64,
) -> Result<TradeoffSolution> {
    TradeoffProblem::new(market, measure, utility)?.max_utility(r)
}
