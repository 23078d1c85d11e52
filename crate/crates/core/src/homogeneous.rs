//! Affine efficient frontiers of positively homogeneous risk measures with
//! the identity utility, and the basic and master funds spanning them.

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fixtures;
use crate::linalg;
use crate::market::{Market, Portfolio};
use crate::measures::{RiskMeasure, Utility};
use crate::solver::{Admissible, TradeoffProblem};

/// `|x¹₀ − 1|` at or below this means the basic fund holds exactly one bond.
const MASTER_THRESHOLD: f64 = 1e-9;
/// Above the threshold but below this the master fund is numerically fragile.
const MASTER_WARNING_BAND: f64 = 1e-6;
const AFFINE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct MasterFund {
    /// Zero bond position and unit cost.
    pub portfolio: Portfolio,
    pub r_m: f64,
    pub mu_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffineFrontier {
    /// Efficient portfolio at `μ₁ = R + 1`.
    pub x1: Portfolio,
    pub r1: f64,
    /// `𝔯(−x̂¹)`, the risk of the line's extension below `R`.
    pub r1_reflected: f64,
    pub r: f64,
    pub mu1: f64,
    pub master_fund: Option<MasterFund>,
    /// `x¹₀` lies within the warning band around 1.
    pub near_degenerate: bool,
}

fn require_homogeneous(measure: &RiskMeasure) -> Result<()> {
    let f = measure.flags;
    for (ok, name) in [(f.r1, "r1"), (f.r1n, "r1n"), (f.r2, "r2"), (f.r3, "r3")] {
        if !ok {
            return Err(Error::NotHomogeneous(name.into()));
        }
    }
    Ok(())
}

/// Solves the identity-utility problem at `μ₁ = R + 1` and packages the
/// straight-line frontier through the bond.
pub fn basic_fund(market: &Market, measure: &RiskMeasure) -> Result<AffineFrontier> {
    require_homogeneous(measure)?;
    let excess = market.expected_excess();
    if excess.amax() <= 1e-12 * (1.0 + market.expected_payoffs().amax()) {
        return Err(Error::FlatMarket);
    }
    let problem = TradeoffProblem::new(market, measure, Utility::Identity)?;
    let r = market.r();
    let mu1 = r + 1.0;
    let sol = problem.min_risk(mu1)?;
    let x1 = sol.portfolio;
    let gap = (x1.x0 - 1.0).abs();
    let near_degenerate = gap > MASTER_THRESHOLD && gap <= MASTER_WARNING_BAND;
    if near_degenerate {
        warn!("basic fund bond position {} is within {MASTER_WARNING_BAND:e} of 1", x1.x0);
    }
    let r1_reflected = measure.eval(&-&x1.x_hat)?;
    let mut frontier = AffineFrontier { x1, r1: sol.risk, r1_reflected, r, mu1, master_fund: None, near_degenerate };
    frontier.master_fund = master_fund(&frontier).ok();
    Ok(frontier)
}

/// `(μ₁ − μ)(1, 0̂) + (μ − R)x¹`
pub fn affine_frontier_portfolio(frontier: &AffineFrontier, mu: f64) -> Result<Portfolio> {
    if mu < frontier.r {
        return Err(Error::BelowRiskless { mu, r: frontier.r });
    }
    let bond = Portfolio::bond(frontier.x1.dim());
    Ok(bond.scale(frontier.mu1 - mu).add(&frontier.x1.scale(mu - frontier.r)))
}

/// `γ(μ) = (μ − R)r₁`
pub fn affine_risk(frontier: &AffineFrontier, mu: f64) -> Result<f64> {
    if mu < frontier.r {
        return Err(Error::BelowRiskless { mu, r: frontier.r });
    }
    Ok((mu - frontier.r) * frontier.r1)
}

/// Purely risky efficient portfolio on the line through the bond and `x¹`.
pub fn master_fund(frontier: &AffineFrontier) -> Result<MasterFund> {
    let x10 = frontier.x1.x0;
    if (x10 - 1.0).abs() <= MASTER_THRESHOLD {
        return Err(Error::NoMasterFund);
    }
    let scale = 1.0 / (1.0 - x10);
    Ok(MasterFund {
        portfolio: Portfolio::new(0.0, &frontier.x1.x_hat * scale),
        r_m: if scale > 0.0 { frontier.r1 * scale } else { -frontier.r1_reflected * scale },
        mu_m: (frontier.mu1 - frontier.r * x10) * scale,
    })
}

/// The box-with-rotated-cap gauge on a three-asset market whose expected
/// payoff functional is `x̂ ↦ x₁`.
pub fn counterexample_fixture() -> (Market, RiskMeasure) {
    fixtures::counterexample()
}

/// Risk-minimal purely risky portfolios of the counterexample at each `μ`.
pub fn counterexample_path(mus: &[f64]) -> Result<Vec<(f64, Portfolio)>> {
    let (market, gauge) = counterexample_fixture();
    let problem = TradeoffProblem::unchecked(&market, &gauge, Utility::Identity).admissible(Admissible::RiskyOnly);
    mus.iter().map(|&mu| Ok((mu, problem.min_risk(mu)?.portfolio))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffinityReport {
    pub is_affine: bool,
    /// Largest coordinate residual of the least-squares fit `a + μb`.
    pub max_deviation: f64,
}

pub fn verify_affinity(path: &[(f64, Portfolio)]) -> AffinityReport {
    if path.len() <= 2 {
        return AffinityReport { is_affine: true, max_deviation: 0.0 };
    }
    let n = path.len();
    let design = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { path[i].0 });
    let coords = path[0].1.dim() + 1;
    let mut worst = 0.0_f64;
    for c in 0..coords {
        let y = DVector::from_fn(n, |i, _| path[i].1.to_vec()[c]);
        let fit = linalg::least_squares(design.clone(), &y).unwrap_or_else(|| DVector::zeros(2));
        worst = worst.max((&design * fit - y).amax());
    }
    AffinityReport { is_affine: worst <= AFFINE_TOL, max_deviation: worst }
}
