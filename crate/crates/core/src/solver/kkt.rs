//! Lagrange multipliers and optimality residuals over the full share
//! vector `x = (x₀, x̂)`.

use nalgebra::DVector;

use super::{Admissible, KktReport, ProblemForm, TradeoffProblem};
use crate::error::{Error, Result};
use crate::market::{Market, Portfolio};
use crate::measures::{MeasureKind, RiskMeasure, Utility};

/// Gradient of `E[u(S₁·x)]` with respect to `(x₀, x̂)`.
fn utility_gradient(market: &Market, utility: Utility, portfolio: &Portfolio) -> (f64, DVector<f64>) {
    let y = market.payoff(portfolio);
    let p = market.probs();
    let w = DVector::from_fn(y.len(), |i, _| p[i] * utility.derivative(y[i]));
    (market.r() * w.sum(), market.payoffs().transpose() * w)
}

fn smooth_risk_gradient(measure: &RiskMeasure, x_hat: &DVector<f64>) -> Option<DVector<f64>> {
    match &measure.kind {
        MeasureKind::HalfVariance(s) => Some(s * x_hat),
        MeasureKind::StdDev(s) => {
            let sx = s * x_hat;
            let sigma = x_hat.dot(&sx).max(0.0).sqrt();
            Some(if sigma > 0.0 { sx / sigma } else { DVector::zeros(x_hat.len()) })
        }
        _ => None,
    }
}

/// Budget multiplier making the Lagrangian stationary in the bond
/// direction, or the least-squares fit onto `Ŝ₀` when the bond is fixed.
pub(crate) fn budget_multiplier(
    admissible: Admissible,
    s0_hat: &DVector<f64>,
    du_x0: f64,
    rest_x_hat: &DVector<f64>,
    form: ProblemForm,
    lambda1: f64,
) -> f64 {
    match admissible {
        Admissible::UnitCost => match form {
            ProblemForm::MinRisk if lambda1.is_finite() => -lambda1 * du_x0,
            _ => -du_x0,
        },
        Admissible::RiskyOnly => s0_hat.dot(rest_x_hat) / s0_hat.norm_squared(),
    }
}

/// Report for a smooth measure using exact gradients.
pub(crate) fn analytic_report(
    prob: &TradeoffProblem<'_>,
    portfolio: &Portfolio,
    form: ProblemForm,
    level: f64,
    lambda1: f64,
    risk: f64,
    utility: f64,
) -> KktReport {
    let market = prob.market;
    let (du0, du) = utility_gradient(market, prob.utility, portfolio);
    let dr = smooth_risk_gradient(prob.measure, &portfolio.x_hat).unwrap_or_else(|| DVector::zeros(du.len()));
    // the part of ∇L excluding the budget term, in x̂ and x₀
    let (rest, rest0) = match form {
        ProblemForm::MinRisk if lambda1.is_finite() => (&dr - &du * lambda1, -lambda1 * du0),
        ProblemForm::MinRisk => (-&du, -du0),
        ProblemForm::MaxUtility if lambda1.is_finite() => (&dr * lambda1 - &du, -du0),
        // the feasible set is a single point
        ProblemForm::MaxUtility => {
            return KktReport { lambda1, lambda2: -du0, stationarity_residual: 0.0, complementary_slackness: 0.0 }
        }
    };
    let s0 = market.s0_hat();
    let lambda2 = budget_multiplier(prob.admissible, s0, du0, &rest, form, lambda1);
    let grad = &rest - s0 * lambda2;
    let mut stationarity = grad.norm_squared();
    if prob.admissible == Admissible::UnitCost {
        stationarity += (rest0 - lambda2).powi(2);
    }
    let cs = slackness(form, lambda1, level, risk, utility) + lambda2 * (market.cost(portfolio) - 1.0);
    KktReport { lambda1, lambda2, stationarity_residual: stationarity.sqrt(), complementary_slackness: cs }
}

pub(crate) fn slackness(form: ProblemForm, lambda1: f64, level: f64, risk: f64, utility: f64) -> f64 {
    if !lambda1.is_finite() || lambda1 == 0.0 {
        return 0.0;
    }
    match form {
        ProblemForm::MinRisk => lambda1 * (utility - level),
        ProblemForm::MaxUtility => lambda1 * (risk - level),
    }
}

/// Finite-difference KKT check of `min 𝔯` at `portfolio` over unit-cost
/// portfolios with expected-utility level `mu`.
pub fn kkt_residual(
    market: &Market,
    measure: &RiskMeasure,
    utility: Utility,
    portfolio: &Portfolio,
    mu: f64,
    lambda1: f64,
    lambda2: f64,
) -> Result<KktReport> {
    kkt_residual_for(market, measure, utility, Admissible::UnitCost, ProblemForm::MinRisk, portfolio, mu, lambda1, lambda2)
}

/// Finite-difference KKT check for either problem form. With a fixed bond
/// position the `x₀` coordinate is excluded.
#[allow(clippy::too_many_arguments)]
pub fn kkt_residual_for(
    market: &Market,
    measure: &RiskMeasure,
    utility: Utility,
    admissible: Admissible,
    form: ProblemForm,
    portfolio: &Portfolio,
    level: f64,
    lambda1: f64,
    lambda2: f64,
) -> Result<KktReport> {
    market.check_dim(portfolio.dim())?;
    market.check_dim(measure.dim())?;
    let lagrangian = |x: &Portfolio| -> Result<f64> {
        let risk = measure.eval(&x.x_hat)?;
        let eu = utility.expected(market.probs(), &market.payoff(x));
        if eu == f64::NEG_INFINITY {
            return Err(Error::DomainViolation);
        }
        let budget = market.cost(x) - 1.0;
        Ok(match form {
            ProblemForm::MinRisk => risk - lambda1 * (eu - level) - lambda2 * budget,
            ProblemForm::MaxUtility => -eu + lambda1 * (risk - level) - lambda2 * budget,
        })
    };
    let base = lagrangian(portfolio)?;
    let coords = portfolio.dim() + 1;
    let first = if admissible == Admissible::RiskyOnly { 1 } else { 0 };
    let mut grad_sq = 0.0;
    for c in first..coords {
        let value = if c == 0 { portfolio.x0 } else { portfolio.x_hat[c - 1] };
        let h = 1e-6 * value.abs().max(1.0);
        let shifted = |delta: f64| {
            let mut x = portfolio.clone();
            if c == 0 {
                x.x0 += delta;
            } else {
                x.x_hat[c - 1] += delta;
            }
            x
        };
        let fwd = (lagrangian(&shifted(h))? - base) / h;
        let bwd = (base - lagrangian(&shifted(-h))?) / h;
        if (fwd - bwd).abs() > 1e-3 * (1.0 + fwd.abs() + bwd.abs()) {
            return Err(Error::NonSmoothPoint { coordinate: c });
        }
        grad_sq += (0.5 * (fwd + bwd)).powi(2);
    }
    let risk = measure.eval(&portfolio.x_hat)?;
    let eu = utility.expected(market.probs(), &market.payoff(portfolio));
    let cs = slackness(form, lambda1, level, risk, eu) + lambda2 * (market.cost(portfolio) - 1.0);
    Ok(KktReport { lambda1, lambda2, stationarity_residual: grad_sq.sqrt(), complementary_slackness: cs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn markowitz_optimum_multipliers() {
        let f2 = fixtures::f2();
        let hv = RiskMeasure::half_variance_of(&f2);
        let x = Portfolio::from_slice(0.0, &[0.0, 1.0]);
        let rep = kkt_residual(&f2, &hv, Utility::Identity, &x, 2.0, 4.0, -4.0).unwrap();
        assert!(rep.stationarity_residual <= 1e-6, "{rep:?}");
        assert!(rep.complementary_slackness.abs() <= 1e-12);
        let wrong = kkt_residual(&f2, &hv, Utility::Identity, &x, 2.0, 5.0, -4.0).unwrap();
        assert!(wrong.stationarity_residual > 0.1);
    }

    #[test]
    fn bond_with_inactive_constraint() {
        let f2 = fixtures::f2();
        let hv = RiskMeasure::half_variance_of(&f2);
        let rep = kkt_residual(&f2, &hv, Utility::Identity, &Portfolio::bond(2), 0.5, 0.0, 0.0).unwrap();
        assert_eq!(rep.complementary_slackness, 0.0);
        assert!(rep.stationarity_residual <= 1e-9);
    }

    #[test]
    fn kink_is_reported() {
        let f2 = fixtures::f2();
        let abs = RiskMeasure::abs_exposure(vec![1.0, 1.0]).unwrap();
        let x = Portfolio::from_slice(0.0, &[0.0, 1.0]);
        assert_eq!(
            kkt_residual(&f2, &abs, Utility::Identity, &x, 2.0, 1.0, -1.0).unwrap_err(),
            Error::NonSmoothPoint { coordinate: 1 }
        );
    }
}
