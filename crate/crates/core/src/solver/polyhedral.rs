//! Polyhedral measures (weighted absolute exposure, polytope gauge).
//!
//! Both are written in lifted form `𝔯̂(x̂) = min{cᵀθ : Dθ = x̂, θ ≥ 0}`, so
//! the frontier problems become problems in `θ` over the nonnegative
//! orthant. With the identity utility they are linear programs; with the
//! log utility they are smooth convex programs, solved by a primal
//! log-barrier method.

use nalgebra::{DMatrix, DVector};

use super::kkt::{budget_multiplier, slackness};
use super::lp::{LinearProgram, LpStatus, Sense};
use super::{Admissible, KktReport, ProblemForm, TradeoffProblem, TradeoffSolution};
use crate::error::{Error, Result};
use crate::linalg;
use crate::measures::{lifted_representation, Utility};

const TAU_FINAL: f64 = 1e-13;

struct Lifted {
    d: DMatrix<f64>,
    c: DVector<f64>,
}

fn lifted(prob: &TradeoffProblem<'_>) -> Result<Lifted> {
    let (d, c) = prob
        .measure
        .lifted()
        .ok_or_else(|| Error::Unsupported("measure has no polyhedral form".into()))?;
    Ok(Lifted { d, c })
}

/// Gradient of expected utility in `x̂`, in the coordinates where the
/// budget multiplier is separated out: reduced (`Gᵀ…`) with a free bond,
/// full (`Ŝ₁ᵀ…`) when the bond is fixed at zero.
fn utility_gradient(prob: &TradeoffProblem<'_>, x_hat: &DVector<f64>) -> (f64, DVector<f64>) {
    let y = prob.payoff(x_hat);
    let p = prob.market.probs();
    let u = prob.utility;
    let w = DVector::from_fn(y.len(), |i, _| p[i] * u.derivative(y[i]));
    let du0 = prob.market.r() * w.sum();
    let grad = match prob.admissible {
        Admissible::UnitCost => prob.g.transpose() * &w,
        Admissible::RiskyOnly => prob.market.payoffs().transpose() * &w,
    };
    (du0, grad)
}

/// Natural residual `‖min(θ, ∇_θL)‖∞` of the lifted problem.
#[allow(clippy::too_many_arguments)]
fn lifted_report(
    prob: &TradeoffProblem<'_>,
    lift: &Lifted,
    theta: &DVector<f64>,
    form: ProblemForm,
    level: f64,
    lambda1: f64,
    lambda2_hint: Option<f64>,
    risk: f64,
    utility: f64,
) -> KktReport {
    let x_hat = &lift.d * theta;
    let (du0, du) = utility_gradient(prob, &x_hat);
    let s0 = prob.market.s0_hat();
    let rest = match form {
        ProblemForm::MinRisk if lambda1.is_finite() => -&du * lambda1,
        ProblemForm::MinRisk => -&du,
        ProblemForm::MaxUtility => -&du,
    };
    let lambda2 = lambda2_hint.unwrap_or_else(|| budget_multiplier(prob.admissible, s0, du0, &rest, form, lambda1));
    let risk_weight = match form {
        ProblemForm::MinRisk if lambda1.is_finite() => 1.0,
        ProblemForm::MinRisk => 0.0,
        ProblemForm::MaxUtility => lambda1,
    };
    let mut grad_x = rest;
    if prob.admissible == Admissible::RiskyOnly {
        grad_x -= s0 * lambda2;
    }
    let grad = &lift.c * risk_weight + lift.d.transpose() * grad_x;
    let natural = theta.iter().zip(grad.iter()).map(|(t, g)| t.min(*g).abs()).fold(0.0, f64::max);
    let cs = slackness(form, lambda1, level, risk, utility);
    KktReport { lambda1, lambda2, stationarity_residual: natural, complementary_slackness: cs }
}

fn solution_from_theta(
    prob: &TradeoffProblem<'_>,
    lift: &Lifted,
    theta: &DVector<f64>,
    form: ProblemForm,
    level: f64,
    lambda1: f64,
    lambda2_hint: Option<f64>,
) -> Result<TradeoffSolution> {
    let x_hat = &lift.d * theta;
    let risk = prob.measure.eval(&x_hat)?;
    let utility = prob.expected_utility(&x_hat);
    let kkt = lifted_report(prob, lift, theta, form, level, lambda1, lambda2_hint, risk, utility);
    let tol = prob.config.tol.max(1e-9);
    let binding = match form {
        ProblemForm::MinRisk => (utility - level).abs() <= tol * (1.0 + level.abs()),
        ProblemForm::MaxUtility => (risk - level).abs() <= tol * (1.0 + level.abs()),
    };
    Ok(TradeoffSolution {
        portfolio: prob.portfolio(x_hat),
        risk,
        utility,
        binding,
        kkt,
        uniqueness_guaranteed: prob.uniqueness_guaranteed(),
    })
}

/// Expected-payoff row of the LP and its offset: `E[y] = offset + rowᵀθ`.
fn payoff_row(prob: &TradeoffProblem<'_>, lift: &Lifted) -> (Vec<f64>, f64) {
    match prob.admissible {
        Admissible::UnitCost => {
            let m = prob.market.expected_excess();
            ((lift.d.transpose() * m).as_slice().to_vec(), prob.market.r())
        }
        Admissible::RiskyOnly => {
            let e = prob.market.expected_payoffs();
            ((lift.d.transpose() * e).as_slice().to_vec(), 0.0)
        }
    }
}

fn add_budget_row(prob: &TradeoffProblem<'_>, lift: &Lifted, lp: &mut LinearProgram) {
    if prob.admissible == Admissible::RiskyOnly {
        let row = lift.d.transpose() * prob.market.s0_hat();
        lp.add_constraint(row.as_slice().to_vec(), Sense::Eq, 1.0);
    }
}

fn lp_theta(sol: &super::lp::LpSolution) -> DVector<f64> {
    DVector::from_iterator(sol.x.len(), sol.x.iter().map(|v| v.max(0.0)))
}

pub(crate) fn lp_min_risk_unconstrained(prob: &TradeoffProblem<'_>) -> Result<TradeoffSolution> {
    let lift = lifted(prob)?;
    let mut lp = LinearProgram::minimize(lift.c.as_slice().to_vec());
    add_budget_row(prob, &lift, &mut lp);
    let sol = lp.solve()?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::SolverFailure(format!("minimum-risk LP ended {:?}", sol.status)));
    }
    let lambda2 = match prob.admissible {
        Admissible::UnitCost => 0.0,
        Admissible::RiskyOnly => sol.duals[0],
    };
    solution_from_theta(prob, &lift, &lp_theta(&sol), ProblemForm::MinRisk, f64::NEG_INFINITY, 0.0, Some(lambda2))
}

pub(crate) fn lp_min_risk(prob: &TradeoffProblem<'_>, mu: f64) -> Result<TradeoffSolution> {
    debug_assert_eq!(prob.utility, Utility::Identity);
    let lift = lifted(prob)?;
    let (row, offset) = payoff_row(prob, &lift);
    let mut lp = LinearProgram::minimize(lift.c.as_slice().to_vec());
    lp.add_constraint(row, Sense::Ge, mu - offset);
    add_budget_row(prob, &lift, &mut lp);
    let sol = lp.solve()?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            let sup = prob.utility_max().map(|u| u.value).unwrap_or(f64::NAN);
            return Err(Error::Infeasible { level: mu, supremum: sup });
        }
        LpStatus::Unbounded => return Err(Error::SolverFailure("minimum-risk LP unbounded".into())),
    }
    let lambda1 = sol.duals[0].max(0.0);
    let lambda2 = match prob.admissible {
        Admissible::UnitCost => -lambda1 * prob.market.r(),
        Admissible::RiskyOnly => sol.duals[1],
    };
    solution_from_theta(prob, &lift, &lp_theta(&sol), ProblemForm::MinRisk, mu, lambda1, Some(lambda2))
}

pub(crate) fn lp_max_utility(prob: &TradeoffProblem<'_>, r: f64) -> Result<TradeoffSolution> {
    debug_assert_eq!(prob.utility, Utility::Identity);
    let lift = lifted(prob)?;
    let (row, _) = payoff_row(prob, &lift);
    let mut lp = LinearProgram::maximize(row);
    lp.add_constraint(lift.c.as_slice().to_vec(), Sense::Le, r);
    add_budget_row(prob, &lift, &mut lp);
    let sol = lp.solve()?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            let r_min = lp_min_risk_unconstrained(prob).map(|s| s.risk).unwrap_or(f64::NAN);
            return Err(Error::Infeasible { level: r, supremum: r_min });
        }
        LpStatus::Unbounded => {
            return Err(Error::Unsupported("expected payoff is unbounded at this risk level".into()))
        }
    }
    let eta = sol.duals[0].max(0.0);
    let lambda2 = match prob.admissible {
        Admissible::UnitCost => -prob.market.r(),
        Admissible::RiskyOnly => -sol.duals[1],
    };
    solution_from_theta(prob, &lift, &lp_theta(&sol), ProblemForm::MaxUtility, r, eta, Some(lambda2))
}

/// Value, gradient and Hessian of a barrier objective, or `None` outside
/// its domain.
type BarrierEval<'f> = dyn Fn(&DVector<f64>, f64) -> Option<(f64, DVector<f64>, DMatrix<f64>)> + 'f;

/// Follows the central path from `theta` with `τ` decreasing tenfold per
/// stage down to `TAU_FINAL · scale`.
fn central_path(theta: DVector<f64>, tau0: f64, scale: f64, max_newton: usize, eval: &BarrierEval<'_>) -> Result<(DVector<f64>, f64)> {
    let mut theta = theta;
    let mut tau = tau0;
    let tau_final = TAU_FINAL * scale;
    loop {
        let mut last_local = f64::INFINITY;
        for _ in 0..max_newton {
            let (value, grad, hess) = eval(&theta, tau).ok_or(Error::DomainViolation)?;
            let dir = match linalg::solve_square(hess, &grad) {
                Some(d) => -d,
                None => return Err(Error::SolverFailure("singular barrier Hessian".into())),
            };
            let decrement = -grad.dot(&dir);
            if decrement <= 1e-22 * scale {
                break;
            }
            if decrement <= 1e-12 * (scale + value.abs()) {
                if decrement >= 0.25 * last_local {
                    break;
                }
                last_local = decrement;
                let cand = &theta + &dir;
                if cand.iter().all(|&v| v > 0.0) && eval(&cand, tau).is_some() {
                    theta = cand;
                    continue;
                }
                break;
            }
            let mut t = 1.0;
            let mut moved = false;
            while t > 1e-20 {
                let cand = &theta + &dir * t;
                if cand.iter().all(|&v| v > 0.0) {
                    if let Some((v, _, _)) = eval(&cand, tau) {
                        if v <= value - 1e-4 * t * decrement {
                            theta = cand;
                            moved = true;
                            break;
                        }
                    }
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if tau <= tau_final {
            return Ok((theta, tau));
        }
        tau = (tau * 0.1).max(tau_final);
    }
}

struct LogData {
    h: DMatrix<f64>,
    p: DVector<f64>,
    r: f64,
}

impl LogData {
    fn new(prob: &TradeoffProblem<'_>, lift: &Lifted) -> Self {
        Self { h: &prob.g * &lift.d, p: prob.market.probs().clone(), r: prob.market.r() }
    }

    fn payoff(&self, theta: &DVector<f64>) -> DVector<f64> {
        (&self.h * theta).add_scalar(self.r)
    }

    /// Expected log payoff with gradient and Hessian in `θ`.
    fn eval(&self, theta: &DVector<f64>) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let y = self.payoff(theta);
        if y.iter().any(|&v| !(v > 0.0)) {
            return None;
        }
        let value = self.p.iter().zip(y.iter()).map(|(p, y)| p * y.ln()).sum();
        let grad = self.h.transpose() * DVector::from_fn(y.len(), |i, _| self.p[i] / y[i]);
        let k = theta.len();
        let mut hess = DMatrix::zeros(k, k);
        for i in 0..y.len() {
            let row = self.h.row(i);
            hess -= row.transpose() * row * (self.p[i] / (y[i] * y[i]));
        }
        Some((value, grad, hess))
    }
}

fn require_unit_cost(prob: &TradeoffProblem<'_>) -> Result<()> {
    if prob.admissible != Admissible::UnitCost {
        return Err(Error::Unsupported(
            "polyhedral measures with log utility are solved over unit-cost portfolios only".into(),
        ));
    }
    Ok(())
}

fn kappa(prob: &TradeoffProblem<'_>) -> Result<(DVector<f64>, f64, f64)> {
    let umax = prob.utility_max()?;
    let portfolio = umax.portfolio.ok_or_else(|| Error::SolverFailure("growth optimum not attained".into()))?;
    let risk = prob.measure.eval(&portfolio.x_hat)?;
    Ok((portfolio.x_hat, umax.value, risk))
}

pub(crate) fn barrier_max_utility(prob: &TradeoffProblem<'_>, r: f64) -> Result<TradeoffSolution> {
    require_unit_cost(prob)?;
    let lift = lifted(prob)?;
    let (k_hat, _, k_risk) = kappa(prob)?;
    if r >= k_risk {
        let theta = lifted_representation(prob.measure, &k_hat)?;
        let mut sol = solution_from_theta(prob, &lift, &theta, ProblemForm::MaxUtility, r, 0.0, None)?;
        sol.binding = r == k_risk;
        return Ok(sol);
    }
    let data = LogData::new(prob, &lift);
    let c = lift.c.clone();
    let k = c.len();
    let mut eps = r / (2.0 * c.sum());
    let mut theta0 = DVector::from_element(k, eps);
    while data.eval(&theta0).is_none() {
        eps *= 0.5;
        if eps < 1e-300 {
            return Err(Error::DomainViolation);
        }
        theta0 = DVector::from_element(k, eps);
    }
    let eval = |theta: &DVector<f64>, tau: f64| -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let s = r - c.dot(theta);
        if !(s > 0.0) || theta.iter().any(|&v| !(v > 0.0)) {
            return None;
        }
        let (u, gu, hu) = data.eval(theta)?;
        let value = -u - tau * (theta.iter().map(|t| t.ln()).sum::<f64>() + s.ln());
        let grad = -gu - theta.map(|t| tau / t) + &c * (tau / s);
        let hess = -hu + DMatrix::from_diagonal(&theta.map(|t| tau / (t * t))) + &c * c.transpose() * (tau / (s * s));
        Some((value, grad, hess))
    };
    let (theta, tau) = central_path(theta0, 1e-2, 1.0, prob.config.max_newton, &eval)?;
    // θⱼ(η cⱼ − ∂ⱼu) = τ summed over j, free of the cancellation in τ/slack
    let gu = data.eval(&theta).map(|(_, g, _)| g).ok_or(Error::DomainViolation)?;
    let eta = ((gu.dot(&theta) + k as f64 * tau) / c.dot(&theta)).max(0.0);
    solution_from_theta(prob, &lift, &theta, ProblemForm::MaxUtility, r, eta, None)
}

pub(crate) fn barrier_min_risk(prob: &TradeoffProblem<'_>, mu: f64) -> Result<TradeoffSolution> {
    require_unit_cost(prob)?;
    let lift = lifted(prob)?;
    let (k_hat, mu_k, _) = kappa(prob)?;
    let tol = prob.config.tol;
    if mu > mu_k + tol * (1.0 + mu.abs()) {
        return Err(Error::Infeasible { level: mu, supremum: mu_k });
    }
    let theta_k = lifted_representation(prob.measure, &k_hat)?;
    if mu >= mu_k - 1e-13 * (1.0 + mu.abs()) {
        return solution_from_theta(prob, &lift, &theta_k, ProblemForm::MinRisk, mu, f64::INFINITY, None);
    }
    let data = LogData::new(prob, &lift);
    let c = lift.c.clone();
    let k = c.len();
    let mut delta = 1e-2 * (1.0 + theta_k.amax());
    let theta0 = loop {
        let cand = &theta_k + DVector::from_element(k, delta);
        if let Some((u, _, _)) = data.eval(&cand) {
            if u > mu {
                break cand;
            }
        }
        delta *= 0.5;
        if delta < 1e-300 {
            return Err(Error::SolverFailure("no strictly feasible barrier start".into()));
        }
    };
    let eval = |theta: &DVector<f64>, tau: f64| -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        if theta.iter().any(|&v| !(v > 0.0)) {
            return None;
        }
        let (u, gu, hu) = data.eval(theta)?;
        let s = u - mu;
        if !(s > 0.0) {
            return None;
        }
        let value = c.dot(theta) - tau * (theta.iter().map(|t| t.ln()).sum::<f64>() + s.ln());
        let grad = &c - theta.map(|t| tau / t) - &gu * (tau / s);
        let hess = DMatrix::from_diagonal(&theta.map(|t| tau / (t * t))) + &gu * gu.transpose() * (tau / (s * s))
            - hu * (tau / s);
        Some((value, grad, hess))
    };
    let scale = 1.0 + c.dot(&theta0);
    let (theta, tau) = central_path(theta0, 1e-2 * scale, scale, prob.config.max_newton, &eval)?;
    // θⱼ(cⱼ − λ₁∂ⱼu) = τ summed over j
    let gu = data.eval(&theta).map(|(_, g, _)| g).ok_or(Error::DomainViolation)?;
    let lambda1 = ((c.dot(&theta) - k as f64 * tau) / gu.dot(&theta)).max(0.0);
    solution_from_theta(prob, &lift, &theta, ProblemForm::MinRisk, mu, lambda1, None)
}
