//! Growth-optimal portfolios, leverage-space paths and equivalent
//! martingale measures.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::frontier::{self, FrontierCurve};
use crate::linalg;
use crate::market::{Market, Portfolio};
use crate::measures::{RiskMeasure, Utility};
use crate::solver::{maximize_log, LogMaxStatus, TradeoffProblem};

const MAX_ITER: usize = 500;
const STATIONARITY_TOL: f64 = 1e-8;
const EMM_TOL: f64 = 1e-8;
/// Smallest `α` for which the betting market of the two-state example is
/// favourable.
const ALPHA_MIN: f64 = 9.0 / 22.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthResult {
    pub kappa: Portfolio,
    /// `E[ln(S₁·κ)]`
    pub mu_kappa: f64,
    /// `‖E[(Ŝ₁ − RŜ₀)/(S₁·κ)]‖∞`
    pub gradient_residual: f64,
}

/// Maximizer of `E[ln(R + Gx̂)]` over unit-cost portfolios.
pub fn growth_optimal(market: &Market) -> Result<GrowthResult> {
    market.require_all_clear()?;
    let n = market.num_states();
    let y0 = DVector::from_element(n, market.r());
    let g = market.excess_matrix();
    let res = maximize_log(&y0, &g, market.probs(), DVector::zeros(g.ncols()), MAX_ITER)?;
    match res.status {
        LogMaxStatus::Converged => {}
        LogMaxStatus::Diverged { .. } => {
            return Err(Error::MarketPathology("expected log payoff is unbounded".into()))
        }
        LogMaxStatus::Exhausted => return Err(Error::SolverFailure("growth maximization did not converge".into())),
    }
    let kappa = Portfolio::unit_cost(market, res.z);
    let gradient_residual = stationarity_residual(market, &kappa);
    if !(gradient_residual <= STATIONARITY_TOL) {
        return Err(Error::SolverFailure(format!("growth optimum stationarity {gradient_residual:e}")));
    }
    Ok(GrowthResult { kappa, mu_kappa: res.value, gradient_residual })
}

/// `‖E[(Ŝ₁ − RŜ₀)/(S₁·x)]‖∞`, the first-order condition of growth optimality.
pub fn stationarity_residual(market: &Market, portfolio: &Portfolio) -> f64 {
    let y = market.payoff(portfolio);
    let p = market.probs();
    let w = DVector::from_fn(y.len(), |i, _| p[i] / y[i]);
    (market.excess_matrix().transpose() * w).amax()
}

/// Growth-optimal stake `(22α − 9)/(20α)` of the two-state betting market.
pub fn kelly_two_state(alpha: f64) -> Result<f64> {
    if !(alpha > ALPHA_MIN) {
        return Err(Error::AlphaTooSmall(alpha));
    }
    Ok((22.0 * alpha - 9.0) / (20.0 * alpha))
}

/// `ν(r) = 0.55 ln(1 + αr) + 0.45 ln(1 − 0.5r)` on `[0, f*(α)]`.
pub fn betting_nu(alpha: f64, r: f64) -> Result<f64> {
    let r_max = kelly_two_state(alpha)?;
    if !(0.0..=r_max).contains(&r) {
        return Err(Error::OutOfRange(format!("risk level {r} outside [0, {r_max}]")));
    }
    Ok(0.55 * (alpha * r).ln_1p() + 0.45 * (-0.5 * r).ln_1p())
}

fn require_leverage_measure(measure: &RiskMeasure) -> Result<()> {
    let f = measure.flags;
    if !(f.r1 && f.r1n && f.r2) {
        return Err(Error::Unsupported("leverage paths need a convex measure vanishing exactly on the bond".into()));
    }
    Ok(())
}

/// `ν(r)` with log utility over a risk grid within `[0, 𝔯(κ)]`.
pub fn leverage_path(market: &Market, measure: &RiskMeasure, r_grid: &[f64]) -> Result<FrontierCurve> {
    require_leverage_measure(measure)?;
    let problem = TradeoffProblem::new(market, measure, Utility::Log)?;
    frontier::trace_risk_frontier(&problem, r_grid)
}

/// `n` uniform risk levels from 0 to `𝔯(κ)`; just 0 when `κ` is the bond.
pub fn leverage_grid(market: &Market, measure: &RiskMeasure, n: usize) -> Result<Vec<f64>> {
    let kappa = growth_optimal(market)?.kappa;
    let r_kappa = measure.eval(&kappa.x_hat)?;
    Ok(if r_kappa > 0.0 { frontier::uniform(0.0, r_kappa, n) } else { frontier::uniform(0.0, 0.0, n.min(1)) })
}

/// Maximizer of `E[ln(Ŝ₁·x̂)]` over `Ŝ₀·x̂ = 1` with no bond.
pub fn risky_only_growth(market: &Market) -> Result<(Portfolio, f64)> {
    let s1 = market.payoffs();
    for state in 0..s1.nrows() {
        for asset in 0..s1.ncols() {
            if !(s1[(state, asset)] > 0.0) {
                return Err(Error::NonPositivePayoff { state, asset });
            }
        }
    }
    let s0 = market.s0_hat();
    let a = s0 / s0.norm_squared();
    let b = linalg::orthonormal_complement(s0);
    let y0 = s1 * &a;
    let h: DMatrix<f64> = s1 * &b;
    let res = maximize_log(&y0, &h, market.probs(), DVector::zeros(b.ncols()), MAX_ITER)?;
    match res.status {
        LogMaxStatus::Converged => Ok((Portfolio::new(0.0, a + b * res.z), res.value)),
        LogMaxStatus::Diverged { .. } => Err(Error::MarketPathology("risky-only log payoff is unbounded".into())),
        LogMaxStatus::Exhausted => Err(Error::SolverFailure("risky-only growth did not converge".into())),
    }
}

/// `μ_κ`, the largest attainable expected log payoff.
pub fn efficiency_index(market: &Market) -> Result<f64> {
    Ok(growth_optimal(market)?.mu_kappa)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleMeasure {
    pub q: DVector<f64>,
}

/// Martingale measure `q = λp/E[λ]` with `λ = u′` at the optimal payoff.
pub fn extract_emm(market: &Market, utility: Utility) -> Result<MartingaleMeasure> {
    let f = utility.flags();
    if !(f.u1 && f.u2s && f.u3 && f.u4) {
        return Err(Error::Unsupported(format!("{} utility is not strictly concave with a barrier at zero", utility.name())));
    }
    let kappa = growth_optimal(market)?.kappa;
    let y = market.payoff(&kappa);
    let p = market.probs();
    let weighted = DVector::from_fn(y.len(), |i, _| p[i] * utility.derivative(y[i]));
    let q = &weighted / weighted.sum();
    if q.iter().any(|&v| !(v > 0.0)) || (q.sum() - 1.0).abs() > 1e-12 {
        return Err(Error::SolverFailure("state weights are not a probability vector".into()));
    }
    let residual = verify_emm(market, &q).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !(residual <= EMM_TOL) {
        return Err(Error::SolverFailure(format!("martingale residual {residual:e}")));
    }
    Ok(MartingaleMeasure { q })
}

/// `E^Q[S₁ᵐ] − R·S₀ᵐ` for the bond (always 0) and each risky asset.
pub fn verify_emm(market: &Market, q: &DVector<f64>) -> Vec<f64> {
    let priced = market.payoffs().transpose() * q - market.s0_hat() * market.r();
    std::iter::once(0.0).chain(priced.iter().copied()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Boundedness {
    BoundedLikely,
    /// The objective diverged along this risky position.
    UnboundedDetected(DVector<f64>),
}

/// Runs the growth maximization without the structural market check and
/// reports divergence along an improving ray.
pub fn utility_boundedness_probe(market: &Market, utility: Utility, iterations: usize) -> Result<Boundedness> {
    let f = utility.flags();
    if !(f.u3 && f.u4) {
        return Err(Error::Unsupported(format!("{} utility has no barrier at zero", utility.name())));
    }
    let n = market.num_states();
    let y0 = DVector::from_element(n, market.r());
    let g = market.excess_matrix();
    let res = maximize_log(&y0, &g, market.probs(), DVector::zeros(g.ncols()), iterations)?;
    Ok(match res.status {
        LogMaxStatus::Diverged { direction } => Boundedness::UnboundedDetected(direction),
        _ => Boundedness::BoundedLikely,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Configuration {
    /// The risky-only optimum lies strictly below the full frontier.
    Separated,
    /// The risky-only optimum is the growth-optimal portfolio.
    TouchingAtKappa,
    /// The risky-only optimum is an interior point of the full frontier.
    OnFrontierInterior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemPosition {
    pub risky_only: Portfolio,
    pub risk_sub: f64,
    pub mu_sub: f64,
    /// `ν` of the full problem at `risk_sub`.
    pub nu_full: f64,
    pub r_kappa: f64,
    pub configuration: Configuration,
}

/// Places the risky-only growth optimum relative to the full log-utility
/// frontier of `measure`.
pub fn classify_subsystem(market: &Market, measure: &RiskMeasure) -> Result<SubsystemPosition> {
    let (risky_only, mu_sub) = risky_only_growth(market)?;
    let risk_sub = measure.eval(&risky_only.x_hat)?;
    let problem = TradeoffProblem::new(market, measure, Utility::Log)?;
    let nu_full = problem.max_utility(risk_sub)?.utility;
    let kappa = growth_optimal(market)?.kappa;
    let r_kappa = measure.eval(&kappa.x_hat)?;
    let tol = 1e-8;
    let configuration = if nu_full - mu_sub > tol {
        Configuration::Separated
    } else if risky_only.distance(&kappa) <= 1e-6 || risk_sub >= r_kappa - tol {
        Configuration::TouchingAtKappa
    } else {
        Configuration::OnFrontierInterior
    };
    Ok(SubsystemPosition { risky_only, risk_sub, mu_sub, nu_full, r_kappa, configuration })
}

/// Golden-section maximizer of a unimodal function on `[lo, hi]`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let ratio = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
