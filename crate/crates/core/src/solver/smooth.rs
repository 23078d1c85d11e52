//! Quadratic-type measures (half-variance, standard deviation).
//!
//! Both frontier problems share the Lagrangian path
//! `z(λ) = argmin ½x̂ᵀΣx̂ − λ·E[u(R + Gx̂)]`. Along it, risk and expected
//! utility both increase with `λ`, so each level is reached by bracketing
//! and bisecting `λ`, followed by a Newton polish on the joint KKT system.

use nalgebra::{DMatrix, DVector};

use super::kkt::analytic_report;
use super::{ProblemForm, TradeoffProblem, TradeoffSolution, UtilityMax};
use crate::error::{Error, Result};
use crate::linalg::{self, SpdFactor};
use crate::measures::{MeasureKind, Utility};

const LAMBDA_CAP: f64 = 1e16;
const DIVERGENCE_VALUE: f64 = 27.631_021_115_928_547; // ln(1e12)
const DIVERGENCE_NORM: f64 = 1e9;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LogMaxStatus {
    Converged,
    /// The objective grew without bound along `direction`.
    Diverged { direction: DVector<f64> },
    Exhausted,
}

#[derive(Debug, Clone)]
pub(crate) struct LogMax {
    pub z: DVector<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub status: LogMaxStatus,
}

fn log_value(y0: &DVector<f64>, h: &DMatrix<f64>, p: &DVector<f64>, z: &DVector<f64>) -> Option<f64> {
    let y = y0 + h * z;
    if y.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    Some(p.iter().zip(y.iter()).map(|(p, y)| p * y.ln()).sum())
}

/// Damped Newton ascent on `Σ pᵢ ln(y0ᵢ + (Hz)ᵢ)` from a strictly feasible
/// start. The Hessian is regularized in Levenberg–Marquardt fashion so that
/// a flat direction (an arbitrage) yields a divergent iterate instead of a
/// singular solve.
pub(crate) fn maximize_log(
    y0: &DVector<f64>,
    h: &DMatrix<f64>,
    p: &DVector<f64>,
    start: DVector<f64>,
    max_iter: usize,
) -> Result<LogMax> {
    let k = h.ncols();
    let mut z = start;
    let mut value = log_value(y0, h, p, &z).ok_or(Error::DomainViolation)?;
    let mut status = LogMaxStatus::Exhausted;
    let mut grad_norm = f64::INFINITY;
    for _ in 0..max_iter {
        let y = y0 + h * &z;
        let w1 = DVector::from_fn(y.len(), |i, _| p[i] / y[i]);
        let grad = h.transpose() * &w1;
        grad_norm = grad.amax();
        if k == 0 || grad_norm <= 1e-15 {
            status = LogMaxStatus::Converged;
            break;
        }
        let mut neg_hess = DMatrix::<f64>::zeros(k, k);
        for i in 0..y.len() {
            let row = h.row(i);
            neg_hess += row.transpose() * row * (p[i] / (y[i] * y[i]));
        }
        let reg = 1e-12 * neg_hess.diagonal().amax() + f64::MIN_POSITIVE;
        for j in 0..k {
            neg_hess[(j, j)] += reg;
        }
        let dir = match linalg::solve_square(neg_hess, &grad) {
            Some(d) => d,
            None => grad.clone(),
        };
        let slope = grad.dot(&dir);
        // Newton decrement below working precision
        if slope <= 1e-24 * (1.0 + value.abs()) {
            status = LogMaxStatus::Converged;
            break;
        }
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-20 {
            let cand = &z + &dir * t;
            if let Some(v) = log_value(y0, h, p, &cand) {
                // near the optimum the ascent is below rounding of the value
                let local = t == 1.0 && slope <= 1e-12 * (1.0 + value.abs());
                if local || v >= value + 1e-4 * t * slope {
                    accepted = Some((cand, v));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((cand, v)) = accepted else {
            // no ascent possible at working precision
            if grad_norm <= 1e-10 {
                status = LogMaxStatus::Converged;
            }
            break;
        };
        let step = (&cand - &z).amax();
        z = cand;
        let improvement = v - value;
        value = v;
        if value > DIVERGENCE_VALUE || z.amax() > DIVERGENCE_NORM {
            let norm = z.amax();
            status = LogMaxStatus::Diverged { direction: &z / norm };
            break;
        }
        if step <= 1e-15 * (1.0 + z.amax()) && improvement <= 1e-16 * (1.0 + value.abs()) {
            let y = y0 + h * &z;
            let grad = h.transpose() * DVector::from_fn(y.len(), |i, _| p[i] / y[i]);
            grad_norm = grad.amax();
            status = LogMaxStatus::Converged;
            break;
        }
    }
    Ok(LogMax { z, value, grad_norm, status })
}

/// Precomputed data for the smooth path in reduced coordinates.
pub(crate) struct SmoothPath<'p, 'a> {
    prob: &'p TradeoffProblem<'a>,
    std_dev: bool,
    sigma: DMatrix<f64>,
    q: DMatrix<f64>,
    q_factor: Option<SpdFactor>,
    q0: DVector<f64>,
    y0: DVector<f64>,
    h: DMatrix<f64>,
}

impl<'p, 'a> SmoothPath<'p, 'a> {
    pub(crate) fn new(prob: &'p TradeoffProblem<'a>) -> Result<Self> {
        let (sigma, std_dev) = match &prob.measure.kind {
            MeasureKind::HalfVariance(s) => (s.clone(), false),
            MeasureKind::StdDev(s) => (s.clone(), true),
            _ => return Err(Error::Unsupported("smooth path needs a quadratic measure".into())),
        };
        let q = prob.b.transpose() * &sigma * &prob.b;
        let q_factor = if q.nrows() > 0 { Some(SpdFactor::new(&q)?) } else { None };
        let q0 = prob.b.transpose() * (&sigma * &prob.a);
        let y0 = prob.payoff(&prob.a);
        let h = &prob.g * &prob.b;
        Ok(Self { prob, std_dev, sigma, q, q_factor, q0, y0, h })
    }

    fn dim(&self) -> usize {
        self.q.nrows()
    }

    fn hv(&self, z: &DVector<f64>) -> f64 {
        let x = self.prob.x_hat(z);
        0.5 * x.dot(&(&self.sigma * &x)).max(0.0)
    }

    fn hv_grad(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.q * z + &self.q0
    }

    fn payoff(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.y0 + &self.h * z
    }

    fn util(&self, z: &DVector<f64>) -> f64 {
        self.prob.utility.expected(self.prob.market.probs(), &self.payoff(z))
    }

    fn util_grad(&self, z: &DVector<f64>) -> DVector<f64> {
        let y = self.payoff(z);
        let p = self.prob.market.probs();
        let u = self.prob.utility;
        self.h.transpose() * DVector::from_fn(y.len(), |i, _| p[i] * u.derivative(y[i]))
    }

    fn util_hess(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let y = self.payoff(z);
        let p = self.prob.market.probs();
        let u = self.prob.utility;
        let k = self.dim();
        let mut hess = DMatrix::zeros(k, k);
        if u == Utility::Identity {
            return hess;
        }
        for i in 0..y.len() {
            let row = self.h.row(i);
            hess += row.transpose() * row * (p[i] * u.second_derivative(y[i]));
        }
        hess
    }

    fn feasible(&self, z: &DVector<f64>) -> bool {
        self.prob.utility != Utility::Log || self.payoff(z).iter().all(|&v| v > 0.0)
    }

    /// Risk-minimal point, `z(0)`.
    fn min_risk_point(&self) -> DVector<f64> {
        match &self.q_factor {
            Some(f) => -f.solve(&self.q0),
            None => DVector::zeros(0),
        }
    }

    /// Canonical strictly feasible start.
    fn start(&self) -> Result<DVector<f64>> {
        if let Some(s) = &self.prob.config.start {
            if s.len() == self.prob.market.num_assets() {
                let z = self.prob.z_of(s);
                if self.feasible(&z) {
                    return Ok(z);
                }
            }
        }
        let z = DVector::zeros(self.dim());
        if self.feasible(&z) {
            return Ok(z);
        }
        Err(Error::DomainViolation)
    }

    /// Minimizer of `hv − λU`.
    fn inner(&self, lambda: f64, warm: &DVector<f64>) -> Result<DVector<f64>> {
        let k = self.dim();
        if k == 0 {
            return Ok(DVector::zeros(0));
        }
        let factor = self.q_factor.as_ref().expect("nonempty path");
        if self.prob.utility == Utility::Identity {
            let rhs = self.util_grad(warm) * lambda - &self.q0;
            return Ok(factor.solve(&rhs));
        }
        let scale = 1.0 / (1.0 + lambda);
        let phi = |z: &DVector<f64>| -> Option<f64> {
            if !self.feasible(z) {
                return None;
            }
            Some(scale * (self.hv(z) - lambda * self.util(z)))
        };
        let mut z = warm.clone();
        let mut value = phi(&z).ok_or(Error::DomainViolation)?;
        let mut last_local = f64::INFINITY;
        for _ in 0..self.prob.config.max_newton {
            let grad = (self.hv_grad(&z) - self.util_grad(&z) * lambda) * scale;
            let hess = (&self.q - self.util_hess(&z) * lambda) * scale;
            let dir = match linalg::solve_square(hess, &grad) {
                Some(d) => -d,
                None => -grad.clone(),
            };
            let decrement = -grad.dot(&dir);
            if decrement <= 1e-28 || grad.amax() <= 1e-16 {
                return Ok(z);
            }
            // near the optimum the decrease is below rounding of φ: take full
            // Newton steps while they keep contracting
            if decrement <= 1e-12 * (1.0 + value.abs()) {
                if decrement >= 0.25 * last_local {
                    return Ok(z);
                }
                last_local = decrement;
                let cand = &z + &dir;
                match phi(&cand) {
                    Some(v) => {
                        z = cand;
                        value = v;
                        continue;
                    }
                    None => return Ok(z),
                }
            }
            let mut t = 1.0;
            let mut moved = false;
            while t > 1e-20 {
                let cand = &z + &dir * t;
                if let Some(v) = phi(&cand) {
                    if v <= value - 1e-4 * t * decrement {
                        z = cand;
                        value = v;
                        moved = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !moved || decrement <= 1e-24 {
                return Ok(z);
            }
        }
        Ok(z)
    }

    /// Newton polish of `∇hv − λ∇U = 0` together with one level equation.
    fn polish(&self, z: DVector<f64>, lambda: f64, form: ProblemForm, target: f64) -> (DVector<f64>, f64) {
        let k = self.dim();
        let residual = |z: &DVector<f64>, l: f64| -> Option<(DVector<f64>, f64)> {
            if !self.feasible(z) {
                return None;
            }
            let stat = self.hv_grad(z) - self.util_grad(z) * l;
            let level = match form {
                ProblemForm::MinRisk => self.util(z) - target,
                ProblemForm::MaxUtility => self.hv(z) - target,
            };
            let norm = stat.amax().max(level.abs());
            Some((stat.clone().insert_row(k, level), norm))
        };
        let (mut z, mut l) = (z, lambda);
        let Some((mut f, mut norm)) = residual(&z, l) else {
            return (z, l);
        };
        for _ in 0..20 {
            if norm <= 1e-15 {
                break;
            }
            let gu = self.util_grad(&z);
            let mut jac = DMatrix::zeros(k + 1, k + 1);
            jac.view_mut((0, 0), (k, k)).copy_from(&(&self.q - self.util_hess(&z) * l));
            jac.view_mut((0, k), (k, 1)).copy_from(&(-&gu));
            let level_grad = match form {
                ProblemForm::MinRisk => gu.clone(),
                ProblemForm::MaxUtility => self.hv_grad(&z),
            };
            jac.view_mut((k, 0), (1, k)).copy_from(&level_grad.transpose());
            let Some(step) = linalg::solve_square(jac, &f) else { break };
            let mut t = 1.0;
            let mut improved = false;
            while t > 1e-6 {
                let zc = &z - step.rows(0, k) * t;
                let lc = l - step[k] * t;
                if let Some((fc, nc)) = residual(&zc, lc) {
                    if nc < norm && lc >= 0.0 {
                        z = zc;
                        l = lc;
                        f = fc;
                        norm = nc;
                        improved = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !improved {
                break;
            }
        }
        (z, l)
    }

    fn risk_from_hv(&self, hv: f64) -> f64 {
        if self.std_dev {
            (2.0 * hv).max(0.0).sqrt()
        } else {
            hv
        }
    }

    fn hv_from_risk(&self, r: f64) -> f64 {
        if self.std_dev {
            0.5 * r * r
        } else {
            r
        }
    }

    fn solution(&self, z: &DVector<f64>, binding: bool, form: ProblemForm, level: f64, lambda1: f64) -> TradeoffSolution {
        let x_hat = self.prob.x_hat(z);
        let risk = self.risk_from_hv(self.hv(z));
        let utility = self.util(z);
        let portfolio = self.prob.portfolio(x_hat);
        let kkt = analytic_report(self.prob, &portfolio, form, level, lambda1, risk, utility);
        TradeoffSolution {
            portfolio,
            risk,
            utility,
            binding,
            kkt,
            uniqueness_guaranteed: self.prob.uniqueness_guaranteed(),
        }
    }

    /// Multiplier of the measure's own constraint from the path parameter.
    fn multiplier(&self, lambda: f64, hv: f64, form: ProblemForm) -> f64 {
        let sigma = (2.0 * hv).max(0.0).sqrt();
        match (form, self.std_dev) {
            (ProblemForm::MinRisk, false) => lambda,
            (ProblemForm::MinRisk, true) => {
                if sigma > 0.0 {
                    lambda / sigma
                } else {
                    0.0
                }
            }
            (ProblemForm::MaxUtility, false) => 1.0 / lambda,
            (ProblemForm::MaxUtility, true) => sigma / lambda,
        }
    }

    /// Bracket and bisect `λ` until `level(z(λ))` reaches `target`, then polish.
    fn follow(&self, form: ProblemForm, target: f64, z_lo: DVector<f64>) -> Result<(DVector<f64>, f64)> {
        let level = |z: &DVector<f64>| match form {
            ProblemForm::MinRisk => self.util(z),
            ProblemForm::MaxUtility => self.hv(z),
        };
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut z_hi = self.inner(hi, &z_lo)?;
        let mut z_warm = z_lo;
        while level(&z_hi) < target {
            lo = hi;
            z_warm = z_hi.clone();
            hi *= 2.0;
            if hi > LAMBDA_CAP {
                return Err(Error::SolverFailure("multiplier bracket did not close".into()));
            }
            z_hi = self.inner(hi, &z_warm)?;
        }
        let scale = 1.0 + target.abs();
        let mut z_best = z_hi.clone();
        let mut l_best = hi;
        for _ in 0..400 {
            if hi - lo <= 1e-10 * hi.max(1.0) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let z = self.inner(mid, &z_warm)?;
            let v = level(&z);
            if (v - target).abs() <= 1e-2 * self.prob.config.tol * scale {
                z_best = z;
                l_best = mid;
                break;
            }
            if v < target {
                lo = mid;
                z_warm = z;
            } else {
                hi = mid;
                z_best = z;
                l_best = mid;
            }
        }
        let (z, l) = self.polish(z_best, l_best, form, target);
        let err = (level(&z) - target).abs();
        if err > self.prob.config.tol.max(1e-8) * scale {
            return Err(Error::SolverFailure(format!("level residual {err:e} after bisection")));
        }
        Ok((z, l))
    }
}

pub(crate) fn utility_max(prob: &TradeoffProblem<'_>) -> Result<UtilityMax> {
    let y0 = prob.payoff(&prob.a);
    let h = &prob.g * &prob.b;
    let p = prob.market.probs();
    match prob.utility {
        Utility::Identity => {
            let slope = h.transpose() * p;
            let scale = 1.0 + h.amax();
            if slope.amax() > 1e-12 * scale {
                Ok(UtilityMax { value: f64::INFINITY, attained: false, portfolio: None, gradient_residual: slope.amax() })
            } else {
                let best = prob.min_risk_portfolio()?;
                Ok(UtilityMax {
                    value: best.utility,
                    attained: true,
                    portfolio: Some(best.portfolio),
                    gradient_residual: slope.amax(),
                })
            }
        }
        Utility::Log => {
            let start = match &prob.config.start {
                Some(s) if s.len() == prob.market.num_assets() => prob.z_of(s),
                _ => DVector::zeros(h.ncols()),
            };
            let start = if log_value(&y0, &h, p, &start).is_some() { start } else { DVector::zeros(h.ncols()) };
            let res = maximize_log(&y0, &h, p, start, 500)?;
            match res.status {
                LogMaxStatus::Converged => {
                    let x_hat = prob.x_hat(&res.z);
                    Ok(UtilityMax {
                        value: res.value,
                        attained: true,
                        portfolio: Some(prob.portfolio(x_hat)),
                        gradient_residual: res.grad_norm,
                    })
                }
                LogMaxStatus::Diverged { .. } => {
                    Err(Error::MarketPathology("expected log utility is unbounded".into()))
                }
                LogMaxStatus::Exhausted => Err(Error::SolverFailure("growth maximization did not converge".into())),
            }
        }
    }
}

pub(crate) fn min_risk_unconstrained(prob: &TradeoffProblem<'_>) -> Result<TradeoffSolution> {
    let path = SmoothPath::new(prob)?;
    let z = path.min_risk_point();
    Ok(path.solution(&z, false, ProblemForm::MinRisk, f64::NEG_INFINITY, 0.0))
}

fn kappa_solution(
    path: &SmoothPath<'_, '_>,
    umax: &UtilityMax,
    form: ProblemForm,
    level: f64,
) -> TradeoffSolution {
    let x_hat = umax.portfolio.as_ref().expect("attained maximum").x_hat.clone();
    let z = path.prob.z_of(&x_hat);
    match form {
        ProblemForm::MinRisk => path.solution(&z, true, form, level, f64::INFINITY),
        ProblemForm::MaxUtility => path.solution(&z, false, form, level, 0.0),
    }
}

pub(crate) fn min_risk(prob: &TradeoffProblem<'_>, mu: f64) -> Result<TradeoffSolution> {
    let path = SmoothPath::new(prob)?;
    let tol = prob.config.tol;
    let z0 = path.min_risk_point();
    let u0 = path.util(&z0);
    if mu <= u0 {
        let binding = (u0 - mu).abs() <= tol * (1.0 + mu.abs());
        return Ok(path.solution(&z0, binding, ProblemForm::MinRisk, mu, 0.0));
    }
    if path.dim() == 0 {
        return Err(Error::Infeasible { level: mu, supremum: u0 });
    }
    let umax = utility_max(prob)?;
    if mu > umax.value + tol * (1.0 + mu.abs()) {
        return Err(Error::Infeasible { level: mu, supremum: umax.value });
    }
    if umax.attained && mu >= umax.value - 1e-13 * (1.0 + mu.abs()) {
        return Ok(kappa_solution(&path, &umax, ProblemForm::MinRisk, mu));
    }
    let start = if path.feasible(&z0) { z0 } else { path.start()? };
    let (z, lambda) = path.follow(ProblemForm::MinRisk, mu, start)?;
    let lambda1 = path.multiplier(lambda, path.hv(&z), ProblemForm::MinRisk);
    Ok(path.solution(&z, true, ProblemForm::MinRisk, mu, lambda1))
}

pub(crate) fn max_utility(prob: &TradeoffProblem<'_>, r: f64) -> Result<TradeoffSolution> {
    let path = SmoothPath::new(prob)?;
    let tol = prob.config.tol;
    let z0 = path.min_risk_point();
    let hv0 = path.hv(&z0);
    let target = path.hv_from_risk(r);
    let r0 = path.risk_from_hv(hv0);
    if target < hv0 - tol * (1.0 + hv0) {
        return Err(Error::Infeasible { level: r, supremum: r0 });
    }
    if target <= hv0 || path.dim() == 0 {
        if !path.feasible(&z0) {
            return Err(Error::DomainViolation);
        }
        return Ok(path.solution(&z0, true, ProblemForm::MaxUtility, r, f64::INFINITY));
    }
    let umax = utility_max(prob)?;
    if umax.attained {
        let x_hat = &umax.portfolio.as_ref().expect("attained").x_hat;
        if path.hv(&prob.z_of(x_hat)) <= target {
            return Ok(kappa_solution(&path, &umax, ProblemForm::MaxUtility, r));
        }
    }
    let start = if path.feasible(&z0) { z0 } else { path.start()? };
    let (z, lambda) = path.follow(ProblemForm::MaxUtility, target, start)?;
    let eta = path.multiplier(lambda, path.hv(&z), ProblemForm::MaxUtility);
    Ok(path.solution(&z, true, ProblemForm::MaxUtility, r, eta))
}
