//! Efficient frontier traces `γ(μ)` and `ν(r)` and their shape checks.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::market::{Market, Portfolio};
use crate::measures::{RiskMeasure, Utility};
use crate::solver::{Admissible, TradeoffProblem};

/// Gradient residual below which a utility maximum counts as attained.
const ATTAINED_TOL: f64 = 1e-8;
const SHAPE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierBounds {
    pub mu_min: f64,
    pub mu_max: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub mu_min_attained: bool,
    pub mu_max_attained: bool,
    pub r_min_attained: bool,
    pub r_max_attained: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    pub mu: f64,
    pub risk: f64,
    pub portfolio: Portfolio,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierCurve {
    pub points: Vec<FrontierPoint>,
    pub measure_id: String,
    pub utility_id: String,
    pub admissible: Admissible,
    pub bounds: FrontierBounds,
}

impl FrontierCurve {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mus(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mu).collect()
    }

    pub fn risks(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.risk).collect()
    }
}

/// Bounds of the frontier over unit-cost portfolios.
pub fn frontier_bounds(market: &Market, measure: &RiskMeasure, utility: Utility) -> Result<FrontierBounds> {
    bounds_for(&TradeoffProblem::new(market, measure, utility)?)
}

/// Bounds of the frontier of an already configured problem.
pub fn bounds_for(problem: &TradeoffProblem<'_>) -> Result<FrontierBounds> {
    let least = problem.min_risk_portfolio()?;
    let r_min = least.risk;
    // μ_min is the best utility among the risk-minimal portfolios
    let mu_min = problem.max_utility(r_min).map(|s| s.utility.max(least.utility)).unwrap_or(least.utility);
    let top = problem.utility_max()?;
    let mu_max_attained = top.attained && top.gradient_residual <= ATTAINED_TOL;
    let r_max = match &top.portfolio {
        Some(p) if top.attained => problem.risk_of(&p.x_hat)?,
        _ => f64::INFINITY,
    };
    Ok(FrontierBounds {
        mu_min,
        mu_max: top.value,
        r_min,
        r_max,
        mu_min_attained: true,
        mu_max_attained,
        r_min_attained: true,
        r_max_attained: mu_max_attained,
    })
}

/// `n` uniform points on `[μ_min, min(μ_max, μ_min + span_cap)]`, or the
/// single point `μ_min` when the range is empty.
pub fn auto_grid(bounds: &FrontierBounds, n: usize, span_cap: f64) -> Vec<f64> {
    let lo = bounds.mu_min;
    let hi = bounds.mu_max.min(lo + span_cap);
    if hi > lo {
        uniform(lo, hi, n)
    } else {
        uniform(lo, lo, n.min(1))
    }
}

/// `n` uniform points on `[lo, hi]`, endpoints exact.
pub fn uniform(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

fn check_grid(grid: &[f64], what: &str) -> Result<()> {
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{what} grid")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::OutOfRange(format!("{what} grid must be strictly increasing")));
    }
    Ok(())
}

fn curve(problem: &TradeoffProblem<'_>, points: Vec<FrontierPoint>, bounds: FrontierBounds) -> FrontierCurve {
    FrontierCurve {
        points,
        measure_id: problem.measure().name().to_string(),
        utility_id: problem.utility().name().to_string(),
        admissible: problem.admissible_set(),
        bounds,
    }
}

/// `γ` on a utility grid. Grid values above `μ_max` end the trace; values
/// below `μ_min` are rejected.
pub fn trace_frontier(problem: &TradeoffProblem<'_>, mu_grid: &[f64]) -> Result<FrontierCurve> {
    check_grid(mu_grid, "utility")?;
    let bounds = bounds_for(problem)?;
    let slack = |v: f64| 1e-12 * (1.0 + v.abs());
    if let Some(&mu) = mu_grid.first() {
        if mu < bounds.mu_min - slack(bounds.mu_min) {
            return Err(Error::OutOfRange(format!("utility level {mu} below mu_min = {}", bounds.mu_min)));
        }
    }
    let kept: Vec<f64> = mu_grid
        .iter()
        .copied()
        .take_while(|&mu| {
            mu < bounds.mu_max || (bounds.mu_max_attained && mu <= bounds.mu_max + slack(bounds.mu_max))
        })
        .collect();
    let points = kept
        .par_iter()
        .map(|&mu| {
            let level = mu.max(bounds.mu_min).min(bounds.mu_max);
            let sol = problem.min_risk(level)?;
            Ok(FrontierPoint { mu, risk: sol.risk, portfolio: sol.portfolio })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(curve(problem, points, bounds))
}

/// `ν` on a risk grid. Grid values above `r_max` end the trace.
pub fn trace_risk_frontier(problem: &TradeoffProblem<'_>, r_grid: &[f64]) -> Result<FrontierCurve> {
    check_grid(r_grid, "risk")?;
    let bounds = bounds_for(problem)?;
    if let Some(&r) = r_grid.first() {
        if r < bounds.r_min - 1e-12 * (1.0 + bounds.r_min) {
            return Err(Error::OutOfRange(format!("risk level {r} below r_min = {}", bounds.r_min)));
        }
    }
    let kept: Vec<f64> =
        r_grid.iter().copied().take_while(|&r| r <= bounds.r_max + 1e-12 * (1.0 + bounds.r_max)).collect();
    let points = kept
        .par_iter()
        .map(|&r| {
            let sol = problem.max_utility(r.max(bounds.r_min))?;
            Ok(FrontierPoint { mu: sol.utility, risk: r, portfolio: sol.portfolio })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(curve(problem, points, bounds))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeReport {
    /// Largest decrease of `μ` or of risk between neighbours.
    pub monotonicity_violation: f64,
    /// Largest excess of risk over the chord through its neighbours.
    pub convexity_violation: f64,
    pub first_violation: Option<usize>,
    pub passed: bool,
}

/// Checks that `γ` is increasing and convex along the curve.
pub fn verify_frontier_shape(curve: &FrontierCurve) -> ShapeReport {
    let pts = &curve.points;
    let mut mono = 0.0_f64;
    let mut mono_at = None;
    for i in 1..pts.len() {
        let v = (pts[i - 1].mu - pts[i].mu).max(pts[i - 1].risk - pts[i].risk).max(0.0);
        mono = mono.max(v);
        if mono_at.is_none() && (v > SHAPE_TOL || pts[i].mu <= pts[i - 1].mu) {
            mono_at = Some(i);
        }
    }
    let mut conv = 0.0_f64;
    let mut conv_at = None;
    for i in 1..pts.len().saturating_sub(1) {
        let (a, b, c) = (&pts[i - 1], &pts[i], &pts[i + 1]);
        let span = c.mu - a.mu;
        if span <= 0.0 {
            continue;
        }
        let chord = ((c.mu - b.mu) * a.risk + (b.mu - a.mu) * c.risk) / span;
        let v = (b.risk - chord).max(0.0);
        conv = conv.max(v);
        if conv_at.is_none() && v > SHAPE_TOL {
            conv_at = Some(i);
        }
    }
    let first = mono_at.or(conv_at);
    ShapeReport {
        monotonicity_violation: mono,
        convexity_violation: conv,
        first_violation: first,
        passed: first.is_none(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityReport {
    /// Largest `‖x(μᵢ₊₁) − x(μᵢ)‖` on the full grid.
    pub fine_max_jump: f64,
    /// The same over every second point.
    pub coarse_max_jump: f64,
    /// Largest jump divided by the `μ` step, full grid.
    pub fine_max_ratio: f64,
    pub coarse_max_ratio: f64,
    pub passed: bool,
}

fn jumps(points: &[&FrontierPoint]) -> (f64, f64) {
    points.windows(2).fold((0.0_f64, 0.0_f64), |(jump, ratio), w| {
        let d = w[1].portfolio.distance(&w[0].portfolio);
        let step = w[1].mu - w[0].mu;
        (jump.max(d), if step > 0.0 { ratio.max(d / step) } else { ratio })
    })
}

/// Compares portfolio jumps on the curve's grid with those on the grid of
/// every second point; a continuous path cannot have larger jumps after
/// refinement.
pub fn path_continuity(curve: &FrontierCurve) -> ContinuityReport {
    let fine: Vec<&FrontierPoint> = curve.points.iter().collect();
    let coarse: Vec<&FrontierPoint> = curve.points.iter().step_by(2).collect();
    let (fine_max_jump, fine_max_ratio) = jumps(&fine);
    let (coarse_max_jump, coarse_max_ratio) = jumps(&coarse);
    ContinuityReport {
        fine_max_jump,
        coarse_max_jump,
        fine_max_ratio,
        coarse_max_ratio,
        passed: fine_max_jump <= coarse_max_jump + 1e-9,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceReport {
    pub common_points: usize,
    /// Largest `γ_full(μ) − γ_sub(μ)` over the common levels.
    pub max_violation: f64,
    pub dominated: bool,
    /// Common `(μ, γ)` where the two curves agree within `1e-7`.
    pub tangency: Vec<(f64, f64)>,
}

/// Checks that enlarging the admissible set never raises the frontier.
pub fn subsystem_frontier_compare(sub: &FrontierCurve, full: &FrontierCurve) -> Result<DominanceReport> {
    if sub.measure_id != full.measure_id || sub.utility_id != full.utility_id {
        return Err(Error::IncompatibleCurves(format!(
            "{}/{} against {}/{}",
            sub.measure_id, sub.utility_id, full.measure_id, full.utility_id
        )));
    }
    if sub.admissible == Admissible::UnitCost && full.admissible == Admissible::RiskyOnly {
        return Err(Error::IncompatibleCurves("the larger admissible set is the risky-only one".into()));
    }
    let mut report = DominanceReport { common_points: 0, max_violation: 0.0, dominated: true, tangency: Vec::new() };
    for p in &sub.points {
        let Some(q) = full.points.iter().find(|q| q.mu == p.mu) else { continue };
        report.common_points += 1;
        let gap = q.risk - p.risk;
        report.max_violation = report.max_violation.max(gap);
        if gap.abs() <= 1e-7 {
            report.tangency.push((p.mu, p.risk));
        }
    }
    if report.common_points == 0 {
        return Err(Error::IncompatibleCurves("no common utility levels".into()));
    }
    report.dominated = report.max_violation <= 1e-7;
    Ok(report)
}
