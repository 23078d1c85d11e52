//! Command dispatch. Every command writes its data files plus `run.json`
//! into the output directory.

use std::path::Path;

use clap::ValueEnum;
use log::info;
use nalgebra::DVector;
use serde::Serialize;
use tradeoff_core::closedform::{
    beta_price, capital_market_line, capm_portfolio, capm_summary, markowitz_frontier, markowitz_portfolio,
    markowitz_scalars, tangency_check, MeanVariance,
};
use tradeoff_core::frontier::{
    auto_grid, bounds_for, path_continuity, trace_frontier, trace_risk_frontier, uniform, verify_frontier_shape,
    FrontierBounds, FrontierCurve,
};
use tradeoff_core::growth::{extract_emm, growth_optimal, leverage_grid, leverage_path, verify_emm};
use tradeoff_core::homogeneous::verify_affinity;
use tradeoff_core::{fixtures, Admissible, Portfolio, TradeoffProblem, Utility};

use crate::scenario::{Axis, GridSpec, MeasureSpec, Resolved, Scenario, UtilitySpec};
use crate::table::{write_file, Table};
use crate::CliError;

pub const DEFAULT_GRID_POINTS: usize = 21;
/// Widest automatic utility range when `μ_max` is infinite.
const AUTO_SPAN: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Check,
    Markowitz,
    Capm,
    Frontier,
    Growth,
    LeveragePath,
    Emm,
    Beta,
    Counterexample,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Markowitz => "markowitz",
            Command::Capm => "capm",
            Command::Frontier => "frontier",
            Command::Growth => "growth",
            Command::LeveragePath => "leverage-path",
            Command::Emm => "emm",
            Command::Beta => "beta",
            Command::Counterexample => "counterexample",
        }
    }

    pub fn all() -> [Command; 9] {
        use Command::*;
        [Check, Markowitz, Capm, Frontier, Growth, LeveragePath, Emm, Beta, Counterexample]
    }
}

/// Command-line overrides; they win over the scenario file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub grid_points: Option<usize>,
    pub tol_solver: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct PortfolioOut {
    x0: f64,
    x_hat: Vec<f64>,
}

impl From<&Portfolio> for PortfolioOut {
    fn from(p: &Portfolio) -> Self {
        PortfolioOut { x0: p.x0, x_hat: p.x_hat.iter().copied().collect() }
    }
}

#[derive(Serialize)]
struct RunMeta<'a> {
    command: &'a str,
    version: &'a str,
    grid_points: Option<usize>,
    tol_solver: Option<f64>,
    files: &'a [String],
}

struct Out<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Out<'_> {
    fn text(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        write_file(&path, contents)?;
        info!("wrote {}", path.display());
        self.files.push(name.to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).expect("report serializes");
        s.push('\n');
        self.text(name, &s)
    }
}

/// The two-fund counterexample market and gauge as a scenario, with the three
/// reference utility levels.
pub fn counterexample_scenario() -> Scenario {
    let (market, _) = fixtures::counterexample();
    let mut s = Scenario::from_market(&market);
    s.measure = Some(MeasureSpec::PolytopeGauge { vertices: fixtures::counterexample_vertices() });
    s.utility = Some(UtilitySpec::Identity);
    s.admissible = crate::scenario::AdmissibleSpec::UnitCostRiskyOnly;
    s.grid = Some(GridSpec { axis: Axis::Mu, values: Some(vec![1.0, 1.01, 3.0]), from: None, to: None, points: None });
    s
}

/// Runs `command` and writes its outputs to `out_dir`, which must exist.
/// Returns the names of the files written.
pub fn run_command(
    command: Command,
    scenario: Option<&Scenario>,
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<Vec<String>, CliError> {
    let fallback;
    let scenario = match (scenario, command) {
        (Some(s), _) => s,
        (None, Command::Counterexample) => {
            fallback = counterexample_scenario();
            &fallback
        }
        (None, _) => return Err(CliError::Usage(format!("{} needs --scenario", command.name()))),
    };
    let mut inputs = scenario.resolve()?;
    if let Some(tol) = opts.tol_solver {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(CliError::Validation(format!("InvalidTolerance: solver = {tol}")));
        }
        inputs.config.tol = tol;
    }
    let grid = GridPlan::new(scenario.grid.as_ref(), opts.grid_points);
    let mut out = Out { dir: out_dir, files: Vec::new() };
    match command {
        Command::Check => check(&inputs, &mut out)?,
        Command::Markowitz => markowitz(&inputs, &grid, &mut out)?,
        Command::Capm => capm(&inputs, &grid, &mut out)?,
        Command::Frontier => frontier(&inputs, &grid, &mut out)?,
        Command::Growth => growth(&inputs, &mut out)?,
        Command::LeveragePath => leverage(&inputs, &grid, &mut out)?,
        Command::Emm => emm(&inputs, &mut out)?,
        Command::Beta => beta(&inputs, scenario, &mut out)?,
        Command::Counterexample => counterexample(&inputs, &grid, &mut out)?,
    }
    let files = out.files.clone();
    let meta = RunMeta {
        command: command.name(),
        version: env!("CARGO_PKG_VERSION"),
        grid_points: opts.grid_points,
        tol_solver: opts.tol_solver,
        files: &files,
    };
    out.json("run.json", &meta)?;
    Ok(files)
}

struct GridPlan<'a> {
    spec: Option<&'a GridSpec>,
    points: usize,
}

impl<'a> GridPlan<'a> {
    fn new(spec: Option<&'a GridSpec>, override_points: Option<usize>) -> Self {
        let points = override_points.or(spec.and_then(|g| g.points)).unwrap_or(DEFAULT_GRID_POINTS);
        GridPlan { spec, points }
    }

    fn axis(&self) -> Option<Axis> {
        self.spec.map(|g| g.axis)
    }

    /// Explicit values or range of the scenario grid, else `default(points)`.
    fn values(&self, want: Axis, default: impl FnOnce(usize) -> Result<Vec<f64>, CliError>) -> Result<Vec<f64>, CliError> {
        match self.spec {
            Some(g) if g.axis != want => Err(CliError::Validation(format!(
                "GridBoundsInconsistent: this command samples {:?}, the scenario grid is over {:?}",
                want, g.axis
            ))),
            Some(GridSpec { values: Some(v), .. }) => Ok(v.clone()),
            Some(GridSpec { from: Some(a), to: Some(b), .. }) => Ok(uniform(*a, *b, self.points)),
            _ => default(self.points),
        }
    }
}

fn require_measure(inputs: &Resolved) -> Result<&tradeoff_core::RiskMeasure, CliError> {
    inputs.measure.as_ref().ok_or_else(|| CliError::Validation("MissingMeasure: scenario has no measure block".into()))
}

#[derive(Serialize)]
struct CheckOut {
    has_arbitrage: bool,
    has_nontrivial_riskless: bool,
    has_bond_replicator: bool,
    rank_g: usize,
    certificate: Option<PortfolioOut>,
}

fn check(inputs: &Resolved, out: &mut Out) -> Result<(), CliError> {
    let r = inputs.market.detect_nontrivial_riskless()?;
    out.json(
        "structure.json",
        &CheckOut {
            has_arbitrage: r.has_arbitrage,
            has_nontrivial_riskless: r.has_nontrivial_riskless,
            has_bond_replicator: r.has_bond_replicator,
            rank_g: r.rank_g,
            certificate: r.certificate.as_ref().map(PortfolioOut::from),
        },
    )
}

#[derive(Serialize)]
struct MarkowitzOut {
    alpha: f64,
    beta: f64,
    gamma: f64,
    disc: f64,
    mu_min: f64,
    sigma_min: f64,
    asymptote_slope: f64,
}

fn markowitz(inputs: &Resolved, grid: &GridPlan, out: &mut Out) -> Result<(), CliError> {
    let market = &inputs.market;
    let mv = MeanVariance::of(market);
    let s = markowitz_scalars(&mv)?;
    let lo = s.vertex_mu();
    let mus = grid.values(Axis::Mu, |n| {
        // up to the best single-asset return
        let best = (0..market.num_assets())
            .map(|j| mv.mean[j] / mv.s0_hat[j])
            .fold(f64::NEG_INFINITY, f64::max);
        let hi = if best > lo + 1e-9 { best } else { lo + AUTO_SPAN };
        Ok(uniform(lo, hi, n))
    })?;
    let mut rows = Vec::with_capacity(mus.len());
    for &mu in &mus {
        let p = markowitz_frontier(&s, mu);
        let x = Portfolio::new(0.0, markowitz_portfolio(&mv, mu)?);
        rows.push(Table::portfolio_row(mu, p.sigma, &x));
    }
    out.json(
        "markowitz.json",
        &MarkowitzOut {
            alpha: s.alpha,
            beta: s.beta,
            gamma: s.gamma_s,
            disc: s.disc,
            mu_min: s.vertex_mu(),
            sigma_min: s.vertex_sigma(),
            asymptote_slope: s.asymptote_slope(),
        },
    )?;
    out.text("frontier.tsv", &Table { header: Table::portfolio_header(market.num_assets()), rows }.render())
}

#[derive(Serialize)]
struct TangencyOut {
    sigma_gap: f64,
    bullet_slope: f64,
    line_slope: f64,
    passed: bool,
}

#[derive(Serialize)]
struct CapmOut {
    r: f64,
    delta: f64,
    sigma_m: f64,
    mu_m: f64,
    x_m: PortfolioOut,
    price_of_risk: f64,
    tangency: Option<TangencyOut>,
}

fn capm(inputs: &Resolved, grid: &GridPlan, out: &mut Out) -> Result<(), CliError> {
    let market = &inputs.market;
    market.require_all_clear()?;
    let mv = MeanVariance::of(market);
    let r = market.r();
    let summary = capm_summary(&mv, r)?;
    let tangency = markowitz_scalars(&mv).ok().map(|s| {
        let t = tangency_check(&s, &summary);
        TangencyOut { sigma_gap: t.sigma_gap, bullet_slope: t.bullet_slope, line_slope: t.line_slope, passed: t.passed }
    });
    let mus = grid.values(Axis::Mu, |n| Ok(uniform(r, summary.mu_m, n)))?;
    let mut rows = Vec::with_capacity(mus.len());
    for &mu in &mus {
        let x = capm_portfolio(&mv, r, mu)?;
        let sigma = (mu - r) / summary.price_of_risk;
        debug_assert!((capital_market_line(&summary, sigma) - mu).abs() <= 1e-9 * (1.0 + mu.abs()));
        rows.push(Table::portfolio_row(mu, sigma, &x));
    }
    out.json(
        "capm.json",
        &CapmOut {
            r,
            delta: summary.delta,
            sigma_m: summary.sigma_m,
            mu_m: summary.mu_m,
            x_m: PortfolioOut::from(&summary.x_m),
            price_of_risk: summary.price_of_risk,
            tangency,
        },
    )?;
    out.text("frontier.tsv", &Table { header: Table::portfolio_header(market.num_assets()), rows }.render())
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Serialize)]
struct BoundsOut {
    mu_min: Option<f64>,
    mu_max: Option<f64>,
    r_min: Option<f64>,
    r_max: Option<f64>,
    mu_max_attained: bool,
    r_max_attained: bool,
}

impl From<&FrontierBounds> for BoundsOut {
    fn from(b: &FrontierBounds) -> Self {
        BoundsOut {
            mu_min: finite(b.mu_min),
            mu_max: finite(b.mu_max),
            r_min: finite(b.r_min),
            r_max: finite(b.r_max),
            mu_max_attained: b.mu_max_attained,
            r_max_attained: b.r_max_attained,
        }
    }
}

#[derive(Serialize)]
struct CurveOut {
    measure: String,
    utility: String,
    admissible: &'static str,
    points: usize,
    bounds: BoundsOut,
    shape_passed: bool,
    monotonicity_violation: f64,
    convexity_violation: f64,
    continuity_passed: bool,
}

fn curve_report(curve: &FrontierCurve) -> CurveOut {
    let shape = verify_frontier_shape(curve);
    let cont = path_continuity(curve);
    CurveOut {
        measure: curve.measure_id.clone(),
        utility: curve.utility_id.clone(),
        admissible: curve.admissible.name(),
        points: curve.len(),
        bounds: BoundsOut::from(&curve.bounds),
        shape_passed: shape.passed,
        monotonicity_violation: shape.monotonicity_violation,
        convexity_violation: shape.convexity_violation,
        continuity_passed: cont.passed,
    }
}

fn frontier(inputs: &Resolved, grid: &GridPlan, out: &mut Out) -> Result<(), CliError> {
    let measure = require_measure(inputs)?;
    let utility = inputs.utility.unwrap_or(Utility::Identity);
    let problem = TradeoffProblem::new(&inputs.market, measure, utility)?
        .admissible(inputs.admissible)
        .config(inputs.config.clone());
    let curve = match grid.axis() {
        Some(Axis::R) => {
            let rs = grid.values(Axis::R, |n| {
                let b = bounds_for(&problem)?;
                Ok(uniform(b.r_min, b.r_max.min(b.r_min + AUTO_SPAN), n))
            })?;
            trace_risk_frontier(&problem, &rs)?
        }
        _ => {
            let mus = grid.values(Axis::Mu, |n| Ok(auto_grid(&bounds_for(&problem)?, n, AUTO_SPAN)))?;
            trace_frontier(&problem, &mus)?
        }
    };
    out.text("frontier.tsv", &Table::from_curve(&curve, inputs.market.num_assets()).render())?;
    out.json("frontier.json", &curve_report(&curve))
}

#[derive(Serialize)]
struct GrowthOut {
    kappa: PortfolioOut,
    mu_kappa: f64,
    gradient_residual: f64,
}

fn growth(inputs: &Resolved, out: &mut Out) -> Result<(), CliError> {
    let g = growth_optimal(&inputs.market)?;
    out.json(
        "growth.json",
        &GrowthOut { kappa: PortfolioOut::from(&g.kappa), mu_kappa: g.mu_kappa, gradient_residual: g.gradient_residual },
    )
}

fn leverage(inputs: &Resolved, grid: &GridPlan, out: &mut Out) -> Result<(), CliError> {
    let measure = require_measure(inputs)?;
    let market = &inputs.market;
    let rs = grid.values(Axis::R, |n| Ok(leverage_grid(market, measure, n)?))?;
    let curve = leverage_path(market, measure, &rs)?;
    out.text("leverage.tsv", &Table::from_curve(&curve, market.num_assets()).render())?;
    out.json("leverage.json", &curve_report(&curve))
}

#[derive(Serialize)]
struct EmmOut {
    q: Vec<f64>,
    residuals: Vec<f64>,
}

fn emm(inputs: &Resolved, out: &mut Out) -> Result<(), CliError> {
    let utility = inputs.utility.unwrap_or(Utility::Log);
    let q = extract_emm(&inputs.market, utility)?.q;
    let residuals = verify_emm(&inputs.market, &q);
    out.json("emm.json", &EmmOut { q: q.iter().copied().collect(), residuals })
}

#[derive(Serialize)]
struct BetaOut {
    beta: f64,
    mu_capm: f64,
    quoted_return: f64,
    implied_price: f64,
    equilibrium_price: Option<f64>,
}

fn beta(inputs: &Resolved, scenario: &Scenario, out: &mut Out) -> Result<(), CliError> {
    let asset = scenario
        .asset
        .as_ref()
        .ok_or_else(|| CliError::Validation("MissingAsset: beta needs an asset block".into()))?;
    let market = &inputs.market;
    market.require_all_clear()?;
    let summary = capm_summary(&MeanVariance::of(market), market.r())?;
    let b = beta_price(market, &summary, &DVector::from_vec(asset.payoff.clone()), asset.price)?;
    out.json(
        "beta.json",
        &BetaOut {
            beta: b.beta,
            mu_capm: b.mu_capm,
            quoted_return: b.quoted_return,
            implied_price: b.implied_price,
            equilibrium_price: b.equilibrium_price,
        },
    )
}

#[derive(Serialize)]
struct PathPoint {
    mu: f64,
    risk: f64,
    portfolio: PortfolioOut,
}

#[derive(Serialize)]
struct CounterexampleOut {
    is_affine: bool,
    max_deviation: f64,
    path: Vec<PathPoint>,
}

fn counterexample(inputs: &Resolved, grid: &GridPlan, out: &mut Out) -> Result<(), CliError> {
    let measure = require_measure(inputs)?;
    let utility = inputs.utility.unwrap_or(Utility::Identity);
    // the synthetic market need not be free of riskless portfolios
    let problem = TradeoffProblem::unchecked(&inputs.market, measure, utility)
        .admissible(Admissible::RiskyOnly)
        .config(inputs.config.clone());
    let mus = grid.values(Axis::Mu, |_| Ok(vec![1.0, 1.01, 3.0]))?;
    let mut path = Vec::with_capacity(mus.len());
    let mut rows = Vec::with_capacity(mus.len());
    for &mu in &mus {
        let sol = problem.min_risk(mu)?;
        rows.push(Table::portfolio_row(mu, sol.risk, &sol.portfolio));
        path.push((mu, sol));
    }
    let pairs: Vec<(f64, Portfolio)> = path.iter().map(|(mu, s)| (*mu, s.portfolio.clone())).collect();
    let verdict = verify_affinity(&pairs);
    out.text("counterexample.tsv", &Table { header: Table::portfolio_header(inputs.market.num_assets()), rows }.render())?;
    out.json(
        "counterexample.json",
        &CounterexampleOut {
            is_affine: verdict.is_affine,
            max_deviation: verdict.max_deviation,
            path: path
                .iter()
                .map(|(mu, s)| PathPoint { mu: *mu, risk: s.risk, portfolio: PortfolioOut::from(&s.portfolio) })
                .collect(),
        },
    )
}
