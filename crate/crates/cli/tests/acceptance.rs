//! Acceptance suite. Prints one `criterion N: PASS|FAIL` line per criterion
//! and exits nonzero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command as Process, ExitCode};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use nalgebra::{DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tradeoff_cli::{bundled_scenarios, parse_scenario, Command};
use tradeoff_core::closedform::{
    capital_market_line, capm_portfolio, capm_summary, markowitz_frontier, markowitz_portfolio, markowitz_scalars,
    tangency_check, two_fund_decompose, MeanVariance,
};
use tradeoff_core::frontier::{
    bounds_for, frontier_bounds, path_continuity, trace_frontier, trace_risk_frontier, uniform, verify_frontier_shape,
};
use tradeoff_core::growth::{
    classify_subsystem, betting_nu, extract_emm, golden_section_max, growth_optimal, kelly_two_state,
    leverage_path, stationarity_residual, utility_boundedness_probe, verify_emm, Boundedness, Configuration,
};
use tradeoff_core::homogeneous::{
    affine_frontier_portfolio, basic_fund, counterexample_fixture, counterexample_path, verify_affinity,
};
use tradeoff_core::{fixtures, Admissible, Market, Portfolio, RiskMeasure, TradeoffProblem, Utility};

fn abs1() -> RiskMeasure {
    RiskMeasure::abs_exposure(vec![1.0]).unwrap()
}

/// Random all-clear markets with at least two risky assets.
fn random_multi_asset(count: usize, base_seed: u64, max_states: usize, max_assets: usize) -> Vec<Market> {
    (base_seed..)
        .map(|s| fixtures::random_all_clear(s, max_states, max_assets))
        .filter(|m| m.num_assets() >= 2)
        .take(count)
        .collect()
}

fn c1_markowitz_vs_solver() -> Result<String> {
    let mut markets = vec![fixtures::f2()];
    markets.extend(random_multi_asset(24, 1000, 8, 4));
    let (mut sigma_gap, mut x_gap) = (0.0_f64, 0.0_f64);
    for (i, market) in markets.iter().enumerate() {
        let mv = MeanVariance::of(market);
        let s = markowitz_scalars(&mv).with_context(|| format!("market {i}"))?;
        let hv = RiskMeasure::half_variance_of(market);
        let risky = TradeoffProblem::new(market, &hv, Utility::Identity)?.admissible(Admissible::RiskyOnly);
        let spread = market.expected_payoffs().amax();
        for k in 0..5 {
            let mu = s.vertex_mu() + 0.25 * k as f64 * spread;
            let sol = risky.min_risk(mu).with_context(|| format!("market {i} mu {mu}"))?;
            sigma_gap = sigma_gap.max(((2.0 * sol.risk).sqrt() - markowitz_frontier(&s, mu).sigma).abs());
            x_gap = x_gap.max((&sol.portfolio.x_hat - markowitz_portfolio(&mv, mu)?).amax());
        }
    }
    ensure!(sigma_gap <= 1e-7 && x_gap <= 1e-5, "sigma gap {sigma_gap:e}, portfolio gap {x_gap:e}");
    Ok(format!("{} markets, sigma gap {sigma_gap:.1e}, portfolio gap {x_gap:.1e}", markets.len()))
}

fn close(a: f64, b: f64, tol: f64, what: &str) -> Result<()> {
    ensure!((a - b).abs() <= tol, "{what}: {a} vs {b}");
    Ok(())
}

fn c2_f2_ground_truth() -> Result<String> {
    let f2 = fixtures::f2();
    let mv = MeanVariance::of(&f2);
    let s = markowitz_scalars(&mv)?;
    close(s.alpha, 2.0, 1e-12, "alpha")?;
    close(s.beta, 1.5, 1e-12, "beta")?;
    close(s.gamma_s, 1.25, 1e-12, "gamma")?;
    close(s.disc, 0.25, 1e-12, "disc")?;
    close(s.vertex_mu(), 1.2, 1e-12, "mu_min")?;
    close(s.vertex_sigma(), 1.0 / 1.25_f64.sqrt(), 1e-12, "sigma_min")?;
    let c = capm_summary(&mv, 1.0)?;
    close(c.delta, 0.25, 1e-12, "Delta")?;
    ensure!(c.x_m.distance(&Portfolio::from_slice(0.0, &[0.0, 1.0])) <= 1e-12, "x_M = {:?}", c.x_m);
    close(c.sigma_m, 2.0, 1e-12, "sigma_M")?;
    close(c.mu_m, 2.0, 1e-12, "mu_M")?;
    for sigma in [0.0, 1.0, 2.0, 3.5] {
        close(capital_market_line(&c, sigma), 1.0 + 0.5 * sigma, 1e-12, "capital market line")?;
    }
    let t = tangency_check(&s, &c);
    ensure!(t.passed, "{t:?}");
    close(t.bullet_slope, 0.5, 1e-6, "bullet slope at (2,2)")?;
    Ok(format!("tangency gap {:.1e}, slope {:.9}", t.sigma_gap, t.bullet_slope))
}

fn c3_affine_structure() -> Result<String> {
    let mut markets = vec![fixtures::f2()];
    markets.extend(random_multi_asset(20, 2000, 8, 4));
    let (mut worst_mid, mut worst_two_fund) = (0.0_f64, 0.0_f64);
    for (i, market) in markets.iter().enumerate() {
        let mv = MeanVariance::of(market);
        let s = markowitz_scalars(&mv)?;
        let (a, b) = (s.vertex_mu(), s.vertex_mu() + 1.5);
        let (xa, xb) = (markowitz_portfolio(&mv, a)?, markowitz_portfolio(&mv, b)?);
        let mid = markowitz_portfolio(&mv, 0.5 * (a + b))?;
        let scale = 1.0 + xa.amax() + xb.amax();
        let gap = (&mid - (&xa + &xb) * 0.5).amax() / scale;
        ensure!(gap <= 1e-12, "market {i}: Markowitz midpoint gap {gap:e}");
        worst_mid = worst_mid.max(gap);
        for far in [b + 1.0, a - 2.0, b + 10.0] {
            let res = two_fund_decompose(&xa, &xb, &markowitz_portfolio(&mv, far)?)?.residual;
            ensure!(res <= 1e-8, "market {i}: two-fund residual {res:e}");
            worst_two_fund = worst_two_fund.max(res);
        }
        let r = market.r();
        if let Ok(c) = capm_summary(&mv, r) {
            let top = c.mu_m + 1.0;
            let (pa, pb) = (capm_portfolio(&mv, r, r)?, capm_portfolio(&mv, r, top)?);
            let pm = capm_portfolio(&mv, r, 0.5 * (r + top))?;
            let scale = 1.0 + pb.x_hat.amax() + pb.x0.abs();
            let gap = pm.distance(&pa.add(&pb).scale(0.5)) / scale;
            ensure!(gap <= 1e-12, "market {i}: CAPM midpoint gap {gap:e}");
            worst_mid = worst_mid.max(gap);
        }
    }
    Ok(format!("{} markets, midpoint gap {worst_mid:.1e}, two-fund residual {worst_two_fund:.1e}", markets.len()))
}

fn gauge_for(m: usize, rng: &mut ChaCha8Rng) -> RiskMeasure {
    let mut v = Vec::new();
    for j in 0..m {
        for s in [-1.0, 1.0] {
            let mut e = vec![0.0; m];
            e[j] = s * rng.gen_range(0.5..2.0);
            v.push(e);
        }
    }
    v.push((0..m).map(|_| rng.gen_range(0.2..1.5)).collect());
    RiskMeasure::polytope_gauge(v).unwrap()
}

fn c4_homogeneous_frontier() -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut cases: Vec<(Market, RiskMeasure)> = vec![
        (fixtures::f1(1.0), abs1()),
        (fixtures::f1(2.0), RiskMeasure::polytope_gauge(vec![vec![2.0], vec![-0.5]])?),
        (fixtures::f2(), RiskMeasure::abs_exposure(vec![1.0, 0.5])?),
        (fixtures::f2(), gauge_for(2, &mut rng)),
    ];
    for seed in 0..8 {
        let m = fixtures::random_all_clear(4000 + seed, 6, 3);
        if m.expected_excess().amax() < 1e-3 {
            continue;
        }
        let w = (0..m.num_assets()).map(|_| rng.gen_range(0.5..2.0)).collect();
        cases.push((m.clone(), RiskMeasure::abs_exposure(w)?));
        let g = gauge_for(m.num_assets(), &mut rng);
        cases.push((m, g));
    }
    let (mut worst_rel, mut worst_master, mut masters) = (0.0_f64, 0.0_f64, 0);
    for (i, (market, measure)) in cases.iter().enumerate() {
        let fr = basic_fund(market, measure)?;
        let problem = TradeoffProblem::new(market, measure, Utility::Identity)?;
        let r = market.r();
        for k in 1..=9 {
            let mu = r + 2.0 * k as f64 / 9.0;
            let gamma = problem.min_risk(mu)?.risk;
            let rel = (gamma / (mu - r) - fr.r1).abs() / fr.r1;
            ensure!(rel <= 1e-6, "case {i} ({}): relative gap {rel:e} at mu {mu}", measure.name());
            worst_rel = worst_rel.max(rel);
        }
        if let Some(mf) = &fr.master_fund {
            masters += 1;
            let x10 = fr.x1.x0;
            let stats = market.portfolio_stats(&mf.portfolio)?;
            let mut gaps = vec![
                mf.portfolio.x0.abs(),
                (stats.cost - 1.0).abs(),
                (stats.expected_payoff - mf.mu_m).abs(),
                (mf.mu_m - (fr.mu1 - r * x10) / (1.0 - x10)).abs(),
                (measure.eval(&mf.portfolio.x_hat)? - mf.r_m).abs() / (1.0 + mf.r_m),
                (&mf.portfolio.x_hat - &fr.x1.x_hat / (1.0 - x10)).amax(),
            ];
            if mf.mu_m >= r {
                let mid = affine_frontier_portfolio(&fr, 0.5 * (r + mf.mu_m))?;
                let half = Portfolio::bond(market.num_assets()).scale(0.5).add(&mf.portfolio.scale(0.5));
                gaps.push(mid.distance(&half) / (1.0 + half.x_hat.amax()));
            }
            let g = gaps.iter().fold(0.0_f64, |a, &b| a.max(b));
            ensure!(g <= 1e-8, "case {i}: master fund identity gap {g:e}");
            worst_master = worst_master.max(g);
        }
    }
    Ok(format!(
        "{} cases, gamma/(mu-R) spread {worst_rel:.1e}, {masters} master funds, identity gap {worst_master:.1e}",
        cases.len()
    ))
}

fn c5_counterexample() -> Result<String> {
    let (_, gauge) = counterexample_fixture();
    let g = gauge.eval(&DVector::from_vec(vec![1.0, 0.0, 0.0]))?;
    close(g, 0.1, 1e-9, "gauge at (1,0,0)")?;
    let s3 = 3.0_f64.sqrt();
    let (eps, d) = (0.01, 2.0);
    let quoted = [
        (1.0, [1.0, 0.0, 0.0]),
        (1.0 + eps, [1.0 + eps, eps * s3 * (1.0 - s3) / 6.0, eps * s3 * (-1.0 - s3) / 6.0]),
        (1.0 + d, [1.0 + d, -d / 2.0, -d / 2.0]),
    ];
    let path = counterexample_path(&quoted.map(|q| q.0))?;
    let mut worst = 0.0_f64;
    for ((mu, x), (_, want)) in path.iter().zip(&quoted) {
        let gap = (&x.x_hat - DVector::from_row_slice(want)).amax().max(x.x0.abs());
        ensure!(gap <= 1e-6, "mu {mu}: {:?} vs {want:?}", x.x_hat.as_slice());
        worst = worst.max(gap);
    }
    let rep = verify_affinity(&path);
    ensure!(!rep.is_affine && rep.max_deviation > 1e-3, "{rep:?}");
    Ok(format!("portfolio gap {worst:.1e}, affinity deviation {:.3e}", rep.max_deviation))
}

fn c6_betting_market() -> Result<String> {
    let mut worst = 0.0_f64;
    for alpha in [1.0, 2.0, 4.5] {
        let f1 = fixtures::f1(alpha);
        let f_star = kelly_two_state(alpha)?;
        let b = frontier_bounds(&f1, &abs1(), Utility::Log)?;
        close(b.r_max, (22.0 * alpha - 9.0) / (20.0 * alpha), 1e-8, "r_max")?;
        let curve = leverage_path(&f1, &abs1(), &uniform(0.0, f_star, 9))?;
        ensure!(curve.len() == 9, "alpha {alpha}: {} points", curve.len());
        for p in &curve.points {
            let gap = (p.mu - betting_nu(alpha, p.risk.min(f_star))?).abs();
            ensure!(gap <= 1e-8, "alpha {alpha}, r {}: gap {gap:e}", p.risk);
            worst = worst.max(gap);
        }
    }
    let mut seen = Vec::new();
    for (alpha, want) in [
        (1.0, Configuration::Separated),
        (4.5, Configuration::TouchingAtKappa),
        (6.0, Configuration::OnFrontierInterior),
    ] {
        let pos = classify_subsystem(&fixtures::f1(alpha), &abs1())?;
        ensure!(pos.configuration == want, "alpha {alpha}: {pos:?}");
        seen.push(format!("{alpha}:{:?}", pos.configuration));
    }
    Ok(format!("nu gap {worst:.1e}; {}", seen.join(" ")))
}

fn c7_growth() -> Result<String> {
    let f1 = fixtures::f1(1.0);
    close(kelly_two_state(1.0)?, 0.65, 1e-15, "f*(1)")?;
    let g = growth_optimal(&f1)?;
    close(g.kappa.x_hat[0], 0.65, 1e-9, "growth-optimal stake")?;
    let value = |f: f64| 0.55 * (1.0 + f).ln() + 0.45 * (1.0 - 0.5 * f).ln();
    let oracle = value(golden_section_max(value, 0.0, 1.99, 1e-12));
    close(g.mu_kappa, oracle, 1e-9, "mu_kappa vs golden section")?;
    let mut markets = vec![f1, fixtures::f1(2.0), fixtures::f1(4.5), fixtures::f1(6.0), fixtures::f2(), fixtures::fair_game()];
    markets.extend((0..20).map(|s| fixtures::random_all_clear(7000 + s, 8, 4)));
    let mut worst = 0.0_f64;
    for (i, m) in markets.iter().enumerate() {
        let g = growth_optimal(m).with_context(|| format!("market {i}"))?;
        let res = stationarity_residual(m, &g.kappa);
        ensure!(res <= 1e-8, "market {i}: stationarity {res:e}");
        worst = worst.max(res);
    }
    Ok(format!("mu_kappa(1) = {:.10} (oracle {oracle:.10}), worst stationarity {worst:.1e}", g.mu_kappa))
}

/// Asset 0 pays at least `R·S₀` in every state and strictly more in one.
fn arbitrage_market(rng: &mut ChaCha8Rng) -> Market {
    let n = rng.gen_range(2..=6);
    let m = rng.gen_range(1..=3);
    let r = rng.gen_range(0.9..1.2);
    let s0: Vec<f64> = (0..m).map(|_| rng.gen_range(0.5..2.0)).collect();
    let boost = rng.gen_range(0..n);
    let payoffs = (0..n)
        .map(|i| {
            (0..m)
                .map(|j| match (j, i == boost) {
                    (0, true) => s0[0] * r * rng.gen_range(1.1..2.0),
                    (0, false) => s0[0] * r * rng.gen_range(1.0..1.5),
                    _ => s0[j] * r * rng.gen_range(0.3..2.0),
                })
                .collect()
        })
        .collect();
    Market::new(r, s0, payoffs, vec![1.0 / n as f64; n]).unwrap()
}

fn c8_ftap() -> Result<String> {
    let f1 = fixtures::f1(1.0);
    let q = extract_emm(&f1, Utility::Log)?.q;
    close(q[0], 2.0 / 3.0, 1e-8, "q0")?;
    close(q[1], 1.0 / 3.0, 1e-8, "q1")?;
    let res = verify_emm(&f1, &q).iter().fold(0.0_f64, |a, r| a.max(r.abs()));
    ensure!(res <= 1e-8, "F1 martingale residual {res:e}");
    let mut worst = res;
    for seed in 0..20 {
        let m = fixtures::random_all_clear(8000 + seed, 8, 4);
        let q = extract_emm(&m, Utility::Log)?.q;
        ensure!(q.iter().all(|&v| v > 0.0), "seed {seed}: nonpositive weight");
        ensure!((q.sum() - 1.0).abs() <= 1e-12, "seed {seed}: weights sum to {}", q.sum());
        let res = verify_emm(&m, &q).iter().fold(0.0_f64, |a, r| a.max(r.abs()));
        ensure!(res <= 1e-8, "seed {seed}: martingale residual {res:e}");
        worst = worst.max(res);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut arbitrage = vec![fixtures::dominating_asset()];
    arbitrage.extend((0..20).map(|_| arbitrage_market(&mut rng)));
    for (i, m) in arbitrage.iter().enumerate() {
        ensure!(m.detect_arbitrage()?.0, "arbitrage market {i} not detected");
        match utility_boundedness_probe(m, Utility::Log, 1000)? {
            Boundedness::UnboundedDetected(_) => {}
            other => bail!("arbitrage market {i}: probe says {other:?}"),
        }
    }
    Ok(format!("21 EMMs, worst residual {worst:.1e}; {} arbitrage markets flagged", arbitrage.len()))
}

/// Random small markets; every third one gets a scaled copy of asset 1 so
/// bond replicators occur.
fn structural_market(rng: &mut ChaCha8Rng, k: usize) -> Market {
    let m = fixtures::random_market(rng, 5, 5);
    if !k.is_multiple_of(3) || m.num_assets() < 2 {
        return m;
    }
    let c = rng.gen_range(0.5..2.0);
    let last = m.num_assets() - 1;
    let mut s0: Vec<f64> = m.s0_hat().iter().copied().collect();
    s0[last] = s0[0] * c;
    let payoffs = m.payoff_rows().into_iter().map(|mut row| {
        row[last] = row[0] * c;
        row
    });
    Market::new(m.r(), s0, payoffs.collect(), m.probs().iter().copied().collect()).unwrap()
}

fn c9_structure() -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut tally: BTreeMap<&str, usize> = BTreeMap::new();
    for k in 0..200 {
        let market = structural_market(&mut rng, k);
        let rep = market.detect_nontrivial_riskless()?;
        ensure!(
            rep.has_nontrivial_riskless == (rep.has_arbitrage || rep.has_bond_replicator),
            "market {k}: {rep:?}"
        );
        if !rep.has_arbitrage {
            ensure!(rep.has_bond_replicator == (rep.rank_g < market.num_assets()), "market {k}: {rep:?}");
        }
        let (arb, _) = market.detect_arbitrage()?;
        ensure!(arb == rep.has_arbitrage, "market {k}: arbitrage checks disagree");
        if !rep.has_nontrivial_riskless {
            let min_eig = SymmetricEigen::new(market.covariance()).eigenvalues.min();
            ensure!(min_eig > 0.0, "market {k}: all clear but covariance eigenvalue {min_eig:e}");
        }
        let label = match (rep.has_arbitrage, rep.has_bond_replicator) {
            (false, false) => "clear",
            (true, _) => "arbitrage",
            (false, true) => "replicator",
        };
        *tally.entry(label).or_default() += 1;
    }
    Ok(format!("{tally:?}"))
}

fn c10_frontier_shape() -> Result<String> {
    let f1 = fixtures::f1(1.0);
    let f2 = fixtures::f2();
    let mut cases: Vec<(Market, RiskMeasure)> = vec![
        (f1.clone(), abs1()),
        (f1, RiskMeasure::polytope_gauge(vec![vec![2.0], vec![-0.5]])?),
        (f2.clone(), RiskMeasure::half_variance_of(&f2)),
        (f2.clone(), RiskMeasure::std_dev_of(&f2)),
        (f2.clone(), RiskMeasure::abs_exposure(vec![1.0, 0.5])?),
        (f2, RiskMeasure::polytope_gauge(vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![-1.0, -1.0]])?),
    ];
    for seed in 0..6 {
        let m = fixtures::random_all_clear(10_000 + seed, 6, 3);
        cases.push((m.clone(), RiskMeasure::half_variance_of(&m)));
        cases.push((m.clone(), RiskMeasure::abs_exposure(vec![1.0; m.num_assets()])?));
    }
    let (mut curves, mut worst) = (0, 0.0_f64);
    for (i, (market, measure)) in cases.iter().enumerate() {
        for utility in [Utility::Identity, Utility::Log] {
            let problem = TradeoffProblem::new(market, measure, utility)?;
            let b = bounds_for(&problem)?;
            let top = if b.mu_max.is_finite() { b.mu_max } else { b.mu_min + 2.0 };
            let curve = trace_frontier(&problem, &uniform(b.mu_min, top, 17))?;
            let mut traced = vec![curve];
            if utility == Utility::Log && b.r_max.is_finite() {
                traced.push(trace_risk_frontier(&problem, &uniform(b.r_min, b.r_max, 17))?);
            }
            for c in &traced {
                let shape = verify_frontier_shape(c);
                ensure!(shape.passed, "case {i} {} {}: {shape:?}", measure.name(), utility.name());
                let cont = path_continuity(c);
                ensure!(cont.passed, "case {i} {} {}: {cont:?}", measure.name(), utility.name());
                worst = worst.max(shape.monotonicity_violation).max(shape.convexity_violation);
                if measure.flags.r1n {
                    let first = &c.points[0];
                    ensure!(first.portfolio == Portfolio::bond(market.num_assets()), "case {i}: x(mu_min) = {:?}", first.portfolio);
                    ensure!(first.risk == 0.0, "case {i}: gamma(mu_min) = {}", first.risk);
                }
                curves += 1;
            }
        }
    }
    Ok(format!("{curves} curves, worst shape violation {worst:.1e}"))
}

fn dir_bytes(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>> {
    let mut files = BTreeMap::new();
    if dir.exists() {
        for entry in fs::read_dir(dir)? {
            let entry = entry?;
            files.insert(entry.file_name().to_string_lossy().into_owned(), fs::read(entry.path())?);
        }
    }
    Ok(files)
}

fn c11_cli_determinism() -> Result<String> {
    let exe = env!("CARGO_BIN_EXE_portcli");
    let work = tempfile::tempdir()?;
    let mut runs = 0;
    for (name, text) in bundled_scenarios() {
        let scenario = parse_scenario(text.as_bytes())?;
        let again = parse_scenario(scenario.to_json().as_bytes())?;
        ensure!(again == scenario, "{name}: scenario round trip changed the value");
        let path = work.path().join(name);
        fs::write(&path, text)?;
        for cmd in Command::all() {
            let mut seen = Vec::new();
            for rep in 0..2 {
                let out = work.path().join(format!("{name}-{}-{rep}", cmd.name()));
                let o = Process::new(exe)
                    .arg(cmd.name())
                    .arg("--scenario")
                    .arg(&path)
                    .arg("--out")
                    .arg(&out)
                    .output()?;
                ensure!(o.stdout.is_empty(), "{name} {}: data written to stdout", cmd.name());
                seen.push((o.status.code(), o.stderr, dir_bytes(&out)?));
                runs += 1;
            }
            ensure!(seen[0] == seen[1], "{name} {}: outputs differ between runs", cmd.name());
        }
    }
    Ok(format!("{runs} runs over {} scenarios, all byte-identical", bundled_scenarios().len()))
}

type Check = fn() -> Result<String>;

fn main() -> ExitCode {
    let criteria: [(&str, Check); 11] = [
        ("Markowitz closed form vs generic solver", c1_markowitz_vs_solver),
        ("F2 ground truth", c2_f2_ground_truth),
        ("affine structure", c3_affine_structure),
        ("affine frontier of homogeneous measures", c4_homogeneous_frontier),
        ("two-fund counterexample", c5_counterexample),
        ("two-state betting market", c6_betting_market),
        ("growth optimum", c7_growth),
        ("martingale measures", c8_ftap),
        ("structural consistency", c9_structure),
        ("frontier shape", c10_frontier_shape),
        ("CLI determinism", c11_cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(r) => r,
            Err(p) => Err(anyhow::anyhow!(
                "panicked: {}",
                p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
            )),
        };
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name} ({detail}) [{secs:.2}s]", i + 1),
            Err(e) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({e:#}) [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
