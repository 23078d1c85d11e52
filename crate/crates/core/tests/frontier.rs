use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tradeoff_core::fixtures;
use tradeoff_core::frontier::{
    auto_grid, bounds_for, frontier_bounds, path_continuity, subsystem_frontier_compare, trace_frontier,
    trace_risk_frontier, uniform, verify_frontier_shape, FrontierCurve,
};
use tradeoff_core::growth::{betting_nu, golden_section_max};
use tradeoff_core::{Admissible, Portfolio, RiskMeasure, SolverConfig, TradeoffProblem, Utility};

fn abs1() -> RiskMeasure {
    RiskMeasure::abs_exposure(vec![1.0]).unwrap()
}

fn check_curve(curve: &FrontierCurve) {
    let shape = verify_frontier_shape(curve);
    assert!(shape.passed, "{shape:?}");
    let cont = path_continuity(curve);
    assert!(cont.passed, "{cont:?}");
}

#[test]
fn f1_bounds_and_trace() {
    let f1 = fixtures::f1(1.0);
    let b = frontier_bounds(&f1, &abs1(), Utility::Log).unwrap();
    let mu_k = betting_nu(1.0, 0.65).unwrap();
    assert_eq!((b.mu_min, b.r_min), (0.0, 0.0));
    assert!((b.mu_max - mu_k).abs() < 1e-12 && (b.r_max - 0.65).abs() < 1e-10);
    assert!(b.mu_max_attained && b.r_max_attained);

    let abs = abs1();
    let prob = TradeoffProblem::new(&f1, &abs, Utility::Log).unwrap();
    let c = trace_frontier(&prob, &[0.0, 0.5 * mu_k, mu_k]).unwrap();
    let risks = c.risks();
    assert_eq!(risks[0], 0.0);
    assert!((risks[2] - 0.65).abs() < 1e-10);
    // invert ν by golden-section on |ν(r) − μ|
    let target = 0.5 * mu_k;
    let oracle = golden_section_max(|r| -(betting_nu(1.0, r).unwrap() - target).abs(), 0.0, 0.65, 1e-12);
    assert!((risks[1] - oracle).abs() < 1e-8, "{} vs {oracle}", risks[1]);
    assert!(0.0 < risks[1] && risks[1] < 0.65);
}

#[test]
fn single_point_grid_is_the_bond() {
    let f2 = fixtures::f2();
    let hv = RiskMeasure::half_variance_of(&f2);
    let prob = TradeoffProblem::new(&f2, &hv, Utility::Log).unwrap();
    let c = trace_frontier(&prob, &[prob.bond_utility()]).unwrap();
    assert_eq!(c.len(), 1);
    assert_eq!(c.points[0].risk, 0.0);
    assert_eq!(c.points[0].portfolio, Portfolio::bond(2));
}

#[test]
fn traced_curves_have_frontier_shape() {
    let f1 = fixtures::f1(1.0);
    let f2 = fixtures::f2();
    let measures_f2 = [
        RiskMeasure::half_variance_of(&f2),
        RiskMeasure::std_dev_of(&f2),
        RiskMeasure::abs_exposure(vec![1.0, 0.5]).unwrap(),
        RiskMeasure::polytope_gauge(vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![-1.0, -1.0]]).unwrap(),
    ];
    for m in &measures_f2 {
        for u in [Utility::Identity, Utility::Log] {
            let prob = TradeoffProblem::new(&f2, m, u).unwrap();
            let b = bounds_for(&prob).unwrap();
            let top = if b.mu_max.is_finite() { b.mu_max } else { b.mu_min + 2.0 };
            let c = trace_frontier(&prob, &uniform(b.mu_min, top, 17)).unwrap();
            assert_eq!(c.len(), 17, "{} {}", m.name(), u.name());
            check_curve(&c);
            assert_eq!(c.points[0].portfolio, Portfolio::bond(2));
            assert_eq!(c.points[0].risk, 0.0);
        }
    }
    let abs = abs1();
    let prob = TradeoffProblem::new(&f1, &abs, Utility::Log).unwrap();
    let b = bounds_for(&prob).unwrap();
    check_curve(&trace_frontier(&prob, &auto_grid(&b, 33, 10.0)).unwrap());
}

#[test]
fn f2_markowitz_path_is_affine() {
    let f2 = fixtures::f2();
    let sd = RiskMeasure::std_dev_of(&f2);
    let prob = TradeoffProblem::new(&f2, &sd, Utility::Identity).unwrap();
    let c = trace_frontier(&prob, &uniform(1.0, 3.0, 9)).unwrap();
    let rep = path_continuity(&c);
    assert!(rep.passed);
    assert!((rep.fine_max_ratio - rep.coarse_max_ratio).abs() < 1e-7);
}

#[test]
fn risk_trace_inverts_utility_trace() {
    let f1 = fixtures::f1(2.0);
    let abs = abs1();
    let prob = TradeoffProblem::new(&f1, &abs, Utility::Log).unwrap();
    let c = trace_risk_frontier(&prob, &uniform(0.0, 0.875, 9)).unwrap();
    for p in &c.points {
        assert!((p.mu - betting_nu(2.0, p.risk).unwrap()).abs() < 1e-10);
    }
    check_curve(&c);
}

#[test]
fn unique_portfolios_from_random_starts() {
    let f2 = fixtures::f2();
    let sd = RiskMeasure::std_dev_of(&f2);
    let base = TradeoffProblem::new(&f2, &sd, Utility::Log).unwrap();
    let b = bounds_for(&base).unwrap();
    let grid = uniform(b.mu_min, b.mu_max, 5);
    let reference = trace_frontier(&base, &grid).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let start = DVector::from_fn(2, |_, _| rng.gen_range(-0.2..0.2));
        let prob = base.clone().config(SolverConfig { start: Some(start), ..SolverConfig::default() });
        let c = trace_frontier(&prob, &grid).unwrap();
        for (p, q) in c.points.iter().zip(&reference.points) {
            assert!(p.portfolio.distance(&q.portfolio) < 1e-6);
        }
    }
}

#[test]
fn growth_optimum_is_independent_of_the_measure() {
    let f1 = fixtures::f1(1.0);
    let gauge = RiskMeasure::polytope_gauge(vec![vec![2.0], vec![-0.5]]).unwrap();
    let mut tops = Vec::new();
    for m in [abs1(), gauge] {
        let prob = TradeoffProblem::new(&f1, &m, Utility::Log).unwrap();
        let b = bounds_for(&prob).unwrap();
        let c = trace_risk_frontier(&prob, &uniform(0.0, b.r_max, 5)).unwrap();
        tops.push(c.points.last().unwrap().portfolio.clone());
    }
    assert!(tops[0].distance(&tops[1]) < 1e-6);
}

#[test]
fn risky_only_frontier_touches_capital_market_line() {
    let f2 = fixtures::f2();
    let hv = RiskMeasure::half_variance_of(&f2);
    let full = TradeoffProblem::new(&f2, &hv, Utility::Identity).unwrap();
    let sub = full.clone().admissible(Admissible::RiskyOnly);
    let grid = uniform(1.2, 3.2, 11);
    let cf = trace_frontier(&full, &grid).unwrap();
    let cs = trace_frontier(&sub, &grid).unwrap();
    let rep = subsystem_frontier_compare(&cs, &cf).unwrap();
    assert!(rep.dominated, "{rep:?}");
    assert_eq!(rep.tangency.len(), 1);
    let (mu, risk) = rep.tangency[0];
    assert!((mu - 2.0).abs() < 1e-12 && (risk - 2.0).abs() < 1e-9);
    let same = subsystem_frontier_compare(&cf, &cf).unwrap();
    assert_eq!(same.tangency.len(), grid.len());
}

#[test]
fn separated_risky_only_point() {
    let f1 = fixtures::f1(1.0);
    let abs = abs1();
    let full = TradeoffProblem::new(&f1, &abs, Utility::Log).unwrap();
    let sub = full.clone().admissible(Admissible::RiskyOnly);
    let mu_sub = 0.1 * 2.0_f64.ln();
    let cs = FrontierCurve {
        points: vec![tradeoff_core::frontier::FrontierPoint {
            mu: mu_sub,
            risk: 1.0,
            portfolio: Portfolio::from_slice(0.0, &[1.0]),
        }],
        measure_id: "abs_exposure".into(),
        utility_id: "log".into(),
        admissible: sub.admissible_set(),
        bounds: bounds_for(&full).unwrap(),
    };
    let cf = trace_frontier(&full, &[mu_sub]).unwrap();
    let rep = subsystem_frontier_compare(&cs, &cf).unwrap();
    assert!(rep.dominated && rep.tangency.is_empty());
    assert!(cf.points[0].risk < 1.0 - 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn random_markets_trace_valid_frontiers(seed in 0u64..10_000) {
        let market = fixtures::random_all_clear(seed, 6, 3);
        let hv = RiskMeasure::half_variance_of(&market);
        let prob = TradeoffProblem::new(&market, &hv, Utility::Log).unwrap();
        let b = bounds_for(&prob).unwrap();
        prop_assert!(b.mu_min <= b.mu_max && 0.0 <= b.r_min && b.r_min <= b.r_max);
        let c = trace_frontier(&prob, &uniform(b.mu_min, b.mu_max, 9)).unwrap();
        prop_assert!(verify_frontier_shape(&c).passed);
        prop_assert!(path_continuity(&c).passed);
        prop_assert_eq!(&c.points[0].portfolio, &Portfolio::bond(market.num_assets()));
    }
}
