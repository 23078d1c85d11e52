//! Reference markets used by tests, benches and the command-line front end.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::market::Market;
use crate::measures::RiskMeasure;

/// Two-state betting market: the risky asset costs 1 and pays 0.5 with
/// probability 0.45 or `1 + alpha` with probability 0.55.
pub fn f1(alpha: f64) -> Market {
    Market::new(1.0, vec![1.0], vec![vec![0.5], vec![1.0 + alpha]], vec![0.45, 0.55])
        .expect("valid two-state market")
}

/// Four equally likely states, two assets with `Σ = diag(1, 4)` and
/// `E[Ŝ₁] = (1, 2)`.
pub fn f2() -> Market {
    Market::new(
        1.0,
        vec![1.0, 1.0],
        vec![vec![2.0, 4.0], vec![2.0, 0.0], vec![0.0, 4.0], vec![0.0, 0.0]],
        vec![0.25; 4],
    )
    .expect("valid four-state market")
}

/// Excess payoff `(0, 2)`: buying the asset is an arbitrage.
pub fn dominating_asset() -> Market {
    Market::new(1.0, vec![1.0], vec![vec![1.0], vec![3.0]], vec![0.5, 0.5]).expect("valid market")
}

/// Two identical risky assets: `(1, −1)` replicates the bond.
pub fn duplicated_asset() -> Market {
    Market::new(1.0, vec![1.0, 1.0], vec![vec![0.5, 0.5], vec![2.0, 2.0]], vec![0.5, 0.5])
        .expect("valid market")
}

/// Straddling payoff with mean equal to `R·S₀`.
pub fn fair_game() -> Market {
    Market::new(1.0, vec![1.0], vec![vec![0.5], vec![1.5]], vec![0.5, 0.5]).expect("valid market")
}

/// Three assets with unit prices whose expected payoff functional is
/// `x̂ ↦ x₁`, paired with the gauge of a box with a rotated square cap.
pub fn counterexample() -> (Market, RiskMeasure) {
    let g = [[1.0, -14.0, -2.0], [-1.0, 14.0, -2.0], [-1.0, -2.0, -6.0], [1.0, -2.0, 6.0]];
    let payoffs = g.iter().map(|row| row.iter().map(|v| v + 1.0).collect()).collect();
    let market = Market::new_permissive(1.0, vec![1.0; 3], payoffs, vec![0.25; 4])
        .expect("valid synthetic market");
    (market, RiskMeasure::polytope_gauge(counterexample_vertices()).expect("origin is interior"))
}

pub fn counterexample_vertices() -> Vec<Vec<f64>> {
    let mut v = Vec::new();
    for a in [-5.0, 5.0] {
        for b in [-1.0, 1.0] {
            for c in [-1.0, 1.0] {
                v.push(vec![a, b, c]);
            }
        }
    }
    let s = 3.0_f64.sqrt();
    v.push(vec![10.0, 0.0, 0.0]);
    v.push(vec![9.0, (-1.0 + s) / 4.0, (1.0 + s) / 4.0]);
    v.push(vec![9.0, (-1.0 - s) / 4.0, (-1.0 + s) / 4.0]);
    v.push(vec![9.0, (1.0 - s) / 4.0, -(1.0 + s) / 4.0]);
    v.push(vec![9.0, (1.0 + s) / 4.0, (1.0 - s) / 4.0]);
    v
}

/// Small random market with positive payoffs and positive probabilities.
/// Not necessarily free of pathologies.
pub fn random_market(rng: &mut impl Rng, max_states: usize, max_assets: usize) -> Market {
    let n = rng.gen_range(1..=max_states);
    let m = rng.gen_range(1..=max_assets);
    random_market_with(rng, n, m)
}

pub fn random_market_with(rng: &mut impl Rng, n: usize, m: usize) -> Market {
    let r = rng.gen_range(0.9..1.2);
    let s0: Vec<f64> = (0..m).map(|_| rng.gen_range(0.5..2.0)).collect();
    let payoffs: Vec<Vec<f64>> = (0..n)
        .map(|_| s0.iter().map(|&p| p * r * rng.gen_range(0.3..2.0)).collect())
        .collect();
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let head: f64 = probs[..n - 1].iter().sum();
    probs[n - 1] = 1.0 - head;
    Market::new(r, s0, payoffs, probs).expect("random market is valid")
}

/// Random market that passes every structural check, with at least one
/// more state than assets. Deterministic in `seed`.
pub fn random_all_clear(seed: u64, max_states: usize, max_assets: usize) -> Market {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let m = rng.gen_range(1..=max_assets.min(max_states - 1));
        let n = rng.gen_range(m + 1..=max_states);
        let market = random_market_with(&mut rng, n, m);
        if let Ok(report) = market.detect_nontrivial_riskless() {
            if report.all_clear() {
                return market;
            }
        }
    }
}
