//! Shared workloads for the solver benchmarks.

use tradeoff_core::{fixtures, Market};

/// Deterministic all-clear markets with at least two risky assets.
pub fn markets(count: usize, max_states: usize, max_assets: usize) -> Vec<Market> {
    (0..)
        .map(|seed| fixtures::random_all_clear(seed, max_states, max_assets))
        .filter(|m| m.num_assets() >= 2)
        .take(count)
        .collect()
}
