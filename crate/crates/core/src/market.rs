//! One-period finite-state market and its structural checks.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::solver::lp::{LinearProgram, LpStatus, Sense};

/// Relative singular-value cutoff used for the rank of the excess matrix.
pub const RANK_TOL: f64 = 1e-9;
const PROB_SUM_TOL: f64 = 1e-12;
const ARBITRAGE_TOL: f64 = 1e-9;

/// Bond with gross return `r` plus `M` risky assets over `N` states.
#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    r: f64,
    s0_hat: DVector<f64>,
    payoffs: DMatrix<f64>,
    probs: DVector<f64>,
}

/// Share vector over the bond and the risky assets.
#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    pub x0: f64,
    pub x_hat: DVector<f64>,
}

impl Portfolio {
    pub fn new(x0: f64, x_hat: DVector<f64>) -> Self {
        Self { x0, x_hat }
    }

    pub fn from_slice(x0: f64, x_hat: &[f64]) -> Self {
        Self { x0, x_hat: DVector::from_column_slice(x_hat) }
    }

    pub fn bond(m: usize) -> Self {
        Self { x0: 1.0, x_hat: DVector::zeros(m) }
    }

    /// Unit-cost portfolio with risky part `x_hat`; the bond absorbs the rest.
    pub fn unit_cost(market: &Market, x_hat: DVector<f64>) -> Self {
        let x0 = 1.0 - market.s0_hat.dot(&x_hat);
        Self { x0, x_hat }
    }

    pub fn dim(&self) -> usize {
        self.x_hat.len()
    }

    /// `(x0, x1, ..., xM)` as a flat vector.
    pub fn to_vec(&self) -> Vec<f64> {
        std::iter::once(self.x0).chain(self.x_hat.iter().copied()).collect()
    }

    /// Euclidean distance over all `M + 1` coordinates.
    pub fn distance(&self, other: &Portfolio) -> f64 {
        ((self.x0 - other.x0).powi(2) + (&self.x_hat - &other.x_hat).norm_squared()).sqrt()
    }

    pub fn scale(&self, t: f64) -> Portfolio {
        Portfolio { x0: t * self.x0, x_hat: &self.x_hat * t }
    }

    pub fn add(&self, other: &Portfolio) -> Portfolio {
        Portfolio { x0: self.x0 + other.x0, x_hat: &self.x_hat + &other.x_hat }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    pub has_arbitrage: bool,
    pub has_nontrivial_riskless: bool,
    pub has_bond_replicator: bool,
    pub rank_g: usize,
    /// Witness for the pathology found, if any.
    pub certificate: Option<Portfolio>,
}

impl StructureReport {
    pub fn all_clear(&self) -> bool {
        !self.has_arbitrage && !self.has_nontrivial_riskless && !self.has_bond_replicator
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioStats {
    pub cost: f64,
    pub payoff_per_state: DVector<f64>,
    pub expected_payoff: f64,
}

impl Market {
    /// Validated market; payoffs must be nonnegative.
    pub fn new(r: f64, s0_hat: Vec<f64>, payoffs: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        Self::build(r, s0_hat, payoffs, probs, false)
    }

    /// Like [`Market::new`] but allows negative payoffs, for synthetic markets.
    pub fn new_permissive(
        r: f64,
        s0_hat: Vec<f64>,
        payoffs: Vec<Vec<f64>>,
        probs: Vec<f64>,
    ) -> Result<Self> {
        Self::build(r, s0_hat, payoffs, probs, true)
    }

    pub fn build(
        r: f64,
        s0_hat: Vec<f64>,
        payoffs: Vec<Vec<f64>>,
        probs: Vec<f64>,
        permissive: bool,
    ) -> Result<Self> {
        let n = probs.len();
        let m = s0_hat.len();
        if n == 0 {
            return Err(Error::dims("number of states", 1, 0));
        }
        if m == 0 {
            return Err(Error::dims("number of risky assets", 1, 0));
        }
        if payoffs.len() != n {
            return Err(Error::dims("payoff rows vs states", n, payoffs.len()));
        }
        for row in &payoffs {
            if row.len() != m {
                return Err(Error::dims("payoff columns vs assets", m, row.len()));
            }
        }
        let all_finite = r.is_finite()
            && s0_hat.iter().all(|v| v.is_finite())
            && probs.iter().all(|v| v.is_finite())
            && payoffs.iter().flatten().all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::NonFinite("market data".into()));
        }
        if r <= 0.0 {
            return Err(Error::NonPositivePrice { what: "R".into(), value: r });
        }
        for (j, &p) in s0_hat.iter().enumerate() {
            if p <= 0.0 {
                return Err(Error::NonPositivePrice { what: format!("price of asset {}", j + 1), value: p });
            }
        }
        for (i, &p) in probs.iter().enumerate() {
            if p <= 0.0 {
                return Err(Error::NonPositiveProbability { state: i, value: p });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::ProbabilitySumNotOne { sum });
        }
        if !permissive {
            for (i, row) in payoffs.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    if v < 0.0 {
                        return Err(Error::NegativePayoff { state: i, asset: j + 1, value: v });
                    }
                }
            }
        }
        let flat: Vec<f64> = payoffs.into_iter().flatten().collect();
        Ok(Self {
            r,
            s0_hat: DVector::from_vec(s0_hat),
            payoffs: DMatrix::from_row_slice(n, m, &flat),
            probs: DVector::from_vec(probs),
        })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn s0_hat(&self) -> &DVector<f64> {
        &self.s0_hat
    }

    pub fn payoffs(&self) -> &DMatrix<f64> {
        &self.payoffs
    }

    pub fn probs(&self) -> &DVector<f64> {
        &self.probs
    }

    pub fn num_states(&self) -> usize {
        self.probs.len()
    }

    pub fn num_assets(&self) -> usize {
        self.s0_hat.len()
    }

    /// Payoff rows as nested vectors, the inverse of the constructor input.
    pub fn payoff_rows(&self) -> Vec<Vec<f64>> {
        self.payoffs.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    /// `E[Ŝ₁]` per asset.
    pub fn expected_payoffs(&self) -> DVector<f64> {
        self.payoffs.transpose() * &self.probs
    }

    /// `E[Ŝ₁] − R·Ŝ₀`.
    pub fn expected_excess(&self) -> DVector<f64> {
        self.expected_payoffs() - &self.s0_hat * self.r
    }

    /// `G[i][j] = Ŝ₁(ωᵢ)ʲ − R·Ŝ₀ʲ`.
    pub fn excess_matrix(&self) -> DMatrix<f64> {
        let mut g = self.payoffs.clone();
        for j in 0..self.num_assets() {
            let shift = self.r * self.s0_hat[j];
            for v in g.column_mut(j).iter_mut() {
                *v -= shift;
            }
        }
        g
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let mean = self.expected_payoffs();
        let (n, m) = self.payoffs.shape();
        let mut cov = DMatrix::<f64>::zeros(m, m);
        for i in 0..n {
            let d = self.payoffs.row(i).transpose() - &mean;
            cov += (&d * d.transpose()) * self.probs[i];
        }
        // exact symmetry
        let t = cov.transpose();
        (cov + t) * 0.5
    }

    /// Payoff `R·x₀ + Ŝ₁(ω)·x̂` in every state.
    pub fn payoff(&self, portfolio: &Portfolio) -> DVector<f64> {
        &self.payoffs * &portfolio.x_hat + DVector::from_element(self.num_states(), self.r * portfolio.x0)
    }

    pub fn cost(&self, portfolio: &Portfolio) -> f64 {
        portfolio.x0 + self.s0_hat.dot(&portfolio.x_hat)
    }

    pub fn expectation(&self, values: &DVector<f64>) -> f64 {
        self.probs.dot(values)
    }

    pub fn portfolio_stats(&self, portfolio: &Portfolio) -> Result<PortfolioStats> {
        self.check_dim(portfolio.dim())?;
        let payoff_per_state = self.payoff(portfolio);
        let expected_payoff = self.expectation(&payoff_per_state);
        Ok(PortfolioStats { cost: self.cost(portfolio), payoff_per_state, expected_payoff })
    }

    pub(crate) fn check_dim(&self, m: usize) -> Result<()> {
        if m != self.num_assets() {
            return Err(Error::dims("portfolio risky dimension", self.num_assets(), m));
        }
        Ok(())
    }

    /// Arbitrage LP: maximize `1ᵀGx̂` over `Gx̂ ≥ 0`, `‖x̂‖∞ ≤ 1`.
    /// Returns the witness risky position when the optimum is positive.
    pub fn detect_arbitrage(&self) -> Result<(bool, Option<DVector<f64>>)> {
        let g = self.excess_matrix();
        let (n, m) = g.shape();
        let objective: Vec<f64> = (0..m).map(|j| g.column(j).sum()).collect();
        let mut lp = LinearProgram::maximize(objective);
        for j in 0..m {
            lp.bounds[j] = (-1.0, 1.0);
        }
        for i in 0..n {
            lp.add_constraint(g.row(i).iter().copied().collect(), Sense::Ge, 0.0);
        }
        let sol = lp.solve()?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::SolverFailure(format!("arbitrage LP ended {:?}", sol.status)));
        }
        let scale = 1.0 + g.amax();
        if sol.objective <= ARBITRAGE_TOL * scale {
            return Ok((false, None));
        }
        let x = DVector::from_vec(sol.x);
        let norm = x.amax();
        Ok((true, Some(x / norm)))
    }

    /// Fills every field of the structure report.
    ///
    /// The bond-replicator flag comes from the numerical rank of `G`. The
    /// nontrivial-riskless flag is decided independently by asking, for
    /// each coordinate and sign, whether some `x̂` with that coordinate
    /// equal to ±1 has `Gx̂ ≥ 0`.
    pub fn detect_nontrivial_riskless(&self) -> Result<StructureReport> {
        let g = self.excess_matrix();
        let m = self.num_assets();
        let rank_g = linalg::numerical_rank(&g, RANK_TOL);
        let (has_arbitrage, witness) = self.detect_arbitrage()?;
        let replicator = if rank_g < m { linalg::null_vector(&g, RANK_TOL) } else { None };
        let has_bond_replicator = replicator.is_some();
        let riskless = self.riskless_direction(&g)?;
        let has_nontrivial_riskless = riskless.is_some();

        let certificate = witness
            .or(replicator.map(|v| {
                let norm = v.amax();
                v / norm
            }))
            .or(riskless)
            .map(|x_hat| Portfolio::new(-self.s0_hat.dot(&x_hat), x_hat));
        Ok(StructureReport { has_arbitrage, has_nontrivial_riskless, has_bond_replicator, rank_g, certificate })
    }

    fn riskless_direction(&self, g: &DMatrix<f64>) -> Result<Option<DVector<f64>>> {
        let (n, m) = g.shape();
        let scale = 1.0 + g.amax();
        for j in 0..m {
            for s in [1.0, -1.0] {
                // minimize the largest violation t of Gx̂ ≥ 0 with s·x̂ⱼ = 1, ‖x̂‖∞ ≤ 1
                let mut obj = vec![0.0; m + 1];
                obj[m] = 1.0;
                let mut lp = LinearProgram::minimize(obj);
                for k in 0..m {
                    lp.bounds[k] = (-1.0, 1.0);
                }
                for i in 0..n {
                    let mut row: Vec<f64> = g.row(i).iter().copied().collect();
                    row.push(1.0);
                    lp.add_constraint(row, Sense::Ge, 0.0);
                }
                let mut pin = vec![0.0; m + 1];
                pin[j] = s;
                lp.add_constraint(pin, Sense::Eq, 1.0);
                let sol = lp.solve()?;
                if sol.status != LpStatus::Optimal {
                    return Err(Error::SolverFailure(format!("riskless LP ended {:?}", sol.status)));
                }
                if sol.objective <= RANK_TOL * scale {
                    return Ok(Some(DVector::from_column_slice(&sol.x[..m])));
                }
            }
        }
        Ok(None)
    }

    /// Structure check that turns any pathology into an error.
    pub fn require_all_clear(&self) -> Result<StructureReport> {
        let report = self.detect_nontrivial_riskless()?;
        if report.has_arbitrage {
            return Err(Error::MarketPathology("market admits an arbitrage".into()));
        }
        if report.has_nontrivial_riskless || report.has_bond_replicator {
            return Err(Error::MarketPathology("market has a nontrivial riskless portfolio".into()));
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            Market::new(1.0, vec![1.0], vec![vec![1.0], vec![2.0]], vec![0.5, 0.6]),
            Err(Error::ProbabilitySumNotOne { .. })
        ));
        assert!(matches!(
            Market::new(1.0, vec![1.0], vec![vec![1.0], vec![2.0]], vec![0.0, 1.0]),
            Err(Error::NonPositiveProbability { state: 0, .. })
        ));
        assert!(matches!(
            Market::new(1.0, vec![1.0], vec![vec![-1.0], vec![2.0]], vec![0.5, 0.5]),
            Err(Error::NegativePayoff { .. })
        ));
        assert!(matches!(
            Market::new(1.0, vec![0.0], vec![vec![1.0], vec![2.0]], vec![0.5, 0.5]),
            Err(Error::NonPositivePrice { .. })
        ));
        assert!(matches!(
            Market::new(1.0, vec![1.0, 1.0], vec![vec![1.0], vec![2.0]], vec![0.5, 0.5]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(Market::new_permissive(1.0, vec![1.0], vec![vec![-1.0], vec![2.0]], vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn excess_matrix_examples() {
        let f1 = fixtures::f1(1.0);
        let g = f1.excess_matrix();
        assert_eq!(g.as_slice(), &[-0.5, 1.0]);
        let f2 = fixtures::f2();
        let g = f2.excess_matrix();
        let rows: Vec<Vec<f64>> = g.row_iter().map(|r| r.iter().copied().collect()).collect();
        assert_eq!(rows, vec![vec![1.0, 3.0], vec![1.0, -1.0], vec![-1.0, 3.0], vec![-1.0, -1.0]]);
        let flat = Market::new(1.0, vec![1.0], vec![vec![1.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        assert_eq!(flat.excess_matrix().amax(), 0.0);
    }

    #[test]
    fn covariance_examples() {
        let cov = fixtures::f2().covariance();
        assert_eq!(cov, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]));
        let cov = fixtures::f1(1.0).covariance();
        assert!((cov[(0, 0)] - 0.556875).abs() < 1e-15);
        let single = Market::new(1.0, vec![1.0], vec![vec![3.0]], vec![1.0]).unwrap();
        assert_eq!(single.covariance()[(0, 0)], 0.0);
    }

    #[test]
    fn arbitrage_examples() {
        assert_eq!(fixtures::f1(1.0).detect_arbitrage().unwrap(), (false, None));
        assert_eq!(fixtures::f2().detect_arbitrage().unwrap(), (false, None));
        let (arb, w) = fixtures::dominating_asset().detect_arbitrage().unwrap();
        assert!(arb);
        assert!((w.unwrap()[0] - 1.0).abs() < 1e-12);
        let flat = Market::new(1.0, vec![1.0], vec![vec![1.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        assert_eq!(flat.detect_arbitrage().unwrap(), (false, None));
    }

    #[test]
    fn structure_reports() {
        let r = fixtures::f2().detect_nontrivial_riskless().unwrap();
        assert_eq!(r.rank_g, 2);
        assert!(r.all_clear());
        let r = fixtures::duplicated_asset().detect_nontrivial_riskless().unwrap();
        assert!(r.has_bond_replicator && r.has_nontrivial_riskless && !r.has_arbitrage);
        let c = r.certificate.unwrap().x_hat;
        assert!((c[0] + c[1]).abs() < 1e-9 && (c[0].abs() - 1.0).abs() < 1e-9);
        let r = fixtures::dominating_asset().detect_nontrivial_riskless().unwrap();
        assert!(r.has_arbitrage && r.has_nontrivial_riskless);
    }

    #[test]
    fn portfolio_stats_examples() {
        let f2 = fixtures::f2();
        let s = f2.portfolio_stats(&Portfolio::bond(2)).unwrap();
        assert_eq!(s.cost, 1.0);
        assert!(s.payoff_per_state.iter().all(|&v| v == 1.0));
        let s = f2.portfolio_stats(&Portfolio::from_slice(0.0, &[0.0, 1.0])).unwrap();
        assert_eq!(s.payoff_per_state.as_slice(), &[4.0, 0.0, 4.0, 0.0]);
        assert_eq!(s.expected_payoff, 2.0);
        let f1 = fixtures::f1(1.0);
        let s = f1.portfolio_stats(&Portfolio::from_slice(0.35, &[0.65])).unwrap();
        assert!((s.payoff_per_state[0] - 0.675).abs() < 1e-15);
        assert!((s.payoff_per_state[1] - 1.65).abs() < 1e-15);
        assert!((s.expected_payoff - 1.21125).abs() < 1e-15);
        assert!(f1.portfolio_stats(&Portfolio::bond(2)).is_err());
    }
}
