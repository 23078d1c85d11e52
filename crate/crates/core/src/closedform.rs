//! Closed-form mean-variance solutions: the Markowitz bullet over purely
//! risky portfolios and the capital market line once the bond is added.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::SpdFactor;
use crate::market::{Market, Portfolio};

/// `α = EΣ⁻¹E`, `β = EΣ⁻¹Ŝ₀`, `γ = Ŝ₀Σ⁻¹Ŝ₀` and `disc = αγ − β²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkowitzScalars {
    pub alpha: f64,
    pub beta: f64,
    pub gamma_s: f64,
    pub disc: f64,
}

impl MarkowitzScalars {
    /// Expected payoff at the vertex of the bullet.
    pub fn vertex_mu(&self) -> f64 {
        self.beta / self.gamma_s
    }

    /// Smallest attainable standard deviation.
    pub fn vertex_sigma(&self) -> f64 {
        1.0 / self.gamma_s.sqrt()
    }

    /// Slope `dμ/dσ` of the bullet's asymptotes.
    pub fn asymptote_slope(&self) -> f64 {
        (self.disc / self.gamma_s).sqrt()
    }
}

/// Covariance, expected payoffs and prices of the risky assets.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanVariance {
    pub sigma: DMatrix<f64>,
    pub mean: DVector<f64>,
    pub s0_hat: DVector<f64>,
}

impl MeanVariance {
    pub fn new(sigma: DMatrix<f64>, mean: DVector<f64>, s0_hat: DVector<f64>) -> Result<Self> {
        let m = s0_hat.len();
        if sigma.shape() != (m, m) {
            return Err(Error::dims("covariance", m, sigma.nrows()));
        }
        if mean.len() != m {
            return Err(Error::dims("expected payoffs", m, mean.len()));
        }
        Ok(Self { sigma, mean, s0_hat })
    }

    pub fn of(market: &Market) -> Self {
        Self { sigma: market.covariance(), mean: market.expected_payoffs(), s0_hat: market.s0_hat().clone() }
    }

    fn factor(&self) -> Result<SpdFactor> {
        SpdFactor::new(&self.sigma)
    }

    fn forms(&self) -> Result<(SpdFactor, f64, f64, f64)> {
        let f = self.factor()?;
        let alpha = f.inner(&self.mean, &self.mean);
        let beta = f.inner(&self.mean, &self.s0_hat);
        let gamma_s = f.inner(&self.s0_hat, &self.s0_hat);
        Ok((f, alpha, beta, gamma_s))
    }
}

pub fn markowitz_scalars(mv: &MeanVariance) -> Result<MarkowitzScalars> {
    let (f, alpha, beta, gamma_s) = mv.forms()?;
    let (_, disc) = tilted_mean(mv, &f, beta, gamma_s);
    if disc <= 1e-12 * alpha * gamma_s {
        return Err(Error::ProportionalMeans);
    }
    Ok(MarkowitzScalars { alpha, beta, gamma_s, disc })
}

/// `d = E − (β/γ)Ŝ₀` and `disc = γ·dΣ⁻¹d`, which avoids the cancellation
/// in `αγ − β²` when the means are nearly proportional to the prices.
fn tilted_mean(mv: &MeanVariance, f: &SpdFactor, beta: f64, gamma_s: f64) -> (DVector<f64>, f64) {
    let d = &mv.mean - &mv.s0_hat * (beta / gamma_s);
    let disc = gamma_s * f.inner(&d, &d);
    (d, disc)
}

/// A point of the bullet with the multipliers of `x̂ = Σ⁻¹(λ₁E + λ₂Ŝ₀)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BulletPoint {
    pub sigma: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// False on the lower branch `μ < β/γ`.
    pub efficient: bool,
}

pub fn markowitz_frontier(s: &MarkowitzScalars, mu: f64) -> BulletPoint {
    // written around the vertex: α − β²/γ = disc/γ is never formed
    let dm = mu - s.vertex_mu();
    let lambda1 = s.gamma_s * dm / s.disc;
    let lambda2 = 1.0 / s.gamma_s - s.beta * dm / s.disc;
    let var = 1.0 / s.gamma_s + s.gamma_s * dm * dm / s.disc;
    BulletPoint { sigma: var.max(0.0).sqrt(), lambda1, lambda2, efficient: mu >= s.vertex_mu() }
}

/// Risky-only minimum-variance portfolio with expected payoff `mu`.
pub fn markowitz_portfolio(mv: &MeanVariance, mu: f64) -> Result<DVector<f64>> {
    let s = markowitz_scalars(mv)?;
    let f = mv.factor()?;
    let (d, disc) = tilted_mean(mv, &f, s.beta, s.gamma_s);
    // Σ⁻¹(λ₁E + λ₂Ŝ₀) regrouped as the vertex portfolio plus a tilt along Σ⁻¹d
    let v = f.solve(&mv.s0_hat);
    let mut w = f.solve(&d);
    // Ŝ₀·Σ⁻¹d vanishes in exact arithmetic; remove its rounding residue
    w -= &v * (mv.s0_hat.dot(&w) / mv.s0_hat.dot(&v));
    Ok(v / s.gamma_s + w * ((mu - s.vertex_mu()) * s.gamma_s / disc))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoFund {
    /// Weight on the first fund.
    pub w: f64,
    /// `‖w·x_a + (1 − w)·x_b − x_target‖`
    pub residual: f64,
}

/// Least-squares weight expressing `target` on the line through two funds.
pub fn two_fund_decompose(x_a: &DVector<f64>, x_b: &DVector<f64>, target: &DVector<f64>) -> Result<TwoFund> {
    if x_a.len() != x_b.len() || x_a.len() != target.len() {
        return Err(Error::dims("fund", x_a.len(), target.len().min(x_b.len())));
    }
    let d = x_a - x_b;
    if d.norm() <= 1e-14 * (1.0 + x_a.norm()) {
        return Err(Error::DegeneratePair);
    }
    let rhs = target - x_b;
    let w = d.dot(&rhs) / d.norm_squared();
    Ok(TwoFund { w, residual: (&d * w - rhs).norm() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapmSummary {
    pub r: f64,
    /// `Δ = α − 2βR + γR²`
    pub delta: f64,
    pub sigma_m: f64,
    pub mu_m: f64,
    pub x_m: Portfolio,
    /// `√Δ`
    pub price_of_risk: f64,
}

struct Capm {
    f: SpdFactor,
    alpha: f64,
    beta: f64,
    gamma_s: f64,
    delta: f64,
    excess: DVector<f64>,
}

fn capm_parts(mv: &MeanVariance, r: f64) -> Result<Capm> {
    let excess = &mv.mean - &mv.s0_hat * r;
    if excess.amax() <= 1e-12 * (1.0 + mv.mean.amax()) {
        return Err(Error::DegenerateExcess);
    }
    let (f, alpha, beta, gamma_s) = mv.forms()?;
    let delta = f.inner(&excess, &excess);
    Ok(Capm { f, alpha, beta, gamma_s, delta, excess })
}

pub fn capm_summary(mv: &MeanVariance, r: f64) -> Result<CapmSummary> {
    let c = capm_parts(mv, r)?;
    let tilt = c.beta - c.gamma_s * r;
    if tilt <= 0.0 {
        return Err(Error::NoMarketPortfolio(tilt));
    }
    let x_hat = c.f.solve(&c.excess) / tilt;
    Ok(CapmSummary {
        r,
        delta: c.delta,
        sigma_m: c.delta.sqrt() / tilt,
        mu_m: r + c.delta / tilt,
        x_m: Portfolio::new(0.0, x_hat),
        price_of_risk: c.delta.sqrt(),
    })
}

/// Minimum-variance unit-cost portfolio with expected payoff `mu ≥ R`.
pub fn capm_portfolio(mv: &MeanVariance, r: f64, mu: f64) -> Result<Portfolio> {
    if mu < r {
        return Err(Error::BelowRiskless { mu, r });
    }
    let c = capm_parts(mv, r)?;
    let x0 = (c.alpha - c.beta * r - mu * (c.beta - c.gamma_s * r)) / c.delta;
    let x_hat = c.f.solve(&c.excess) * ((mu - r) / c.delta);
    Ok(Portfolio::new(x0, x_hat))
}

pub fn capital_market_line(summary: &CapmSummary, sigma: f64) -> f64 {
    summary.r + sigma * summary.price_of_risk
}

pub fn sharpe_ratio(mu: f64, sigma: f64, r: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::ZeroRisk);
    }
    Ok((mu - r) / sigma)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaPrice {
    pub beta: f64,
    /// `R + β(μ_M − R)`
    pub mu_capm: f64,
    /// `E[a₁]/a₀`
    pub quoted_return: f64,
    /// `E[a₁]/μ_capm`: the price at which the quoted return equals the
    /// CAPM return computed with `β` at the quoted price.
    pub implied_price: f64,
    /// Price `a₀` solving `E[a₁]/a₀ = R + β(a₀)(μ_M − R)`, where `β` is
    /// recomputed from the payoff normalized by `a₀`. `None` when the
    /// solution is not positive.
    pub equilibrium_price: Option<f64>,
}

/// Beta of a payoff `a₁` quoted at `a₀` against the market portfolio.
pub fn beta_price(market: &Market, summary: &CapmSummary, payoff: &DVector<f64>, a0: f64) -> Result<BetaPrice> {
    if !(a0 > 0.0) {
        return Err(Error::NonPositivePrice { what: "asset price".into(), value: a0 });
    }
    if payoff.len() != market.num_states() {
        return Err(Error::dims("asset payoff", market.num_states(), payoff.len()));
    }
    let y_m = market.payoff(&summary.x_m);
    let mean_a = market.expectation(payoff);
    let mean_m = market.expectation(&y_m);
    let centred = DVector::from_fn(payoff.len(), |i, _| (payoff[i] - mean_a) * (y_m[i] - mean_m));
    let cov = market.expectation(&centred);
    let var_m = summary.sigma_m * summary.sigma_m;
    // β(a₀) = b/a₀
    let b = cov / var_m;
    let beta = b / a0;
    let mu_capm = summary.r + beta * (summary.mu_m - summary.r);
    let equilibrium = (mean_a - b * (summary.mu_m - summary.r)) / summary.r;
    Ok(BetaPrice {
        beta,
        mu_capm,
        quoted_return: mean_a / a0,
        implied_price: mean_a / mu_capm,
        equilibrium_price: (equilibrium > 0.0).then_some(equilibrium),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangencyReport {
    /// `σ_bullet(μ_M) − σ_M`
    pub sigma_gap: f64,
    /// `dμ/dσ` of the bullet at `μ_M`, by central differences.
    pub bullet_slope: f64,
    pub line_slope: f64,
    pub passed: bool,
}

/// Checks that the capital market line touches the bullet at the market
/// portfolio with matching slope.
pub fn tangency_check(bullet: &MarkowitzScalars, summary: &CapmSummary) -> TangencyReport {
    let mu = summary.mu_m;
    let sigma = |m: f64| markowitz_frontier(bullet, m).sigma;
    let h = 1e-6 * (1.0 + mu.abs());
    let bullet_slope = 2.0 * h / (sigma(mu + h) - sigma(mu - h));
    let sigma_gap = sigma(mu) - summary.sigma_m;
    let line_slope = summary.price_of_risk;
    TangencyReport {
        sigma_gap,
        bullet_slope,
        line_slope,
        passed: sigma_gap.abs() <= 1e-8 && (bullet_slope - line_slope).abs() <= 1e-6,
    }
}
