//! Scenario files: strict JSON describing a market, a risk measure, a
//! utility and the grid to evaluate.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use tradeoff_core::{Admissible, Market, RiskMeasure, SolverConfig, Utility};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub market: MarketSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility: Option<UtilitySpec>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub admissible: AdmissibleSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
    /// Payoff and quoted price priced by the `beta` command.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asset: Option<AssetSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSpec {
    #[serde(alias = "R")]
    pub r: f64,
    pub s0_hat: Vec<f64>,
    /// One row per state, one column per risky asset.
    pub payoffs: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
    /// Allow negative payoffs for synthetic markets.
    #[serde(default, skip_serializing_if = "is_default")]
    pub permissive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    /// `sigma` defaults to the market covariance.
    HalfVariance {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<Vec<Vec<f64>>>,
    },
    StdDev {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<Vec<Vec<f64>>>,
    },
    AbsExposure {
        weights: Vec<f64>,
    },
    PolytopeGauge {
        vertices: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UtilitySpec {
    Identity,
    Log,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmissibleSpec {
    #[default]
    UnitCost,
    UnitCostRiskyOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Mu,
    R,
}

/// Either explicit `values` or a `from`/`to` range with `points` samples.
/// With neither, commands pick their natural range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub axis: Axis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_newton: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetSpec {
    /// Payoff per state.
    pub payoff: Vec<f64>,
    pub price: f64,
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

/// Core objects built from a scenario.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub market: Market,
    pub measure: Option<RiskMeasure>,
    pub utility: Option<Utility>,
    pub admissible: Admissible,
    pub config: SolverConfig,
}

/// Parses and validates a scenario file.
pub fn parse_scenario(bytes: &[u8]) -> Result<Scenario, CliError> {
    let scenario: Scenario = serde_json::from_slice(bytes).map_err(json_error)?;
    scenario.resolve()?;
    Ok(scenario)
}

fn json_error(e: serde_json::Error) -> CliError {
    let msg = e.to_string();
    if let Some(rest) = msg.strip_prefix("unknown field `") {
        if let Some(end) = rest.find('`') {
            return CliError::Validation(format!("UnknownKey: {}", &rest[..end]));
        }
    }
    if e.is_data() {
        return CliError::Validation(format!("InvalidField: {msg}"));
    }
    CliError::Parse { line: e.line(), column: e.column(), message: msg }
}

fn validation(e: tradeoff_core::Error) -> CliError {
    CliError::Validation(e.to_string())
}

fn square(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, CliError> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Validation(format!("DimensionMismatch: {what} must be square")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl Scenario {
    pub fn from_market(market: &Market) -> Self {
        Scenario {
            market: MarketSpec {
                r: market.r(),
                s0_hat: market.s0_hat().iter().copied().collect(),
                payoffs: market.payoff_rows(),
                probs: market.probs().iter().copied().collect(),
                permissive: market.payoffs().iter().any(|&v| v < 0.0),
            },
            measure: None,
            utility: None,
            admissible: AdmissibleSpec::UnitCost,
            grid: None,
            tolerances: None,
            asset: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    /// Builds the market, measure and solver settings, reporting the first
    /// violated invariant.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let m = &self.market;
        let market = Market::build(m.r, m.s0_hat.clone(), m.payoffs.clone(), m.probs.clone(), m.permissive)
            .map_err(validation)?;
        let measure = match &self.measure {
            None => None,
            Some(spec) => {
                let measure = match spec {
                    MeasureSpec::HalfVariance { sigma: None } => RiskMeasure::half_variance_of(&market),
                    MeasureSpec::HalfVariance { sigma: Some(s) } => {
                        RiskMeasure::half_variance(square(s, "sigma")?).map_err(validation)?
                    }
                    MeasureSpec::StdDev { sigma: None } => RiskMeasure::std_dev_of(&market),
                    MeasureSpec::StdDev { sigma: Some(s) } => {
                        RiskMeasure::std_dev(square(s, "sigma")?).map_err(validation)?
                    }
                    MeasureSpec::AbsExposure { weights } => {
                        RiskMeasure::abs_exposure(weights.clone()).map_err(validation)?
                    }
                    MeasureSpec::PolytopeGauge { vertices } => {
                        RiskMeasure::polytope_gauge(vertices.clone()).map_err(validation)?
                    }
                };
                if measure.dim() != market.num_assets() {
                    return Err(CliError::Validation(format!(
                        "DimensionMismatch: measure acts on {} assets, market has {}",
                        measure.dim(),
                        market.num_assets()
                    )));
                }
                Some(measure)
            }
        };
        let utility = self.utility.map(|u| match u {
            UtilitySpec::Identity => Utility::Identity,
            UtilitySpec::Log => Utility::Log,
        });
        let admissible = match self.admissible {
            AdmissibleSpec::UnitCost => Admissible::UnitCost,
            AdmissibleSpec::UnitCostRiskyOnly => Admissible::RiskyOnly,
        };
        if let Some(g) = &self.grid {
            g.validate()?;
        }
        let mut config = SolverConfig::default();
        if let Some(t) = &self.tolerances {
            if let Some(tol) = t.solver {
                if !(tol > 0.0 && tol.is_finite()) {
                    return Err(CliError::Validation(format!("InvalidTolerance: solver = {tol}")));
                }
                config.tol = tol;
            }
            if let Some(n) = t.max_newton {
                config.max_newton = n;
            }
        }
        if let Some(a) = &self.asset {
            if a.payoff.len() != market.num_states() {
                return Err(CliError::Validation(format!(
                    "DimensionMismatch: asset payoff has {} entries, market has {} states",
                    a.payoff.len(),
                    market.num_states()
                )));
            }
            if !(a.price > 0.0) {
                return Err(CliError::Validation(format!("NonPositivePrice: asset price is {}", a.price)));
            }
        }
        Ok(Resolved { market, measure, utility, admissible, config })
    }
}

impl GridSpec {
    fn validate(&self) -> Result<(), CliError> {
        let bad = |why: &str| Err(CliError::Validation(format!("GridBoundsInconsistent: {why}")));
        let range = self.from.is_some() || self.to.is_some();
        match (&self.values, range) {
            (Some(_), true) => return bad("give either values or from/to"),
            (Some(v), false) => {
                if v.is_empty() {
                    return bad("values is empty");
                }
                if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("values must be finite and strictly increasing");
                }
            }
            (None, true) => match (self.from, self.to) {
                (Some(a), Some(b)) if a.is_finite() && b.is_finite() && a < b => {}
                (Some(_), Some(_)) => return bad("from must be below to"),
                _ => return bad("from and to must be given together"),
            },
            (None, false) => {}
        }
        if self.points == Some(0) {
            return bad("points must be positive");
        }
        Ok(())
    }
}
