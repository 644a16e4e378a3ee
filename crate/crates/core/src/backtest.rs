//! Rolling out-of-sample backtest, equity curves and performance metrics.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize, Serializer};

use crate::dgp::{oracle_expected_return, DgpParams, FactorState};
use crate::error::{Error, Result};
use crate::objectives::ObjectiveSpec;
use crate::optimizer::OptimizerConfig;
use crate::panel::{FactorPanel, ReturnPanel};
use crate::rng::derive_seed;
use crate::sampler::WeightVector;
use crate::universe::{
    optimize_bottom_up, partition_by_kmeans, partition_by_labels, partition_by_score, PartitionConfig,
    RegionTemplate, UniversePartition,
};

/// Source of next-period expected returns at a decision date.
pub trait Forecaster {
    /// Forecast made at period `t` using rows `0..=t` of `history` only.
    /// `None` falls back to the trailing-window mean.
    fn forecast(&self, history: &ReturnPanel, t: usize) -> Result<Option<Vec<f64>>>;
}

/// Uses the objective's own window mean.
#[derive(Debug, Clone, Copy, Default)]
pub struct HistoricalMean;

impl Forecaster for HistoricalMean {
    fn forecast(&self, _history: &ReturnPanel, _t: usize) -> Result<Option<Vec<f64>>> {
        Ok(None)
    }
}

/// Perfect-model forecast for a simulated market.
#[derive(Debug, Clone)]
pub struct OracleForecaster {
    pub params: DgpParams,
    /// Latent state per period, aligned with the backtested panel.
    pub states: Vec<FactorState>,
    pub draws: usize,
    pub seed: u64,
}

impl Forecaster for OracleForecaster {
    fn forecast(&self, _history: &ReturnPanel, t: usize) -> Result<Option<Vec<f64>>> {
        let state = self
            .states
            .get(t)
            .ok_or(Error::InsufficientHistory { required: t + 1, available: self.states.len() })?;
        Ok(Some(oracle_expected_return(&self.params, state, self.draws, derive_seed(self.seed, t as u64))))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BacktestConfig {
    pub rebalance_every: usize,
    pub lookback: usize,
    pub periods_per_year: usize,
    /// Asset identifier whose returns form the benchmark curve.
    pub benchmark: Option<String>,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self { rebalance_every: 5, lookback: 252, periods_per_year: 252, benchmark: None }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rebalance_every == 0 {
            return Err(Error::Config("rebalance_every must be at least 1".into()));
        }
        if self.lookback < 2 {
            return Err(Error::Config("lookback must be at least 2".into()));
        }
        if self.periods_per_year == 0 {
            return Err(Error::Config("periods_per_year must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquityCurve {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl EquityCurve {
    pub fn new(dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: dates.len(), actual: values.len() });
        }
        if values.is_empty() {
            return Err(Error::EmptyPanel);
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidInput(format!("equity value {v} is not positive")));
        }
        Ok(Self { dates, values })
    }

    /// Compounds per-period returns from 1.0; `dates[0]` is the inception date.
    pub fn from_returns(dates: Vec<NaiveDate>, returns: &[f64]) -> Result<Self> {
        let mut values = Vec::with_capacity(returns.len() + 1);
        values.push(1.0);
        for r in returns {
            values.push(values[values.len() - 1] * (1.0 + r));
        }
        Self::new(dates, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn returns(&self) -> Vec<f64> {
        self.values.windows(2).map(|v| v[1] / v[0] - 1.0).collect()
    }
}

fn inf_as_string<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_infinite() && *x > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*x)
    }
}

/// Annualized performance summary; rates against a zero risk-free rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub ann_return: f64,
    pub ann_vol: f64,
    pub ir: f64,
    /// `inf` when no period lost money.
    #[serde(serialize_with = "inf_as_string")]
    pub sortino: f64,
    pub mdd: f64,
    /// `inf` when the curve never drew down.
    #[serde(serialize_with = "inf_as_string")]
    pub calmar: f64,
}

/// Largest peak-to-trough relative decline.
pub fn max_drawdown(values: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut mdd: f64 = 0.0;
    for &v in values {
        peak = peak.max(v);
        mdd = mdd.max((peak - v) / peak);
    }
    mdd
}

pub fn compute_metrics(curve: &EquityCurve, periods_per_year: usize) -> Result<MetricsReport> {
    if curve.len() < 3 {
        return Err(Error::InsufficientHistory { required: 3, available: curve.len() });
    }
    let x = curve.returns();
    let t = x.len() as f64;
    let ppy = periods_per_year as f64;
    let mean = x.iter().sum::<f64>() / t;
    let std = (x.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / t).sqrt();
    if std == 0.0 {
        return Err(Error::ZeroVol);
    }
    let downside = (x.iter().map(|r| r.min(0.0).powi(2)).sum::<f64>() / t).sqrt();
    let ann_return = mean * ppy;
    let ann_vol = std * ppy.sqrt();
    let mdd = max_drawdown(&curve.values);
    Ok(MetricsReport {
        ann_return,
        ann_vol,
        ir: ann_return / ann_vol,
        sortino: if downside > 0.0 { ann_return / (downside * ppy.sqrt()) } else { f64::INFINITY },
        mdd,
        calmar: if mdd > 0.0 { ann_return / mdd } else { f64::INFINITY },
    })
}

/// Compounds per-period return differences into a curve starting at 1.0.
pub fn excess_curve(strategy: &EquityCurve, benchmark: &EquityCurve) -> Result<EquityCurve> {
    if strategy.dates != benchmark.dates {
        return Err(Error::DateMisalignment);
    }
    let diff: Vec<f64> = strategy.returns().iter().zip(benchmark.returns()).map(|(s, b)| s - b).collect();
    EquityCurve::from_returns(strategy.dates.clone(), &diff)
}

/// Weights chosen at one rebalance date.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightRecord {
    pub date: NaiveDate,
    pub weights: WeightVector,
}

#[derive(Debug, Clone)]
pub struct BacktestResult {
    pub curve: EquityCurve,
    pub weights: Vec<WeightRecord>,
    pub benchmark: Option<EquityCurve>,
    pub excess: Option<EquityCurve>,
}

/// Everything a backtest needs except the optimizer settings.
pub struct Backtest<'a> {
    pub panel: &'a ReturnPanel,
    pub factors: Option<&'a FactorPanel>,
    pub objective: &'a ObjectiveSpec,
    pub partition: &'a PartitionConfig,
    pub template: RegionTemplate,
    pub config: &'a BacktestConfig,
    pub forecaster: &'a dyn Forecaster,
}

impl Backtest<'_> {
    pub fn partition_at(&self, t: usize, seed: u64) -> Result<UniversePartition> {
        let n = self.panel.width();
        let factors = || self.factors.ok_or_else(|| Error::Config("partition method needs a factor panel".into()));
        match self.partition {
            PartitionConfig::None => Ok(UniversePartition::whole(n)),
            PartitionConfig::ScoreBuckets { buckets } => partition_by_score(factors()?, t, *buckets),
            PartitionConfig::Kmeans { k } => partition_by_kmeans(factors()?, t, (*k).min(n), seed),
            PartitionConfig::Labels { labels } => {
                if labels.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, actual: labels.len() });
                }
                partition_by_labels(labels)
            }
        }
    }

    /// Rebalances every `rebalance_every` periods starting at period
    /// `lookback - 1`; each decision sees rows up to and including its date and
    /// is held, undrifted, until the next decision.
    pub fn run(&self, optimizer: &OptimizerConfig) -> Result<BacktestResult> {
        self.config.validate()?;
        let (panel, lookback) = (self.panel, self.config.lookback);
        let total = panel.len();
        if total <= lookback + 1 {
            return Err(Error::InsufficientHistory { required: lookback + 2, available: total });
        }
        if let Some(f) = self.factors {
            if f.dates() != panel.dates() || f.assets() != panel.assets() {
                return Err(Error::DateMisalignment);
            }
        }
        let benchmark_column = match &self.config.benchmark {
            Some(id) => Some(
                panel
                    .assets()
                    .iter()
                    .position(|a| a == id)
                    .ok_or_else(|| Error::Config(format!("benchmark asset {id} not in panel")))?,
            ),
            None => None,
        };

        let start = lookback - 1;
        let spec_base = self.objective.clone().with_window(lookback);
        let mut weights: Vec<WeightRecord> = Vec::new();
        let mut current: Vec<f64> = Vec::new();
        let mut realized = Vec::with_capacity(total - start - 1);
        for t in start..total - 1 {
            if (t - start) % self.config.rebalance_every == 0 {
                let index = weights.len() as u64;
                let seed = derive_seed(optimizer.seed, index);
                let history = panel.head(t + 1);
                let mut spec = spec_base.clone();
                spec.forecast_mu = self.forecaster.forecast(&history, t)?;
                let partition = self.partition_at(t, seed)?;
                let cfg = OptimizerConfig { seed, ..optimizer.clone() };
                let w = optimize_bottom_up(&history, &partition, &self.template, &spec, &cfg)?.weights;
                current = w.as_slice().to_vec();
                weights.push(WeightRecord { date: panel.dates()[t], weights: w });
            }
            realized.push(panel.row(t + 1).iter().zip(&current).map(|(r, w)| r * w).sum::<f64>());
        }

        let dates = panel.dates()[start..].to_vec();
        let curve = EquityCurve::from_returns(dates.clone(), &realized)?;
        let (benchmark, excess) = match benchmark_column {
            Some(j) => {
                let b: Vec<f64> = (start + 1..total).map(|t| panel.row(t)[j]).collect();
                let bench = EquityCurve::from_returns(dates, &b)?;
                let excess = excess_curve(&curve, &bench)?;
                (Some(bench), Some(excess))
            }
            None => (None, None),
        };
        Ok(BacktestResult { curve, weights, benchmark, excess })
    }
}
