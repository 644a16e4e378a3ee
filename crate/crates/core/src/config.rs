//! Run configuration for the command-line front end.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::backtest::BacktestConfig;
use crate::error::{Error, Result};
use crate::objectives::ObjectiveSpec;
use crate::optimizer::OptimizerConfig;
use crate::policy::{PolicyBounds, TwoStateChain};
use crate::universe::{PartitionConfig, RegionTemplate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct InputConfig {
    /// Long-format CSV `date,asset,<price_column>[,factor_*]`.
    pub prices: Option<PathBuf>,
    pub price_column: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ForecastSource {
    /// Conditional mean of the simulated market.
    #[default]
    Oracle,
    /// Trailing-window mean.
    Historical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub n: usize,
    /// Out-of-sample periods; `lookback` more are simulated before them.
    pub periods: usize,
    pub forecast: ForecastSource,
    pub oracle_draws: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { n: 100, periods: 250, forecast: ForecastSource::Oracle, oracle_draws: 4096 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityConfig {
    pub m_list: Vec<usize>,
    pub benchmark_m: usize,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self { m_list: vec![2000, 8000, 32000], benchmark_m: 64000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MdpConfig {
    TwoStateChain(TwoStateChain),
    Geometric { gamma: f64, horizon: Option<usize> },
    Target { target: f64, gamma: f64, start: f64 },
}

impl Default for MdpConfig {
    fn default() -> Self {
        MdpConfig::TwoStateChain(TwoStateChain::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyConfig {
    pub mdp: MdpConfig,
    pub divisions: Vec<usize>,
    pub bounds: PolicyBounds,
    pub rollouts: usize,
    pub m: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self { mdp: MdpConfig::default(), divisions: vec![2], bounds: PolicyBounds::default(), rollouts: 200, m: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub input: InputConfig,
    pub simulate: SimulateConfig,
    pub objective: ObjectiveSpec,
    pub optimizer: OptimizerConfig,
    pub region: RegionTemplate,
    pub partition: PartitionConfig,
    pub backtest: BacktestConfig,
    pub stability: StabilityConfig,
    pub policy: PolicyConfig,
}

impl RunConfig {
    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut config: RunConfig = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
        };
        if let Some(p) = &config.input.prices {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    config.input.prices = Some(dir.join(p));
                }
            }
        }
        Ok(config)
    }

    pub fn price_column(&self) -> &str {
        if self.input.price_column.is_empty() {
            "price"
        } else {
            &self.input.price_column
        }
    }
}

const DESCRIPTIONS: &[(&str, &str)] = &[
    ("seed", "Global seed; every random stream of a run is derived from it"),
    ("input.prices", "Long-format price CSV; when absent a market is simulated"),
    ("input.price_column", "Price column name; empty means `price`"),
    ("simulate.n", "Assets in the simulated market"),
    ("simulate.periods", "Out-of-sample periods; `backtest.lookback` more periods precede them"),
    ("simulate.forecast", "Expected-return source: `oracle` or `historical`"),
    ("simulate.oracle_draws", "Inner Monte Carlo draws per oracle forecast"),
    ("objective.kind", "`mean_variance`, `mvsk_ratio` or `crra`"),
    ("objective.risk_aversion", "Lambda for mean-variance, gamma for CRRA; null means 1 or 3"),
    ("objective.forecast_mu", "Fixed expected returns per asset; null uses the window mean"),
    ("objective.window", "Trailing periods used for moments; the backtest overrides it with its lookback"),
    ("objective.crra_form", "`power_gamma`: (1-(1+r)^g)/(1-g); `standard`: (1+r)^(1-g)/(1-g)"),
    ("optimizer.m", "Feasible samples per refinement level"),
    ("optimizer.k", "Fixed cluster count; null uses floor(sqrt(surviving)) capped at k_cap"),
    ("optimizer.k_cap", "Upper limit of the default cluster count"),
    ("optimizer.k_per_level", "Cluster count per level, the last entry repeating; overrides k"),
    ("optimizer.max_levels", "Refinement level cap"),
    ("optimizer.diameter_tol", "Stop when the winning cluster's diameter falls below this"),
    ("optimizer.improvement_tol", "Stop when a level improves the best score by less than this"),
    ("optimizer.improvement_patience", "Consecutive levels below improvement_tol before stopping"),
    ("optimizer.seed", "Ignored by the command line; derived from the global seed"),
    ("optimizer.center_projection", "`complete_then_nearest` or `nearest_member` for infeasible centers"),
    ("optimizer.replenish_factor", "Top up the winning cluster when it holds fewer than k times this many points"),
    ("optimizer.box_padding", "Relative padding of the winning cluster's bounding box when topping up"),
    ("optimizer.kmeans_max_iter", "Lloyd iterations per level"),
    ("optimizer.kmeans_tol", "Center movement below which Lloyd iterations stop"),
    ("optimizer.sampler.min_acceptance", "Smallest acceptance rate tolerated before the region is declared infeasible"),
    ("optimizer.sampler.probe_budget", "Proposals drawn before the acceptance floor is enforced"),
    ("region.lower", "Lower bound of every weight"),
    ("region.upper", "Upper bound of every weight"),
    ("partition.method", "`none`, `score_buckets` (buckets), `kmeans` (k) or `labels` (labels)"),
    ("backtest.rebalance_every", "Periods between re-optimizations"),
    ("backtest.lookback", "Trailing window for moments; also the number of warm-up periods"),
    ("backtest.periods_per_year", "Annualization factor"),
    ("backtest.benchmark", "Asset whose returns form the benchmark for the excess curve"),
    ("stability.m_list", "Sample counts compared against the benchmark"),
    ("stability.benchmark_m", "Sample count of the reference curve"),
    ("policy.mdp.kind", "`two_state_chain`, `geometric` or `target`"),
    ("policy.mdp.p_next", "two_state_chain: probability of moving to state 1, indexed [action][state]"),
    ("policy.mdp.reward", "two_state_chain: reward of each state"),
    ("policy.mdp.gamma", "Discount factor in [0, 1)"),
    ("policy.mdp.initial_state", "two_state_chain: starting state"),
    ("policy.mdp.horizon", "geometric: rollout length; null truncates where gamma^H < 1e-6"),
    ("policy.mdp.target", "target: reward peak"),
    ("policy.mdp.start", "target: starting state"),
    ("policy.divisions", "Policy cells per state dimension"),
    ("policy.bounds.intercept_lower", "Intercept lower bound; null uses the action box"),
    ("policy.bounds.intercept_upper", "Intercept upper bound; null uses the action box"),
    ("policy.bounds.slope_lower", "Slope lower bound; equal bounds fix the slope"),
    ("policy.bounds.slope_upper", "Slope upper bound"),
    ("policy.rollouts", "Rollouts per policy evaluation"),
    ("policy.m", "Samples per refinement level of the policy search"),
];

pub fn description(key: &str) -> Option<&'static str> {
    DESCRIPTIONS.iter().find(|(k, _)| *k == key).map(|(_, d)| *d)
}

fn walk(prefix: &str, value: &Value, out: &mut Map<String, Value>) {
    match value {
        Value::Object(map) if !map.is_empty() => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                walk(&key, v, out);
            }
        }
        _ => {
            out.insert(
                prefix.to_string(),
                json!({ "default": value, "description": description(prefix).unwrap_or("") }),
            );
        }
    }
}

/// Every configuration key with its default and description.
pub fn schema() -> Value {
    let mut out = Map::new();
    let defaults = serde_json::to_value(RunConfig::default()).expect("config serializes");
    walk("", &defaults, &mut out);
    for (key, text) in DESCRIPTIONS {
        // variant-specific keys absent from the defaults
        out.entry(key.to_string()).or_insert_with(|| json!({ "default": Value::Null, "description": text }));
    }
    Value::Object(out)
}
