//! Batch commands behind the `simfolio` binary.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::json;
use sha2::{Digest, Sha256};

use crate::backtest::{compute_metrics, Backtest, BacktestResult, Forecaster, HistoricalMean, OracleForecaster, WeightRecord};
use crate::config::{ForecastSource, MdpConfig, RunConfig};
use crate::dgp::{generate_params, simulate};
use crate::error::{Error, Result};
use crate::io::{ingest_prices, write_equity, write_json, write_prices, write_stability, write_weights};
use crate::objectives::{evaluate, PanelObjective};
use crate::optimizer::{optimize, OptimizerConfig};
use crate::panel::{FactorPanel, ReturnPanel};
use crate::policy::{geometric_mdp, search_policy, target_mdp};
use crate::rng::derive_seed;
use crate::stability::stability_sweep;
use crate::universe::{optimize_bottom_up, PartitionConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Optimize,
    Backtest,
    Stability,
    PolicySearch,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Optimize => "optimize",
            Command::Backtest => "backtest",
            Command::Stability => "stability",
            Command::PolicySearch => "policy-search",
        }
    }
}

struct World {
    returns: ReturnPanel,
    factors: Option<FactorPanel>,
    forecaster: Box<dyn Forecaster>,
}

fn simulated_world(config: &RunConfig) -> Result<World> {
    let sim_cfg = &config.simulate;
    let params = generate_params(sim_cfg.n, config.seed)?.with_periods(config.backtest.lookback + sim_cfg.periods);
    let sim = simulate(&params, config.seed)?;
    let forecaster: Box<dyn Forecaster> = match sim_cfg.forecast {
        ForecastSource::Historical => Box::new(HistoricalMean),
        ForecastSource::Oracle => Box::new(OracleForecaster {
            states: (0..sim.returns.len()).map(|t| sim.state(t)).collect(),
            params,
            draws: sim_cfg.oracle_draws,
            seed: derive_seed(config.seed, 1),
        }),
    };
    Ok(World { returns: sim.returns, factors: Some(sim.factors), forecaster })
}

fn load_world(config: &RunConfig) -> Result<World> {
    match &config.input.prices {
        Some(path) => {
            let data = ingest_prices(path, config.price_column())?;
            Ok(World { returns: data.returns, factors: data.factors, forecaster: Box::new(HistoricalMean) })
        }
        None => simulated_world(config),
    }
}

fn optimizer_config(config: &RunConfig) -> OptimizerConfig {
    OptimizerConfig { seed: derive_seed(config.seed, 2), ..config.optimizer.clone() }
}

fn backtest<'a>(config: &'a RunConfig, world: &'a World) -> Backtest<'a> {
    Backtest {
        panel: &world.returns,
        factors: world.factors.as_ref(),
        objective: &config.objective,
        partition: &config.partition,
        template: config.region,
        config: &config.backtest,
        forecaster: world.forecaster.as_ref(),
    }
}

fn write_backtest(out: &Path, config: &RunConfig, assets: &[String], result: &BacktestResult) -> Result<Vec<&'static str>> {
    let mut names = vec!["equity.csv", "weights.csv", "metrics.json"];
    write_equity(&out.join("equity.csv"), &result.curve)?;
    write_weights(&out.join("weights.csv"), assets, &result.weights)?;
    let ppy = config.backtest.periods_per_year;
    let mut metrics = json!({
        "risk_free_rate": 0.0,
        "periods_per_year": ppy,
        "strategy": compute_metrics(&result.curve, ppy)?,
    });
    if let (Some(bench), Some(excess)) = (&result.benchmark, &result.excess) {
        write_equity(&out.join("benchmark.csv"), bench)?;
        write_equity(&out.join("excess.csv"), excess)?;
        metrics["benchmark"] = json!(compute_metrics(bench, ppy)?);
        metrics["excess"] = json!(compute_metrics(excess, ppy)?);
        names.extend(["benchmark.csv", "excess.csv"]);
    }
    write_json(&out.join("metrics.json"), &metrics)?;
    Ok(names)
}

fn run_optimize(out: &Path, config: &RunConfig, world: &World) -> Result<()> {
    let panel = &world.returns;
    let t = panel.len() - 1;
    let mut spec = config.objective.clone();
    if spec.forecast_mu.is_none() {
        spec.forecast_mu = world.forecaster.forecast(panel, t)?;
    }
    let opt = optimizer_config(config);
    let date = panel.dates()[t];
    let report = if config.partition == PartitionConfig::None {
        let region = config.region.region(panel.width())?;
        let result = optimize(&region, &PanelObjective::new(&spec, panel)?, &opt)?;
        let record = WeightRecord { date, weights: result.best_weights.clone() };
        write_weights(&out.join("weights.csv"), panel.assets(), &[record])?;
        json!({ "date": date, "result": result })
    } else {
        let partition = backtest(config, world).partition_at(t, opt.seed)?;
        let result = optimize_bottom_up(panel, &partition, &config.region, &spec, &opt)?;
        let score = evaluate(&spec, panel, &result.weights)?;
        let record = WeightRecord { date, weights: result.weights.clone() };
        write_weights(&out.join("weights.csv"), panel.assets(), &[record])?;
        json!({
            "date": date,
            "score": score,
            "partition": partition,
            "within": result.within,
            "across": result.across,
        })
    };
    write_json(&out.join("result.json"), &report)
}

fn run_policy(out: &Path, config: &RunConfig) -> Result<()> {
    let pc = &config.policy;
    let mdp = match &pc.mdp {
        MdpConfig::TwoStateChain(chain) => chain.mdp()?,
        MdpConfig::Geometric { gamma, horizon } => geometric_mdp(*gamma, *horizon)?,
        MdpConfig::Target { target, gamma, start } => target_mdp(*target, *gamma, *start)?,
    };
    let opt = OptimizerConfig { seed: derive_seed(config.seed, 3), ..config.optimizer.clone() }.with_m(pc.m);
    let result = search_policy(&mdp, &pc.divisions, &pc.bounds, pc.rollouts, &opt)?;
    let mut report = json!({ "search": result });
    if let MdpConfig::TwoStateChain(chain) = &pc.mdp {
        let (optimal, actions) = chain.value_iteration(1e-12);
        report["optimal_values"] = json!(optimal);
        report["optimal_actions"] = json!(actions);
    }
    write_json(&out.join("policy.json"), &report)
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs `command`, writes its artifacts and `manifest.json` under `out`, and
/// returns the artifact file names.
pub fn run(command: Command, config: &RunConfig, out: &Path) -> Result<Vec<String>> {
    std::fs::create_dir_all(out)?;
    let names = match command {
        Command::Simulate => {
            let world = simulated_world(config)?;
            let result = backtest(config, &world).run(&optimizer_config(config))?;
            let mut names = write_backtest(out, config, world.returns.assets(), &result)?;
            write_prices(&out.join("prices.csv"), &world.returns, world.factors.as_ref())?;
            names.push("prices.csv");
            names
        }
        Command::Backtest => {
            let world = load_world(config)?;
            let result = backtest(config, &world).run(&optimizer_config(config))?;
            write_backtest(out, config, world.returns.assets(), &result)?
        }
        Command::Optimize => {
            run_optimize(out, config, &load_world(config)?)?;
            vec!["weights.csv", "result.json"]
        }
        Command::Stability => {
            let world = load_world(config)?;
            let s = &config.stability;
            let rows = stability_sweep(&backtest(config, &world), &optimizer_config(config), &s.m_list, s.benchmark_m)?;
            write_stability(&out.join("stability.csv"), &rows)?;
            vec!["stability.csv"]
        }
        Command::PolicySearch => {
            run_policy(out, config)?;
            vec!["policy.json"]
        }
    };

    let mut artifacts = BTreeMap::new();
    for name in names {
        artifacts.insert(name.to_string(), sha256_hex(&std::fs::read(out.join(name))?));
    }
    let config_json = serde_json::to_string(config).map_err(|e| Error::Config(e.to_string()))?;
    let manifest = json!({
        "command": command.name(),
        "seed": config.seed,
        "config_sha256": sha256_hex(config_json.as_bytes()),
        "version": env!("CARGO_PKG_VERSION"),
        "artifacts": artifacts,
    });
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(artifacts.into_keys().collect())
}

/// Machine-readable error report.
pub fn error_json(error: &Error) -> String {
    json!({ "error": error.code(), "message": error.to_string() }).to_string()
}
