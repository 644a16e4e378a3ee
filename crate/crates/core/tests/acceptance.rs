//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::*;
use rand::Rng;
use simfolio::backtest::*;
use simfolio::dgp::{generate_params, simulate};
use simfolio::objectives::{evaluate, moment_projection_equivalence, ObjectiveKind, ObjectiveSpec, PanelObjective};
use simfolio::optimizer::{optimize, OptimizerConfig};
use simfolio::panel::ReturnPanel;
use simfolio::policy::*;
use simfolio::rng::derive_seed;
use simfolio::sampler::{sample_feasible, FeasibleRegion};
use simfolio::stability::stability_sweep;
use simfolio::universe::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

// Tolerances and thresholds.
const C1_SEEDS: u64 = 20;
const C1_M: usize = 40_000;
const C1_TOL: f64 = 1e-3;
const C1_REQUIRED: usize = 19;
const C1_TIME: Duration = Duration::from_secs(10);

const C2_SEEDS: u64 = 20;
const C2_M: [usize; 3] = [1000, 10_000, 100_000];
const C2_LEVELS: usize = 3;

const C3_PANELS: u64 = 100;
const C3_TOL: f64 = 1e-10;

const C4_SEEDS: u64 = 10;
const C4_N: usize = 100;
const C4_PERIODS: usize = 250;
const C4_LOOKBACK: usize = 252;
const C4_M: usize = 500;
const C4_BUCKETS: usize = 10;
const C4_DRAWS: usize = 4096;
const C4_MAX_MDD: f64 = 0.10;
const C4_REQUIRED: usize = 8;
const C4_TIME: Duration = Duration::from_secs(300);

const C5_M: [usize; 3] = [2000, 8000, 32_000];
const C5_BENCHMARK: usize = 64_000;

const C6_CURVES: u64 = 50;
const C6_TOL: f64 = 1e-12;

const C7_RUNS: u64 = 100;
const C7_BUDGET_TOL: f64 = 1e-10;
const C7_INSTANCES: u64 = 10;
const C7_SCORE_TOL: f64 = 1e-3;

const C8_SEEDS: u64 = 10;
const C8_RATIO: f64 = 0.95;
const C8_REQUIRED: usize = 9;
const C8_TIME: Duration = Duration::from_secs(60);
const C8_GEOMETRIC_TOL: f64 = 1e-2;

const C9_M: usize = 100_000;
const C9_CELLS: usize = 10;
const C9_LEVEL: f64 = 1e-3;
const C9_DENSE_M: usize = 50_000;
const C9_DENSE_TOL: f64 = 0.01;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn optimizer_vs_grid() -> Outcome {
    let (mut hits, mut slowest) = (0, Duration::ZERO);
    let mut worst: f64 = 0.0;
    for seed in 0..C1_SEEDS {
        let q = ConcaveQuadratic::random(3, seed);
        let (_, grid) = grid_simplex_max(3, 100, &mut |w| q.value(w));
        let region = FeasibleRegion::simplex(3).unwrap();
        let f = |w: &[f64]| q.value(w);
        let start = Instant::now();
        let r = optimize(&region, &f, &OptimizerConfig::default().with_m(C1_M).with_seed(seed)).unwrap();
        let elapsed = start.elapsed();
        slowest = slowest.max(elapsed);
        let shortfall = grid - r.best_score;
        worst = worst.max(shortfall);
        if shortfall <= C1_TOL && elapsed < C1_TIME {
            hits += 1;
        }
    }
    outcome(
        hits >= C1_REQUIRED,
        format!("{hits}/{C1_SEEDS} within {C1_TOL:e}; worst shortfall {worst:.2e}; slowest {slowest:.2?}"),
    )
}

fn convergence_trend() -> Outcome {
    let medians: Vec<f64> = C2_M
        .iter()
        .map(|&m| {
            let gaps = (0..C2_SEEDS)
                .map(|seed| {
                    let q = ConcaveQuadratic::random(3, seed);
                    let (_, exact) = exact_simplex_max(&q);
                    let cfg = OptimizerConfig {
                        max_levels: C2_LEVELS,
                        diameter_tol: 0.0,
                        improvement_tol: 0.0,
                        ..OptimizerConfig::default().with_m(m).with_seed(seed)
                    };
                    let f = |w: &[f64]| q.value(w);
                    exact - optimize(&FeasibleRegion::simplex(3).unwrap(), &f, &cfg).unwrap().best_score
                })
                .collect();
            median(gaps)
        })
        .collect();
    let pass = medians.windows(2).all(|p| p[1] < p[0]);
    outcome(pass, format!("median gaps {:?}", medians.iter().map(|g| format!("{g:.3e}")).collect::<Vec<_>>()))
}

fn moment_projection() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..C3_PANELS {
        let mut r = rng(seed);
        let n = r.random_range(1..=4);
        let t = r.random_range(2..=50);
        let panel = random_panel(t, n, seed);
        let raw: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
        for order in 1..=4 {
            let (a, b) = moment_projection_equivalence(&panel, &w, order).unwrap();
            worst = worst.max((a - b).abs());
        }
    }
    outcome(worst <= C3_TOL, format!("max abs difference {worst:.2e} over {C3_PANELS} panels"))
}

fn simulation_study() -> Outcome {
    let start = Instant::now();
    let mut good = 0;
    let mut rows = Vec::new();
    for seed in 0..C4_SEEDS {
        let params = generate_params(C4_N, seed).unwrap().with_periods(C4_LOOKBACK + C4_PERIODS);
        let sim = simulate(&params, seed).unwrap();
        let forecaster = OracleForecaster {
            states: (0..sim.returns.len()).map(|t| sim.state(t)).collect(),
            params,
            draws: C4_DRAWS,
            seed: derive_seed(seed, 1),
        };
        let spec = ObjectiveSpec::new(ObjectiveKind::MeanVariance);
        let partition = PartitionConfig::ScoreBuckets { buckets: C4_BUCKETS };
        let config = BacktestConfig { lookback: C4_LOOKBACK, ..Default::default() };
        let bt = Backtest {
            panel: &sim.returns,
            factors: Some(&sim.factors),
            objective: &spec,
            partition: &partition,
            template: RegionTemplate::default(),
            config: &config,
            forecaster: &forecaster,
        };
        let result = bt.run(&OptimizerConfig::default().with_m(C4_M).with_seed(derive_seed(seed, 2))).unwrap();
        let values = &result.curve.values;
        let log_return = values.last().unwrap().ln();
        let mdd = max_drawdown(values);
        if log_return > 0.0 && mdd < C4_MAX_MDD && values.len() == C4_PERIODS + 1 {
            good += 1;
        }
        rows.push(format!("{log_return:.2}/{mdd:.3}"));
    }
    let elapsed = start.elapsed();
    outcome(
        good >= C4_REQUIRED && elapsed < C4_TIME,
        format!("{good}/{C4_SEEDS} seeds with positive log-return and MDD < {C4_MAX_MDD}; log-return/MDD {rows:?}; {elapsed:.1?}"),
    )
}

fn stability() -> Outcome {
    let params = generate_params(2, 100).unwrap().with_periods(160);
    let sim = simulate(&params, 100).unwrap();
    let spec = ObjectiveSpec::new(ObjectiveKind::MeanVariance).with_risk_aversion(500.0);
    let config = BacktestConfig { lookback: 60, rebalance_every: 10, ..Default::default() };
    let bt = Backtest {
        panel: &sim.returns,
        factors: None,
        objective: &spec,
        partition: &PartitionConfig::None,
        template: RegionTemplate::default(),
        config: &config,
        forecaster: &HistoricalMean,
    };
    let opt = OptimizerConfig {
        max_levels: 2,
        diameter_tol: 0.0,
        improvement_tol: 0.0,
        k_cap: usize::MAX,
        ..OptimizerConfig::default()
    };
    let rows = stability_sweep(&bt, &opt, &C5_M, C5_BENCHMARK).unwrap();
    let decreasing = rows.windows(2).all(|p| p[1].rmsre < p[0].rmsre);
    let own = stability_sweep(&bt, &opt, &[C5_M[0]], C5_M[0]).unwrap();
    let exact = own[0].rmse == 0.0 && own[0].rmsre == 0.0;
    outcome(
        decreasing && exact,
        format!(
            "RMSRE {:?}; self-comparison RMSE {} RMSRE {}",
            rows.iter().map(|r| format!("{}:{:.3e}", r.m, r.rmsre)).collect::<Vec<_>>(),
            own[0].rmse,
            own[0].rmsre
        ),
    )
}

fn metric_oracles() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut ir_drift: f64 = 0.0;
    let mut mdd_increasing: f64 = 0.0;
    for seed in 0..C6_CURVES {
        let mut r = rng(seed);
        let len = r.random_range(5..30);
        let mut returns: Vec<f64> = (0..len).map(|_| r.random_range(-0.1..0.1)).collect();
        returns[0] = -0.05;
        returns[1] = 0.05;
        let curve = EquityCurve::from_returns(dates(len + 1), &returns).unwrap();
        let m = compute_metrics(&curve, 252).unwrap();
        let o = oracle_metrics(&curve.values, 252.0);
        for (a, b) in [m.mdd, m.ir, m.sortino, m.calmar].iter().zip([o[4], o[2], o[3], o[5]]) {
            worst = worst.max((a - b).abs() / (1.0 + b.abs()));
        }
        let c = r.random_range(0.1..5.0);
        let scaled: Vec<f64> = returns.iter().map(|x| x * c).collect();
        let ms = compute_metrics(&EquityCurve::from_returns(dates(len + 1), &scaled).unwrap(), 252).unwrap();
        ir_drift = ir_drift.max((ms.ir - m.ir).abs() / (1.0 + m.ir.abs()));
        let mut up = vec![1.0];
        for _ in 0..len {
            up.push(up.last().unwrap() + r.random_range(0.0..0.1));
        }
        mdd_increasing = mdd_increasing.max(max_drawdown(&up));
    }
    outcome(
        worst <= C6_TOL && mdd_increasing == 0.0 && ir_drift <= C6_TOL,
        format!("max relative error {worst:.2e}; increasing-curve MDD {mdd_increasing}; IR drift under scaling {ir_drift:.2e}"),
    )
}

fn mv_quadratic(panel: &ReturnPanel, lambda: f64) -> ConcaveQuadratic {
    let (t, n) = (panel.len() as f64, panel.width());
    let rows = panel.rows();
    let b: Vec<f64> = (0..n).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / t).collect();
    let a = (0..n)
        .map(|i| (0..n).map(|j| lambda * rows.iter().map(|r| (r[i] - b[i]) * (r[j] - b[j])).sum::<f64>() / t).collect())
        .collect();
    ConcaveQuadratic { a, b }
}

fn bottom_up() -> Outcome {
    let template = RegionTemplate::default();
    let mut budget: f64 = 0.0;
    for seed in 0..C7_RUNS {
        let mut r = rng(seed);
        let n = r.random_range(2..10);
        let g = r.random_range(2..=n.min(4));
        let groups: Vec<Vec<usize>> = (0..g).map(|k| (k..n).step_by(g).collect()).collect();
        let partition = UniversePartition { groups, method: PartitionMethod::SectorLabels };
        let panel = random_panel(30, n, seed);
        let cfg = OptimizerConfig::default().with_m(200).with_seed(seed);
        let res = optimize_bottom_up(&panel, &partition, &template, &ObjectiveSpec::default(), &cfg).unwrap();
        budget = budget.max((res.weights.iter().sum::<f64>() - 1.0).abs());
    }

    let panel = random_panel(60, 5, 1);
    let spec = ObjectiveSpec::new(ObjectiveKind::MvskRatio);
    let cfg = OptimizerConfig::default().with_m(2000).with_seed(3);
    let composed = optimize_bottom_up(&panel, &UniversePartition::whole(5), &template, &spec, &cfg).unwrap();
    let direct = optimize(&template.region(5).unwrap(), &PanelObjective::new(&spec, &panel).unwrap(), &cfg).unwrap();
    let identical = composed.weights == direct.best_weights;

    let mut excess = f64::NEG_INFINITY;
    for seed in 0..C7_INSTANCES {
        let panel = random_panel(60, 6, 500 + seed);
        let spec = ObjectiveSpec::new(ObjectiveKind::MeanVariance).with_risk_aversion(5.0);
        let partition = UniversePartition { groups: vec![vec![0, 1, 2], vec![3, 4, 5]], method: PartitionMethod::SectorLabels };
        let res = optimize_bottom_up(&panel, &partition, &template, &spec, &OptimizerConfig::default().with_m(4000).with_seed(seed)).unwrap();
        let (_, best) = exact_simplex_max(&mv_quadratic(&panel, 5.0));
        excess = excess.max(evaluate(&spec, &panel, &res.weights).unwrap() - best);
    }
    outcome(
        budget <= C7_BUDGET_TOL && identical && excess <= C7_SCORE_TOL,
        format!("max budget error {budget:.1e}; single group identical {identical}; max composed minus optimum {excess:.2e}"),
    )
}

fn policy_search() -> Outcome {
    let chain = TwoStateChain::default();
    let (optimal, _) = chain.value_iteration(1e-13);
    let mdp = chain.mdp().unwrap();
    let (mut good, mut slowest) = (0, Duration::ZERO);
    let mut ratios = Vec::new();
    for seed in 0..C8_SEEDS {
        let start = Instant::now();
        let r = search_policy(&mdp, &[2], &PolicyBounds::default(), 200, &OptimizerConfig::default().with_m(2000).with_seed(seed))
            .unwrap();
        let elapsed = start.elapsed();
        slowest = slowest.max(elapsed);
        let acts = [0.0, 1.0].map(|s| usize::from(r.policy.action(&[s])[0] >= 0.5));
        let ratio = chain.policy_values(acts)[0] / optimal[0];
        if ratio >= C8_RATIO && elapsed < C8_TIME {
            good += 1;
        }
        ratios.push(format!("{ratio:.3}"));
    }
    let geo = geometric_mdp(0.9, None).unwrap();
    let grid = CellGrid::new(vec![0.0], vec![1.0], vec![1]).unwrap();
    let policy = PiecewisePolicy::from_flat(grid, vec![0.0], vec![1.0], &[0.5, 0.0]).unwrap();
    let (value, _) = evaluate_policy(&geo, &policy, 10, 0);
    let geo_error = (value - 10.0).abs();
    outcome(
        good >= C8_REQUIRED && geo_error <= C8_GEOMETRIC_TOL,
        format!("{good}/{C8_SEEDS} at >= {C8_RATIO} of optimal (ratios {ratios:?}); slowest {slowest:.2?}; geometric error {geo_error:.1e}"),
    )
}

fn sampler_statistics() -> Outcome {
    let draws = sample_feasible(&FeasibleRegion::simplex(2).unwrap(), C9_M, 2024).unwrap();
    let mut counts = [0usize; C9_CELLS];
    for w in &draws {
        counts[((w[0] * C9_CELLS as f64) as usize).min(C9_CELLS - 1)] += 1;
    }
    let expected = C9_M as f64 / C9_CELLS as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new((C9_CELLS - 1) as f64).unwrap().cdf(chi2);

    let target = [0.2, 0.3, 0.5];
    let dense = sample_feasible(&FeasibleRegion::simplex(3).unwrap(), C9_DENSE_M, 7).unwrap();
    let nearest = dense
        .iter()
        .map(|w| w.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .fold(f64::INFINITY, f64::min);
    outcome(
        p > C9_LEVEL && nearest < C9_DENSE_TOL,
        format!("chi-square {chi2:.2} (p = {p:.3}); nearest sample to target {nearest:.2e}"),
    )
}

const DETERMINISM_CONFIG: &str = r#"
seed = 3

[simulate]
n = 6
periods = 30
oracle_draws = 128

[optimizer]
m = 400

[partition]
method = "score_buckets"
buckets = 2

[backtest]
lookback = 40
rebalance_every = 5
benchmark = "A0001"

[stability]
m_list = [100, 200]
benchmark_m = 400

[policy]
m = 400
rollouts = 30
"#;

fn read_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(&config, DETERMINISM_CONFIG).unwrap();
    let mut failures = Vec::new();
    let mut files = 0;
    for cmd in ["simulate", "optimize", "backtest", "stability", "policy-search"] {
        let runs: Vec<_> = (0..2)
            .map(|i| {
                let out = dir.path().join(format!("{cmd}-{i}"));
                let status = Command::new(env!("CARGO_BIN_EXE_simfolio"))
                    .args([cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
                    .output()
                    .unwrap()
                    .status;
                (status.success(), read_dir(&out))
            })
            .collect();
        files += runs[0].1.len();
        if !runs[0].0 || !runs[1].0 || runs[0].1.is_empty() || runs[0].1 != runs[1].1 {
            failures.push(cmd);
        }
    }
    outcome(failures.is_empty(), format!("{files} artifacts compared across 5 commands; mismatches {failures:?}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("optimizer vs grid oracle", optimizer_vs_grid),
        ("global-convergence trend", convergence_trend),
        ("moment-projection equivalence", moment_projection),
        ("simulation study", simulation_study),
        ("stability harness", stability),
        ("metric oracles", metric_oracles),
        ("bottom-up composition", bottom_up),
        ("dynamic policy search", policy_search),
        ("sampler statistics", sampler_statistics),
        ("end-to-end determinism", determinism),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let number = i + 1;
        if !filter.is_empty() && !filter.contains(&number) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {number:2} {verdict} {name}: {} [{:.1?}]", o.detail, start.elapsed());
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
