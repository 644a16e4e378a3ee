//! Convergence of backtest equity curves in the sample count `m`.

use serde::Serialize;

use crate::backtest::{Backtest, EquityCurve};
use crate::error::{Error, Result};
use crate::optimizer::OptimizerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityRow {
    pub m: usize,
    pub rmse: f64,
    pub rmsre: f64,
}

/// Root-mean-squared absolute and relative error of `curve` against
/// `reference`, over every curve point.
pub fn curve_errors(curve: &EquityCurve, reference: &EquityCurve) -> Result<(f64, f64)> {
    if curve.dates != reference.dates {
        return Err(Error::DateMisalignment);
    }
    let len = curve.len() as f64;
    let (mut se, mut sre) = (0.0, 0.0);
    for (v, r) in curve.values.iter().zip(&reference.values) {
        se += (v - r).powi(2);
        sre += ((v - r) / r).powi(2);
    }
    Ok(((se / len).sqrt(), (sre / len).sqrt()))
}

/// Runs the backtest once per `m` and once at `benchmark_m`, all with the
/// seed in `config`, and compares each curve against the benchmark curve.
pub fn stability_sweep(
    backtest: &Backtest<'_>,
    config: &OptimizerConfig,
    m_list: &[usize],
    benchmark_m: usize,
) -> Result<Vec<StabilityRow>> {
    if m_list.is_empty() {
        return Err(Error::Config("m_list must not be empty".into()));
    }
    if let Some(&m) = m_list.iter().find(|&&m| m > benchmark_m) {
        return Err(Error::Config(format!("m = {m} exceeds benchmark_m = {benchmark_m}")));
    }
    let reference = backtest.run(&config.clone().with_m(benchmark_m))?.curve;
    m_list
        .iter()
        .map(|&m| {
            let curve = backtest.run(&config.clone().with_m(m))?.curve;
            let (rmse, rmsre) = curve_errors(&curve, &reference)?;
            Ok(StabilityRow { m, rmse, rmsre })
        })
        .collect()
}
