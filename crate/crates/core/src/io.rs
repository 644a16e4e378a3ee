//! Price CSV ingestion and artifact writers.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::NaiveDate;

use crate::backtest::{EquityCurve, WeightRecord};
use crate::dgp::business_days;
use crate::error::{Error, Result};
use crate::panel::{FactorPanel, ReturnPanel};
use crate::stability::StabilityRow;

/// Aligned returns and, when the file carries `factor_*` columns, factors.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub returns: ReturnPanel,
    pub factors: Option<FactorPanel>,
    /// Assets removed because they lacked a price on some date.
    pub dropped: Vec<String>,
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse { line: line as usize, message: message.into() }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => parse_err(line, format!("{other:?}")),
    }
}

/// Reads long-format rows `date,asset,<price_column>[,factor_*]`, pivots them
/// into a panel and converts prices to simple returns. Assets missing any
/// date are dropped. Factor values on the first date are not used.
pub fn ingest_prices(path: &Path, price_column: &str) -> Result<Ingested> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| parse_err(1, format!("missing column {name}")));
    let (date_col, asset_col, price_col) = (column("date")?, column("asset")?, column(price_column)?);
    let factor_cols: Vec<(usize, String)> =
        headers.iter().enumerate().filter(|(_, h)| h.starts_with("factor_")).map(|(i, h)| (i, h.to_string())).collect();

    let mut data: BTreeMap<String, BTreeMap<NaiveDate, (f64, Vec<f64>)>> = BTreeMap::new();
    let mut all_dates = BTreeSet::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).ok_or_else(|| parse_err(line, "missing field"));
        let date = NaiveDate::parse_from_str(field(date_col)?, "%Y-%m-%d")
            .map_err(|e| parse_err(line, format!("bad date: {e}")))?;
        let asset = field(asset_col)?.to_string();
        if asset.is_empty() {
            return Err(parse_err(line, "empty asset"));
        }
        let number = |i: usize, what: &str| -> Result<f64> {
            let v: f64 = field(i)?.parse().map_err(|_| parse_err(line, format!("bad {what}")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(parse_err(line, format!("non-finite {what}")))
            }
        };
        let price = number(price_col, "price")?;
        if price <= 0.0 {
            return Err(parse_err(line, "price must be positive"));
        }
        let factors = factor_cols.iter().map(|(i, name)| number(*i, name)).collect::<Result<Vec<_>>>()?;
        if data.entry(asset.clone()).or_default().insert(date, (price, factors)).is_some() {
            return Err(parse_err(line, format!("duplicate row for {asset} on {date}")));
        }
        all_dates.insert(date);
    }

    let dates: Vec<NaiveDate> = all_dates.into_iter().collect();
    let (kept, dropped): (Vec<_>, Vec<_>) = data.into_iter().partition(|(_, rows)| rows.len() == dates.len());
    let dropped: Vec<String> = dropped.into_iter().map(|(a, _)| a).collect();
    if !dropped.is_empty() {
        log::info!("dropped {} assets with missing dates", dropped.len());
    }
    if kept.is_empty() || dates.len() < 2 {
        return Err(Error::EmptyPanel);
    }

    let assets: Vec<String> = kept.iter().map(|(a, _)| a.clone()).collect();
    let series: Vec<Vec<&(f64, Vec<f64>)>> = kept.iter().map(|(_, rows)| rows.values().collect()).collect();
    let returns = (1..dates.len()).map(|t| series.iter().map(|s| s[t].0 / s[t - 1].0 - 1.0).collect()).collect();
    let factors = if factor_cols.is_empty() {
        None
    } else {
        let values = (1..dates.len()).map(|t| series.iter().map(|s| s[t].1.clone()).collect()).collect();
        let names = factor_cols.into_iter().map(|(_, n)| n).collect();
        Some(FactorPanel::new(values, names, dates[1..].to_vec(), assets.clone())?)
    };
    Ok(Ingested { returns: ReturnPanel::new(returns, dates[1..].to_vec(), assets)?, factors, dropped })
}

/// Writes a panel as long-format prices starting at 100 one business day
/// before the first return, so that [`ingest_prices`] recovers it.
pub fn write_prices(path: &Path, returns: &ReturnPanel, factors: Option<&FactorPanel>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let names: Vec<String> = factors.map(|f| f.names().to_vec()).unwrap_or_default();
    let mut header = vec!["date".to_string(), "asset".into(), "price".into()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;

    let first = returns.dates()[0];
    let base = previous_business_day(first);
    for (j, asset) in returns.assets().iter().enumerate() {
        let mut price = 100.0;
        for t in 0..=returns.len() {
            let date = if t == 0 { base } else { returns.dates()[t - 1] };
            if t > 0 {
                price *= 1.0 + returns.row(t - 1)[j];
            }
            let mut record = vec![date.to_string(), asset.clone(), price.to_string()];
            if let Some(f) = factors {
                // the base row repeats the first observation
                record.extend(f.cross_section(t.saturating_sub(1))[j].iter().map(|v| v.to_string()));
            }
            w.write_record(&record).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn previous_business_day(date: NaiveDate) -> NaiveDate {
    let mut d = date.pred_opt().expect("date in range");
    while business_days(d, 1)[0] != d {
        d = d.pred_opt().expect("date in range");
    }
    d
}

pub fn write_equity(path: &Path, curve: &EquityCurve) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["date", "value"]).map_err(csv_err)?;
    for (d, v) in curve.dates.iter().zip(&curve.values) {
        w.write_record([d.to_string(), v.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_weights(path: &Path, assets: &[String], records: &[WeightRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["date", "asset", "weight"]).map_err(csv_err)?;
    for r in records {
        for (a, x) in assets.iter().zip(r.weights.iter()) {
            w.write_record([r.date.to_string(), a.clone(), x.to_string()]).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_stability(path: &Path, rows: &[StabilityRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["m", "rmse", "rmsre"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([r.m.to_string(), r.rmse.to_string(), r.rmsre.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
