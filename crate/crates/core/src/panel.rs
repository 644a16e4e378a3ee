//! Aligned return and factor panels.

use std::collections::HashSet;

use chrono::NaiveDate;

use crate::error::{Error, Result};

/// `T x n` simple returns with strictly increasing dates and unique assets.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    returns: Vec<Vec<f64>>,
    dates: Vec<NaiveDate>,
    assets: Vec<String>,
}

fn check_axes(dates: &[NaiveDate], assets: &[String]) -> Result<()> {
    if dates.windows(2).any(|d| d[0] >= d[1]) {
        return Err(Error::InvalidInput("dates must be strictly increasing".into()));
    }
    let mut seen = HashSet::new();
    if let Some(dup) = assets.iter().find(|a| !seen.insert(a.as_str())) {
        return Err(Error::InvalidInput(format!("duplicate asset identifier {dup}")));
    }
    Ok(())
}

impl ReturnPanel {
    pub fn new(returns: Vec<Vec<f64>>, dates: Vec<NaiveDate>, assets: Vec<String>) -> Result<Self> {
        if returns.is_empty() || assets.is_empty() {
            return Err(Error::EmptyPanel);
        }
        if dates.len() != returns.len() {
            return Err(Error::DimensionMismatch { expected: returns.len(), actual: dates.len() });
        }
        let n = assets.len();
        for row in &returns {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, actual: row.len() });
            }
            if let Some(r) = row.iter().find(|r| !r.is_finite() || **r <= -1.0) {
                return Err(Error::InvalidInput(format!("return {r} is missing or at most -1")));
            }
        }
        check_axes(&dates, &assets)?;
        Ok(Self { returns, dates, assets })
    }

    /// Number of periods `T`.
    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    /// Number of assets `n`.
    pub fn width(&self) -> usize {
        self.assets.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.returns
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.returns[t]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.returns.iter().map(|r| r[j]).collect()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    /// The last `min(T, window)` rows.
    pub fn tail(&self, window: usize) -> &[Vec<f64>] {
        let start = self.returns.len().saturating_sub(window);
        &self.returns[start..]
    }

    /// Rows `0..end` (exclusive).
    pub fn head(&self, end: usize) -> ReturnPanel {
        ReturnPanel {
            returns: self.returns[..end].to_vec(),
            dates: self.dates[..end].to_vec(),
            assets: self.assets.clone(),
        }
    }

    pub fn select_columns(&self, columns: &[usize]) -> ReturnPanel {
        ReturnPanel {
            returns: self.returns.iter().map(|r| columns.iter().map(|&j| r[j]).collect()).collect(),
            dates: self.dates.clone(),
            assets: columns.iter().map(|&j| self.assets[j].clone()).collect(),
        }
    }
}

/// `T x n x K` factor observations aligned with a return panel.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPanel {
    values: Vec<Vec<Vec<f64>>>,
    names: Vec<String>,
    dates: Vec<NaiveDate>,
    assets: Vec<String>,
}

impl FactorPanel {
    pub fn new(
        values: Vec<Vec<Vec<f64>>>,
        names: Vec<String>,
        dates: Vec<NaiveDate>,
        assets: Vec<String>,
    ) -> Result<Self> {
        if values.len() != dates.len() {
            return Err(Error::DimensionMismatch { expected: dates.len(), actual: values.len() });
        }
        for row in &values {
            if row.len() != assets.len() {
                return Err(Error::DimensionMismatch { expected: assets.len(), actual: row.len() });
            }
            for obs in row {
                if obs.len() != names.len() {
                    return Err(Error::DimensionMismatch { expected: names.len(), actual: obs.len() });
                }
                if obs.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidInput("factor panel has missing values".into()));
                }
            }
        }
        check_axes(&dates, &assets)?;
        Ok(Self { values, names, dates, assets })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn width(&self) -> usize {
        self.assets.len()
    }

    pub fn factor_count(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    /// Cross-section at period `t`: one K-vector per asset.
    pub fn cross_section(&self, t: usize) -> &[Vec<f64>] {
        &self.values[t]
    }

    pub fn values(&self) -> &[Vec<Vec<f64>>] {
        &self.values
    }

    pub fn select_columns(&self, columns: &[usize]) -> FactorPanel {
        FactorPanel {
            values: self.values.iter().map(|r| columns.iter().map(|&j| r[j].clone()).collect()).collect(),
            names: self.names.clone(),
            dates: self.dates.clone(),
            assets: columns.iter().map(|&j| self.assets[j].clone()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, day).unwrap()
    }

    #[test]
    fn rejects_bad_panels() {
        let assets = vec!["A".to_string()];
        assert!(ReturnPanel::new(vec![vec![-1.0]], vec![d(1)], assets.clone()).is_err());
        assert!(ReturnPanel::new(vec![vec![0.1], vec![0.1]], vec![d(2), d(1)], assets.clone()).is_err());
        assert!(ReturnPanel::new(vec![vec![0.1, 0.2]], vec![d(1)], vec!["A".into(), "A".into()]).is_err());
        assert!(ReturnPanel::new(vec![vec![f64::NAN]], vec![d(1)], assets).is_err());
    }

    #[test]
    fn tail_and_head() {
        let p = ReturnPanel::new(
            vec![vec![0.1], vec![0.2], vec![0.3]],
            vec![d(1), d(2), d(3)],
            vec!["A".into()],
        )
        .unwrap();
        assert_eq!(p.tail(2), &[vec![0.2], vec![0.3]]);
        assert_eq!(p.tail(10).len(), 3);
        assert_eq!(p.head(2).len(), 2);
    }
}
