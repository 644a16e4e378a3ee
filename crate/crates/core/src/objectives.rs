//! Portfolio objectives evaluated on the projected return series `w . R_t`.
//!
//! Nothing here builds a covariance matrix or any higher cross-moment tensor:
//! every moment is taken on the scalar portfolio series. The tensor route is
//! kept only inside [`moment_projection_equivalence`] so callers can check the
//! two agree.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::Objective;
use crate::panel::ReturnPanel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub mu: f64,
    pub sigma: f64,
    pub skew: f64,
    /// Raw (non-excess) kurtosis.
    pub kurt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    MeanVariance,
    MvskRatio,
    Crra,
}

/// Which CRRA expression to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrraForm {
    /// `(1 - (1 + r)^g) / (1 - g)`
    #[default]
    PowerGamma,
    /// `(1 + r)^(1 - g) / (1 - g)`
    Standard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    /// Lambda for mean-variance, gamma for CRRA; `None` picks 1.0 or 3.0.
    #[serde(default)]
    pub risk_aversion: Option<f64>,
    /// Conditional expected returns replacing the window mean.
    #[serde(default)]
    pub forecast_mu: Option<Vec<f64>>,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default)]
    pub crra_form: CrraForm,
}

fn default_window() -> usize {
    252
}

impl Default for ObjectiveSpec {
    fn default() -> Self {
        Self::new(ObjectiveKind::MeanVariance)
    }
}

impl ObjectiveSpec {
    pub fn new(kind: ObjectiveKind) -> Self {
        Self { kind, risk_aversion: None, forecast_mu: None, window: default_window(), crra_form: CrraForm::PowerGamma }
    }

    pub fn with_risk_aversion(mut self, value: f64) -> Self {
        self.risk_aversion = Some(value);
        self
    }

    pub fn with_forecast(mut self, mu: Vec<f64>) -> Self {
        self.forecast_mu = Some(mu);
        self
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = window;
        self
    }

    pub fn risk_aversion(&self) -> f64 {
        self.risk_aversion.unwrap_or(match self.kind {
            ObjectiveKind::Crra => 3.0,
            _ => 1.0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::InvalidInput("objective window must be at least 2".into()));
        }
        if self.kind == ObjectiveKind::Crra && self.risk_aversion() == 1.0 {
            return Err(Error::InvalidInput("CRRA risk aversion must differ from 1".into()));
        }
        if !self.risk_aversion().is_finite() {
            return Err(Error::InvalidInput("risk aversion must be finite".into()));
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn project_rows(rows: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    rows.iter().map(|r| dot(r, w)).collect()
}

/// Portfolio return series `sum_j w_j r_tj`.
pub fn project_series(panel: &ReturnPanel, w: &[f64]) -> Result<Vec<f64>> {
    if w.len() != panel.width() {
        return Err(Error::DimensionMismatch { expected: panel.width(), actual: w.len() });
    }
    Ok(project_rows(panel.rows(), w))
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean and population standard deviation; `sigma` is exactly zero for a
/// series whose deviations are pure rounding noise.
pub fn location_scale(series: &[f64]) -> (f64, f64) {
    let mu = mean(series);
    let var = series.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / series.len() as f64;
    let sigma = var.sqrt();
    if sigma <= 8.0 * f64::EPSILON * mu.abs() || sigma == 0.0 {
        (mu, 0.0)
    } else {
        (mu, sigma)
    }
}

/// Population-denominator mean, volatility, skewness and raw kurtosis.
pub fn empirical_moments(series: &[f64]) -> Result<MomentSet> {
    if series.len() < 2 {
        return Err(Error::InvalidInput("need at least two observations".into()));
    }
    let (mu, sigma) = location_scale(series);
    if sigma == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let t = series.len() as f64;
    let (mut m3, mut m4) = (0.0, 0.0);
    for x in series {
        let z = (x - mu) / sigma;
        let z2 = z * z;
        m3 += z2 * z;
        m4 += z2 * z2;
    }
    Ok(MomentSet { mu, sigma, skew: m3 / t, kurt: m4 / t })
}

/// Objective bound to the trailing window of one panel.
#[derive(Debug, Clone)]
pub struct PanelObjective<'a> {
    spec: &'a ObjectiveSpec,
    rows: &'a [Vec<f64>],
}

impl<'a> PanelObjective<'a> {
    pub fn new(spec: &'a ObjectiveSpec, panel: &'a ReturnPanel) -> Result<Self> {
        spec.validate()?;
        let rows = panel.tail(spec.window);
        if rows.len() < 2 {
            return Err(Error::InsufficientHistory { required: 1, available: rows.len() });
        }
        if let Some(mu) = &spec.forecast_mu {
            if mu.len() != panel.width() {
                return Err(Error::DimensionMismatch { expected: panel.width(), actual: mu.len() });
            }
        }
        Ok(Self { spec, rows })
    }

    pub fn evaluate(&self, w: &[f64]) -> Result<f64> {
        if let Some(first) = self.rows.first() {
            if first.len() != w.len() {
                return Err(Error::DimensionMismatch { expected: first.len(), actual: w.len() });
            }
        }
        let series = project_rows(self.rows, w);
        let forecast = self.spec.forecast_mu.as_ref().map(|mu| dot(mu, w));
        let score = match self.spec.kind {
            ObjectiveKind::MeanVariance => {
                let (mu, sigma) = location_scale(&series);
                forecast.unwrap_or(mu) - self.spec.risk_aversion() * sigma * sigma
            }
            ObjectiveKind::MvskRatio => {
                let m = empirical_moments(&series)?;
                let mu = forecast.unwrap_or(m.mu);
                (mu + 0.5 * m.skew) / (m.sigma + 0.5 * m.kurt)
            }
            ObjectiveKind::Crra => {
                let g = self.spec.risk_aversion();
                let u: f64 = match self.spec.crra_form {
                    CrraForm::PowerGamma => series.iter().map(|r| (1.0 - (1.0 + r).powf(g)) / (1.0 - g)).sum(),
                    CrraForm::Standard => series.iter().map(|r| (1.0 + r).powf(1.0 - g) / (1.0 - g)).sum(),
                };
                u / series.len() as f64
            }
        };
        if score.is_finite() {
            Ok(score)
        } else {
            Err(Error::NonFiniteScore)
        }
    }
}

impl Objective for PanelObjective<'_> {
    fn score(&self, weights: &[f64]) -> Result<f64> {
        self.evaluate(weights)
    }
}

/// Score of `w` under `spec`, using the last `min(T, window)` periods.
pub fn evaluate(spec: &ObjectiveSpec, panel: &ReturnPanel, w: &[f64]) -> Result<f64> {
    PanelObjective::new(spec, panel)?.evaluate(w)
}

/// Order-`order` portfolio moment computed two ways: from the projected
/// series, and by contracting the explicit cross-moment tensor with `w`.
///
/// Order 1 is the mean; orders 2 to 4 are central moments. The tensor has
/// `n^order` entries, so `n` is capped at 5.
pub fn moment_projection_equivalence(panel: &ReturnPanel, w: &[f64], order: u32) -> Result<(f64, f64)> {
    let n = panel.width();
    if w.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: w.len() });
    }
    if !(1..=4).contains(&order) || n > 5 {
        return Err(Error::InvalidInput("order must be 1..=4 and n at most 5".into()));
    }
    let rows = panel.rows();
    let t = rows.len() as f64;

    let series = project_rows(rows, w);
    let s_mean = mean(&series);
    let projected = if order == 1 {
        s_mean
    } else {
        series.iter().map(|s| (s - s_mean).powi(order as i32)).sum::<f64>() / t
    };

    let means: Vec<f64> = (0..n).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / t).collect();
    let centered: Vec<Vec<f64>> = if order == 1 {
        rows.to_vec()
    } else {
        rows.iter().map(|r| r.iter().zip(&means).map(|(x, m)| x - m).collect()).collect()
    };
    let k = order as usize;
    let mut index = vec![0usize; k];
    let mut tensor = 0.0;
    loop {
        let entry = centered.iter().map(|r| index.iter().map(|&i| r[i]).product::<f64>()).sum::<f64>() / t;
        tensor += entry * index.iter().map(|&i| w[i]).product::<f64>();
        // odometer increment over n^k index tuples
        let mut pos = 0;
        loop {
            if pos == k {
                return Ok((projected, tensor));
            }
            index[pos] += 1;
            if index[pos] < n {
                break;
            }
            index[pos] = 0;
            pos += 1;
        }
    }
}
