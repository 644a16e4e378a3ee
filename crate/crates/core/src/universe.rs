//! Asset-universe decomposition and bottom-up weight composition.
//!
//! A universe is split into groups (factor-score buckets, k-means on factor
//! cross-sections, or user labels). Each group is optimized on its own, each
//! optimized group becomes one synthetic asset, the synthetic assets are
//! optimized against each other, and final weights are the product of the
//! across-group and within-group weights.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::clustering::kmeans;
use crate::error::{Error, Result};
use crate::objectives::{ObjectiveSpec, PanelObjective};
use crate::optimizer::{optimize, OptimizerConfig};
use crate::panel::{FactorPanel, ReturnPanel};
use crate::rng::derive_seed;
use crate::sampler::{FeasibleRegion, WeightVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMethod {
    ScoreBuckets,
    KmeansOnFactors,
    SectorLabels,
    Whole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniversePartition {
    /// Disjoint, non-empty asset-index sets covering `0..n`, each sorted.
    pub groups: Vec<Vec<usize>>,
    pub method: PartitionMethod,
}

impl UniversePartition {
    pub fn whole(n: usize) -> Self {
        Self { groups: vec![(0..n).collect()], method: PartitionMethod::Whole }
    }

    /// Checks the disjoint-cover invariant for a universe of `n` assets.
    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for group in &self.groups {
            if group.is_empty() {
                return Err(Error::InvalidInput("partition has an empty group".into()));
            }
            for &j in group {
                if j >= n || seen[j] {
                    return Err(Error::InvalidInput(format!("asset {j} is out of range or repeated")));
                }
                seen[j] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidInput("partition does not cover every asset".into()));
        }
        Ok(())
    }
}

/// How a backtest partitions its universe at each rebalance date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum PartitionConfig {
    /// Optimize all assets jointly.
    #[default]
    None,
    ScoreBuckets { buckets: usize },
    Kmeans { k: usize },
    /// One label per asset, in panel order.
    Labels { labels: Vec<String> },
}

/// Cross-sectional z-scores of every non-constant factor at period `t`.
/// Returns one vector per asset.
fn standardized(factors: &FactorPanel, t: usize) -> Result<Vec<Vec<f64>>> {
    if t >= factors.len() {
        return Err(Error::InvalidInput(format!("date index {t} outside factor panel")));
    }
    let section = factors.cross_section(t);
    let n = section.len() as f64;
    let mut out = vec![Vec::new(); section.len()];
    for k in 0..factors.factor_count() {
        let mean = section.iter().map(|x| x[k]).sum::<f64>() / n;
        let sd = (section.iter().map(|x| (x[k] - mean).powi(2)).sum::<f64>() / n).sqrt();
        if !(sd > 1e-12 * (1.0 + mean.abs())) {
            log::warn!("factor {} is cross-sectionally constant at period {t}; dropped", factors.names()[k]);
            continue;
        }
        for (o, x) in out.iter_mut().zip(section) {
            o.push((x[k] - mean) / sd);
        }
    }
    if out.first().is_none_or(|o| o.is_empty()) {
        return Err(Error::DegenerateFactor);
    }
    Ok(out)
}

/// Equal-weighted mean of standardized factors per asset.
pub fn factor_scores(factors: &FactorPanel, t: usize) -> Result<Vec<f64>> {
    Ok(standardized(factors, t)?.iter().map(|z| z.iter().sum::<f64>() / z.len() as f64).collect())
}

/// Ranks assets by equal-weighted factor score (highest first) and cuts the
/// ranking into `buckets` contiguous groups; the remainder goes to the top
/// groups.
pub fn partition_by_score(factors: &FactorPanel, t: usize, buckets: usize) -> Result<UniversePartition> {
    if buckets == 0 {
        return Err(Error::InvalidInput("bucket count must be at least 1".into()));
    }
    let scores = factor_scores(factors, t)?;
    let n = scores.len();
    let buckets = buckets.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

    let (base, extra) = (n / buckets, n % buckets);
    let mut groups = Vec::with_capacity(buckets);
    let mut start = 0;
    for g in 0..buckets {
        let size = base + usize::from(g < extra);
        let mut group = order[start..start + size].to_vec();
        group.sort_unstable();
        groups.push(group);
        start += size;
    }
    Ok(UniversePartition { groups, method: PartitionMethod::ScoreBuckets })
}

/// k-means on standardized factor cross-sections at period `t`.
pub fn partition_by_kmeans(factors: &FactorPanel, t: usize, k: usize, seed: u64) -> Result<UniversePartition> {
    let points = standardized(factors, t)?;
    let clustering = kmeans(&points, k, seed, 200, 1e-12)?;
    let groups = (0..clustering.k).map(|c| clustering.members(c)).filter(|g| !g.is_empty()).collect();
    Ok(UniversePartition { groups, method: PartitionMethod::KmeansOnFactors })
}

/// Groups assets sharing a label; groups are ordered by label.
pub fn partition_by_labels(labels: &[String]) -> Result<UniversePartition> {
    if labels.is_empty() {
        return Err(Error::EmptyPanel);
    }
    let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (j, label) in labels.iter().enumerate() {
        by_label.entry(label.as_str()).or_default().push(j);
    }
    Ok(UniversePartition { groups: by_label.into_values().collect(), method: PartitionMethod::SectorLabels })
}

/// Box bounds reused for every group and for the synthetic assets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegionTemplate {
    pub lower: f64,
    pub upper: f64,
}

impl Default for RegionTemplate {
    fn default() -> Self {
        Self { lower: 0.0, upper: 1.0 }
    }
}

impl RegionTemplate {
    pub fn region(&self, n: usize) -> Result<FeasibleRegion> {
        FeasibleRegion::uniform_bounds(n, self.lower, self.upper)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BottomUpResult {
    pub weights: WeightVector,
    /// Within-group weights, aligned with `partition.groups`.
    pub within: Vec<Vec<f64>>,
    /// Weight of each group's synthetic asset.
    pub across: Vec<f64>,
}

fn sub_spec(spec: &ObjectiveSpec, forecast: Option<Vec<f64>>) -> ObjectiveSpec {
    ObjectiveSpec { forecast_mu: forecast, ..spec.clone() }
}

fn optimize_group(
    panel: &ReturnPanel,
    template: &RegionTemplate,
    spec: &ObjectiveSpec,
    config: &OptimizerConfig,
) -> Result<Vec<f64>> {
    if panel.width() == 1 {
        return Ok(vec![1.0]);
    }
    let region = template.region(panel.width())?;
    let objective = PanelObjective::new(spec, panel)?;
    Ok(optimize(&region, &objective, config)?.best_weights.into_inner())
}

/// Two-stage optimization: within each group, then across groups.
pub fn optimize_bottom_up(
    panel: &ReturnPanel,
    partition: &UniversePartition,
    template: &RegionTemplate,
    spec: &ObjectiveSpec,
    config: &OptimizerConfig,
) -> Result<BottomUpResult> {
    let n = panel.width();
    partition.validate(n)?;
    if let Some(mu) = &spec.forecast_mu {
        if mu.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: mu.len() });
        }
    }

    let mut within = Vec::with_capacity(partition.groups.len());
    for (g, group) in partition.groups.iter().enumerate() {
        let forecast = spec.forecast_mu.as_ref().map(|mu| group.iter().map(|&j| mu[j]).collect());
        let cfg = OptimizerConfig { seed: derive_seed(config.seed, g as u64), ..config.clone() };
        within.push(optimize_group(&panel.select_columns(group), template, &sub_spec(spec, forecast), &cfg)?);
    }

    let across = if partition.groups.len() == 1 {
        vec![1.0]
    } else {
        let rows: Vec<Vec<f64>> = panel
            .rows()
            .iter()
            .map(|r| {
                partition
                    .groups
                    .iter()
                    .zip(&within)
                    .map(|(group, w)| group.iter().zip(w).map(|(&j, x)| r[j] * x).sum())
                    .collect()
            })
            .collect();
        let names = (0..partition.groups.len()).map(|g| format!("group{g}")).collect();
        let synthetic = ReturnPanel::new(rows, panel.dates().to_vec(), names)?;
        let forecast = spec.forecast_mu.as_ref().map(|mu| {
            partition.groups.iter().zip(&within).map(|(group, w)| group.iter().zip(w).map(|(&j, x)| mu[j] * x).sum()).collect()
        });
        let cfg = OptimizerConfig { seed: derive_seed(config.seed, partition.groups.len() as u64), ..config.clone() };
        optimize_group(&synthetic, template, &sub_spec(spec, forecast), &cfg)?
    };

    Ok(BottomUpResult { weights: compose(n, &partition.groups, &within, &across), within, across })
}

/// `final[j] = across[g] * within[g][j]` for `j` in group `g`.
pub fn compose(n: usize, groups: &[Vec<usize>], within: &[Vec<f64>], across: &[f64]) -> WeightVector {
    let mut w = vec![0.0; n];
    for ((group, inner), outer) in groups.iter().zip(within).zip(across) {
        for (&j, x) in group.iter().zip(inner) {
            w[j] = outer * x;
        }
    }
    WeightVector::from_raw(w)
}
