//! Sample-cluster-refine global search over a feasible region.
//!
//! Level 0 draws `m` uniform feasible samples. Every level clusters the current
//! samples, scores each (repaired) cluster center, and descends into the
//! winning cluster. When the winning cluster holds fewer than
//! `replenish_factor * k` points it is topped back up to `m` with uniform draws
//! from its bounding box, rejection-checked against the full region. The
//! search returns the best point ever scored, including the raw samples of
//! the final winning cluster.

use serde::{Deserialize, Serialize};

use crate::clustering::{cluster_diameter, kmeans, squared_distance, Clustering};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, substream};
use crate::sampler::{sample_in_box, sample_stream, FeasibleRegion, SamplerOptions, WeightVector};

/// Something that scores a feasible weight vector; higher is better.
pub trait Objective {
    fn score(&self, weights: &[f64]) -> Result<f64>;
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> f64,
{
    fn score(&self, weights: &[f64]) -> Result<f64> {
        Ok(self(weights))
    }
}

/// Repair rule for cluster centers that leave the feasible region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterProjection {
    /// Re-apply the completion rule, then fall back to the nearest member.
    #[default]
    CompleteThenNearest,
    /// Always fall back to the nearest member when infeasible.
    NearestMember,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    /// Samples per refinement level.
    pub m: usize,
    /// Fixed cluster count; `None` uses `floor(sqrt(surviving))` capped at `k_cap`.
    pub k: Option<usize>,
    pub k_cap: usize,
    /// Explicit cluster count per level (the last entry repeats).
    pub k_per_level: Option<Vec<usize>>,
    pub max_levels: usize,
    pub diameter_tol: f64,
    pub improvement_tol: f64,
    /// Consecutive levels improving by less than `improvement_tol` before stopping.
    pub improvement_patience: usize,
    pub seed: u64,
    pub center_projection: CenterProjection,
    /// Top up the winning cluster when it holds fewer than this many points per cluster.
    pub replenish_factor: usize,
    /// Fraction of each side of the winning cluster's bounding box added on
    /// both ends before replenishing; the padded box is clipped to the region.
    pub box_padding: f64,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
    pub sampler: SamplerOptions,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            m: 40_000,
            k: None,
            k_cap: 64,
            k_per_level: None,
            max_levels: 12,
            diameter_tol: 1e-4,
            improvement_tol: 1e-10,
            improvement_patience: 3,
            seed: 0,
            center_projection: CenterProjection::CompleteThenNearest,
            replenish_factor: 10,
            box_padding: 0.25,
            kmeans_max_iter: 20,
            kmeans_tol: 1e-9,
            sampler: SamplerOptions::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn with_m(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInput(msg.into()));
        if self.m == 0 {
            return bad("m must be at least 1");
        }
        if let Some(k) = self.k {
            if k == 0 || k > self.m {
                return bad("k must satisfy 1 <= k <= m");
            }
        }
        if let Some(levels) = &self.k_per_level {
            if levels.is_empty() || levels.contains(&0) {
                return bad("k_per_level entries must be at least 1");
            }
        }
        if self.k_cap == 0 || self.max_levels == 0 || self.improvement_patience == 0 {
            return bad("k_cap, max_levels and improvement_patience must be at least 1");
        }
        if !(self.box_padding >= 0.0) {
            return bad("box_padding must be non-negative");
        }
        if !(self.diameter_tol >= 0.0) || !(self.improvement_tol >= 0.0) || !(self.kmeans_tol >= 0.0) {
            return bad("tolerances must be non-negative");
        }
        Ok(())
    }

    /// Cluster count for `level` given the number of surviving samples.
    pub fn clusters_for(&self, level: usize, surviving: usize) -> usize {
        let k = if let Some(levels) = &self.k_per_level {
            levels[level.min(levels.len() - 1)]
        } else if let Some(k) = self.k {
            k
        } else {
            ((surviving as f64).sqrt().floor() as usize).min(self.k_cap)
        };
        k.clamp(1, surviving.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Diameter,
    Improvement,
    MaxLevels,
    SinglePoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub level: usize,
    /// Samples clustered at this level.
    pub surviving: usize,
    pub k: usize,
    /// Winning cluster index.
    pub winner: usize,
    pub center_score: f64,
    /// Best score seen up to and including this level.
    pub best_score: f64,
    pub diameter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best_weights: WeightVector,
    pub best_score: f64,
    pub trace: Vec<LevelRecord>,
    pub evaluations: usize,
    pub stop_reason: StopReason,
}

struct Tracker<'o, O: ?Sized> {
    objective: &'o O,
    evaluations: usize,
    best: Option<(Vec<f64>, f64)>,
}

impl<O: Objective + ?Sized> Tracker<'_, O> {
    fn score(&mut self, w: &[f64]) -> Result<f64> {
        self.evaluations += 1;
        let s = self.objective.score(w).map_err(|e| Error::ObjectiveFailure {
            weights: w.to_vec(),
            reason: e.to_string(),
        })?;
        if !s.is_finite() {
            return Err(Error::ObjectiveFailure { weights: w.to_vec(), reason: format!("non-finite score {s}") });
        }
        if self.best.as_ref().is_none_or(|(_, b)| s > *b) {
            self.best = Some((w.to_vec(), s));
        }
        Ok(s)
    }

    fn best_score(&self) -> f64 {
        self.best.as_ref().map_or(f64::NEG_INFINITY, |b| b.1)
    }
}

/// Feasible stand-in for the center of cluster `index`.
fn repaired_center(
    region: &FeasibleRegion,
    projection: CenterProjection,
    clustering: &Clustering,
    index: usize,
    points: &[Vec<f64>],
    members: &[usize],
) -> Vec<f64> {
    let center = &clustering.centers[index];
    if projection == CenterProjection::CompleteThenNearest {
        let completed = region.complete(&center[..region.free_dim()]);
        if region.accepts_completed(&completed) {
            return completed;
        }
    } else if region.is_feasible(center) {
        return center.clone();
    }
    let mut nearest = members[0];
    let mut best = f64::INFINITY;
    for &i in members {
        let d = squared_distance(&points[i], center);
        if d < best {
            best = d;
            nearest = i;
        }
    }
    points[nearest].clone()
}

/// Maximizes `objective` over `region`.
pub fn optimize<O: Objective + ?Sized>(
    region: &FeasibleRegion,
    objective: &O,
    config: &OptimizerConfig,
) -> Result<OptimizationResult> {
    config.validate()?;
    let mut tracker = Tracker { objective, evaluations: 0, best: None };

    if region.free_dim() == 0 {
        let w = region.complete(&[]);
        if !region.accepts_completed(&w) {
            return Err(Error::InfeasibleRegion { accepted: 0, proposals: 1 });
        }
        let score = tracker.score(&w)?;
        return Ok(OptimizationResult {
            best_weights: WeightVector::from_raw(w),
            best_score: score,
            trace: vec![LevelRecord {
                level: 0,
                surviving: 1,
                k: 1,
                winner: 0,
                center_score: score,
                best_score: score,
                diameter: 0.0,
            }],
            evaluations: tracker.evaluations,
            stop_reason: StopReason::SinglePoint,
        });
    }

    let seed = config.seed;
    let free = region.free_dim();
    let mut samples: Vec<Vec<f64>> = sample_stream(region, config.m, seed, 0, &config.sampler)?
        .into_iter()
        .map(WeightVector::into_inner)
        .collect();
    let mut trace = Vec::new();
    let mut previous_best = f64::NEG_INFINITY;
    let mut stalled = 0;
    let mut level = 0;

    let (final_members, stop_reason) = loop {
        let k = config.clusters_for(level, samples.len());
        let clustering = kmeans(
            &samples,
            k,
            derive_seed(seed, level as u64 + 1),
            config.kmeans_max_iter,
            config.kmeans_tol,
        )?;

        let mut winner = 0;
        let mut winner_score = f64::NEG_INFINITY;
        let mut winner_members = Vec::new();
        for c in 0..k {
            let members = clustering.members(c);
            if members.is_empty() {
                continue;
            }
            let center = repaired_center(region, config.center_projection, &clustering, c, &samples, &members);
            let s = tracker.score(&center)?;
            if s > winner_score || winner_members.is_empty() {
                winner = c;
                winner_score = s;
                winner_members = members;
            }
        }
        let diameter = cluster_diameter(&clustering, &samples, winner);
        let best = tracker.best_score();
        trace.push(LevelRecord {
            level,
            surviving: samples.len(),
            k,
            winner,
            center_score: winner_score,
            best_score: best,
            diameter,
        });

        if diameter < config.diameter_tol {
            break (winner_members, StopReason::Diameter);
        }
        if level > 0 && best - previous_best < config.improvement_tol {
            stalled += 1;
            if stalled >= config.improvement_patience {
                break (winner_members, StopReason::Improvement);
            }
        } else {
            stalled = 0;
        }
        if level + 1 >= config.max_levels {
            break (winner_members, StopReason::MaxLevels);
        }
        previous_best = best;

        let mut survivors: Vec<Vec<f64>> = winner_members.iter().map(|&i| samples[i].clone()).collect();
        if survivors.len() < config.replenish_factor * k && survivors.len() < config.m {
            let mut lo = vec![f64::INFINITY; free];
            let mut hi = vec![f64::NEG_INFINITY; free];
            for p in &survivors {
                for j in 0..free {
                    lo[j] = lo[j].min(p[j]);
                    hi[j] = hi[j].max(p[j]);
                }
            }
            for j in 0..free {
                let pad = config.box_padding * (hi[j] - lo[j]);
                lo[j] = (lo[j] - pad).max(region.lower()[j]);
                hi[j] = (hi[j] + pad).min(region.upper()[j]);
            }
            let want = config.m - survivors.len();
            let mut rng = substream(seed, level as u64 + 1);
            let budget = want.saturating_mul(1000).min(config.sampler.probe_budget);
            survivors.extend(
                sample_in_box(region, &lo, &hi, want, budget, &mut rng)
                    .into_iter()
                    .map(WeightVector::into_inner),
            );
        }
        samples = survivors;
        level += 1;
    };

    for &i in &final_members {
        tracker.score(&samples[i])?;
    }
    if let Some(last) = trace.last_mut() {
        last.best_score = tracker.best_score();
    }

    let evaluations = tracker.evaluations;
    let (w, best_score) = tracker.best.expect("at least one evaluation");
    Ok(OptimizationResult {
        best_weights: WeightVector::from_raw(w),
        best_score,
        trace,
        evaluations,
        stop_reason,
    })
}
