//! Uniform sampling of portfolio weights inside a constrained region.
//!
//! A region is an open box `(lower, upper)`, one equality constraint that is
//! eliminated by solving for the last coordinate (the *completion*), and any
//! number of inequality predicates `F_i(w) >= 0`. Proposals are drawn in the
//! free coordinates, completed, and rejected when any constraint fails, so
//! accepted draws are uniform on the feasible set.

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, SimRng};

/// Scalar function of a full weight vector.
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Tolerance for `|w_n - h(w_1..w_{n-1})|` on a completed vector.
pub const COMPLETION_TOL: f64 = 1e-12;

#[derive(Clone)]
pub enum Completion {
    /// `w_n = 1 - sum(w_1..w_{n-1})`.
    Budget,
    /// No equality constraint: every coordinate is drawn.
    Free,
    /// `w_n = h(w_1..w_{n-1})`; `h` receives the first `n - 1` coordinates.
    Custom(ScalarFn),
}

impl Completion {
    fn apply(&self, free: &[f64]) -> Option<f64> {
        match self {
            Completion::Budget => Some(1.0 - free.iter().sum::<f64>()),
            Completion::Free => None,
            Completion::Custom(h) => Some(h(free)),
        }
    }
}

impl fmt::Debug for Completion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Completion::Budget => write!(f, "Budget"),
            Completion::Free => write!(f, "Free"),
            Completion::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Named predicate `F(w) >= 0`.
#[derive(Clone)]
pub struct Inequality {
    pub name: String,
    func: ScalarFn,
}

impl Inequality {
    pub fn new(name: impl Into<String>, func: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), func: Arc::new(func) }
    }

    /// `coeffs . w + constant >= 0`.
    pub fn linear(name: impl Into<String>, coeffs: Vec<f64>, constant: f64) -> Self {
        Self::new(name, move |w: &[f64]| {
            coeffs.iter().zip(w).map(|(c, x)| c * x).sum::<f64>() + constant
        })
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        (self.func)(w)
    }

    pub fn holds(&self, w: &[f64]) -> bool {
        self.value(w) >= 0.0
    }
}

impl fmt::Debug for Inequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Inequality({})", self.name)
    }
}

/// A weight vector that passed every feasibility check of the region it was
/// drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Wraps `w` after checking it against `region`.
    pub fn new(region: &FeasibleRegion, w: Vec<f64>) -> Result<Self> {
        if w.len() != region.dim() {
            return Err(Error::DimensionMismatch { expected: region.dim(), actual: w.len() });
        }
        if !region.is_feasible(&w) {
            return Err(Error::InvalidInput(format!("weights {w:?} are infeasible")));
        }
        Ok(Self(w))
    }

    /// Wraps `w` without checks; for vectors produced by composition of
    /// already-feasible pieces.
    pub fn from_raw(w: Vec<f64>) -> Self {
        Self(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for WeightVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Stopping rule for rejection loops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerOptions {
    /// Smallest tolerated acceptance rate once `probe_budget` proposals ran.
    pub min_acceptance: f64,
    pub probe_budget: usize,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self { min_acceptance: 1e-6, probe_budget: 10_000_000 }
    }
}

/// How free coordinates are proposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Proposal {
    /// Uniform on the box of the free coordinates.
    Box,
    /// Uniform on the standard simplex (flat Dirichlet). Only chosen when the
    /// completion is the budget rule and every lower bound is non-negative;
    /// the feasible set then lies inside the simplex and the restricted
    /// distribution equals the box proposal's.
    Simplex,
}

#[derive(Clone, Debug)]
pub struct FeasibleRegion {
    lower: Vec<f64>,
    upper: Vec<f64>,
    completion: Completion,
    inequalities: Vec<Inequality>,
}

impl FeasibleRegion {
    /// Box `(lower, upper)` with budget completion and no inequalities.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidInput("region needs at least one coordinate".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), actual: upper.len() });
        }
        for (j, (a, b)) in lower.iter().zip(&upper).enumerate() {
            if !(a < b) || !a.is_finite() || !b.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "bounds for coordinate {j} must satisfy lower < upper, got ({a}, {b})"
                )));
            }
        }
        Ok(Self { lower, upper, completion: Completion::Budget, inequalities: Vec::new() })
    }

    /// Same scalar bounds on every coordinate.
    pub fn uniform_bounds(n: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; n], vec![upper; n])
    }

    /// Long-only fully-invested portfolios: `(0, 1)^n`, weights sum to one.
    pub fn simplex(n: usize) -> Result<Self> {
        Self::uniform_bounds(n, 0.0, 1.0)
    }

    pub fn with_completion(mut self, completion: Completion) -> Self {
        self.completion = completion;
        self
    }

    pub fn with_inequality(mut self, inequality: Inequality) -> Self {
        self.inequalities.push(inequality);
        self
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Number of coordinates drawn before completion.
    pub fn free_dim(&self) -> usize {
        match self.completion {
            Completion::Free => self.dim(),
            _ => self.dim() - 1,
        }
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn completion(&self) -> &Completion {
        &self.completion
    }

    pub fn inequalities(&self) -> &[Inequality] {
        &self.inequalities
    }

    pub fn proposal(&self) -> Proposal {
        let nonneg = self.lower.iter().all(|&a| a >= 0.0);
        if matches!(self.completion, Completion::Budget) && nonneg && self.dim() > 1 {
            Proposal::Simplex
        } else {
            Proposal::Box
        }
    }

    /// Completes free coordinates into a full vector. No feasibility check.
    pub fn complete(&self, free: &[f64]) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.dim());
        w.extend_from_slice(free);
        if let Some(last) = self.completion.apply(free) {
            w.push(last);
        }
        w
    }

    fn in_box(&self, w: &[f64]) -> bool {
        if self.free_dim() == 0 {
            // single determined point: bounds are treated as closed
            return w.iter().zip(&self.lower).zip(&self.upper).all(|((x, a), b)| a <= x && x <= b);
        }
        w.iter().zip(&self.lower).zip(&self.upper).all(|((x, a), b)| a < x && x < b)
    }

    /// Box and inequality checks on an already completed vector.
    pub fn accepts_completed(&self, w: &[f64]) -> bool {
        w.iter().all(|x| x.is_finite())
            && self.in_box(w)
            && self.inequalities.iter().all(|f| f.holds(w))
    }

    /// Full check: dimension, box, completion rule and inequalities.
    pub fn is_feasible(&self, w: &[f64]) -> bool {
        if w.len() != self.dim() {
            return false;
        }
        let n = self.dim();
        if let Some(h) = self.completion.apply(&w[..n - 1]) {
            if (w[n - 1] - h).abs() > COMPLETION_TOL {
                return false;
            }
        }
        self.accepts_completed(w)
    }

    /// Draws one proposal into `free`, returning the completed vector.
    fn propose(&self, rng: &mut SimRng, free: &mut Vec<f64>) -> Vec<f64> {
        free.clear();
        let k = self.free_dim();
        match self.proposal() {
            Proposal::Simplex => {
                let n = self.dim();
                let mut total = 0.0;
                for _ in 0..n {
                    let e = exp1(rng);
                    total += e;
                    free.push(e);
                }
                free.truncate(k);
                for x in free.iter_mut() {
                    *x /= total;
                }
            }
            Proposal::Box => {
                for j in 0..k {
                    free.push(open_uniform(rng, self.lower[j], self.upper[j]));
                }
            }
        }
        self.complete(free)
    }

    /// Proposes uniformly in the free-coordinate box `[lo, hi]` and completes.
    fn propose_in(&self, rng: &mut SimRng, lo: &[f64], hi: &[f64], free: &mut Vec<f64>) -> Vec<f64> {
        free.clear();
        for j in 0..self.free_dim() {
            let (a, b) = (lo[j], hi[j]);
            free.push(if b > a { a + (b - a) * rng.random::<f64>() } else { a });
        }
        self.complete(free)
    }
}

fn exp1(rng: &mut SimRng) -> f64 {
    // 1 - u lies in (0, 1]
    -(1.0 - rng.random::<f64>()).ln()
}

fn open_uniform(rng: &mut SimRng, a: f64, b: f64) -> f64 {
    loop {
        let x = a + (b - a) * rng.random::<f64>();
        if x > a && x < b {
            return x;
        }
    }
}

/// `m` feasible draws from substream 0 of `seed`.
pub fn sample_feasible(region: &FeasibleRegion, m: usize, seed: u64) -> Result<Vec<WeightVector>> {
    sample_stream(region, m, seed, 0, &SamplerOptions::default())
}

/// `m` feasible draws from substream `stream` of `seed`.
pub fn sample_stream(
    region: &FeasibleRegion,
    m: usize,
    seed: u64,
    stream: u64,
    options: &SamplerOptions,
) -> Result<Vec<WeightVector>> {
    if m == 0 {
        return Err(Error::InvalidInput("sample count must be at least 1".into()));
    }
    let mut rng = substream(seed, stream);
    let mut out = Vec::with_capacity(m);
    let mut free = Vec::with_capacity(region.dim());
    let mut proposals = 0usize;
    while out.len() < m {
        let w = region.propose(&mut rng, &mut free);
        proposals += 1;
        if region.accepts_completed(&w) {
            out.push(WeightVector(w));
        }
        if proposals >= options.probe_budget
            && (out.len() as f64) < options.min_acceptance * proposals as f64
        {
            return Err(Error::InfeasibleRegion { accepted: out.len(), proposals });
        }
    }
    Ok(out)
}

/// Fraction of `probe` proposals that pass every feasibility check.
pub fn acceptance_rate(region: &FeasibleRegion, probe: usize, seed: u64) -> f64 {
    if probe == 0 {
        return 0.0;
    }
    let mut rng = substream(seed, 0);
    let mut free = Vec::with_capacity(region.dim());
    let accepted = (0..probe)
        .filter(|_| {
            let w = region.propose(&mut rng, &mut free);
            region.accepts_completed(&w)
        })
        .count();
    accepted as f64 / probe as f64
}

/// Up to `count` feasible draws whose free coordinates are uniform in the
/// sub-box `[lo, hi]`, rejection-checked against the whole region. Stops early
/// after `max_proposals`.
pub fn sample_in_box(
    region: &FeasibleRegion,
    lo: &[f64],
    hi: &[f64],
    count: usize,
    max_proposals: usize,
    rng: &mut SimRng,
) -> Vec<WeightVector> {
    let mut out = Vec::with_capacity(count);
    let mut free = Vec::with_capacity(region.dim());
    let mut proposals = 0;
    while out.len() < count && proposals < max_proposals {
        let w = region.propose_in(rng, lo, hi, &mut free);
        proposals += 1;
        if region.accepts_completed(&w) {
            out.push(WeightVector(w));
        }
    }
    out
}
