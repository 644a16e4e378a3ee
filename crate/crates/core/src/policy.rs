//! Monte Carlo policy search over piecewise-affine policies.
//!
//! A policy splits the state box into a uniform grid of cells and acts with
//! `a = d0_k + d1_k s` in cell `k`, clipped to the action box. Its value is
//! the discounted reward of simulated rollouts truncated at a finite horizon,
//! and the best parameter vector is found with the clustered Monte Carlo
//! optimizer.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{optimize, OptimizerConfig};
use crate::rng::{substream, SimRng};
use crate::sampler::{Completion, FeasibleRegion};

pub type RewardFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type TransitionFn = Arc<dyn Fn(&[f64], &[f64], &mut SimRng) -> Vec<f64> + Send + Sync>;
pub type InitialFn = Arc<dyn Fn(&mut SimRng) -> Vec<f64> + Send + Sync>;

/// Truncation level for the discounted reward sum.
pub const HORIZON_TOL: f64 = 1e-6;

/// Smallest `H` with `gamma^H < HORIZON_TOL`.
pub fn horizon_for(gamma: f64) -> usize {
    if gamma <= 0.0 {
        return 1;
    }
    (HORIZON_TOL.ln() / gamma.ln()).floor() as usize + 1
}

fn check_box(lower: &[f64], upper: &[f64], what: &str) -> Result<()> {
    if lower.is_empty() || lower.len() != upper.len() || lower.iter().zip(upper).any(|(a, b)| !(a < b)) {
        return Err(Error::InvalidInput(format!("{what} box must be non-empty with lower < upper")));
    }
    Ok(())
}

fn clip(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, a), b) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*a, *b);
    }
}

#[derive(Clone)]
pub struct Mdp {
    pub state_lower: Vec<f64>,
    pub state_upper: Vec<f64>,
    pub action_lower: Vec<f64>,
    pub action_upper: Vec<f64>,
    pub gamma: f64,
    pub horizon: usize,
    reward: RewardFn,
    transition: TransitionFn,
    initial: InitialFn,
}

impl fmt::Debug for Mdp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Mdp")
            .field("state_lower", &self.state_lower)
            .field("state_upper", &self.state_upper)
            .field("action_lower", &self.action_lower)
            .field("action_upper", &self.action_upper)
            .field("gamma", &self.gamma)
            .field("horizon", &self.horizon)
            .finish_non_exhaustive()
    }
}

impl Mdp {
    /// `horizon = None` truncates where `gamma^H < HORIZON_TOL`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        state_lower: Vec<f64>,
        state_upper: Vec<f64>,
        action_lower: Vec<f64>,
        action_upper: Vec<f64>,
        gamma: f64,
        horizon: Option<usize>,
        reward: RewardFn,
        transition: TransitionFn,
        initial: InitialFn,
    ) -> Result<Self> {
        check_box(&state_lower, &state_upper, "state")?;
        check_box(&action_lower, &action_upper, "action")?;
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidInput(format!("discount {gamma} outside [0, 1)")));
        }
        let horizon = horizon.unwrap_or_else(|| horizon_for(gamma));
        if horizon == 0 {
            return Err(Error::InvalidInput("horizon must be at least 1".into()));
        }
        Ok(Self { state_lower, state_upper, action_lower, action_upper, gamma, horizon, reward, transition, initial })
    }

    pub fn state_dim(&self) -> usize {
        self.state_lower.len()
    }

    pub fn action_dim(&self) -> usize {
        self.action_lower.len()
    }

    pub fn reward(&self, s: &[f64]) -> f64 {
        (self.reward)(s)
    }

    pub fn initial_state(&self, rng: &mut SimRng) -> Vec<f64> {
        let mut s = (self.initial)(rng);
        clip(&mut s, &self.state_lower, &self.state_upper);
        s
    }

    /// Next state, clipped into the state box.
    pub fn step(&self, s: &[f64], a: &[f64], rng: &mut SimRng) -> Vec<f64> {
        let mut next = (self.transition)(s, a, rng);
        clip(&mut next, &self.state_lower, &self.state_upper);
        next
    }
}

/// Uniform grid of cells over a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellGrid {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Cells per state dimension.
    pub divisions: Vec<usize>,
}

impl CellGrid {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, divisions: Vec<usize>) -> Result<Self> {
        check_box(&lower, &upper, "state")?;
        if divisions.len() != lower.len() || divisions.contains(&0) {
            return Err(Error::InvalidInput("one positive division count per state dimension".into()));
        }
        Ok(Self { lower, upper, divisions })
    }

    pub fn cell_count(&self) -> usize {
        self.divisions.iter().product()
    }

    /// Row-major index of the cell holding `s`; points outside the box map to
    /// the nearest edge cell.
    pub fn locate(&self, s: &[f64]) -> usize {
        let mut index = 0;
        for (i, &x) in s.iter().enumerate() {
            let div = self.divisions[i];
            let frac = (x - self.lower[i]) / (self.upper[i] - self.lower[i]);
            let c = ((frac * div as f64).floor().max(0.0) as usize).min(div - 1);
            index = index * div + c;
        }
        index
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    pub intercept: Vec<f64>,
    /// `q x d`, one row per action component.
    pub slope: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePolicy {
    pub grid: CellGrid,
    pub action_lower: Vec<f64>,
    pub action_upper: Vec<f64>,
    pub cells: Vec<CellParams>,
}

impl PiecewisePolicy {
    /// Builds a policy from a flat vector laid out cell by cell as
    /// `intercept (q)` followed by `slope (q x d, row-major)`.
    pub fn from_flat(grid: CellGrid, action_lower: Vec<f64>, action_upper: Vec<f64>, flat: &[f64]) -> Result<Self> {
        let (d, q) = (grid.lower.len(), action_lower.len());
        let per_cell = q + q * d;
        if flat.len() != per_cell * grid.cell_count() {
            return Err(Error::DimensionMismatch { expected: per_cell * grid.cell_count(), actual: flat.len() });
        }
        let cells = flat
            .chunks(per_cell)
            .map(|c| CellParams { intercept: c[..q].to_vec(), slope: c[q..].chunks(d).map(|r| r.to_vec()).collect() })
            .collect();
        Ok(Self { grid, action_lower, action_upper, cells })
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.cells.iter().flat_map(|c| c.intercept.iter().chain(c.slope.iter().flatten()).copied()).collect()
    }

    pub fn action(&self, s: &[f64]) -> Vec<f64> {
        let cell = &self.cells[self.grid.locate(s)];
        let mut a: Vec<f64> = cell
            .intercept
            .iter()
            .zip(&cell.slope)
            .map(|(b, row)| b + row.iter().zip(s).map(|(x, y)| x * y).sum::<f64>())
            .collect();
        clip(&mut a, &self.action_lower, &self.action_upper);
        a
    }
}

/// Mean discounted reward over `rollouts` simulated paths and its standard
/// error. Rollout `i` always draws from the same random stream, so two
/// policies are compared on common random numbers.
pub fn evaluate_policy(mdp: &Mdp, policy: &PiecewisePolicy, rollouts: usize, seed: u64) -> (f64, f64) {
    let rollouts = rollouts.max(1);
    let mut values = Vec::with_capacity(rollouts);
    for i in 0..rollouts {
        let mut rng = substream(seed, i as u64);
        let mut s = mdp.initial_state(&mut rng);
        let (mut total, mut discount) = (0.0, 1.0);
        for t in 0..mdp.horizon {
            total += discount * mdp.reward(&s);
            discount *= mdp.gamma;
            if t + 1 < mdp.horizon {
                let a = policy.action(&s);
                s = mdp.step(&s, &a, &mut rng);
            }
        }
        values.push(total);
    }
    let n = rollouts as f64;
    let mean = values.iter().sum::<f64>() / n;
    let se = if rollouts > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    (mean, se)
}

/// Search box for policy parameters. Intercepts default to the action box; a
/// component with equal bounds is held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyBounds {
    pub intercept_lower: Option<f64>,
    pub intercept_upper: Option<f64>,
    pub slope_lower: f64,
    pub slope_upper: f64,
}

impl Default for PolicyBounds {
    fn default() -> Self {
        Self { intercept_lower: None, intercept_upper: None, slope_lower: -1.0, slope_upper: 1.0 }
    }
}

impl PolicyBounds {
    /// Per-parameter bounds in the flat layout of [`PiecewisePolicy::from_flat`].
    fn expand(&self, mdp: &Mdp, cells: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let (d, q) = (mdp.state_dim(), mdp.action_dim());
        let (mut lo, mut hi) = (Vec::new(), Vec::new());
        for _ in 0..cells {
            for i in 0..q {
                lo.push(self.intercept_lower.unwrap_or(mdp.action_lower[i]));
                hi.push(self.intercept_upper.unwrap_or(mdp.action_upper[i]));
            }
            for _ in 0..q * d {
                lo.push(self.slope_lower);
                hi.push(self.slope_upper);
            }
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b)) {
            return Err(Error::InvalidInput("policy bounds need lower <= upper".into()));
        }
        Ok((lo, hi))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PolicySearchResult {
    pub policy: PiecewisePolicy,
    pub value: f64,
    pub std_err: f64,
    pub evaluations: usize,
}

/// Optimizes the flattened policy parameters with every rollout set drawn
/// from `config.seed`.
pub fn search_policy(
    mdp: &Mdp,
    divisions: &[usize],
    bounds: &PolicyBounds,
    rollouts: usize,
    config: &OptimizerConfig,
) -> Result<PolicySearchResult> {
    let grid = CellGrid::new(mdp.state_lower.clone(), mdp.state_upper.clone(), divisions.to_vec())?;
    let (lo, hi) = bounds.expand(mdp, grid.cell_count())?;
    let free: Vec<usize> = (0..lo.len()).filter(|&i| lo[i] < hi[i]).collect();
    let build = |x: &[f64]| {
        let mut flat = lo.clone();
        for (&i, v) in free.iter().zip(x) {
            flat[i] = *v;
        }
        PiecewisePolicy::from_flat(grid.clone(), mdp.action_lower.clone(), mdp.action_upper.clone(), &flat)
    };

    let (policy, evaluations) = if free.is_empty() {
        (build(&[])?, 1)
    } else {
        let region = FeasibleRegion::new(free.iter().map(|&i| lo[i]).collect(), free.iter().map(|&i| hi[i]).collect())?
            .with_completion(Completion::Free);
        let objective = |x: &[f64]| match build(x) {
            Ok(p) => evaluate_policy(mdp, &p, rollouts, config.seed).0,
            Err(_) => f64::NAN,
        };
        let result = optimize(&region, &objective, config)?;
        (build(&result.best_weights)?, result.evaluations)
    };
    let (value, std_err) = evaluate_policy(mdp, &policy, rollouts, config.seed);
    Ok(PolicySearchResult { policy, value, std_err, evaluations })
}

/// Two states and two actions; state `i` is encoded as the scalar `i` and an
/// action component `>= 0.5` selects action 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoStateChain {
    /// `p_next[a][s]` is the probability of landing in state 1 from `s` under `a`.
    pub p_next: [[f64; 2]; 2],
    pub reward: [f64; 2],
    pub gamma: f64,
    pub initial_state: usize,
}

impl Default for TwoStateChain {
    fn default() -> Self {
        Self { p_next: [[0.1, 0.9], [0.9, 0.1]], reward: [0.0, 1.0], gamma: 0.9, initial_state: 0 }
    }
}

impl TwoStateChain {
    fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        let p1 = self.p_next[a][s];
        if next == 1 {
            p1
        } else {
            1.0 - p1
        }
    }

    /// Exact infinite-horizon values of a deterministic policy `actions[s]`.
    pub fn policy_values(&self, actions: [usize; 2]) -> [f64; 2] {
        // (I - gamma P) v = r, solved in closed form for 2x2
        let g = self.gamma;
        let m = |s: usize, t: usize| f64::from(u8::from(s == t)) - g * self.prob(s, actions[s], t);
        let (a, b, c, d) = (m(0, 0), m(0, 1), m(1, 0), m(1, 1));
        let det = a * d - b * c;
        [(d * self.reward[0] - b * self.reward[1]) / det, (a * self.reward[1] - c * self.reward[0]) / det]
    }

    /// Optimal values and actions by value iteration.
    pub fn value_iteration(&self, tol: f64) -> ([f64; 2], [usize; 2]) {
        let mut v = [0.0; 2];
        loop {
            let q = |s: usize, a: usize| self.reward[s] + self.gamma * (0..2).map(|t| self.prob(s, a, t) * v[t]).sum::<f64>();
            let next = [q(0, 0).max(q(0, 1)), q(1, 0).max(q(1, 1))];
            let delta = (next[0] - v[0]).abs().max((next[1] - v[1]).abs());
            v = next;
            if delta < tol {
                let q = |s: usize, a: usize| self.reward[s] + self.gamma * (0..2).map(|t| self.prob(s, a, t) * v[t]).sum::<f64>();
                let act = [usize::from(q(0, 1) > q(0, 0)), usize::from(q(1, 1) > q(1, 0))];
                return (v, act);
            }
        }
    }

    pub fn mdp(&self) -> Result<Mdp> {
        let chain = self.clone();
        let rewards = self.reward;
        let start = self.initial_state.min(1) as f64;
        Mdp::new(
            vec![0.0],
            vec![1.0],
            vec![0.0],
            vec![1.0],
            self.gamma,
            None,
            Arc::new(move |s| rewards[discrete(s[0])]),
            Arc::new(move |s, a, rng| {
                let p1 = chain.p_next[discrete(a[0])][discrete(s[0])];
                vec![if rng.random::<f64>() < p1 { 1.0 } else { 0.0 }]
            }),
            Arc::new(move |_| vec![start]),
        )
    }
}

fn discrete(x: f64) -> usize {
    usize::from(x >= 0.5)
}

/// One state, constant reward 1: the value is a geometric series.
pub fn geometric_mdp(gamma: f64, horizon: Option<usize>) -> Result<Mdp> {
    Mdp::new(
        vec![0.0],
        vec![1.0],
        vec![0.0],
        vec![1.0],
        gamma,
        horizon,
        Arc::new(|_| 1.0),
        Arc::new(|s, _, _| s.to_vec()),
        Arc::new(|_| vec![0.0]),
    )
}

/// Deterministic tracking problem on `[-1, 1]`: the action becomes the next
/// state and the reward is `-(s - target)^2`, so the best constant action is
/// `target`.
pub fn target_mdp(target: f64, gamma: f64, start: f64) -> Result<Mdp> {
    Mdp::new(
        vec![-1.0],
        vec![1.0],
        vec![-1.0],
        vec![1.0],
        gamma,
        None,
        Arc::new(move |s| -(s[0] - target).powi(2)),
        Arc::new(|_, a, _| a.to_vec()),
        Arc::new(move |_| vec![start]),
    )
}
