//! Synthetic market: ARMA-GARCH factors mapped to returns through a sine.
//!
//! For each asset `j`,
//!
//! ```text
//! f_t       = mu + phi f_{t-1} + sigma_t * eps_t,   eps_t = P u_t,  u_t ~ N(0, I)
//! sigma_t^2 = alpha + beta sigma_{t-1}^2 + gamma f_{t-1}^2
//! r_t       = scale * sin(f_t) + U(-a, a)
//! ```
//!
//! `P` is lower triangular with unit-norm rows, so each `eps_j` is marginally
//! standard normal while assets share innovations.

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{FactorPanel, ReturnPanel};
use crate::rng::{substream, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpParams {
    pub n: usize,
    pub periods: usize,
    pub mu: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Lower-triangular correlation generator with unit-norm rows.
    pub p: Vec<Vec<f64>>,
    pub noise_amplitude: f64,
    pub return_scale: f64,
    pub burn_in: usize,
}

/// Factor level and conditional variance of every asset at one date.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorState {
    pub f: Vec<f64>,
    pub sigma2: Vec<f64>,
}

/// Output of [`simulate`]: the observable panels plus the latent variance path.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub factors: FactorPanel,
    pub returns: ReturnPanel,
    /// `sigma_t^2` per period and asset, aligned with `returns`.
    pub sigma2: Vec<Vec<f64>>,
}

impl Simulation {
    pub fn state(&self, t: usize) -> FactorState {
        FactorState {
            f: self.factors.cross_section(t).iter().map(|x| x[0]).collect(),
            sigma2: self.sigma2[t].clone(),
        }
    }
}

pub const DEFAULT_NOISE_AMPLITUDE: f64 = 0.0015;
pub const DEFAULT_RETURN_SCALE: f64 = 0.02;
pub const DEFAULT_BURN_IN: usize = 500;
pub const DEFAULT_PERIODS: usize = 250;

/// Spectral radius estimate by repeated normalized squaring.
pub fn spectral_radius(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let norm = |m: &[Vec<f64>]| m.iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut m = a.to_vec();
    let mut log_scale = 0.0;
    let mut power = 1.0;
    for _ in 0..24 {
        let s = norm(&m);
        if s == 0.0 {
            return 0.0;
        }
        for row in m.iter_mut() {
            for x in row.iter_mut() {
                *x /= s;
            }
        }
        log_scale += s.ln();
        let mut sq = vec![vec![0.0; n]; n];
        for i in 0..n {
            for k in 0..n {
                let aik = m[i][k];
                if aik != 0.0 {
                    for j in 0..n {
                        sq[i][j] += aik * m[k][j];
                    }
                }
            }
        }
        m = sq;
        log_scale *= 2.0;
        power *= 2.0;
    }
    let s = norm(&m);
    if s == 0.0 {
        return 0.0;
    }
    ((log_scale + s.ln()) / power).exp()
}

impl DgpParams {
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if n == 0 {
            return bad("asset count must be at least 1".into());
        }
        let sizes = [self.mu.len(), self.alpha.len(), self.beta.len(), self.gamma.len(), self.phi.len(), self.p.len()];
        if sizes.iter().any(|&s| s != n) || self.phi.iter().chain(&self.p).any(|r| r.len() != n) {
            return bad("parameter dimensions do not match n".into());
        }
        for j in 0..n {
            if !(self.mu[j] > 0.0 && self.mu[j] < 0.05) {
                return bad(format!("mu[{j}] = {} outside (0, 0.05)", self.mu[j]));
            }
            if !(self.alpha[j] > 0.0) || self.beta[j] < 0.0 || self.gamma[j] < 0.0 {
                return bad(format!("GARCH coefficients of asset {j} must be non-negative, alpha positive"));
            }
            if self.beta[j] + self.gamma[j] >= 1.0 {
                return bad(format!("beta + gamma >= 1 for asset {j}"));
            }
            let row = &self.p[j];
            if row[j + 1..].iter().any(|&x| x != 0.0) {
                return bad(format!("correlation generator row {j} is not lower triangular"));
            }
            let sq: f64 = row.iter().map(|x| x * x).sum();
            if (sq - 1.0).abs() > 1e-12 {
                return bad(format!("correlation generator row {j} has squared norm {sq}"));
            }
        }
        if spectral_radius(&self.phi) >= 1.0 {
            return bad("autoregressive matrix is not stable".into());
        }
        if !(self.noise_amplitude >= 0.0) || !(self.return_scale >= 0.0) {
            return bad("noise amplitude and return scale must be non-negative".into());
        }
        Ok(())
    }

    pub fn with_periods(mut self, periods: usize) -> Self {
        self.periods = periods;
        self
    }

    /// Stationary level `alpha / (1 - beta - gamma)` used to start the variance.
    pub fn stationary_variance(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.alpha[j] / (1.0 - self.beta[j] - self.gamma[j])).collect()
    }

    /// One step of the factor recursion from `state` using standard normal
    /// draws `u`.
    fn step(&self, state: &FactorState, u: &[f64], next: &mut FactorState) {
        let n = self.n;
        for j in 0..n {
            let s2 = self.alpha[j] + self.beta[j] * state.sigma2[j] + self.gamma[j] * state.f[j] * state.f[j];
            let eps: f64 = self.p[j][..=j].iter().zip(u).map(|(a, b)| a * b).sum();
            let ar: f64 = self.phi[j].iter().zip(&state.f).map(|(a, b)| a * b).sum();
            next.sigma2[j] = s2;
            next.f[j] = self.mu[j] + ar + s2.sqrt() * eps;
        }
    }
}

fn open_unit(rng: &mut SimRng) -> f64 {
    loop {
        let x: f64 = rng.random();
        if x > 0.0 {
            return x;
        }
    }
}

/// Random stationary parameter set for `n` assets.
pub fn generate_params(n: usize, seed: u64) -> Result<DgpParams> {
    if n == 0 {
        return Err(Error::InvalidInput("asset count must be at least 1".into()));
    }
    let mut rng = substream(seed, 0);
    let mut mu = Vec::with_capacity(n);
    let mut alpha = Vec::with_capacity(n);
    let mut beta = Vec::with_capacity(n);
    let mut gamma = Vec::with_capacity(n);
    for _ in 0..n {
        mu.push(0.05 * open_unit(&mut rng));
        alpha.push(0.005 + 0.045 * open_unit(&mut rng));
        let g = 0.2 * rng.random::<f64>();
        gamma.push(g);
        beta.push((0.9 - g) * rng.random::<f64>());
    }
    // row sums stay below 0.9, which bounds the spectral radius
    let off = 0.1 / n as f64;
    let phi = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.8 * open_unit(&mut rng) } else { off * open_unit(&mut rng) }).collect())
        .collect();
    let p = (0..n)
        .map(|i| loop {
            let mut row: Vec<f64> = (0..n).map(|j| if j <= i { rng.random_range(-1.0..1.0) } else { 0.0 }).collect();
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                row.iter_mut().for_each(|x| *x /= norm);
                break row;
            }
        })
        .collect();
    let params = DgpParams {
        n,
        periods: DEFAULT_PERIODS,
        mu,
        phi,
        alpha,
        beta,
        gamma,
        p,
        noise_amplitude: DEFAULT_NOISE_AMPLITUDE,
        return_scale: DEFAULT_RETURN_SCALE,
        burn_in: DEFAULT_BURN_IN,
    };
    params.validate()?;
    Ok(params)
}

/// Consecutive weekdays starting at the first weekday on or after `start`.
pub fn business_days(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut d = start;
    while out.len() < count {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

pub fn default_start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date")
}

/// Runs the recursion for `burn_in + periods` steps and keeps the last
/// `periods`. Random numbers are consumed time-major, so a longer run with the
/// same seed reproduces the shorter run as its prefix.
pub fn simulate(params: &DgpParams, seed: u64) -> Result<Simulation> {
    params.validate()?;
    if params.periods == 0 {
        return Err(Error::InvalidInput("periods must be at least 1".into()));
    }
    let n = params.n;
    let mut rng = substream(seed, 1);
    let mut state = FactorState { f: params.mu.clone(), sigma2: params.stationary_variance() };
    let mut next = state.clone();
    let mut u = vec![0.0; n];

    let mut factors = Vec::with_capacity(params.periods);
    let mut returns = Vec::with_capacity(params.periods);
    let mut sigma2 = Vec::with_capacity(params.periods);
    for t in 0..params.burn_in + params.periods {
        for x in u.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        params.step(&state, &u, &mut next);
        std::mem::swap(&mut state, &mut next);
        let r: Vec<f64> = state
            .f
            .iter()
            .map(|f| params.return_scale * f.sin() + params.noise_amplitude * (2.0 * rng.random::<f64>() - 1.0))
            .collect();
        if t >= params.burn_in {
            factors.push(state.f.iter().map(|&f| vec![f]).collect::<Vec<_>>());
            returns.push(r);
            sigma2.push(state.sigma2.clone());
        }
    }

    let dates = business_days(default_start_date(), params.periods);
    let assets: Vec<String> = (0..n).map(|j| format!("A{j:04}")).collect();
    Ok(Simulation {
        factors: FactorPanel::new(factors, vec!["factor_1".into()], dates.clone(), assets.clone())?,
        returns: ReturnPanel::new(returns, dates, assets)?,
        sigma2,
    })
}

/// One-step conditional mean `E_t[r_{t+1}]` by inner Monte Carlo over
/// `u_{t+1}`. The uniform perturbation has mean zero and is omitted.
pub fn oracle_expected_return(params: &DgpParams, state: &FactorState, draws: usize, seed: u64) -> Vec<f64> {
    let n = params.n;
    let mut rng = substream(seed, 2);
    let mut level = vec![0.0; n];
    let mut vol = vec![0.0; n];
    for j in 0..n {
        level[j] = params.mu[j] + params.phi[j].iter().zip(&state.f).map(|(a, b)| a * b).sum::<f64>();
        vol[j] = (params.alpha[j] + params.beta[j] * state.sigma2[j] + params.gamma[j] * state.f[j] * state.f[j]).sqrt();
    }
    let mut acc = vec![0.0; n];
    let mut u = vec![0.0; n];
    for _ in 0..draws.max(1) {
        for x in u.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        for j in 0..n {
            let eps: f64 = params.p[j][..=j].iter().zip(&u).map(|(a, b)| a * b).sum();
            acc[j] += (level[j] + vol[j] * eps).sin();
        }
    }
    let scale = params.return_scale / draws.max(1) as f64;
    acc.iter().map(|a| a * scale).collect()
}
