//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use simfolio::panel::ReturnPanel;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// `b . w - w' A w` with `A` symmetric positive definite.
#[derive(Debug, Clone)]
pub struct ConcaveQuadratic {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl ConcaveQuadratic {
    pub fn random(n: usize, seed: u64) -> Self {
        let mut r = rng(seed);
        let l: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = (0..n).map(|k| l[i][k] * l[j][k]).sum::<f64>() + if i == j { 0.1 } else { 0.0 };
            }
        }
        let b = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        Self { a, b }
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        let n = w.len();
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += w[i] * self.a[i][j] * w[j];
            }
        }
        self.b.iter().zip(w).map(|(b, x)| b * x).sum::<f64>() - quad
    }
}

/// Gaussian elimination with partial pivoting.
pub fn solve(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].abs().partial_cmp(&m[y][col].abs()).unwrap())?;
        if m[piv][col].abs() < 1e-14 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for c in col..n {
                m[row][c] -= f * m[col][c];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| m[row][c] * x[c]).sum();
        x[row] = (rhs[row] - s) / m[row][row];
    }
    Some(x)
}

/// Exact maximum of a concave quadratic over the closed simplex by
/// enumerating supports and solving each face's KKT system.
pub fn exact_simplex_max(q: &ConcaveQuadratic) -> (Vec<f64>, f64) {
    let n = q.b.len();
    let mut best = (vec![], f64::NEG_INFINITY);
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let s = support.len();
        let mut m = vec![vec![0.0; s + 1]; s + 1];
        let mut rhs = vec![0.0; s + 1];
        for (r, &i) in support.iter().enumerate() {
            for (c, &j) in support.iter().enumerate() {
                m[r][c] = 2.0 * q.a[i][j];
            }
            m[r][s] = 1.0;
            m[s][r] = 1.0;
            rhs[r] = q.b[i];
        }
        rhs[s] = 1.0;
        if let Some(x) = solve(m, rhs) {
            if x[..s].iter().all(|&v| v >= -1e-12) {
                let mut w = vec![0.0; n];
                for (r, &i) in support.iter().enumerate() {
                    w[i] = x[r].max(0.0);
                }
                let v = q.value(&w);
                if v > best.1 {
                    best = (w, v);
                }
            }
        }
    }
    best
}

/// Exhaustive search over the simplex grid with spacing `1/steps`.
pub fn grid_simplex_max(n: usize, steps: usize, f: &mut dyn FnMut(&[f64]) -> f64) -> (Vec<f64>, f64) {
    let mut best = (vec![], f64::NEG_INFINITY);
    let mut counts = vec![0usize; n];
    fn rec(
        j: usize,
        remaining: usize,
        steps: usize,
        counts: &mut Vec<usize>,
        f: &mut dyn FnMut(&[f64]) -> f64,
        best: &mut (Vec<f64>, f64),
    ) {
        let n = counts.len();
        if j == n - 1 {
            counts[j] = remaining;
            let w: Vec<f64> = counts.iter().map(|&c| c as f64 / steps as f64).collect();
            let v = f(&w);
            if v > best.1 {
                *best = (w, v);
            }
            return;
        }
        for c in 0..=remaining {
            counts[j] = c;
            rec(j + 1, remaining - c, steps, counts, f, best);
        }
    }
    rec(0, steps, steps, &mut counts, f, &mut best);
    best
}

pub fn dates(len: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
    (0..len).map(|i| start + chrono::Days::new(i as u64)).collect()
}

/// Random panel with returns in (-0.05, 0.05).
pub fn random_panel(t: usize, n: usize, seed: u64) -> ReturnPanel {
    let mut r = rng(seed);
    let rows = (0..t).map(|_| (0..n).map(|_| r.random_range(-0.05..0.05)).collect()).collect();
    ReturnPanel::new(rows, dates(t), (0..n).map(|j| format!("S{j}")).collect()).unwrap()
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Independent metric implementation.
pub fn oracle_metrics(v: &[f64], ppy: f64) -> [f64; 6] {
    let x: Vec<f64> = (1..v.len()).map(|t| v[t] / v[t - 1] - 1.0).collect();
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    let down = x.iter().filter(|r| **r < 0.0).map(|r| r * r).sum::<f64>() / n;
    let mut mdd: f64 = 0.0;
    for t in 0..v.len() {
        let peak = v[..=t].iter().cloned().fold(f64::MIN, f64::max);
        mdd = mdd.max(1.0 - v[t] / peak);
    }
    let ann = mean * ppy;
    [ann, var.sqrt() * ppy.sqrt(), ann / (var.sqrt() * ppy.sqrt()), ann / (down.sqrt() * ppy.sqrt()), mdd, ann / mdd]
}
