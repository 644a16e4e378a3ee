//! Lloyd k-means with seeded k-means++ initialization.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub k: usize,
    pub centers: Vec<Vec<f64>>,
    /// Cluster index of every input point.
    pub assignment: Vec<usize>,
    /// Sum of squared distances from points to their assigned centers.
    pub inertia: f64,
    /// Inertia after each assignment step, in order.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

impl Clustering {
    /// Indices of the points assigned to cluster `index`.
    pub fn members(&self, index: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| (c == index).then_some(i))
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest center for `point`; ties go to the lowest index.
pub fn nearest_center(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = squared_distance(point, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign(points: &[Vec<f64>], centers: &[Vec<f64>], assignment: &mut [usize], dist: &mut [f64]) -> f64 {
    let mut inertia = 0.0;
    for (i, p) in points.iter().enumerate() {
        let (c, d) = nearest_center(p, centers);
        assignment[i] = c;
        dist[i] = d;
        inertia += d;
    }
    inertia
}

fn seed_centers(points: &[Vec<f64>], k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = substream(seed, 0);
    let mut centers = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..points.len())].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| squared_distance(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // all points coincide with existing centers
            rng.random_range(0..points.len())
        };
        let center = points[next].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, &center));
        }
        centers.push(center);
    }
    centers
}

/// Partitions `points` into `k` clusters.
///
/// Stops when the largest center shift falls below `tol` or after `max_iter`
/// Lloyd steps. The returned assignment is always the nearest-center
/// assignment for the returned centers.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize, tol: f64) -> Result<Clustering> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    if points.len() < k {
        return Err(Error::TooFewPoints { points: points.len(), k });
    }
    let dim = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, actual: p.len() });
    }

    let mut centers = seed_centers(points, k, seed);
    let mut assignment = vec![0usize; points.len()];
    let mut dist = vec![0.0; points.len()];
    let mut inertia = assign(points, &centers, &mut assignment, &mut dist);
    let mut history = vec![inertia];
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assignment) {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut shift: f64 = 0.0;
        let mut taken: Vec<usize> = Vec::new();
        for c in 0..k {
            let new_center = if counts[c] > 0 {
                sums[c].iter().map(|s| s / counts[c] as f64).collect::<Vec<_>>()
            } else {
                // empty cluster: move it onto the point farthest from its center
                let far = (0..points.len())
                    .filter(|i| !taken.contains(i))
                    .fold((0, -1.0), |acc, i| if dist[i] > acc.1 { (i, dist[i]) } else { acc })
                    .0;
                taken.push(far);
                dist[far] = 0.0;
                points[far].clone()
            };
            shift = shift.max(squared_distance(&centers[c], &new_center).sqrt());
            centers[c] = new_center;
        }
        let previous = assignment.clone();
        inertia = assign(points, &centers, &mut assignment, &mut dist);
        history.push(inertia);
        if shift < tol || previous == assignment {
            break;
        }
    }

    Ok(Clustering { k, centers, assignment, inertia, inertia_history: history, iterations })
}

/// Largest pairwise Euclidean distance within cluster `index`; zero for
/// clusters with fewer than two members.
pub fn cluster_diameter(clustering: &Clustering, points: &[Vec<f64>], index: usize) -> f64 {
    let members = clustering.members(index);
    let mut best: f64 = 0.0;
    for (a, &i) in members.iter().enumerate() {
        for &j in &members[a + 1..] {
            best = best.max(squared_distance(&points[i], &points[j]));
        }
    }
    best.sqrt()
}
