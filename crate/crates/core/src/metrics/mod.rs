//! Reconstruction metrics: coverage ratio, Chamfer distance and AUC.
//!
//! CR is one-sided (ground truth to reconstruction) and counts a ground-truth
//! point as covered when its nearest reconstructed point is within `tau`.
//! CD is the symmetric mean of the two mean nearest-neighbour distances, with
//! plain (not squared) Euclidean distances.

mod kdtree;

use std::collections::HashSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::Point;

pub use kdtree::KdTree;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("threshold tau must be positive, got {0}")]
    Tau(f64),
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("coverage curve is empty")]
    EmptyCurve,
}

/// Mean nearest-neighbour distance from each query point into `tree`.
fn mean_nn(tree: &KdTree, queries: &[Point]) -> f64 {
    let d: Vec<f64> = queries
        .par_iter()
        .map(|q| tree.nearest(q).map(|(_, d)| d).unwrap_or(f64::INFINITY))
        .collect();
    d.iter().sum::<f64>() / d.len() as f64
}

pub fn coverage_ratio(recon: &[Point], gt: &[Point], tau: f64) -> Result<f64, MetricError> {
    if !(tau > 0.0) {
        return Err(MetricError::Tau(tau));
    }
    if gt.is_empty() {
        return Err(MetricError::EmptyCloud);
    }
    if recon.is_empty() {
        return Ok(0.0);
    }
    let tree = KdTree::build(recon);
    let covered = gt
        .par_iter()
        .filter(|q| tree.nearest(q).is_some_and(|(_, d)| d <= tau))
        .count();
    Ok(covered as f64 / gt.len() as f64)
}

/// Symmetric Chamfer distance in meters.
pub fn chamfer_distance(a: &[Point], b: &[Point]) -> Result<f64, MetricError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::EmptyCloud);
    }
    let (ta, tb) = (KdTree::build(a), KdTree::build(b));
    Ok(0.5 * mean_nn(&tb, a) + 0.5 * mean_nn(&ta, b))
}

pub fn meters_to_cm(m: f64) -> f64 {
    m * 100.0
}

/// Mean of the per-step coverage values.
pub fn auc(curve: &[f64]) -> Result<f64, MetricError> {
    if curve.is_empty() {
        return Err(MetricError::EmptyCurve);
    }
    Ok(curve.iter().sum::<f64>() / curve.len() as f64)
}

/// Incremental CR: keeps a covered flag per ground-truth point and updates
/// it from newly added reconstruction points only. After any sequence of
/// `add` calls, [`ratio`](Self::ratio) equals [`coverage_ratio`] over the
/// union of everything added.
#[derive(Clone, Debug)]
pub struct CoverageTracker {
    tree: KdTree,
    covered: Vec<bool>,
    count: usize,
    tau: f64,
}

impl CoverageTracker {
    pub fn new(gt: &[Point], tau: f64) -> Result<Self, MetricError> {
        if !(tau > 0.0) {
            return Err(MetricError::Tau(tau));
        }
        if gt.is_empty() {
            return Err(MetricError::EmptyCloud);
        }
        Ok(CoverageTracker {
            tree: KdTree::build(gt),
            covered: vec![false; gt.len()],
            count: 0,
            tau,
        })
    }

    pub fn add(&mut self, recon: &[Point]) {
        for p in recon {
            let covered = &mut self.covered;
            let count = &mut self.count;
            self.tree.within(p, self.tau, |i| {
                if !covered[i] {
                    covered[i] = true;
                    *count += 1;
                }
            });
        }
    }

    pub fn ratio(&self) -> f64 {
        self.count as f64 / self.covered.len() as f64
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

/// Reconstruction cloud thinned on a hash grid: the first point to land in
/// each `cell`-sized cube is kept, later ones are dropped. Insertion order is
/// preserved, so the result is deterministic.
#[derive(Clone, Debug)]
pub struct ReconCloud {
    cell: f64,
    seen: HashSet<[i64; 3]>,
    points: Vec<Point>,
}

impl ReconCloud {
    pub fn new(cell: f64) -> Self {
        assert!(cell > 0.0, "cell size must be positive");
        ReconCloud {
            cell,
            seen: HashSet::new(),
            points: Vec::new(),
        }
    }

    /// Adds points and returns the ones that were kept.
    pub fn extend(&mut self, pts: &[Point]) -> &[Point] {
        let before = self.points.len();
        for p in pts {
            let key = [0, 1, 2].map(|a| (p[a] / self.cell).floor() as i64);
            if self.seen.insert(key) {
                self.points.push(*p);
            }
        }
        &self.points[before..]
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
