//! Local outlier factor.
//!
//! LOF compares a point's local density to the density around its
//! neighbours: a score near 1 means "as dense as the neighbourhood", larger
//! means sparser (more outlying). The k-neighbourhood includes every point
//! at distance `<= kdist` — ties are kept, so it can hold more than `k`
//! points. Local reachability densities are capped at `1e12`, which keeps
//! scores finite on datasets with many duplicate rows (where k-distances
//! collapse to zero).

use crate::dataset::Features;
use crate::error::{Error, Result};

use super::{euclidean, kth_smallest};

/// Cap applied to local reachability densities, so duplicate-saturated
/// neighbourhoods produce finite scores.
const LRD_CAP: f64 = 1e12;

fn capped_lrd(mean_reach: f64) -> f64 {
    if mean_reach <= 1.0 / LRD_CAP {
        LRD_CAP
    } else {
        (1.0 / mean_reach).min(LRD_CAP)
    }
}

/// A fitted LOF scorer: the reference rows plus their cached k-distances,
/// neighbourhoods, reachability densities, and factors.
#[derive(Debug, Clone)]
pub struct LofModel {
    train: Features,
    k: usize,
    kdist: Vec<f64>,
    neighbours: Vec<Vec<u32>>,
    lrd: Vec<f64>,
    lof: Vec<f64>,
}

impl LofModel {
    /// Fit on a reference set of more than `k` rows.
    pub fn fit(train: &Features, k: usize) -> Result<LofModel> {
        let n = train.len();
        if n <= k {
            return Err(Error::InsufficientData(format!(
                "lof with k = {k} needs more than {k} rows, got {n}"
            )));
        }

        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = euclidean(train.row(i), train.row(j));
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }

        let mut kdist = vec![0.0; n];
        let mut neighbours: Vec<Vec<u32>> = vec![Vec::new(); n];
        for i in 0..n {
            let mut others: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist[i * n + j]).collect();
            kdist[i] = kth_smallest(&mut others, k);
            neighbours[i] = (0..n)
                .filter(|&j| j != i && dist[i * n + j] <= kdist[i])
                .map(|j| j as u32)
                .collect();
        }

        let lrd: Vec<f64> = (0..n)
            .map(|i| {
                let ns = &neighbours[i];
                let reach_sum: f64 = ns
                    .iter()
                    .map(|&o| dist[i * n + o as usize].max(kdist[o as usize]))
                    .sum();
                capped_lrd(reach_sum / ns.len() as f64)
            })
            .collect();

        let lof: Vec<f64> = (0..n)
            .map(|i| {
                let ns = &neighbours[i];
                let mean_lrd: f64 = ns.iter().map(|&o| lrd[o as usize]).sum::<f64>() / ns.len() as f64;
                mean_lrd / lrd[i]
            })
            .collect();

        Ok(LofModel {
            train: train.clone(),
            k,
            kdist,
            neighbours,
            lrd,
            lof,
        })
    }

    /// Dimensionality the model expects.
    pub fn dim(&self) -> usize {
        self.train.dim()
    }

    /// The factors of the reference rows themselves.
    pub fn fitted_lof(&self) -> &[f64] {
        &self.lof
    }

    /// LOF of a query.
    ///
    /// A query bitwise-equal to a reference row is that row: its fitted
    /// factor is returned directly. Other queries are scored against the
    /// full reference set.
    pub fn score(&self, x: &[f64]) -> f64 {
        let n = self.train.len();
        if let Some(i) = (0..n).find(|&i| self.train.row(i) == x) {
            return self.lof[i];
        }

        let dists: Vec<f64> = (0..n).map(|i| euclidean(self.train.row(i), x)).collect();
        let mut scratch = dists.clone();
        let kd = kth_smallest(&mut scratch, self.k);
        let nbrs: Vec<usize> = (0..n).filter(|&i| dists[i] <= kd).collect();
        let reach_sum: f64 = nbrs.iter().map(|&o| dists[o].max(self.kdist[o])).sum();
        let lrd_x = capped_lrd(reach_sum / nbrs.len() as f64);
        let mean_lrd: f64 = nbrs.iter().map(|&o| self.lrd[o]).sum::<f64>() / nbrs.len() as f64;
        mean_lrd / lrd_x
    }

    /// Neighbourhood sizes (ties included), exposed for audits.
    pub fn neighbourhood_sizes(&self) -> Vec<usize> {
        self.neighbours.iter().map(Vec::len).collect()
    }
}
