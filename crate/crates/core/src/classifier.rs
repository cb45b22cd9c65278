//! Nearest-neighbor prediction for initial soft labels, per-iteration
//! refinement, and final evaluation.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::types::Label;

/// Reference set for nearest-neighbor prediction: one reference point per
/// column, one label per point.
#[derive(Debug, Clone, PartialEq)]
pub struct NnModel {
    points: DMatrix<f64>,
    labels: Vec<Label>,
}

impl NnModel {
    /// `points` holds one reference point per column.
    pub fn new(points: DMatrix<f64>, labels: Vec<Label>) -> Result<Self> {
        if points.ncols() != labels.len() {
            return Err(Error::LengthMismatch {
                left: points.ncols(),
                right: labels.len(),
            });
        }
        if points.ncols() == 0 {
            return Err(Error::EmptyDomain);
        }
        Ok(Self { points, labels })
    }

    pub fn num_references(&self) -> usize {
        self.points.ncols()
    }
}

/// Labels each query column with the majority label among its `k` nearest
/// references under Euclidean distance. Distance ties and vote ties both
/// resolve toward the lowest reference index, so the prediction is a pure
/// deterministic function of its inputs.
pub fn knn_predict(model: &NnModel, queries: &DMatrix<f64>, k: usize) -> Result<Vec<Label>> {
    if queries.nrows() != model.points.nrows() {
        return Err(Error::DimensionMismatch {
            context: "query vs reference dimensions",
            expected: model.points.nrows(),
            actual: queries.nrows(),
        });
    }
    if k == 0 || k > model.num_references() {
        return Err(Error::KTooLarge {
            k,
            available: model.num_references(),
        });
    }

    let predict_one = |q: usize| -> Label {
        let query = queries.column(q);
        if k == 1 {
            // Fast path: single scan for the minimum; strict `<` keeps the
            // lowest index on ties.
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for r in 0..model.num_references() {
                let d = (query - model.points.column(r)).norm_squared();
                if d < best_d {
                    best_d = d;
                    best = r;
                }
            }
            return model.labels[best];
        }

        let mut dists: Vec<(f64, usize)> = (0..model.num_references())
            .map(|r| ((query - model.points.column(r)).norm_squared(), r))
            .collect();
        dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        let max_label = model.labels.iter().copied().max().unwrap_or(1);
        let mut votes = vec![0usize; max_label + 1];
        for &(_, r) in dists.iter().take(k) {
            votes[model.labels[r]] += 1;
        }
        let top_votes = *votes.iter().max().unwrap();
        // Among tied classes, the winner is the one whose representative
        // appears first in (distance, index) order.
        dists
            .iter()
            .take(k)
            .map(|&(_, r)| model.labels[r])
            .find(|&l| votes[l] == top_votes)
            .expect("k >= 1 guarantees a winner")
    };

    #[cfg(feature = "rayon")]
    {
        use rayon::prelude::*;
        Ok((0..queries.ncols())
            .into_par_iter()
            .map(predict_one)
            .collect())
    }
    #[cfg(not(feature = "rayon"))]
    {
        Ok((0..queries.ncols()).map(predict_one).collect())
    }
}

/// Fraction of positions where the two label vectors agree, in `[0, 1]`.
pub fn accuracy(predicted: &[Label], truth: &[Label]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    let matches = predicted
        .iter()
        .zip(truth)
        .filter(|(p, t)| p == t)
        .count();
    Ok(matches as f64 / predicted.len() as f64)
}
