//! Domain datasets, solver configuration, and run reports.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 1-based class label in `{1..=C}`.
pub type Label = usize;

/// A labeled dataset: one sample per row, one feature per column.
///
/// Construction validates the invariants once; the type is immutable
/// afterwards, so it can be shared read-only across workers.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDomain {
    features: DMatrix<f64>,
    labels: Vec<Label>,
}

impl LabeledDomain {
    /// Builds a labeled domain, rejecting empty data, label/row count
    /// mismatches, labels outside `{1..=C}` (with `C >= 2`), and
    /// non-finite feature values.
    pub fn new(features: DMatrix<f64>, labels: Vec<Label>) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::EmptyDomain);
        }
        if features.nrows() != labels.len() {
            return Err(Error::LengthMismatch {
                left: features.nrows(),
                right: labels.len(),
            });
        }
        check_finite(&features)?;
        check_labels(&labels)?;
        Ok(Self { features, labels })
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn num_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }

    /// Number of classes C, inferred as the maximum label present.
    pub fn num_classes(&self) -> usize {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    /// Per-class sample counts, indexed by `label - 1`.
    pub fn class_counts(&self) -> Vec<usize> {
        label_histogram(&self.labels, self.num_classes())
    }
}

/// An unlabeled dataset paired with a [`LabeledDomain`] source.
#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledDomain {
    features: DMatrix<f64>,
}

impl UnlabeledDomain {
    pub fn new(features: DMatrix<f64>) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::EmptyDomain);
        }
        check_finite(&features)?;
        Ok(Self { features })
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn num_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }
}

/// Counts labels into a length-`num_classes` histogram (index = label - 1).
pub fn label_histogram(labels: &[Label], num_classes: usize) -> Vec<usize> {
    let mut counts = vec![0usize; num_classes];
    for &l in labels {
        if l >= 1 && l <= num_classes {
            counts[l - 1] += 1;
        }
    }
    counts
}

fn check_finite(features: &DMatrix<f64>) -> Result<()> {
    for j in 0..features.ncols() {
        for i in 0..features.nrows() {
            if !features[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

fn check_labels(labels: &[Label]) -> Result<()> {
    let mut max = 0;
    for (i, &l) in labels.iter().enumerate() {
        if l < 1 {
            return Err(Error::BadLabel(format!(
                "label {l} at sample {i} is outside 1..=C"
            )));
        }
        max = max.max(l);
    }
    if max < 2 {
        return Err(Error::BadLabel(
            "at least two classes are required".to_string(),
        ));
    }
    Ok(())
}

/// Checks that a source/target pair can be adapted: matching feature
/// dimensions, both non-empty, source labels well-formed.
///
/// Pure: repeated calls on the same inputs give the same outcome.
pub fn validate_pair(source: &LabeledDomain, target: &UnlabeledDomain) -> Result<()> {
    if source.num_samples() == 0 || target.num_samples() == 0 {
        return Err(Error::EmptyDomain);
    }
    if source.num_features() != target.num_features() {
        return Err(Error::DimensionMismatch {
            context: "source vs target feature dimensions",
            expected: source.num_features(),
            actual: target.num_features(),
        });
    }
    check_labels(source.labels())
}

/// Input representation choice for the optimizer.
///
/// `Primal` feeds the stacked feature matrix directly; `Linear` and `Rbf`
/// solve in the kernelized `(n+m) x (n+m)` space. The reported experiments
/// use the linear kernel, so that is the default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    Primal,
    Linear,
    Rbf { gamma: f64 },
}

/// Full configuration for one adaptation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptConfig {
    /// Balance factor in `[0, 1]`: 0 adapts only the marginal
    /// distribution, 1 only the class-conditional distributions.
    pub mu: f64,
    /// Regularization strength, > 0.
    pub lambda: f64,
    /// Subspace dimension d.
    pub dim: usize,
    /// Input representation.
    pub kernel: KernelChoice,
    /// Number of pseudo-label refinement iterations T.
    pub iterations: usize,
    /// false = BDA, true = W-BDA (prior-weighted class matrices).
    pub weighted: bool,
    /// Scale of the last-resort diagonal conditioner: on Cholesky failure
    /// the solver adds `ridge * trace(S)/dim` to the diagonal and retries
    /// once.
    pub ridge: f64,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            mu: 0.5,
            lambda: 0.1,
            dim: 100,
            kernel: KernelChoice::Linear,
            iterations: 10,
            weighted: false,
            ridge: 1e-9,
        }
    }
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(Error::InvalidConfig(format!(
                "mu must lie in [0, 1], got {}",
                self.mu
            )));
        }
        if self.lambda <= 0.0 || self.lambda.is_nan() {
            return Err(Error::InvalidConfig(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if self.dim == 0 {
            return Err(Error::InvalidConfig("dim must be at least 1".to_string()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig(
                "iterations must be at least 1".to_string(),
            ));
        }
        if self.ridge <= 0.0 || self.ridge.is_nan() {
            return Err(Error::InvalidConfig(format!(
                "ridge must be positive, got {}",
                self.ridge
            )));
        }
        if let KernelChoice::Rbf { gamma } = self.kernel {
            if gamma <= 0.0 || gamma.is_nan() {
                return Err(Error::NonpositiveGamma(gamma));
            }
        }
        Ok(())
    }
}

/// One refinement iteration in a [`RunReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based iteration index.
    pub iteration: usize,
    /// Target accuracy of this iteration's pseudo-labels, present only
    /// when true target labels were supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    /// Mean-embedding MMD distance of the projected samples, evaluated
    /// with the un-normalized combined matrix (so values carry the
    /// empirical-distance meaning, not the solver's normalized scale).
    pub mmd_distance: f64,
    /// Histogram of the pseudo-labels produced by this iteration;
    /// sums to m.
    pub pseudo_label_counts: Vec<usize>,
}

/// Serialized record of a full adaptation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Exactly `config.iterations` entries.
    pub per_iteration: Vec<IterationRecord>,
    /// Pseudo-labels after the last iteration; length m.
    pub final_pseudo_labels: Vec<Label>,
    /// Echo of the configuration that produced this report.
    pub config: AdaptConfig,
}

impl RunReport {
    /// Accuracy recorded at the last iteration, if truth was supplied.
    pub fn final_accuracy(&self) -> Option<f64> {
        self.per_iteration.last().and_then(|r| r.accuracy)
    }

    pub fn final_mmd(&self) -> Option<f64> {
        self.per_iteration.last().map(|r| r.mmd_distance)
    }
}
