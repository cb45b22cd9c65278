//! Coefficient matrices that turn empirical distribution distances into
//! trace quadratic forms, plus the diagnostic distance itself.
//!
//! Every component matrix is the outer product of a single generating
//! vector, so it is symmetric, positive semidefinite, and rank <= 1 by
//! construction. The combined matrix mixes the marginal component with the
//! per-class components via the balance factor `mu` and is Frobenius-
//! normalized before optimization so the regularizer's effective strength
//! does not depend on sample counts.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::types::{label_histogram, Label};

/// Which distribution-distance term a matrix encodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MmdKind {
    /// Whole-domain (marginal) term.
    Marginal,
    /// Class-conditional term for one class.
    Conditional(Label),
    /// Prior-weighted class-conditional term for one class.
    Weighted(Label),
    /// `(1-mu) * marginal + mu * sum of class terms`, normalized.
    Combined { mu: f64 },
}

/// A symmetric `(n+m) x (n+m)` distribution-distance coefficient matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MmdMatrix {
    pub matrix: DMatrix<f64>,
    pub kind: MmdKind,
}

/// Per-class label proportions for both domains (target side estimated
/// from pseudo-labels). Entries are nonnegative and each vector sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassPriors {
    pub source: Vec<f64>,
    pub target: Vec<f64>,
}

impl ClassPriors {
    pub fn num_classes(&self) -> usize {
        self.source.len()
    }
}

/// Generating vector of the marginal matrix: `1/n` on source indices,
/// `-1/m` on target indices.
fn marginal_vector(n: usize, m: usize) -> DVector<f64> {
    let mut e = DVector::zeros(n + m);
    for i in 0..n {
        e[i] = 1.0 / n as f64;
    }
    for j in 0..m {
        e[n + j] = -1.0 / m as f64;
    }
    e
}

/// Generating vector of one class-conditional matrix: `scale_s` on source
/// samples of class `c`, `-scale_t` on target samples pseudo-labeled `c`.
/// Returns `None` when the class is missing on either side, in which case
/// the matrix is defined as all zeros for that iteration.
fn class_vector(
    source_labels: &[Label],
    target_pseudo: &[Label],
    c: Label,
    scale_s: impl Fn(usize) -> f64,
    scale_t: impl Fn(usize) -> f64,
) -> Option<DVector<f64>> {
    let n = source_labels.len();
    let m = target_pseudo.len();
    let n_c = source_labels.iter().filter(|&&l| l == c).count();
    let m_c = target_pseudo.iter().filter(|&&l| l == c).count();
    if n_c == 0 || m_c == 0 {
        return None;
    }
    let (s, t) = (scale_s(n_c), scale_t(m_c));
    let mut w = DVector::zeros(n + m);
    for i in 0..n {
        if source_labels[i] == c {
            w[i] = s;
        }
    }
    for j in 0..m {
        if target_pseudo[j] == c {
            w[n + j] = -t;
        }
    }
    Some(w)
}

fn outer(v: &DVector<f64>) -> DMatrix<f64> {
    v * v.transpose()
}

/// Marginal coefficient matrix: `1/n^2` on the source block, `1/m^2` on the
/// target block, `-1/(nm)` on the cross blocks.
pub fn build_m0(n: usize, m: usize) -> MmdMatrix {
    assert!(n >= 1 && m >= 1, "both domains must be non-empty");
    MmdMatrix {
        matrix: outer(&marginal_vector(n, m)),
        kind: MmdKind::Marginal,
    }
}

/// Class-conditional coefficient matrix for class `c`: `1/n_c^2`,
/// `1/m_c^2`, and `-1/(n_c m_c)` on the class index sets; all zeros when
/// the class is empty on either side.
pub fn build_mc(source_labels: &[Label], target_pseudo: &[Label], c: Label) -> MmdMatrix {
    let total = source_labels.len() + target_pseudo.len();
    let matrix = match class_vector(
        source_labels,
        target_pseudo,
        c,
        |n_c| 1.0 / n_c as f64,
        |m_c| 1.0 / m_c as f64,
    ) {
        Some(w) => outer(&w),
        None => DMatrix::zeros(total, total),
    };
    MmdMatrix {
        matrix,
        kind: MmdKind::Conditional(c),
    }
}

/// Per-class label proportions: `n_c/n` for the source, `m_c/m` for the
/// target pseudo-labels.
pub fn estimate_priors(
    source_labels: &[Label],
    target_pseudo: &[Label],
    num_classes: usize,
) -> ClassPriors {
    let to_prior = |labels: &[Label]| {
        let total = labels.len() as f64;
        label_histogram(labels, num_classes)
            .into_iter()
            .map(|count| count as f64 / total)
            .collect::<Vec<_>>()
    };
    ClassPriors {
        source: to_prior(source_labels),
        target: to_prior(target_pseudo),
    }
}

/// Prior-weighted class-conditional matrix for class `c`: diagonal blocks
/// `P_s(c)/n_c^2` and `P_t(c)/m_c^2`, cross blocks
/// `-sqrt(P_s(c) P_t(c))/(n_c m_c)`; all zeros when the class is empty on
/// either side.
pub fn build_wc(
    source_labels: &[Label],
    target_pseudo: &[Label],
    priors: &ClassPriors,
    c: Label,
) -> MmdMatrix {
    let total = source_labels.len() + target_pseudo.len();
    let p_s = priors.source[c - 1].max(0.0);
    let p_t = priors.target[c - 1].max(0.0);
    let matrix = match class_vector(
        source_labels,
        target_pseudo,
        c,
        |n_c| p_s.sqrt() / n_c as f64,
        |m_c| p_t.sqrt() / m_c as f64,
    ) {
        Some(w) => outer(&w),
        None => DMatrix::zeros(total, total),
    };
    MmdMatrix {
        matrix,
        kind: MmdKind::Weighted(c),
    }
}

/// `(1-mu) * m0 + mu * sum(class_matrices)`, then divided by its Frobenius
/// norm when that norm exceeds `1e-12`.
pub fn combine(mu: f64, m0: &MmdMatrix, class_matrices: &[MmdMatrix]) -> Result<MmdMatrix> {
    let dim = m0.matrix.nrows();
    for cm in class_matrices {
        if cm.matrix.nrows() != dim || cm.matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                context: "combined distribution matrix terms",
                expected: dim,
                actual: cm.matrix.nrows(),
            });
        }
    }
    let mut combined = &m0.matrix * (1.0 - mu);
    for cm in class_matrices {
        combined += &cm.matrix * mu;
    }
    normalize_frobenius(&mut combined);
    Ok(MmdMatrix {
        matrix: combined,
        kind: MmdKind::Combined { mu },
    })
}

/// Single-allocation construction of the normalized combined matrix from
/// label vectors, equal to [`combine`] over [`build_m0`] and per-class
/// [`build_mc`]/[`build_wc`] but without materializing the per-class
/// matrices. `weighted_priors` switches the class terms to their
/// prior-weighted form.
pub fn build_combined(
    mu: f64,
    source_labels: &[Label],
    target_pseudo: &[Label],
    num_classes: usize,
    weighted_priors: Option<&ClassPriors>,
) -> MmdMatrix {
    let n = source_labels.len();
    let m = target_pseudo.len();
    let total = n + m;
    let mut combined = DMatrix::zeros(total, total);
    let e = marginal_vector(n, m);
    combined.ger(1.0 - mu, &e, &e, 1.0);
    if mu > 0.0 {
        for c in 1..=num_classes {
            let w = match weighted_priors {
                Some(priors) => {
                    let p_s = priors.source[c - 1].max(0.0);
                    let p_t = priors.target[c - 1].max(0.0);
                    class_vector(
                        source_labels,
                        target_pseudo,
                        c,
                        |n_c| p_s.sqrt() / n_c as f64,
                        |m_c| p_t.sqrt() / m_c as f64,
                    )
                }
                None => class_vector(
                    source_labels,
                    target_pseudo,
                    c,
                    |n_c| 1.0 / n_c as f64,
                    |m_c| 1.0 / m_c as f64,
                ),
            };
            if let Some(w) = w {
                combined.ger(mu, &w, &w, 1.0);
            }
        }
    }
    normalize_frobenius(&mut combined);
    MmdMatrix {
        matrix: combined,
        kind: MmdKind::Combined { mu },
    }
}

fn normalize_frobenius(m: &mut DMatrix<f64>) {
    let norm = m.norm();
    if norm > 1e-12 {
        *m /= norm;
    }
}

/// Empirical distribution distance of projected samples: the `mu`-weighted
/// sum of the squared whole-domain mean difference and the per-class
/// squared mean differences (classes empty on either side are skipped).
///
/// Evaluated in explicit mean-difference form; equals the trace form
/// `tr(Z M Z^T)` with the UN-normalized combined matrix, so reported values
/// keep their distance meaning rather than the optimizer's normalized
/// scale. `projected` holds one column per sample, source columns first.
pub fn mmd_distance(
    projected: &DMatrix<f64>,
    source_labels: &[Label],
    target_pseudo: &[Label],
    mu: f64,
) -> f64 {
    let n = source_labels.len();
    let m = target_pseudo.len();
    assert_eq!(
        projected.ncols(),
        n + m,
        "projected columns must cover all source and target samples"
    );
    let num_classes = source_labels
        .iter()
        .chain(target_pseudo.iter())
        .copied()
        .max()
        .unwrap_or(0);

    let source_cols = 0..n;
    let target_cols = n..n + m;
    let mean_diff_sq = |s_idx: &[usize], t_idx: &[usize]| -> f64 {
        let d = projected.nrows();
        let mut diff = DVector::zeros(d);
        for &i in s_idx {
            diff += projected.column(i) / s_idx.len() as f64;
        }
        for &j in t_idx {
            diff -= projected.column(j) / t_idx.len() as f64;
        }
        diff.norm_squared()
    };

    let all_source: Vec<usize> = source_cols.collect();
    let all_target: Vec<usize> = target_cols.collect();
    let mut total = (1.0 - mu) * mean_diff_sq(&all_source, &all_target);

    for c in 1..=num_classes {
        let s_idx: Vec<usize> = (0..n).filter(|&i| source_labels[i] == c).collect();
        let t_idx: Vec<usize> = (0..m).filter(|&j| target_pseudo[j] == c).map(|j| n + j).collect();
        if s_idx.is_empty() || t_idx.is_empty() {
            continue;
        }
        total += mu * mean_diff_sq(&s_idx, &t_idx);
    }
    total
}

/// Trace quadratic form `tr(Z M Z^T)` with one projected sample per column
/// of `z`. This is the optimizer's view of the distance; with an
/// un-normalized combined matrix it equals [`mmd_distance`].
pub fn trace_form(z: &DMatrix<f64>, m: &DMatrix<f64>) -> f64 {
    assert_eq!(z.ncols(), m.nrows(), "sample counts must agree");
    let zm = z * m;
    let mut trace = 0.0;
    for i in 0..z.nrows() {
        trace += zm.row(i).dot(&z.row(i));
    }
    trace
}

/// Un-normalized combined matrix, used to cross-check the trace and
/// mean-difference forms of the distance.
pub fn build_combined_unnormalized(
    mu: f64,
    source_labels: &[Label],
    target_pseudo: &[Label],
    num_classes: usize,
    weighted_priors: Option<&ClassPriors>,
) -> DMatrix<f64> {
    let n = source_labels.len();
    let m = target_pseudo.len();
    let mut combined = DMatrix::zeros(n + m, n + m);
    let e = marginal_vector(n, m);
    combined.ger(1.0 - mu, &e, &e, 1.0);
    for c in 1..=num_classes {
        let w = match weighted_priors {
            Some(priors) => {
                let p_s = priors.source[c - 1].max(0.0);
                let p_t = priors.target[c - 1].max(0.0);
                class_vector(
                    source_labels,
                    target_pseudo,
                    c,
                    |n_c| p_s.sqrt() / n_c as f64,
                    |m_c| p_t.sqrt() / m_c as f64,
                )
            }
            None => class_vector(
                source_labels,
                target_pseudo,
                c,
                |n_c| 1.0 / n_c as f64,
                |m_c| 1.0 / m_c as f64,
            ),
        };
        if let Some(w) = w {
            combined.ger(mu, &w, &w, 1.0);
        }
    }
    combined
}
