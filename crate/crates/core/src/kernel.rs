//! Input representations for the optimizer: the stacked primal feature
//! matrix, linear/RBF kernel matrices, and the centering matrix.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::types::{LabeledDomain, UnlabeledDomain};

/// Layout of an [`InputMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputMode {
    /// Raw features, one column per sample: `features x (n+m)`.
    Primal,
    /// Gram matrix over all samples: `(n+m) x (n+m)`.
    Kernelized,
}

/// The matrix the optimizer works on, either raw stacked features or a
/// kernel matrix over all samples. Columns are ordered source-first in
/// both modes.
#[derive(Debug, Clone, PartialEq)]
pub struct InputMatrix {
    pub data: DMatrix<f64>,
    pub mode: InputMode,
}

impl InputMatrix {
    /// Number of samples covered (n+m); equal to the column count in both
    /// modes.
    pub fn num_samples(&self) -> usize {
        self.data.ncols()
    }
}

/// Stacks source and target into a `features x (n+m)` primal matrix whose
/// first n columns are the source samples (order preserved) and last m
/// columns the target samples.
pub fn stack_domains(source: &LabeledDomain, target: &UnlabeledDomain) -> Result<InputMatrix> {
    crate::types::validate_pair(source, target)?;
    let d = source.num_features();
    let n = source.num_samples();
    let m = target.num_samples();
    let mut data = DMatrix::zeros(d, n + m);
    for i in 0..n {
        data.column_mut(i).copy_from(&source.features().row(i).transpose());
    }
    for j in 0..m {
        data.column_mut(n + j)
            .copy_from(&target.features().row(j).transpose());
    }
    Ok(InputMatrix {
        data,
        mode: InputMode::Primal,
    })
}

/// Gram matrix of dot products, `K[i,j] = <sample_i, sample_j>`.
///
/// The product is symmetrized explicitly so downstream symmetric
/// eigensolvers never see rounding skew.
pub fn linear_kernel(x: &InputMatrix) -> Result<InputMatrix> {
    require_primal(x)?;
    let k = x.data.transpose() * &x.data;
    Ok(InputMatrix {
        data: symmetrize(k),
        mode: InputMode::Kernelized,
    })
}

/// Gaussian kernel `K[i,j] = exp(-gamma * ||sample_i - sample_j||^2)`.
///
/// Squared distances come from the Gram-matrix identity
/// `||a-b||^2 = ||a||^2 + ||b||^2 - 2<a,b>`, clamped at zero against
/// cancellation, and the diagonal is set to exactly 1.
pub fn rbf_kernel(x: &InputMatrix, gamma: f64) -> Result<InputMatrix> {
    require_primal(x)?;
    if gamma <= 0.0 || gamma.is_nan() {
        return Err(Error::NonpositiveGamma(gamma));
    }
    let t = x.num_samples();
    let gram = x.data.transpose() * &x.data;
    let mut k = DMatrix::zeros(t, t);
    for j in 0..t {
        for i in 0..t {
            if i == j {
                k[(i, j)] = 1.0;
            } else {
                let d2 = (gram[(i, i)] + gram[(j, j)] - 2.0 * gram[(i, j)]).max(0.0);
                k[(i, j)] = (-gamma * d2).exp();
            }
        }
    }
    Ok(InputMatrix {
        data: symmetrize(k),
        mode: InputMode::Kernelized,
    })
}

/// Centering matrix `H = I - (1/total) J` over all n+m samples; symmetric,
/// idempotent, and annihilates the constant vector.
pub fn centering_matrix(total: usize) -> DMatrix<f64> {
    assert!(total >= 2, "centering needs at least two samples");
    let inv = 1.0 / total as f64;
    DMatrix::from_fn(total, total, |i, j| {
        if i == j {
            1.0 - inv
        } else {
            -inv
        }
    })
}

fn require_primal(x: &InputMatrix) -> Result<()> {
    if x.mode != InputMode::Primal {
        return Err(Error::InvalidConfig(
            "kernel construction expects primal (feature-major) input".to_string(),
        ));
    }
    Ok(())
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}
