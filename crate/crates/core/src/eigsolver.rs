//! Symmetric-definite pencil solver for the regularized trace
//! minimization: find the d columns of A minimizing tr(A' S A) subject to
//! A' B A = I.
//!
//! B (the centered scatter) is singular, so the raw pencil S a = theta B a
//! has infinite eigenvalues. S is positive definite (the caller adds the
//! regularizer), so the problem is inverted through S's Cholesky factor:
//! the d smallest finite theta correspond to the d largest eigenvalues of
//! the bounded symmetric matrix L^-1 B L^-T.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// A learned projection basis with the pencil eigenvalues it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// One column per retained direction; `basis' * B * basis = I`.
    pub basis: DMatrix<f64>,
    /// Pencil eigenvalues theta, ascending, one per basis column.
    pub eigenvalues: Vec<f64>,
}

impl Projection {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

/// Eigenvalues of the transformed problem below this fraction of the
/// largest are treated as numerically zero (directions outside B's range).
const RANK_TOLERANCE: f64 = 1e-10;

/// Solves `S a = theta B a` for the `d` smallest finite theta.
///
/// `s` must be symmetric positive definite (callers regularize with
/// lambda*I first); `b` symmetric positive semidefinite. On a Cholesky
/// failure, `ridge * trace(S)/dim` is added to S's diagonal and the
/// factorization retried once before giving up.
///
/// Errors: [`Error::NotPositiveDefinite`] when S cannot be factored even
/// after the ridge retry; [`Error::RankDeficientB`] when B's numerical
/// rank cannot support `d` constraint-orthonormal directions.
pub fn solve_projection(
    s: &DMatrix<f64>,
    b: &DMatrix<f64>,
    d: usize,
    ridge: f64,
) -> Result<Projection> {
    let dim = s.nrows();
    assert_eq!(s.ncols(), dim, "S must be square");
    assert_eq!(b.nrows(), dim, "S and B must have equal dimensions");
    assert_eq!(b.ncols(), dim, "B must be square");
    assert!(d >= 1, "at least one projection direction is required");
    if d > dim {
        return Err(Error::RankDeficientB {
            rank: dim,
            requested: d,
        });
    }

    let chol = match Cholesky::new(s.clone()) {
        Some(c) => c,
        None => {
            let scale = s.trace().abs() / dim as f64;
            let added = ridge * if scale > 0.0 { scale } else { 1.0 };
            let mut conditioned = s.clone();
            for i in 0..dim {
                conditioned[(i, i)] += added;
            }
            Cholesky::new(conditioned).ok_or(Error::NotPositiveDefinite)?
        }
    };
    let l = chol.l();

    // C = L^-1 B L^-T, symmetrized against rounding skew.
    let t1 = l
        .solve_lower_triangular(b)
        .ok_or(Error::NotPositiveDefinite)?;
    let c = l
        .solve_lower_triangular(&t1.transpose())
        .ok_or(Error::NotPositiveDefinite)?;
    let c = (&c + c.transpose()) * 0.5;

    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .expect("symmetric eigenvalues are finite")
    });
    let nu_max = eig.eigenvalues[order[0]];
    let rank = order
        .iter()
        .take_while(|&&i| eig.eigenvalues[i] > RANK_TOLERANCE * nu_max.max(0.0) && eig.eigenvalues[i] > 0.0)
        .count();
    if rank < d {
        return Err(Error::RankDeficientB { rank, requested: d });
    }

    // Map back: a = L^-T y / sqrt(nu) gives a' B a = 1 and theta = 1/nu.
    let mut selected = DMatrix::zeros(dim, d);
    let mut eigenvalues = Vec::with_capacity(d);
    for (k, &idx) in order.iter().take(d).enumerate() {
        let nu = eig.eigenvalues[idx];
        selected.column_mut(k).copy_from(&eig.eigenvectors.column(idx));
        selected.column_mut(k).scale_mut(1.0 / nu.sqrt());
        eigenvalues.push(1.0 / nu);
    }
    let lt = l.transpose();
    let mut basis = lt
        .solve_upper_triangular(&selected)
        .ok_or(Error::NotPositiveDefinite)?;
    fix_column_signs(&mut basis);

    Ok(Projection { basis, eigenvalues })
}

/// Flips each column so its first meaningfully nonzero coordinate is
/// positive, making bases reproducible across runs and re-orderings.
pub fn fix_column_signs(basis: &mut DMatrix<f64>) {
    for mut col in basis.column_iter_mut() {
        let max_abs = col.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
        if max_abs == 0.0 {
            continue;
        }
        let lead = col.iter().find(|v| v.abs() > 1e-12 * max_abs);
        if let Some(&v) = lead {
            if v < 0.0 {
                col.neg_mut();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::centering_matrix;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_spd(rng: &mut impl Rng, dim: usize) -> DMatrix<f64> {
        let g = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
        &g * g.transpose() + DMatrix::identity(dim, dim) * 0.5
    }

    #[test]
    fn identity_pencil_returns_orthonormal_basis() {
        let s = DMatrix::identity(4, 4);
        let b = DMatrix::identity(4, 4);
        let p = solve_projection(&s, &b, 2, 1e-9).unwrap();
        assert_eq!(p.basis.ncols(), 2);
        let gram = p.basis.transpose() * &p.basis;
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(gram[(i, j)], want, epsilon = 1e-10);
            }
        }
        assert_abs_diff_eq!(p.eigenvalues[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(p.eigenvalues[1], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn diagonal_pencil_picks_smallest_eigenvalue_direction() {
        let s = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let b = DMatrix::identity(3, 3);
        let p = solve_projection(&s, &b, 1, 1e-9).unwrap();
        assert_abs_diff_eq!(p.eigenvalues[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(p.basis[(0, 0)], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(p.basis[(1, 0)], 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(p.basis[(2, 0)], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn random_pencil_satisfies_residual_and_constraint() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dim = 8;
        let s = random_spd(&mut rng, dim);
        let x = DMatrix::from_fn(dim, 12, |_, _| rng.random_range(-1.0..1.0));
        let h = centering_matrix(12);
        let b = &x * h * x.transpose();
        let b = (&b + b.transpose()) * 0.5;

        let p = solve_projection(&s, &b, 3, 1e-9).unwrap();

        let constraint = p.basis.transpose() * &b * &p.basis;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(constraint[(i, j)], want, epsilon = 1e-8);
            }
        }
        for k in 0..3 {
            let a = p.basis.column(k);
            let residual = &s * a - &b * a * p.eigenvalues[k];
            assert!(residual.norm() <= 1e-8 * s.norm().max(1.0));
        }
    }

    #[test]
    fn eigenvalues_are_ascending_and_objective_is_monotone_in_d() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let dim = 10;
        let s = random_spd(&mut rng, dim);
        let b = random_spd(&mut rng, dim);
        let p4 = solve_projection(&s, &b, 4, 1e-9).unwrap();
        let p5 = solve_projection(&s, &b, 5, 1e-9).unwrap();
        for w in p5.eigenvalues.windows(2) {
            assert!(w[0] <= w[1] + 1e-12);
        }
        let obj = |p: &Projection| (p.basis.transpose() * &s * &p.basis).trace();
        assert!(obj(&p4) <= obj(&p5) + 1e-9);
    }

    #[test]
    fn identical_inputs_solve_identically() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let s = random_spd(&mut rng, 6);
        let b = random_spd(&mut rng, 6);
        let p1 = solve_projection(&s, &b, 3, 1e-9).unwrap();
        let p2 = solve_projection(&s, &b, 3, 1e-9).unwrap();
        for (a, b) in p1.eigenvalues.iter().zip(&p2.eigenvalues) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert_eq!(p1.basis, p2.basis);
    }

    #[test]
    fn rank_deficient_b_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_spd(&mut rng, 5);
        // Rank-1 B: a single outer product.
        let v = nalgebra::DVector::from_fn(5, |_, _| rng.random_range(0.5..1.0));
        let b = &v * v.transpose();
        match solve_projection(&s, &b, 3, 1e-9) {
            Err(Error::RankDeficientB { rank, requested }) => {
                assert_eq!(rank, 1);
                assert_eq!(requested, 3);
            }
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn requesting_more_directions_than_the_space_has_fails() {
        let s = DMatrix::identity(3, 3);
        let b = DMatrix::identity(3, 3);
        assert!(matches!(
            solve_projection(&s, &b, 4, 1e-9),
            Err(Error::RankDeficientB { .. })
        ));
    }

    #[test]
    fn indefinite_s_is_rejected() {
        let s = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -2.0]));
        let b = DMatrix::identity(2, 2);
        assert!(matches!(
            solve_projection(&s, &b, 1, 1e-9),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn near_singular_s_recovers_via_ridge_retry() {
        // S is PSD with an exactly zero eigenvalue; the plain Cholesky
        // fails but the ridge retry conditions it enough to factor.
        let v = nalgebra::DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let s = &v * v.transpose();
        let b = DMatrix::identity(3, 3);
        let p = solve_projection(&s, &b, 1, 1e-6);
        // Either outcome is acceptable numerically, but it must not panic;
        // with the ridge the factorization succeeds.
        assert!(p.is_ok());
    }

    #[test]
    fn sign_convention_makes_leading_coordinate_positive() {
        let mut basis = DMatrix::from_column_slice(3, 2, &[-0.5, 0.2, 0.1, 0.0, -0.3, 0.9]);
        fix_column_signs(&mut basis);
        assert!(basis[(0, 0)] > 0.0);
        assert_abs_diff_eq!(basis[(1, 0)], -0.2, epsilon = 1e-15);
        // Second column's first entry is exactly zero; the first
        // meaningful coordinate is row 1.
        assert!(basis[(1, 1)] > 0.0);
        assert_abs_diff_eq!(basis[(2, 1)], -0.9, epsilon = 1e-15);
    }
}
