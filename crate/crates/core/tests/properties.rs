//! Randomized invariant checks for the library's algebraic building blocks:
//! kernel symmetry and range, centering idempotence, MMD matrix structure and
//! the trace/direct-form identity, eigensolver constraint satisfaction,
//! nearest-neighbor isometry invariance, file round trips, and
//! standardization statistics.

use bda_core::classifier::{knn_predict, NnModel};
use bda_core::data_io::{
    read_binary, write_binary, write_dense_csv, zscore_joint, FileFormat,
};
use bda_core::kernel::{centering_matrix, linear_kernel, rbf_kernel, InputMatrix, InputMode};
use bda_core::mmd::{build_combined, build_combined_unnormalized, mmd_distance, trace_form};
use bda_core::solve_projection;
use bda_core::types::Label;
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Row-major matrix of finite values with the given shape.
fn matrix_strategy(
    rows: usize,
    cols: usize,
    range: std::ops::Range<f64>,
) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(range, rows * cols)
        .prop_map(move |v| DMatrix::from_row_slice(rows, cols, &v))
}

/// Labels in 1..=classes with every class present at least once.
fn full_label_strategy(len: usize, classes: usize) -> impl Strategy<Value = Vec<Label>> {
    proptest::collection::vec(1..=classes, len).prop_filter(
        "each class must appear",
        move |labels| (1..=classes).all(|c| labels.contains(&c)),
    )
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn linear_kernel_is_symmetric(
        data in matrix_strategy(3, 8, -10.0..10.0),
    ) {
        let input = InputMatrix { data, mode: InputMode::Primal };
        let k = linear_kernel(&input).unwrap();
        prop_assert_eq!(k.data.nrows(), 8);
        prop_assert_eq!(k.data.ncols(), 8);
        for i in 0..8 {
            for j in 0..8 {
                prop_assert_eq!(k.data[(i, j)], k.data[(j, i)]);
            }
        }
    }

    #[test]
    fn rbf_kernel_is_symmetric_with_unit_diagonal_and_bounded_entries(
        data in matrix_strategy(3, 8, -10.0..10.0),
        gamma in 1e-3..2.0f64,
    ) {
        let input = InputMatrix { data, mode: InputMode::Primal };
        let k = rbf_kernel(&input, gamma).unwrap();
        for i in 0..8 {
            prop_assert_eq!(k.data[(i, i)], 1.0);
            for j in 0..8 {
                prop_assert_eq!(k.data[(i, j)], k.data[(j, i)]);
                // exp(-gamma * d^2) may underflow to exactly 0 for far pairs.
                prop_assert!(k.data[(i, j)] >= 0.0 && k.data[(i, j)] <= 1.0);
            }
        }
    }

    #[test]
    fn centering_matrix_is_idempotent_and_kills_constants(total in 2usize..30) {
        let h = centering_matrix(total);
        let hh = &h * &h;
        for i in 0..total {
            for j in 0..total {
                prop_assert!((hh[(i, j)] - h[(i, j)]).abs() <= 1e-12);
            }
        }
        let ones = DMatrix::from_element(total, 1, 1.0);
        let centered = &h * ones;
        for i in 0..total {
            prop_assert!(centered[(i, 0)].abs() <= 1e-12);
        }
    }

    #[test]
    fn combined_matrix_is_symmetric_unit_norm_with_zero_row_sums(
        source_labels in full_label_strategy(8, 3),
        target_labels in full_label_strategy(6, 3),
        mu in 0.0..=1.0f64,
    ) {
        let m = build_combined(mu, &source_labels, &target_labels, 3, None);
        let total = 14;
        prop_assert_eq!(m.matrix.nrows(), total);

        let mut frob = 0.0;
        for i in 0..total {
            let mut row_sum = 0.0;
            for j in 0..total {
                prop_assert!((m.matrix[(i, j)] - m.matrix[(j, i)]).abs() <= 1e-12);
                row_sum += m.matrix[(i, j)];
                frob += m.matrix[(i, j)] * m.matrix[(i, j)];
            }
            // Every generating vector has entries summing to zero when both
            // sides are populated, so rows of the combination sum to zero.
            prop_assert!(row_sum.abs() <= 1e-9, "row {} sums to {}", i, row_sum);
        }
        prop_assert!((frob.sqrt() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn mmd_trace_form_matches_direct_mean_differences(
        projected in matrix_strategy(3, 14, -5.0..5.0),
        source_labels in full_label_strategy(8, 3),
        target_labels in full_label_strategy(6, 3),
        mu in 0.0..=1.0f64,
    ) {
        let direct = mmd_distance(&projected, &source_labels, &target_labels, mu);
        let m = build_combined_unnormalized(mu, &source_labels, &target_labels, 3, None);
        let via_trace = trace_form(&projected, &m);
        let scale = 1.0 + direct.abs();
        prop_assert!(
            (direct - via_trace).abs() <= 1e-10 * scale,
            "direct {} vs trace {}",
            direct,
            via_trace
        );
        prop_assert!(direct >= -1e-12);
    }

    #[test]
    fn projection_satisfies_variance_constraint(
        x in matrix_strategy(3, 12, -5.0..5.0),
        source_labels in full_label_strategy(7, 2),
        target_labels in full_label_strategy(5, 2),
        mu in 0.0..=1.0f64,
    ) {
        let total = 12;
        let h = centering_matrix(total);
        let b_raw = &x * h * x.transpose();
        let b = (&b_raw + b_raw.transpose()) * 0.5;
        let m = build_combined(mu, &source_labels, &target_labels, 2, None);
        let s_raw = &x * &m.matrix * x.transpose();
        let mut s = (&s_raw + s_raw.transpose()) * 0.5;
        for i in 0..3 {
            s[(i, i)] += 0.1;
        }
        let solved = solve_projection(&s, &b, 2, 1e-9);
        prop_assume!(solved.is_ok());
        let projection = solved.unwrap();

        let gram = projection.basis.transpose() * &b * &projection.basis;
        for i in 0..2 {
            for j in 0..2 {
                let expected = if i == j { 1.0 } else { 0.0 };
                prop_assert!(
                    (gram[(i, j)] - expected).abs() <= 1e-6,
                    "constraint violation at ({},{}): {}",
                    i,
                    j,
                    gram[(i, j)]
                );
            }
        }
        // Reported pencil eigenvalues come out ascending.
        for w in projection.eigenvalues.windows(2) {
            prop_assert!(w[0] <= w[1] + 1e-12);
        }
    }

    #[test]
    fn nearest_neighbor_predictions_survive_orthogonal_maps(
        refs in matrix_strategy(10, 3, -8.0..8.0),
        queries in matrix_strategy(4, 3, -8.0..8.0),
        labels in full_label_strategy(10, 2),
        raw in matrix_strategy(3, 3, -1.0..1.0),
    ) {
        // Skip degenerate rotations and near-tied neighbor margins; an
        // isometry preserves exact distances but not floating-point ties.
        let qr = raw.qr();
        let q = qr.q();
        prop_assume!(q.determinant().abs() > 0.5);
        for qi in 0..4 {
            let query = queries.row(qi);
            let mut dists: Vec<f64> = (0..10)
                .map(|ri| (query - refs.row(ri)).norm_squared())
                .collect();
            dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
            prop_assume!(dists[1] - dists[0] > 1e-6 * (1.0 + dists[0]));
        }

        let model = NnModel::new(refs.transpose(), labels.clone()).unwrap();
        let base = knn_predict(&model, &queries.transpose(), 1).unwrap();

        let rotated_refs = &refs * &q;
        let rotated_queries = &queries * &q;
        let rotated_model = NnModel::new(rotated_refs.transpose(), labels).unwrap();
        let rotated = knn_predict(&rotated_model, &rotated_queries.transpose(), 1).unwrap();
        prop_assert_eq!(base, rotated);
    }

    #[test]
    fn csv_round_trip_preserves_features_and_labels(
        features in matrix_strategy(5, 3, -1e6..1e6),
        labels in full_label_strategy(5, 4),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("round.csv");
        write_dense_csv(&path, &features, Some(&labels)).unwrap();
        let domain = bda_core::data_io::load_labeled_csv(&path, None).unwrap();
        prop_assert_eq!(domain.features(), &features);
        prop_assert_eq!(domain.labels(), labels.as_slice());
    }

    #[test]
    fn binary_round_trip_is_bit_exact(
        features in matrix_strategy(4, 6, -1e12..1e12),
        labels in full_label_strategy(4, 3),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("round.bin");
        write_binary(&path, &features, Some(&labels)).unwrap();
        prop_assert_eq!(
            bda_core::data_io::detect_format(&path).unwrap(),
            FileFormat::DenseBinary
        );
        let (read_features, read_labels) = read_binary(&path).unwrap();
        prop_assert_eq!(read_features, features);
        prop_assert_eq!(read_labels, Some(labels));
    }

    #[test]
    fn joint_standardization_zeroes_means_and_normalizes_spread(
        source in matrix_strategy(6, 3, -50.0..50.0),
        target in matrix_strategy(4, 3, -50.0..50.0),
    ) {
        let (zs, zt) = zscore_joint(&source, &target);
        for col in 0..3 {
            let mut values: Vec<f64> = zs.column(col).iter().copied().collect();
            values.extend(zt.column(col).iter());
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;

            let raw: Vec<f64> = source
                .column(col)
                .iter()
                .chain(target.column(col).iter())
                .copied()
                .collect();
            let raw_mean = raw.iter().sum::<f64>() / n;
            let raw_var =
                raw.iter().map(|v| (v - raw_mean) * (v - raw_mean)).sum::<f64>() / n;
            if raw_var.sqrt() > 1e-12 * (1.0 + raw_mean.abs()) {
                prop_assert!(mean.abs() <= 1e-9);
                prop_assert!((var - 1.0).abs() <= 1e-6);
            }
        }

        // Standardizing an already-standardized pair changes nothing.
        let (zs2, zt2) = zscore_joint(&zs, &zt);
        for (a, b) in zs.iter().zip(zs2.iter()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        for (a, b) in zt.iter().zip(zt2.iter()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }
}
