//! The end-to-end adaptation loop: assemble the objective, solve for the
//! projection, classify the target, refine pseudo-labels, repeat.
//!
//! One run executes exactly `config.iterations` rounds. Each round builds
//! the distribution-distance matrix from the current pseudo-labels (the
//! prior-weighted variant when `config.weighted` is set), solves the
//! regularized pencil for the projection, re-labels the target with 1-NN
//! in the unit-normalized projected space, and records diagnostics. The
//! `mu = 0` and `mu = 0.5` (unweighted) configurations recover the
//! marginal-only and equal-weight predecessors of this method.

use nalgebra::DMatrix;

use crate::classifier::{accuracy, knn_predict, NnModel};
use crate::eigsolver::{solve_projection, Projection};
use crate::error::{Error, Result};
use crate::kernel::{centering_matrix, linear_kernel, rbf_kernel, stack_domains, InputMode};
use crate::mmd::{build_combined, estimate_priors, mmd_distance};
use crate::types::{
    label_histogram, validate_pair, AdaptConfig, IterationRecord, KernelChoice, Label,
    LabeledDomain, RunReport, UnlabeledDomain,
};

/// Default search grid for the balance factor: 0 to 1 in steps of 0.1.
pub const DEFAULT_MU_GRID: [f64; 11] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

/// A fitted adaptation model: the projection, the matrix it applies to,
/// and the run's full diagnostic report.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptModel {
    pub projection: Projection,
    pub input_mode: InputMode,
    /// The matrix the projection multiplies: the z-scored stacked features
    /// in primal mode, the kernel matrix in kernelized mode. Kept so the
    /// embedding can be reproduced from the model alone.
    pub reference: DMatrix<f64>,
    /// Target pseudo-labels after the final iteration; length m.
    pub final_pseudo_labels: Vec<Label>,
    pub report: RunReport,
}

impl AdaptModel {
    /// Unit-normalized projected samples, one column per sample, source
    /// columns first.
    pub fn embedding(&self) -> DMatrix<f64> {
        let mut z = self.projection.basis.transpose() * &self.reference;
        normalize_columns(&mut z);
        z
    }
}

fn normalize_columns(z: &mut DMatrix<f64>) {
    for mut col in z.column_iter_mut() {
        let norm = col.norm();
        if norm > 1e-30 {
            col /= norm;
        }
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Runs the full adaptation loop.
///
/// When `truth` (the held-out target labels) is provided, each iteration
/// record carries the accuracy of that iteration's pseudo-labels;
/// otherwise accuracy is absent and only the distribution distance and
/// label histogram are reported.
pub fn fit(
    source: &LabeledDomain,
    target: &UnlabeledDomain,
    config: &AdaptConfig,
    truth: Option<&[Label]>,
) -> Result<AdaptModel> {
    validate_pair(source, target)?;
    config.validate()?;
    let n = source.num_samples();
    let m = target.num_samples();
    if let Some(t) = truth {
        if t.len() != m {
            return Err(Error::LengthMismatch {
                left: t.len(),
                right: m,
            });
        }
    }
    let num_classes = source.num_classes();
    let source_labels = source.labels();

    // Joint z-scoring, then the stacked feature-major matrix X.
    let (zs, zt) = crate::data_io::zscore_joint(source.features(), target.features());
    let z_source = LabeledDomain::new(zs, source_labels.to_vec())?;
    let z_target = UnlabeledDomain::new(zt)?;
    let x = stack_domains(&z_source, &z_target)?;

    // The matrix the optimizer sees: X itself or a kernel over it.
    let (reference, input_mode) = match config.kernel {
        KernelChoice::Primal => (x.data.clone(), InputMode::Primal),
        KernelChoice::Linear => (linear_kernel(&x)?.data, InputMode::Kernelized),
        KernelChoice::Rbf { gamma } => (rbf_kernel(&x, gamma)?.data, InputMode::Kernelized),
    };

    // Constraint matrix B = R H R'; constant across iterations.
    let h = centering_matrix(n + m);
    let b = symmetrize(&reference * &h * reference.transpose());
    drop(h);

    // Initial pseudo-labels: 1-NN from z-scored source to target features.
    let initial_refs = x.data.columns(0, n).into_owned();
    let initial_queries = x.data.columns(n, m).into_owned();
    let initial_model = NnModel::new(initial_refs, source_labels.to_vec())?;
    let mut pseudo = knn_predict(&initial_model, &initial_queries, 1)?;

    let mut per_iteration = Vec::with_capacity(config.iterations);
    let mut projection: Option<Projection> = None;

    for iteration in 1..=config.iterations {
        let priors = if config.weighted {
            Some(estimate_priors(source_labels, &pseudo, num_classes))
        } else {
            None
        };
        let combined = build_combined(
            config.mu,
            source_labels,
            &pseudo,
            num_classes,
            priors.as_ref(),
        );

        let mut s = symmetrize(&reference * &combined.matrix * reference.transpose());
        for i in 0..s.nrows() {
            s[(i, i)] += config.lambda;
        }

        let proj = solve_projection(&s, &b, config.dim, config.ridge)?;
        let mut z = proj.basis.transpose() * &reference;
        normalize_columns(&mut z);

        // Distance diagnostic uses the labels that built this iteration's
        // objective; the refinement below then produces the next labels.
        let distance = mmd_distance(&z, source_labels, &pseudo, config.mu);

        let refs = z.columns(0, n).into_owned();
        let queries = z.columns(n, m).into_owned();
        let model = NnModel::new(refs, source_labels.to_vec())?;
        pseudo = knn_predict(&model, &queries, 1)?;

        let acc = match truth {
            Some(t) => Some(accuracy(&pseudo, t)?),
            None => None,
        };
        per_iteration.push(IterationRecord {
            iteration,
            accuracy: acc,
            mmd_distance: distance,
            pseudo_label_counts: label_histogram(&pseudo, num_classes),
        });
        projection = Some(proj);
    }

    let projection = projection.expect("iterations >= 1 is enforced by config validation");
    Ok(AdaptModel {
        projection,
        input_mode,
        reference,
        final_pseudo_labels: pseudo.clone(),
        report: RunReport {
            per_iteration,
            final_pseudo_labels: pseudo,
            config: config.clone(),
        },
    })
}

/// Runs [`fit`] once per grid value with identical preprocessing and
/// returns the reports in grid order. Grid points run concurrently when
/// the `rayon` feature is enabled; output order is fixed either way.
pub fn sweep_runs(
    source: &LabeledDomain,
    target: &UnlabeledDomain,
    base_config: &AdaptConfig,
    grid: &[f64],
    truth: Option<&[Label]>,
) -> Result<Vec<(f64, RunReport)>> {
    for &mu in grid {
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::InvalidConfig(format!(
                "grid value {mu} lies outside [0, 1]"
            )));
        }
    }
    let run_one = |&mu: &f64| -> Result<(f64, RunReport)> {
        let config = AdaptConfig {
            mu,
            ..base_config.clone()
        };
        match fit(source, target, &config, truth) {
            Ok(model) => Ok((mu, model.report)),
            Err(e) => Err(Error::AtMu {
                mu,
                source: Box::new(e),
            }),
        }
    };

    #[cfg(feature = "rayon")]
    {
        use rayon::prelude::*;
        grid.par_iter().map(run_one).collect()
    }
    #[cfg(not(feature = "rayon"))]
    {
        grid.iter().map(run_one).collect()
    }
}

/// Sweeps the balance factor and reports `(mu, final accuracy)` pairs in
/// grid order. Requires the true target labels, since the curve is an
/// accuracy curve.
pub fn sweep_mu(
    source: &LabeledDomain,
    target: &UnlabeledDomain,
    base_config: &AdaptConfig,
    grid: &[f64],
    truth: &[Label],
) -> Result<Vec<(f64, f64)>> {
    let runs = sweep_runs(source, target, base_config, grid, Some(truth))?;
    Ok(runs
        .into_iter()
        .map(|(mu, report)| {
            let acc = report
                .final_accuracy()
                .expect("accuracy is recorded whenever truth is supplied");
            (mu, acc)
        })
        .collect())
}

/// Picks the sweep winner: highest accuracy, ties broken toward the
/// smaller balance factor (earlier grid position).
pub fn best_of_sweep(curve: &[(f64, f64)]) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for &(mu, acc) in curve {
        match best {
            None => best = Some((mu, acc)),
            Some((_, best_acc)) if acc > best_acc => best = Some((mu, acc)),
            _ => {}
        }
    }
    best
}

/// The equal-weight, unweighted configuration (`mu = 0.5`), provided as a
/// named entry point because it reproduces the joint-adaptation
/// predecessor method exactly.
pub fn special_case_jda(
    source: &LabeledDomain,
    target: &UnlabeledDomain,
    config: &AdaptConfig,
    truth: Option<&[Label]>,
) -> Result<AdaptModel> {
    let jda_config = AdaptConfig {
        mu: 0.5,
        weighted: false,
        ..config.clone()
    };
    fit(source, target, &jda_config, truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_io::{generate_shift, SynthShiftConfig};
    use approx::assert_abs_diff_eq;

    fn small_config(dim: usize, iterations: usize) -> AdaptConfig {
        AdaptConfig {
            dim,
            iterations,
            ..AdaptConfig::default()
        }
    }

    fn separated_task(seed: u64) -> (LabeledDomain, UnlabeledDomain, Vec<Label>) {
        let config = SynthShiftConfig::axis_aligned(
            2,
            4,
            vec![15, 15],
            vec![15, 15],
            4.0,
            0.0,
            0.0,
            0.4,
            seed,
        );
        generate_shift(&config).unwrap()
    }

    #[test]
    fn zero_shift_reaches_perfect_accuracy_and_zero_distance() {
        let (source, _, _) = separated_task(2);
        let target = UnlabeledDomain::new(source.features().clone()).unwrap();
        let truth = source.labels().to_vec();
        let config = small_config(2, 2);
        let model = fit(&source, &target, &config, Some(&truth)).unwrap();
        assert_eq!(model.report.per_iteration.len(), 2);
        for record in &model.report.per_iteration {
            assert_eq!(record.accuracy, Some(1.0));
            assert!(record.mmd_distance <= 1e-8, "mmd {}", record.mmd_distance);
            assert_eq!(record.pseudo_label_counts.iter().sum::<usize>(), 30);
        }
        assert_eq!(model.final_pseudo_labels, truth);
    }

    #[test]
    fn mu_zero_projection_ignores_source_labels() {
        let (source, target, _) = separated_task(5);
        let config = AdaptConfig {
            mu: 0.0,
            ..small_config(2, 3)
        };
        let model_a = fit(&source, &target, &config, None).unwrap();

        // Swap the two class labels; the marginal-only objective must not
        // notice.
        let swapped: Vec<Label> = source.labels().iter().map(|&l| 3 - l).collect();
        let relabeled = LabeledDomain::new(source.features().clone(), swapped).unwrap();
        let model_b = fit(&relabeled, &target, &config, None).unwrap();

        assert_eq!(model_a.projection.basis, model_b.projection.basis);
        for (a, b) in model_a
            .projection
            .eigenvalues
            .iter()
            .zip(&model_b.projection.eigenvalues)
        {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn fit_beats_raw_nearest_neighbor_on_shifted_task() {
        // Domain shift along class 1's own mean axis: after joint
        // standardization the shifted target class 2 lands where source
        // class 1 sits, so raw 1-NN degrades badly, while the adaptation can
        // drop that axis and separate the classes on the remaining one.
        let mut config = SynthShiftConfig::axis_aligned(
            2,
            8,
            vec![30, 30],
            vec![30, 30],
            3.0,
            0.0,
            0.0,
            0.8,
            7,
        );
        config.marginal_shift[0] = 3.5;
        let (source, target, truth) = generate_shift(&config).unwrap();

        // Raw baseline: 1-NN on the jointly standardized features.
        let (zs, zt) = crate::data_io::zscore_joint(source.features(), target.features());
        let raw_model = NnModel::new(zs.transpose(), source.labels().to_vec()).unwrap();
        let raw_pred = knn_predict(&raw_model, &zt.transpose(), 1).unwrap();
        let raw_acc = accuracy(&raw_pred, &truth).unwrap();

        let adapt_config = AdaptConfig {
            dim: 7,
            ..AdaptConfig::default()
        };
        let model = fit(&source, &target, &adapt_config, Some(&truth)).unwrap();
        let fit_acc = model.report.final_accuracy().unwrap();
        assert!(
            fit_acc > raw_acc,
            "adapted accuracy {fit_acc} should beat raw accuracy {raw_acc}"
        );
    }

    #[test]
    fn sweep_on_zero_shift_is_flat_at_one() {
        let (source, _, _) = separated_task(3);
        let target = UnlabeledDomain::new(source.features().clone()).unwrap();
        let truth = source.labels().to_vec();
        let curve = sweep_mu(&source, &target, &small_config(2, 2), &[0.0, 1.0], &truth).unwrap();
        assert_eq!(curve.len(), 2);
        assert_eq!(curve[0], (0.0, 1.0));
        assert_eq!(curve[1], (1.0, 1.0));
    }

    #[test]
    fn default_grid_has_eleven_points() {
        let (source, target, truth) = separated_task(4);
        let curve = sweep_mu(
            &source,
            &target,
            &small_config(2, 1),
            &DEFAULT_MU_GRID,
            &truth,
        )
        .unwrap();
        assert_eq!(curve.len(), 11);
        for (i, &(mu, _)) in curve.iter().enumerate() {
            assert_abs_diff_eq!(mu, i as f64 * 0.1, epsilon = 1e-12);
        }
    }

    #[test]
    fn sweep_rejects_out_of_range_grid_values() {
        let (source, target, truth) = separated_task(4);
        assert!(matches!(
            sweep_mu(&source, &target, &small_config(2, 1), &[0.5, 1.2], &truth),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn sweep_annotates_failures_with_the_offending_mu() {
        let (source, target, truth) = separated_task(4);
        // dim far beyond the constraint rank forces a solver error.
        let config = small_config(500, 1);
        match sweep_mu(&source, &target, &config, &[0.3], &truth) {
            Err(Error::AtMu { mu, source }) => {
                assert_abs_diff_eq!(mu, 0.3, epsilon = 1e-12);
                assert!(matches!(*source, Error::RankDeficientB { .. }));
            }
            other => panic!("expected annotated error, got {other:?}"),
        }
    }

    #[test]
    fn jda_entry_point_matches_explicit_configuration() {
        let (source, target, truth) = separated_task(6);
        let config = small_config(2, 3);
        let via_jda = special_case_jda(&source, &target, &config, Some(&truth)).unwrap();
        let explicit = AdaptConfig {
            mu: 0.5,
            weighted: false,
            ..config
        };
        let via_fit = fit(&source, &target, &explicit, Some(&truth)).unwrap();
        assert_eq!(via_jda.report, via_fit.report);
    }

    #[test]
    fn repeated_fits_are_identical() {
        let (source, target, truth) = separated_task(8);
        let config = AdaptConfig {
            weighted: true,
            ..small_config(3, 4)
        };
        let a = fit(&source, &target, &config, Some(&truth)).unwrap();
        let b = fit(&source, &target, &config, Some(&truth)).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.projection.basis, b.projection.basis);
        assert_eq!(a.final_pseudo_labels, b.final_pseudo_labels);
    }

    #[test]
    fn report_shape_is_exactly_t_iterations() {
        let (source, target, _) = separated_task(9);
        let config = small_config(2, 5);
        let model = fit(&source, &target, &config, None).unwrap();
        assert_eq!(model.report.per_iteration.len(), 5);
        for (i, record) in model.report.per_iteration.iter().enumerate() {
            assert_eq!(record.iteration, i + 1);
            assert_eq!(record.accuracy, None);
            assert_eq!(
                record.pseudo_label_counts.iter().sum::<usize>(),
                target.num_samples()
            );
        }
        assert_eq!(
            model.report.final_pseudo_labels,
            model.final_pseudo_labels
        );
        assert_eq!(model.projection.dim(), 2);
    }

    #[test]
    fn embedding_has_unit_columns() {
        let (source, target, _) = separated_task(10);
        let model = fit(&source, &target, &small_config(2, 2), None).unwrap();
        let z = model.embedding();
        assert_eq!(z.ncols(), source.num_samples() + target.num_samples());
        for col in z.column_iter() {
            assert_abs_diff_eq!(col.norm(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn kernel_modes_all_run() {
        let (source, target, truth) = separated_task(12);
        for kernel in [
            KernelChoice::Primal,
            KernelChoice::Linear,
            KernelChoice::Rbf { gamma: 0.25 },
        ] {
            let config = AdaptConfig {
                kernel,
                ..small_config(2, 2)
            };
            let model = fit(&source, &target, &config, Some(&truth)).unwrap();
            let expected_mode = match kernel {
                KernelChoice::Primal => InputMode::Primal,
                _ => InputMode::Kernelized,
            };
            assert_eq!(model.input_mode, expected_mode);
            assert!(model.report.final_accuracy().unwrap() > 0.5);
        }
    }

    #[test]
    fn truth_length_mismatch_is_rejected() {
        let (source, target, truth) = separated_task(13);
        let short = &truth[..truth.len() - 1];
        assert!(matches!(
            fit(&source, &target, &small_config(2, 1), Some(short)),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn best_of_sweep_prefers_smaller_mu_on_ties() {
        let curve = vec![(0.0, 0.8), (0.1, 0.9), (0.2, 0.9), (0.3, 0.85)];
        assert_eq!(best_of_sweep(&curve), Some((0.1, 0.9)));
        assert_eq!(best_of_sweep(&[]), None);
    }
}
