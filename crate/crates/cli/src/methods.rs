//! The method registry and the three subcommand drivers.
//!
//! Registry entries:
//! - `raw-1nn`: nearest neighbor on jointly standardized features.
//! - `pca`: nearest neighbor on a principal-component projection.
//! - `tca`: marginal-only adaptation (balance factor fixed at 0).
//! - `jda`: equal-weight adaptation (balance factor fixed at 0.5).
//! - `bda` / `wbda`: balanced adaptation (prior-weighted for wbda); when
//!   truth labels are available these sweep the grid and report the
//!   best-accuracy balance factor, ties toward the smaller value.

use crate::manifest::{load_task, ConfigEcho, LoadedTask};
use crate::report::{self, ErrorDocument, MethodEntry, RunDocument, SweepDocument, SweepEntry};
use crate::{GenArgs, MethodArg, RunArgs, SweepArgs};
use bda_core::classifier::{accuracy, knn_predict, NnModel};
use bda_core::data_io::{write_dense_csv, zscore_joint, SynthShiftConfig};
use bda_core::kernel::centering_matrix;
use bda_core::mmd::mmd_distance;
use bda_core::types::{
    label_histogram, AdaptConfig, IterationRecord, KernelChoice, Label, RunReport,
};
use bda_core::eigsolver::fix_column_signs;
use bda_core::{best_of_sweep, fit, sweep_runs, Error};
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use std::io::Write;

pub const DEFAULT_GRID: [f64; 11] = bda_core::DEFAULT_MU_GRID;

/// Stacks standardized source and target rows into one `features x (n+m)`
/// column-per-sample matrix, source first.
fn stack_standardized(zs: &DMatrix<f64>, zt: &DMatrix<f64>) -> DMatrix<f64> {
    let d = zs.ncols();
    let n = zs.nrows();
    let m = zt.nrows();
    let mut stacked = DMatrix::zeros(d, n + m);
    for i in 0..n {
        stacked.column_mut(i).copy_from(&zs.row(i).transpose());
    }
    for j in 0..m {
        stacked.column_mut(n + j).copy_from(&zt.row(j).transpose());
    }
    stacked
}

fn normalize_columns(matrix: &mut DMatrix<f64>) {
    for mut column in matrix.column_iter_mut() {
        let norm = column.norm();
        if norm > 1e-30 {
            column /= norm;
        }
    }
}

/// Builds the single-record report shared by the two no-adaptation
/// baselines: predictions, accuracy (when truth is known), and the MMD
/// diagnostic of the embedding those predictions were made in.
fn baseline_report(
    embedding: &DMatrix<f64>,
    task: &LoadedTask,
    dim: usize,
) -> bda_core::Result<RunReport> {
    let n = task.source.num_samples();
    let m = task.target.num_samples();
    let refs = embedding.columns(0, n).into_owned();
    let queries = embedding.columns(n, m).into_owned();
    let model = NnModel::new(refs, task.source.labels().to_vec())?;
    let predictions = knn_predict(&model, &queries, 1)?;
    let acc = match &task.truth {
        Some(truth) => Some(accuracy(&predictions, truth)?),
        None => None,
    };
    let distance = mmd_distance(
        embedding,
        task.source.labels(),
        &predictions,
        task.base_config.mu,
    );
    let counts = label_histogram(&predictions, task.source.num_classes());
    Ok(RunReport {
        per_iteration: vec![IterationRecord {
            iteration: 1,
            accuracy: acc,
            mmd_distance: distance,
            pseudo_label_counts: counts,
        }],
        final_pseudo_labels: predictions,
        config: AdaptConfig {
            dim,
            kernel: KernelChoice::Primal,
            iterations: 1,
            weighted: false,
            ..task.base_config.clone()
        },
    })
}

fn run_raw_1nn(task: &LoadedTask) -> bda_core::Result<RunReport> {
    let (zs, zt) = zscore_joint(task.source.features(), task.target.features());
    let stacked = stack_standardized(&zs, &zt);
    let dim = task.source.num_features();
    baseline_report(&stacked, task, dim)
}

fn run_pca(task: &LoadedTask) -> bda_core::Result<RunReport> {
    let (zs, zt) = zscore_joint(task.source.features(), task.target.features());
    let stacked = stack_standardized(&zs, &zt);
    let features = stacked.nrows();
    let total = stacked.ncols();
    let dim = task.base_config.dim.min(features);

    let centered = &stacked * centering_matrix(total);
    let cov_raw = &centered * centered.transpose() / total as f64;
    let cov = (&cov_raw + cov_raw.transpose()) * 0.5;
    let eigen = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..features).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .partial_cmp(&eigen.eigenvalues[a])
            .expect("covariance eigenvalues are finite")
    });

    let mut basis = DMatrix::zeros(features, dim);
    for (col, &idx) in order.iter().take(dim).enumerate() {
        basis.column_mut(col)
            .copy_from(&eigen.eigenvectors.column(idx));
    }
    fix_column_signs(&mut basis);

    let mut embedding = basis.transpose() * centered;
    normalize_columns(&mut embedding);
    baseline_report(&embedding, task, dim)
}

/// Sweeps the grid and returns the winning run (highest final accuracy,
/// ties toward the smaller balance factor) along with its grid value.
fn best_mu_run(
    task: &LoadedTask,
    grid: &[f64],
    weighted: bool,
    truth: &[Label],
) -> bda_core::Result<(f64, RunReport)> {
    let base = AdaptConfig {
        weighted,
        ..task.base_config.clone()
    };
    let runs = sweep_runs(&task.source, &task.target, &base, grid, Some(truth))?;
    let curve: Vec<(f64, f64)> = runs
        .iter()
        .map(|(mu, report)| {
            let acc = report
                .final_accuracy()
                .expect("accuracy is recorded whenever truth is supplied");
            (*mu, acc)
        })
        .collect();
    let (best_mu, _) = best_of_sweep(&curve).expect("the grid is validated non-empty");
    let winner = runs
        .into_iter()
        .find(|(mu, _)| *mu == best_mu)
        .expect("the winner came from this curve");
    Ok(winner)
}

fn fixed_fit(task: &LoadedTask, mu: f64, weighted: bool) -> bda_core::Result<RunReport> {
    let config = AdaptConfig {
        mu,
        weighted,
        ..task.base_config.clone()
    };
    let model = fit(&task.source, &task.target, &config, task.truth.as_deref())?;
    Ok(model.report)
}

fn execute_method(method: MethodArg, task: &LoadedTask, grid: &[f64]) -> MethodEntry {
    let name = method.name();
    let outcome = match method {
        MethodArg::RawNn => run_raw_1nn(task).map(|r| (None, r)),
        MethodArg::Pca => run_pca(task).map(|r| (None, r)),
        MethodArg::Tca => fixed_fit(task, 0.0, false).map(|r| (None, r)),
        MethodArg::Jda => fixed_fit(task, 0.5, false).map(|r| (None, r)),
        MethodArg::Bda | MethodArg::Wbda => {
            let weighted = method == MethodArg::Wbda;
            match &task.truth {
                Some(truth) => best_mu_run(task, grid, weighted, truth)
                    .map(|(mu, r)| (Some(mu), r)),
                None => fixed_fit(task, task.base_config.mu, weighted).map(|r| (None, r)),
            }
        }
    };
    match outcome {
        Ok((best_mu, report)) => MethodEntry::from_report(name, best_mu, report),
        Err(e) => MethodEntry::failed(name, e.to_string()),
    }
}

fn emit_error(out: &str, command: &'static str, error: String) -> u8 {
    let document = ErrorDocument {
        schema_version: report::SCHEMA_VERSION,
        command,
        error,
    };
    if let Err(io_err) = report::write_json(out, &document) {
        eprintln!("failed to write error report: {io_err}");
    }
    1
}

pub fn cmd_run(args: &RunArgs) -> u8 {
    let task = match load_task(&args.common) {
        Ok(task) => task,
        Err(e) => return emit_error(&args.common.out, "run", e.to_string()),
    };
    if args.methods.is_empty() {
        return emit_error(&args.common.out, "run", "no methods selected".into());
    }

    let entries: Vec<MethodEntry> = args
        .methods
        .par_iter()
        .map(|&method| execute_method(method, &task, &args.grid))
        .collect();

    let failed = entries.iter().any(|e| e.error.is_some());
    let document = RunDocument {
        schema_version: report::SCHEMA_VERSION,
        command: "run",
        config: ConfigEcho::new(
            &args.common,
            args.methods.iter().map(|m| m.name()).collect(),
            &args.grid,
            &task.base_config,
        ),
        reports: entries,
    };
    if let Err(io_err) = report::write_run(&args.common.out, args.common.format, &document) {
        eprintln!("failed to write report: {io_err}");
        return 1;
    }
    u8::from(failed)
}

pub fn cmd_sweep(args: &SweepArgs) -> u8 {
    let task = match load_task(&args.common) {
        Ok(task) => task,
        Err(e) => return emit_error(&args.common.out, "sweep", e.to_string()),
    };
    let truth = match &task.truth {
        Some(truth) => truth.clone(),
        None => {
            return emit_error(
                &args.common.out,
                "sweep",
                "sweep requires --truth to trace an accuracy curve".into(),
            )
        }
    };
    if args.grid.is_empty() {
        return emit_error(&args.common.out, "sweep", "empty grid".into());
    }

    let method = if args.common.weighted { "wbda" } else { "bda" };
    let entries: Vec<SweepEntry> = args
        .grid
        .par_iter()
        .map(|&mu| {
            let config = AdaptConfig {
                mu,
                ..task.base_config.clone()
            };
            match fit(&task.source, &task.target, &config, Some(&truth)) {
                Ok(model) => SweepEntry {
                    mu,
                    accuracy: model.report.final_accuracy(),
                    mmd_trace: Some(
                        model
                            .report
                            .per_iteration
                            .iter()
                            .map(|r| r.mmd_distance)
                            .collect(),
                    ),
                    report: Some(model.report),
                    error: None,
                },
                Err(e) => SweepEntry {
                    mu,
                    accuracy: None,
                    mmd_trace: None,
                    report: None,
                    error: Some(
                        Error::AtMu {
                            mu,
                            source: Box::new(e),
                        }
                        .to_string(),
                    ),
                },
            }
        })
        .collect();

    let failed = entries.iter().any(|e| e.error.is_some());
    let document = SweepDocument {
        schema_version: report::SCHEMA_VERSION,
        command: "sweep",
        config: ConfigEcho::new(&args.common, vec![method], &args.grid, &task.base_config),
        method,
        curve: entries,
    };
    if let Err(io_err) = report::write_sweep(&args.common.out, args.common.format, &document) {
        eprintln!("failed to write report: {io_err}");
        return 1;
    }
    u8::from(failed)
}

/// Converts prior fractions into exact per-class counts: `round(p * total)`
/// with the last class absorbing rounding drift so the counts always sum to
/// the requested total.
fn counts_from_priors(priors: &[f64], total: usize) -> Result<Vec<usize>, String> {
    if priors.is_empty() {
        return Err("empty prior list".into());
    }
    let sum: f64 = priors.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(format!("priors sum to {sum}, expected 1"));
    }
    let mut counts: Vec<usize> = priors
        .iter()
        .map(|p| (p * total as f64).round() as usize)
        .collect();
    let assigned: usize = counts[..counts.len() - 1].iter().sum();
    if assigned > total {
        return Err("prior rounding exceeds the requested total".into());
    }
    *counts.last_mut().expect("non-empty") = total - assigned;
    Ok(counts)
}

/// Samples drawn per class on each side when neither counts nor priors are
/// given.
const DEFAULT_COUNT_PER_CLASS: usize = 50;

fn resolve_counts(
    explicit: &Option<Vec<usize>>,
    priors: &Option<Vec<f64>>,
    total: Option<usize>,
    classes: usize,
) -> Result<Vec<usize>, String> {
    match (explicit, priors) {
        (Some(counts), _) => Ok(counts.clone()),
        (None, Some(p)) => {
            counts_from_priors(p, total.expect("clap enforces the paired total flag"))
        }
        (None, None) => Ok(vec![DEFAULT_COUNT_PER_CLASS; classes]),
    }
}

fn write_truth(path: &std::path::Path, truth: &[Label]) -> std::io::Result<()> {
    let mut body = String::new();
    for label in truth {
        body.push_str(&label.to_string());
        body.push('\n');
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(body.as_bytes())?;
    file.flush()
}

pub fn cmd_gen(args: &GenArgs) -> u8 {
    let fail = |message: String| -> u8 {
        eprintln!("{message}");
        1
    };

    let source_counts = match resolve_counts(
        &args.source_counts,
        &args.source_priors,
        args.source_total,
        args.classes,
    ) {
        Ok(counts) => counts,
        Err(e) => return fail(e),
    };
    let target_counts = match resolve_counts(
        &args.target_counts,
        &args.target_priors,
        args.target_total,
        args.classes,
    ) {
        Ok(counts) => counts,
        Err(e) => return fail(e),
    };

    let features = args.features.unwrap_or(args.classes * 2);
    let config = SynthShiftConfig::axis_aligned(
        args.classes,
        features,
        source_counts,
        target_counts,
        args.class_sep,
        args.marginal,
        args.conditional,
        args.noise,
        args.seed,
    );
    let (source, target, truth) = match bda_core::data_io::generate_shift(&config) {
        Ok(generated) => generated,
        Err(e) => return fail(e.to_string()),
    };

    if let Err(e) = write_dense_csv(&args.source_out, source.features(), Some(source.labels())) {
        return fail(format!("writing {}: {e}", args.source_out.display()));
    }
    if let Err(e) = write_dense_csv(&args.target_out, target.features(), None) {
        return fail(format!("writing {}: {e}", args.target_out.display()));
    }
    if let Err(e) = write_truth(&args.truth_out, &truth) {
        return fail(format!("writing {}: {e}", args.truth_out.display()));
    }
    0
}
