//! Loading of the datasets named by the command line and resolution of all
//! defaults into the concrete configuration echoed in every report.

use crate::{CommonArgs, FormatArg, KernelArg};
use bda_core::data_io::{load_labeled_auto, load_labels, load_unlabeled_auto};
use bda_core::types::{AdaptConfig, KernelChoice, Label, LabeledDomain, UnlabeledDomain};
use bda_core::{Error, Result};
use serde::Serialize;

/// Everything a run needs in memory: validated domains, optional truth, and
/// the fully resolved adaptation configuration.
pub struct LoadedTask {
    pub source: LabeledDomain,
    pub target: UnlabeledDomain,
    pub truth: Option<Vec<Label>>,
    pub base_config: AdaptConfig,
}

/// Prefixes a load error with the file it came from, so a report that names
/// two or three input files never produces an ambiguous message.
fn annotate(path: &std::path::Path, err: Error) -> Error {
    Error::Io(std::io::Error::other(format!("{}: {}", path.display(), err)))
}

pub fn load_task(common: &CommonArgs) -> Result<LoadedTask> {
    let source = load_labeled_auto(&common.source, None).map_err(|e| annotate(&common.source, e))?;
    let target = load_unlabeled_auto(&common.target).map_err(|e| annotate(&common.target, e))?;
    let truth = match &common.truth {
        Some(path) => {
            let labels = load_labels(path).map_err(|e| annotate(path, e))?;
            if labels.len() != target.num_samples() {
                return Err(Error::LengthMismatch {
                    left: labels.len(),
                    right: target.num_samples(),
                });
            }
            Some(labels)
        }
        None => None,
    };

    let kernel = resolve_kernel(common, source.num_features())?;
    let base_config = AdaptConfig {
        mu: common.mu,
        lambda: common.lambda,
        dim: common.dim,
        kernel,
        iterations: common.iters,
        weighted: common.weighted,
        ..AdaptConfig::default()
    };
    base_config.validate()?;

    Ok(LoadedTask {
        source,
        target,
        truth,
        base_config,
    })
}

fn resolve_kernel(common: &CommonArgs, num_features: usize) -> Result<KernelChoice> {
    match common.kernel {
        KernelArg::Primal => Ok(KernelChoice::Primal),
        KernelArg::Linear => Ok(KernelChoice::Linear),
        KernelArg::Rbf => {
            let gamma = match common.gamma {
                Some(g) => g,
                None => 1.0 / num_features as f64,
            };
            if gamma <= 0.0 {
                return Err(Error::NonpositiveGamma(gamma));
            }
            Ok(KernelChoice::Rbf { gamma })
        }
    }
}

/// Full resolved manifest, embedded in every report so a report is
/// re-runnable from its own config echo.
#[derive(Serialize)]
pub struct ConfigEcho {
    pub source: String,
    pub target: String,
    pub truth: Option<String>,
    pub methods: Vec<&'static str>,
    pub mu: f64,
    pub grid: Vec<f64>,
    pub lambda: f64,
    pub dim: usize,
    pub iterations: usize,
    pub kernel: KernelChoice,
    pub weighted: bool,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub format: &'static str,
    pub out: String,
}

impl ConfigEcho {
    pub fn new(
        common: &CommonArgs,
        methods: Vec<&'static str>,
        grid: &[f64],
        resolved: &AdaptConfig,
    ) -> Self {
        ConfigEcho {
            source: common.source.display().to_string(),
            target: common.target.display().to_string(),
            truth: common.truth.as_ref().map(|p| p.display().to_string()),
            methods,
            mu: resolved.mu,
            grid: grid.to_vec(),
            lambda: resolved.lambda,
            dim: resolved.dim,
            iterations: resolved.iterations,
            kernel: resolved.kernel,
            weighted: resolved.weighted,
            seed: common.seed,
            workers: common.workers,
            format: match common.format {
                FormatArg::Json => "json",
                FormatArg::Csv => "csv",
            },
            out: common.out.clone(),
        }
    }
}
