//! Dataset ingestion, preprocessing, and a synthetic domain-shift
//! generator for desk-scale experiments.
//!
//! Two interchange formats are supported:
//!
//! - dense CSV: UTF-8, comma-separated, `.` decimal point, an optional
//!   single `#`-prefixed header line, LF or CRLF endings, one sample per
//!   row, optionally one column holding positive integer labels;
//! - dense binary: magic bytes `BDA1`, little-endian `u32` row count,
//!   `u32` column count, `u8` has-labels flag, row-major `f64` features,
//!   then (if flagged) `u32` labels.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write as _};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::types::{Label, LabeledDomain, UnlabeledDomain};

const BINARY_MAGIC: &[u8; 4] = b"BDA1";

/// On-disk encoding of a dataset file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    DenseCsv,
    DenseBinary,
}

/// Sniffs the format from the leading magic bytes; anything not starting
/// with the binary magic is treated as CSV.
pub fn detect_format(path: &Path) -> Result<FileFormat> {
    let mut file = File::open(path)?;
    let mut magic = [0u8; 4];
    match file.read_exact(&mut magic) {
        Ok(()) if &magic == BINARY_MAGIC => Ok(FileFormat::DenseBinary),
        _ => Ok(FileFormat::DenseCsv),
    }
}

/// Parses a dense CSV file into raw rows. Blank lines are not rows and are
/// skipped; a `#` line is only allowed as the very first line.
fn parse_csv_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if line_no == 1 {
                continue;
            }
            return Err(Error::Parse {
                line: line_no,
                column: 1,
                message: "'#' header is only allowed on the first line".to_string(),
            });
        }
        let mut row = Vec::new();
        for (col_idx, field) in line.split(',').enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                column: col_idx + 1,
                message: format!("not a number: {:?}", field.trim()),
            })?;
            row.push(value);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::RaggedRow {
                    line: line_no,
                    expected: w,
                    actual: row.len(),
                });
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::BadFormat(format!(
            "{} contains no data rows",
            path.display()
        )));
    }
    Ok(rows)
}

fn label_from_value(value: f64, line: usize, column: usize) -> Result<Label> {
    if value.fract() != 0.0 || value < 1.0 || value > u32::MAX as f64 {
        return Err(Error::Parse {
            line,
            column,
            message: format!("label must be a positive integer, got {value}"),
        });
    }
    Ok(value as Label)
}

/// Splits parsed rows into a feature matrix and a label vector taken from
/// `label_column` (0-based; `None` means the last column).
fn split_rows(
    rows: Vec<Vec<f64>>,
    label_column: Option<usize>,
) -> Result<(DMatrix<f64>, Vec<Label>)> {
    let width = rows[0].len();
    if width < 2 {
        return Err(Error::BadFormat(
            "labeled CSV needs at least one feature column and one label column".to_string(),
        ));
    }
    let label_col = label_column.unwrap_or(width - 1);
    if label_col >= width {
        return Err(Error::BadFormat(format!(
            "label column {label_col} out of range for {width} columns"
        )));
    }
    let mut labels = Vec::with_capacity(rows.len());
    let mut features = DMatrix::zeros(rows.len(), width - 1);
    for (i, row) in rows.iter().enumerate() {
        labels.push(label_from_value(row[label_col], i + 1, label_col + 1)?);
        let mut f = 0;
        for (j, &v) in row.iter().enumerate() {
            if j != label_col {
                features[(i, f)] = v;
                f += 1;
            }
        }
    }
    Ok((features, labels))
}

fn rows_to_matrix(rows: Vec<Vec<f64>>) -> DMatrix<f64> {
    let (r, c) = (rows.len(), rows[0].len());
    DMatrix::from_fn(r, c, |i, j| rows[i][j])
}

/// Loads a labeled dataset from dense CSV. `label_column` is 0-based;
/// `None` takes the last column.
pub fn load_labeled_csv(path: &Path, label_column: Option<usize>) -> Result<LabeledDomain> {
    let (features, labels) = split_rows(parse_csv_rows(path)?, label_column)?;
    LabeledDomain::new(features, labels)
}

/// Loads an unlabeled dataset (every column is a feature) from dense CSV.
pub fn load_unlabeled_csv(path: &Path) -> Result<UnlabeledDomain> {
    UnlabeledDomain::new(rows_to_matrix(parse_csv_rows(path)?))
}

/// Loads a label vector: the last (or only) column of a CSV file, or the
/// label block of a labeled binary file.
pub fn load_labels(path: &Path) -> Result<Vec<Label>> {
    match detect_format(path)? {
        FileFormat::DenseBinary => {
            let (_, labels) = read_binary(path)?;
            labels.ok_or_else(|| {
                Error::BadFormat(format!("{} carries no label block", path.display()))
            })
        }
        FileFormat::DenseCsv => {
            let rows = parse_csv_rows(path)?;
            let last = rows[0].len() - 1;
            rows.iter()
                .enumerate()
                .map(|(i, row)| label_from_value(row[last], i + 1, last + 1))
                .collect()
        }
    }
}

/// Writes features (and labels appended as a trailing integer column) to
/// dense CSV. Floats use the shortest round-trippable decimal form.
pub fn write_dense_csv(
    path: &Path,
    features: &DMatrix<f64>,
    labels: Option<&[Label]>,
) -> Result<()> {
    if let Some(labels) = labels {
        if labels.len() != features.nrows() {
            return Err(Error::LengthMismatch {
                left: features.nrows(),
                right: labels.len(),
            });
        }
    }
    let mut out = BufWriter::new(File::create(path)?);
    for i in 0..features.nrows() {
        let mut fields: Vec<String> = (0..features.ncols())
            .map(|j| features[(i, j)].to_string())
            .collect();
        if let Some(labels) = labels {
            fields.push(labels[i].to_string());
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Writes the dense binary format.
pub fn write_binary(path: &Path, features: &DMatrix<f64>, labels: Option<&[Label]>) -> Result<()> {
    if let Some(labels) = labels {
        if labels.len() != features.nrows() {
            return Err(Error::LengthMismatch {
                left: features.nrows(),
                right: labels.len(),
            });
        }
    }
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(BINARY_MAGIC)?;
    out.write_u32::<LittleEndian>(features.nrows() as u32)?;
    out.write_u32::<LittleEndian>(features.ncols() as u32)?;
    out.write_u8(labels.is_some() as u8)?;
    for i in 0..features.nrows() {
        for j in 0..features.ncols() {
            out.write_f64::<LittleEndian>(features[(i, j)])?;
        }
    }
    if let Some(labels) = labels {
        for &l in labels {
            out.write_u32::<LittleEndian>(l as u32)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads the dense binary format back into a feature matrix and the
/// optional label vector.
pub fn read_binary(path: &Path) -> Result<(DMatrix<f64>, Option<Vec<Label>>)> {
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::BadFormat(format!(
            "{} does not start with the dense-binary magic",
            path.display()
        )));
    }
    let rows = input.read_u32::<LittleEndian>()? as usize;
    let cols = input.read_u32::<LittleEndian>()? as usize;
    let has_labels = input.read_u8()? != 0;
    if rows == 0 || cols == 0 {
        return Err(Error::BadFormat("empty matrix in binary file".to_string()));
    }
    let mut features = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            features[(i, j)] = input.read_f64::<LittleEndian>()?;
        }
    }
    let labels = if has_labels {
        let mut labels = Vec::with_capacity(rows);
        for _ in 0..rows {
            labels.push(input.read_u32::<LittleEndian>()? as Label);
        }
        Some(labels)
    } else {
        None
    };
    Ok((features, labels))
}

/// Loads a labeled dataset from either format, sniffing by magic bytes.
pub fn load_labeled_auto(path: &Path, label_column: Option<usize>) -> Result<LabeledDomain> {
    match detect_format(path)? {
        FileFormat::DenseCsv => load_labeled_csv(path, label_column),
        FileFormat::DenseBinary => {
            let (features, labels) = read_binary(path)?;
            let labels = labels.ok_or_else(|| {
                Error::BadFormat(format!("{} carries no label block", path.display()))
            })?;
            LabeledDomain::new(features, labels)
        }
    }
}

/// Loads an unlabeled dataset from either format. A labeled binary file is
/// accepted with its labels ignored; every CSV column is a feature.
pub fn load_unlabeled_auto(path: &Path) -> Result<UnlabeledDomain> {
    match detect_format(path)? {
        FileFormat::DenseCsv => load_unlabeled_csv(path),
        FileFormat::DenseBinary => {
            let (features, _) = read_binary(path)?;
            UnlabeledDomain::new(features)
        }
    }
}

/// Standardizes each feature over the stacked source+target rows: mean 0,
/// population standard deviation 1. Columns that are constant across the
/// stack pass through unchanged.
pub fn zscore_joint(
    source: &DMatrix<f64>,
    target: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    assert_eq!(
        source.ncols(),
        target.ncols(),
        "source and target must share feature dimensions"
    );
    let total = (source.nrows() + target.nrows()) as f64;
    let mut out_s = source.clone();
    let mut out_t = target.clone();
    for j in 0..source.ncols() {
        let sum: f64 = source.column(j).sum() + target.column(j).sum();
        let mean = sum / total;
        let sq_sum: f64 = source
            .column(j)
            .iter()
            .chain(target.column(j).iter())
            .map(|v| (v - mean) * (v - mean))
            .sum();
        let std = (sq_sum / total).sqrt();
        if std <= 1e-12 * (1.0 + mean.abs()) {
            continue;
        }
        for v in out_s.column_mut(j).iter_mut() {
            *v = (*v - mean) / std;
        }
        for v in out_t.column_mut(j).iter_mut() {
            *v = (*v - mean) / std;
        }
    }
    (out_s, out_t)
}

/// Parameters of the Gaussian synthetic shift family: target class `c` is
/// drawn around `class_means[c] + marginal_shift + conditional_shifts[c]`,
/// source class `c` around `class_means[c]`, both with isotropic noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthShiftConfig {
    pub classes: usize,
    pub features: usize,
    /// Per-class source sample counts; every class needs at least one
    /// source sample.
    pub source_counts: Vec<usize>,
    /// Per-class target sample counts; zero leaves a class target-absent.
    pub target_counts: Vec<usize>,
    pub class_means: Vec<DVector<f64>>,
    pub marginal_shift: DVector<f64>,
    pub conditional_shifts: Vec<DVector<f64>>,
    /// Isotropic noise scale, > 0.
    pub noise: f64,
    pub seed: u64,
}

impl SynthShiftConfig {
    /// A ready-made family with axis-aligned class means: class `c`
    /// (0-based here) centers at `class_sep * (1 + c/D)` along axis
    /// `c mod D`; the marginal shift moves every class by
    /// `marginal_mag/sqrt(D)` in all coordinates; conditional shifts push
    /// class `c` along the dedicated axis `(C + c) mod D` (disjoint from
    /// every class-mean axis when `D >= 2C`, so suppressing a shifted
    /// direction never erases class separation) and are centered so their
    /// target-count-weighted mean is zero (a pure conditional shift leaves
    /// the target's overall mean in place).
    #[allow(clippy::too_many_arguments)]
    pub fn axis_aligned(
        classes: usize,
        features: usize,
        source_counts: Vec<usize>,
        target_counts: Vec<usize>,
        class_sep: f64,
        marginal_mag: f64,
        conditional_mag: f64,
        noise: f64,
        seed: u64,
    ) -> Self {
        let class_means = (0..classes)
            .map(|c| {
                let mut v = DVector::zeros(features);
                v[c % features] = class_sep * (1.0 + c as f64 / features as f64);
                v
            })
            .collect();
        let marginal_shift =
            DVector::from_element(features, marginal_mag / (features as f64).sqrt());
        let mut conditional_shifts: Vec<DVector<f64>> = (0..classes)
            .map(|c| {
                let mut v = DVector::zeros(features);
                v[(classes + c) % features] = conditional_mag;
                v
            })
            .collect();
        let total_target: usize = target_counts.iter().sum();
        if total_target > 0 {
            let mut weighted_mean = DVector::zeros(features);
            for (c, shift) in conditional_shifts.iter().enumerate() {
                weighted_mean += shift * (target_counts[c] as f64 / total_target as f64);
            }
            for shift in conditional_shifts.iter_mut() {
                *shift -= &weighted_mean;
            }
        }
        Self {
            classes,
            features,
            source_counts,
            target_counts,
            class_means,
            marginal_shift,
            conditional_shifts,
            noise,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::InvalidConfig(
                "at least two classes are required".to_string(),
            ));
        }
        if self.features == 0 {
            return Err(Error::InvalidConfig(
                "at least one feature is required".to_string(),
            ));
        }
        if self.source_counts.len() != self.classes
            || self.target_counts.len() != self.classes
            || self.class_means.len() != self.classes
            || self.conditional_shifts.len() != self.classes
        {
            return Err(Error::InvalidConfig(
                "per-class vectors must have one entry per class".to_string(),
            ));
        }
        if self.source_counts.contains(&0) {
            return Err(Error::InvalidConfig(
                "every class needs at least one source sample".to_string(),
            ));
        }
        if self.target_counts.iter().sum::<usize>() == 0 {
            return Err(Error::InvalidConfig(
                "the target domain must contain at least one sample".to_string(),
            ));
        }
        if self
            .class_means
            .iter()
            .chain(self.conditional_shifts.iter())
            .any(|v| v.len() != self.features)
            || self.marginal_shift.len() != self.features
        {
            return Err(Error::InvalidConfig(
                "mean and shift vectors must match the feature dimension".to_string(),
            ));
        }
        if self.noise <= 0.0 || self.noise.is_nan() {
            return Err(Error::InvalidConfig(format!(
                "noise must be positive, got {}",
                self.noise
            )));
        }
        Ok(())
    }
}

/// Draws a source/target pair from the Gaussian shift family. Sampling
/// order is fixed (source classes in order, then target classes), so a
/// given seed reproduces the same datasets bit for bit.
pub fn generate_shift(
    config: &SynthShiftConfig,
) -> Result<(LabeledDomain, UnlabeledDomain, Vec<Label>)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let sample_block =
        |count: usize, mean: &DVector<f64>, rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
            (0..count)
                .map(|_| {
                    (0..config.features)
                        .map(|f| {
                            let z: f64 = rng.sample(StandardNormal);
                            mean[f] + config.noise * z
                        })
                        .collect()
                })
                .collect()
        };

    let mut source_rows = Vec::new();
    let mut source_labels = Vec::new();
    for c in 0..config.classes {
        let rows = sample_block(config.source_counts[c], &config.class_means[c], &mut rng);
        for row in rows {
            source_rows.push(row);
            source_labels.push(c + 1);
        }
    }

    let mut target_rows = Vec::new();
    let mut target_labels = Vec::new();
    for c in 0..config.classes {
        let mean = &config.class_means[c] + &config.marginal_shift + &config.conditional_shifts[c];
        let rows = sample_block(config.target_counts[c], &mean, &mut rng);
        for row in rows {
            target_rows.push(row);
            target_labels.push(c + 1);
        }
    }

    let source = LabeledDomain::new(rows_to_matrix(source_rows), source_labels)?;
    let target = UnlabeledDomain::new(rows_to_matrix(target_rows))?;
    Ok((source, target, target_labels))
}
