//! Report documents and their JSON/CSV encodings.
//!
//! The JSON schema is versioned via `schema_version`; every document embeds
//! the fully resolved manifest so any report can be re-run from its own
//! config echo. Serialization is struct-ordered and therefore byte-stable
//! for identical inputs.

use crate::manifest::ConfigEcho;
use crate::FormatArg;
use bda_core::types::RunReport;
use serde::Serialize;
use std::fs::File;
use std::io::{self, Write};

pub const SCHEMA_VERSION: u32 = 1;

/// Outcome of one registry method inside a `run` document. Exactly one of
/// `report` and `error` is present.
#[derive(Serialize)]
pub struct MethodEntry {
    pub method: &'static str,
    /// Grid winner when the method swept the balance factor.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mmd_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<RunReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl MethodEntry {
    pub fn failed(method: &'static str, error: String) -> Self {
        MethodEntry {
            method,
            best_mu: None,
            accuracy: None,
            mmd_distance: None,
            report: None,
            error: Some(error),
        }
    }

    pub fn from_report(method: &'static str, best_mu: Option<f64>, report: RunReport) -> Self {
        MethodEntry {
            method,
            best_mu,
            accuracy: report.final_accuracy(),
            mmd_distance: report.final_mmd(),
            report: Some(report),
            error: None,
        }
    }
}

#[derive(Serialize)]
pub struct RunDocument {
    pub schema_version: u32,
    pub command: &'static str,
    pub config: ConfigEcho,
    pub reports: Vec<MethodEntry>,
}

/// One grid point of a `sweep` document. Exactly one of `report` and
/// `error` is present.
#[derive(Serialize)]
pub struct SweepEntry {
    pub mu: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    /// Per-iteration MMD distances, ready for plotting.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mmd_trace: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<RunReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Serialize)]
pub struct SweepDocument {
    pub schema_version: u32,
    pub command: &'static str,
    pub config: ConfigEcho,
    pub method: &'static str,
    pub curve: Vec<SweepEntry>,
}

/// Written when the command fails before producing any per-entry results
/// (unreadable files, invalid manifest), so scripts still get structured
/// output on the configured sink.
#[derive(Serialize)]
pub struct ErrorDocument {
    pub schema_version: u32,
    pub command: &'static str,
    pub error: String,
}

fn open_sink(out: &str) -> io::Result<Box<dyn Write>> {
    if out == "-" {
        Ok(Box::new(io::stdout().lock()))
    } else {
        Ok(Box::new(File::create(out)?))
    }
}

fn write_all(out: &str, body: &str) -> io::Result<()> {
    let mut sink = open_sink(out)?;
    sink.write_all(body.as_bytes())?;
    sink.flush()
}

pub fn write_json<T: Serialize>(out: &str, document: &T) -> io::Result<()> {
    let mut body = serde_json::to_string(document).expect("report types serialize infallibly");
    body.push('\n');
    write_all(out, &body)
}

pub const CSV_HEADER: &str = "method,mu,lambda,dim,iteration,accuracy,mmd_distance";

fn push_csv_rows(body: &mut String, method: &str, mu: f64, report: &RunReport) {
    for record in &report.per_iteration {
        let accuracy = match record.accuracy {
            Some(a) => a.to_string(),
            None => String::new(),
        };
        body.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            method,
            mu,
            report.config.lambda,
            report.config.dim,
            record.iteration,
            accuracy,
            record.mmd_distance
        ));
    }
}

/// One row per method per iteration; errored methods contribute no rows
/// (the exit code and JSON form carry the error detail).
pub fn run_csv(entries: &[MethodEntry]) -> String {
    let mut body = String::from(CSV_HEADER);
    body.push('\n');
    for entry in entries {
        if let Some(report) = &entry.report {
            push_csv_rows(&mut body, entry.method, report.config.mu, report);
        }
    }
    body
}

pub fn sweep_csv(method: &str, entries: &[SweepEntry]) -> String {
    let mut body = String::from(CSV_HEADER);
    body.push('\n');
    for entry in entries {
        if let Some(report) = &entry.report {
            push_csv_rows(&mut body, method, entry.mu, report);
        }
    }
    body
}

pub fn write_run(
    out: &str,
    format: FormatArg,
    document: &RunDocument,
) -> io::Result<()> {
    match format {
        FormatArg::Json => write_json(out, document),
        FormatArg::Csv => write_all(out, &run_csv(&document.reports)),
    }
}

pub fn write_sweep(
    out: &str,
    format: FormatArg,
    document: &SweepDocument,
) -> io::Result<()> {
    match format {
        FormatArg::Json => write_json(out, document),
        FormatArg::Csv => write_all(out, &sweep_csv(document.method, &document.curve)),
    }
}
