use std::path::Path;

use convrate::diagnostics::RateReport;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// One pass/fail decision, named after the inequality or threshold tested.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub threshold: String,
    pub value: f64,
    pub passed: bool,
}

impl Verdict {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            threshold: format!("<= {limit:e}"),
            value,
            passed: value <= limit,
        }
    }

    /// Passes when `count` is zero.
    pub fn none_of(name: impl Into<String>, count: usize) -> Self {
        Self {
            name: name.into(),
            threshold: "== 0 violations".into(),
            value: count as f64,
            passed: count == 0,
        }
    }

    pub fn tagged(mut self, estimated_fstar: bool) -> Self {
        if estimated_fstar {
            self.name.push_str(" [estimated-F*]");
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub config: String,
}

impl Provenance {
    pub fn new(config_text: &str) -> Self {
        Self {
            tool: "convrate".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: hex::encode(Sha256::digest(config_text.as_bytes())),
            config: config_text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FStar {
    pub value: f64,
    /// `known` or `estimated`.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub trace_file: String,
    pub snapshot_file: String,
    pub termination: String,
    pub records: usize,
    pub final_objective: f64,
    pub report: RateReport,
    pub verdicts: Vec<Verdict>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub grid: Vec<usize>,
    pub mean_delta: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_r_squared: Option<Vec<(usize, f64)>>,
    pub verdicts: Vec<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryDocument {
    pub provenance: Provenance,
    pub problem: String,
    pub solver: String,
    pub fstar: FStar,
    pub seeds: Vec<SeedSummary>,
    pub aggregate: Option<Aggregate>,
    pub notes: Vec<String>,
    pub passed: bool,
}

impl SummaryDocument {
    pub fn all_verdicts(&self) -> impl Iterator<Item = &Verdict> {
        self.seeds
            .iter()
            .flat_map(|s| s.verdicts.iter())
            .chain(self.aggregate.iter().flat_map(|a| a.verdicts.iter()))
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("summary types serialise");
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}
