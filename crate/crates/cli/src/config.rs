//! Experiment configuration as flat `dotted.key = value` lines.
//!
//! ```text
//! problem = quadratic:dim=50,null=10,seed=7
//! solver = gd_fixed:alpha=inv_L
//! budget = 100000
//! seeds = 1,2,3
//! diagnostics.tail_ratio = 0.05
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use convrate::solvers::SnapshotPolicy;

use crate::error::{CliError, CliResult};
use crate::spec::{ProblemSpec, SolverSpec, X0Spec};

#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds {
    /// Bound on the final `k delta_k` over its maximum (deterministic runs).
    pub tail_ratio: f64,
    /// Same bound on the seed-mean gap for stochastic runs.
    pub stochastic_tail_ratio: f64,
    pub summable_fraction: f64,
    pub monotone_slack: f64,
    /// Absolute slack for iterate bounds.
    pub bound_tolerance: f64,
    /// Bound on the proximal-step certificate at the final iterate.
    pub certificate_tolerance: f64,
    pub fit_window: Option<(usize, usize)>,
    /// Reference runs for an unknown `F*` use this multiple of the budget.
    pub reference_factor: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            tail_ratio: 0.05,
            stochastic_tail_ratio: 0.1,
            summable_fraction: 0.05,
            monotone_slack: 1e-12,
            bound_tolerance: 1e-9,
            certificate_tolerance: 1e-8,
            fit_window: None,
            reference_factor: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub solver: SolverSpec,
    pub budget: usize,
    pub seeds: Vec<u64>,
    pub x0: X0Spec,
    pub snapshots: SnapshotPolicy,
    pub output_dir: PathBuf,
    pub output_prefix: String,
    pub thresholds: Thresholds,
}

impl ExperimentConfig {
    pub fn new(problem: ProblemSpec, solver: SolverSpec, budget: usize) -> Self {
        Self {
            problem,
            solver,
            budget,
            seeds: vec![0],
            x0: X0Spec::Auto,
            snapshots: SnapshotPolicy::PowersOfTwo,
            output_dir: PathBuf::from("."),
            output_prefix: "run".into(),
            thresholds: Thresholds::default(),
        }
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut problem = None;
        let mut solver = None;
        let mut budget = None;
        let mut cfg_rest = Self::new(
            ProblemSpec::Power { p: 4 },
            SolverSpec::GdFixed {
                alpha: crate::spec::Scalar::OverL(1.0),
            },
            0,
        );
        let mut seen: Vec<String> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |field: &str, message: String| CliError::Config {
                line: Some(line_no),
                field: field.to_string(),
                message,
            };
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(line, "expected `key = value`".into()))?;
            if seen.iter().any(|s| s == key) {
                return Err(err(key, "duplicate key".into()));
            }
            seen.push(key.to_string());
            let t = &mut cfg_rest.thresholds;
            match key {
                "problem" => {
                    problem = Some(
                        value
                            .parse::<ProblemSpec>()
                            .map_err(|e| err(key, e.to_string()))?,
                    )
                }
                "solver" => {
                    solver = Some(
                        value
                            .parse::<SolverSpec>()
                            .map_err(|e| err(key, e.to_string()))?,
                    )
                }
                "budget" => budget = Some(parse_value::<usize>(value).map_err(|m| err(key, m))?),
                "seeds" => cfg_rest.seeds = parse_seeds(value).map_err(|m| err(key, m))?,
                "x0" => {
                    cfg_rest.x0 = value
                        .parse()
                        .map_err(|e: crate::error::SpecError| err(key, e.to_string()))?
                }
                "snapshots" => {
                    cfg_rest.snapshots = parse_snapshots(value).map_err(|m| err(key, m))?
                }
                "output.dir" => cfg_rest.output_dir = PathBuf::from(value),
                "output.prefix" => cfg_rest.output_prefix = value.to_string(),
                "diagnostics.tail_ratio" => {
                    t.tail_ratio = parse_value(value).map_err(|m| err(key, m))?
                }
                "diagnostics.stochastic_tail_ratio" => {
                    t.stochastic_tail_ratio = parse_value(value).map_err(|m| err(key, m))?
                }
                "diagnostics.summable_fraction" => {
                    t.summable_fraction = parse_value(value).map_err(|m| err(key, m))?
                }
                "diagnostics.monotone_slack" => {
                    t.monotone_slack = parse_value(value).map_err(|m| err(key, m))?
                }
                "diagnostics.bound_tolerance" => {
                    t.bound_tolerance = parse_value(value).map_err(|m| err(key, m))?
                }
                "diagnostics.certificate_tolerance" => {
                    t.certificate_tolerance = parse_value(value).map_err(|m| err(key, m))?
                }
                "diagnostics.fit_window" => {
                    t.fit_window = parse_window(value).map_err(|m| err(key, m))?
                }
                "diagnostics.reference_factor" => {
                    t.reference_factor = parse_value(value).map_err(|m| err(key, m))?
                }
                _ => return Err(err(key, "unknown key".into())),
            }
        }
        let missing = |field: &str| CliError::Config {
            line: None,
            field: field.to_string(),
            message: "required key missing".into(),
        };
        cfg_rest.problem = problem.ok_or_else(|| missing("problem"))?;
        cfg_rest.solver = solver.ok_or_else(|| missing("solver"))?;
        cfg_rest.budget = budget.ok_or_else(|| missing("budget"))?;
        cfg_rest.check_ranges()?;
        Ok(cfg_rest)
    }

    /// Serialises every key, so that `parse(to_text(c)) == c`.
    pub fn to_text(&self) -> String {
        let t = &self.thresholds;
        let mut s = String::new();
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(s, "problem = {}", self.problem);
        let _ = writeln!(s, "solver = {}", self.solver);
        let _ = writeln!(s, "budget = {}", self.budget);
        let _ = writeln!(s, "seeds = {}", seeds.join(","));
        let _ = writeln!(s, "x0 = {}", self.x0);
        let _ = writeln!(s, "snapshots = {}", format_snapshots(self.snapshots));
        let _ = writeln!(s, "output.dir = {}", self.output_dir.display());
        let _ = writeln!(s, "output.prefix = {}", self.output_prefix);
        let _ = writeln!(s, "diagnostics.tail_ratio = {}", t.tail_ratio);
        let _ = writeln!(
            s,
            "diagnostics.stochastic_tail_ratio = {}",
            t.stochastic_tail_ratio
        );
        let _ = writeln!(s, "diagnostics.summable_fraction = {}", t.summable_fraction);
        let _ = writeln!(s, "diagnostics.monotone_slack = {}", t.monotone_slack);
        let _ = writeln!(s, "diagnostics.bound_tolerance = {}", t.bound_tolerance);
        let _ = writeln!(
            s,
            "diagnostics.certificate_tolerance = {}",
            t.certificate_tolerance
        );
        let window = match t.fit_window {
            Some((lo, hi)) => format!("{lo},{hi}"),
            None => "none".into(),
        };
        let _ = writeln!(s, "diagnostics.fit_window = {window}");
        let _ = writeln!(s, "diagnostics.reference_factor = {}", t.reference_factor);
        s
    }

    pub fn check_ranges(&self) -> CliResult<()> {
        if self.budget == 0 {
            return Err(CliError::config("budget", "must be positive"));
        }
        if self.seeds.is_empty() {
            return Err(CliError::config("seeds", "at least one seed is required"));
        }
        if self.output_prefix.is_empty() || self.output_prefix.contains(['/', '\\']) {
            return Err(CliError::config(
                "output.prefix",
                "must be a non-empty file-name stem",
            ));
        }
        let t = &self.thresholds;
        for (name, v) in [
            ("diagnostics.tail_ratio", t.tail_ratio),
            ("diagnostics.stochastic_tail_ratio", t.stochastic_tail_ratio),
            ("diagnostics.summable_fraction", t.summable_fraction),
            ("diagnostics.monotone_slack", t.monotone_slack),
            ("diagnostics.bound_tolerance", t.bound_tolerance),
            ("diagnostics.certificate_tolerance", t.certificate_tolerance),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(CliError::config(
                    name,
                    format!("must be finite and nonnegative, got {v}"),
                ));
            }
        }
        if t.reference_factor == 0 {
            return Err(CliError::config(
                "diagnostics.reference_factor",
                "must be positive",
            ));
        }
        Ok(())
    }
}

fn parse_value<T: FromStr>(value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("cannot parse `{value}`"))
}

fn parse_seeds(value: &str) -> Result<Vec<u64>, String> {
    if let Some((lo, hi)) = value.split_once("..") {
        let (lo, hi): (u64, u64) = (parse_value(lo.trim())?, parse_value(hi.trim())?);
        if lo >= hi {
            return Err(format!("empty seed range `{value}`"));
        }
        return Ok((lo..hi).collect());
    }
    value.split(',').map(|s| parse_value(s.trim())).collect()
}

pub fn parse_snapshots(value: &str) -> Result<SnapshotPolicy, String> {
    match value {
        "pow2" => Ok(SnapshotPolicy::PowersOfTwo),
        "every" => Ok(SnapshotPolicy::Every),
        v => match v.strip_prefix("stride:").map(str::parse::<usize>) {
            Some(Ok(s)) if s > 0 => Ok(SnapshotPolicy::Stride(s)),
            _ => Err(format!("expected pow2, every or stride:<n>, got `{v}`")),
        },
    }
}

pub fn format_snapshots(policy: SnapshotPolicy) -> String {
    match policy {
        SnapshotPolicy::PowersOfTwo => "pow2".into(),
        SnapshotPolicy::Every => "every".into(),
        SnapshotPolicy::Stride(s) => format!("stride:{s}"),
    }
}

pub fn parse_window(value: &str) -> Result<Option<(usize, usize)>, String> {
    if value == "none" {
        return Ok(None);
    }
    let (lo, hi) = value
        .split_once(',')
        .ok_or_else(|| format!("expected `lo,hi` or `none`, got `{value}`"))?;
    Ok(Some((parse_value(lo.trim())?, parse_value(hi.trim())?)))
}
