use std::path::{Path, PathBuf};

use convrate::diagnostics::{check_monotone_summable, DeltaSequence, RateReport, SequencePolicy};
use convrate::tightness::{run_flow, run_power, FlowExperiment, PowerExperiment, PowerStatus};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::summary::{write_json, Provenance, Verdict};
use crate::trace_io::{emit_trace, load_trace_table};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessSummary {
    pub provenance: Provenance,
    pub p: u32,
    pub alpha: f64,
    pub budget: usize,
    pub status: String,
    pub predicted_exponent: f64,
    pub predicted_constant: f64,
    pub fitted_exponent: Option<f64>,
    pub fitted_constant: Option<f64>,
    pub fit_window: (usize, usize),
    pub report: RateReport,
    pub verdicts: Vec<Verdict>,
    pub passed: bool,
}

pub struct TightnessArgs {
    pub p: u32,
    pub alpha: f64,
    pub budget: usize,
    pub x0: f64,
    pub window: Option<(usize, usize)>,
    pub exponent_tolerance: f64,
    pub constant_tolerance: f64,
    pub out: Option<PathBuf>,
}

pub fn tightness(args: &TightnessArgs) -> CliResult<TightnessSummary> {
    let mut exp = PowerExperiment::new(args.p, args.alpha, args.budget)
        .map_err(|e| CliError::config("p/alpha", e.to_string()))?
        .with_x0(args.x0);
    if let Some((lo, hi)) = args.window {
        exp = exp.with_window(lo, hi);
    }
    let run = run_power(&exp)?;
    let fit = run.report.fit.as_ref();
    let mut verdicts = Vec::new();
    match fit {
        Some(fit) => {
            verdicts.push(Verdict::at_most(
                "fitted exponent: |q - p/(p-2)|",
                (fit.exponent - run.predicted_exponent).abs(),
                args.exponent_tolerance,
            ));
            verdicts.push(Verdict::at_most(
                "fitted constant: |c - C| / C with p/(p-2) = p^2 alpha C^((p-2)/p)",
                (fit.constant - run.predicted_constant).abs() / run.predicted_constant,
                args.constant_tolerance,
            ));
        }
        None => verdicts.push(Verdict::none_of("rate fit over the window succeeded", 1)),
    }
    let status = match run.status {
        PowerStatus::Completed => "completed".to_string(),
        PowerStatus::MachinePrecision { k } => {
            format!("optimum reached to machine precision at k={k}")
        }
    };
    let summary = TightnessSummary {
        provenance: Provenance::new(&format!(
            "tightness p={} alpha={} budget={} x0={}",
            args.p, args.alpha, args.budget, args.x0
        )),
        p: args.p,
        alpha: args.alpha,
        budget: args.budget,
        status,
        predicted_exponent: run.predicted_exponent,
        predicted_constant: run.predicted_constant,
        fitted_exponent: fit.map(|f| f.exponent),
        fitted_constant: fit.map(|f| f.constant),
        fit_window: fit.map_or(exp.fit_window(), |f| f.window),
        passed: verdicts.iter().all(|v| v.passed),
        report: run.report.clone(),
        verdicts,
    };
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let stem = format!("power_p{}", args.p);
        emit_trace(
            &run.trace,
            Some(0.0),
            &dir.join(format!("{stem}.csv")),
            &dir.join(format!("{stem}_snapshots.csv")),
        )?;
        write_json(&summary, &dir.join(format!("{stem}_summary.json")))?;
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowSummary {
    pub provenance: Provenance,
    pub p: u32,
    pub theta: f64,
    pub alpha_flow: f64,
    pub t0: f64,
    pub t1: f64,
    pub steps: usize,
    pub error_estimate: f64,
    pub max_rel_deviation: f64,
    pub final_state: f64,
    pub final_exact: f64,
    pub verdicts: Vec<Verdict>,
    pub passed: bool,
}

pub fn flow(p: u32, t0: f64, t1: f64, steps: usize, tolerance: f64) -> CliResult<FlowSummary> {
    let exp = FlowExperiment::new(p, t0, t1, steps)
        .map_err(|e| CliError::config("flow", e.to_string()))?
        .with_tolerance(tolerance);
    let run = run_flow(&exp)?;
    let last = *run.samples.last().expect("flow keeps the final sample");
    let verdicts = vec![Verdict::at_most(
        "max relative deviation |x(t) - t^-theta| / t^-theta",
        run.max_rel_deviation,
        tolerance,
    )];
    Ok(FlowSummary {
        provenance: Provenance::new(&format!(
            "flow p={p} t0={t0} t1={t1} steps={steps} tolerance={tolerance}"
        )),
        p,
        theta: exp.theta(),
        alpha_flow: exp.alpha_flow(),
        t0,
        t1,
        steps,
        error_estimate: run.error_estimate,
        max_rel_deviation: run.max_rel_deviation,
        final_state: last.x,
        final_exact: last.exact,
        passed: verdicts.iter().all(|v| v.passed),
        verdicts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckSummary {
    pub trace_file: String,
    pub report: RateReport,
    pub verdicts: Vec<Verdict>,
    pub passed: bool,
}

/// Re-runs the sequence diagnostics on a trace file. Gaps come from the
/// `delta` column unless `fstar` is given.
pub fn check(
    path: &Path,
    fstar: Option<f64>,
    window: Option<(usize, usize)>,
    tail_ratio: f64,
    policy: &SequencePolicy,
) -> CliResult<CheckSummary> {
    let table = load_trace_table(path)?;
    let values = match (fstar, table.deltas) {
        (Some(fs), _) => table.records.iter().map(|r| r.objective - fs).collect(),
        (None, Some(d)) => d,
        (None, None) => {
            return Err(CliError::config(
                "fstar",
                "trace has no delta column; pass --fstar",
            ));
        }
    };
    let deltas = DeltaSequence::new(values, path.display().to_string())?;
    let sequence = check_monotone_summable(&deltas, policy)?;
    let report = RateReport::build(&deltas, window, policy)?;
    let verdicts = vec![
        Verdict::none_of(
            format!(
                "monotone: delta_k+1 <= delta_k (1 + {:e})",
                policy.monotone_slack
            ),
            usize::from(!sequence.monotone),
        ),
        Verdict::at_most(
            "summability: final-decade share of the partial sum of delta_k",
            sequence.final_decade_share,
            policy.summable_fraction,
        ),
        Verdict::at_most(
            "k delta_k tail ratio: N delta_N / max_k k delta_k",
            report.kdelta_tail_ratio,
            tail_ratio,
        ),
    ];
    Ok(CheckSummary {
        trace_file: path.display().to_string(),
        passed: verdicts.iter().all(|v| v.passed),
        report,
        verdicts,
    })
}
