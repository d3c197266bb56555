use std::path::PathBuf;

use convrate::diagnostics::{
    check_ball, check_descent, check_monotone_summable, grid_tail_ratio, line_search_radius_sq,
    mean_on_grid, pow2_grid, prox_line_search_radius_sq, prox_step_certificate, replay_decrease,
    weighted_r_squared, DeltaSequence, RateReport, SequencePolicy, SequenceVerdict,
};
use convrate::oracle::{Problem, Vector};
use convrate::solvers::{
    cd_stochastic, gd_fixed, gd_linesearch, proxcd_stochastic, proxgrad_fixed, proxgrad_linesearch,
    RunOptions, Termination, Trace,
};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::spec::SolverSpec;
use crate::summary::{Aggregate, FStar, Provenance, SeedSummary, SummaryDocument, Verdict};
use crate::trace_io::emit_trace;

/// Runs the configured solver once.
pub fn run_solver(
    spec: &SolverSpec,
    problem: &Problem,
    x0: &Vector,
    seed: u64,
    opts: &RunOptions,
) -> convrate::Result<Trace> {
    let l = problem.lipschitz();
    match spec {
        SolverSpec::GdFixed { alpha } => gd_fixed(problem, alpha.resolve(l), x0, opts),
        SolverSpec::GdLineSearch(ls) => gd_linesearch(problem, &ls.resolve(l), x0, opts),
        SolverSpec::ProxGradFixed { lbar } => proxgrad_fixed(problem, lbar.resolve(l), x0, opts),
        SolverSpec::ProxGradLineSearch(ls) => {
            proxgrad_linesearch(problem, &ls.resolve(l), x0, opts)
        }
        SolverSpec::Cd(c) => {
            let lbar = c.lbar(problem);
            cd_stochastic(problem, &lbar, &c.dist.build(&lbar)?, seed, x0, opts)
        }
        SolverSpec::ProxCd(c) => {
            let lbar = c.lbar(problem);
            proxcd_stochastic(problem, &lbar, &c.dist.build(&lbar)?, seed, x0, opts)
        }
    }
}

/// A validated experiment: problem, start, `F*` and a reference minimiser.
pub struct Prepared {
    pub problem: Problem,
    pub x0: Vector,
    pub fstar: f64,
    pub fstar_estimated: bool,
    pub xbar: Option<Vector>,
}

/// Builds the problem and checks solver compatibility with a zero-budget
/// dry run, so that configuration mistakes surface before any work.
pub fn prepare(cfg: &ExperimentConfig) -> CliResult<Prepared> {
    let problem = cfg
        .problem
        .build()
        .map_err(|e| CliError::config("problem", e.to_string()))?;
    match (
        cfg.solver.needs_regularizer(),
        problem.regularizer().is_some(),
    ) {
        (true, false) => {
            return Err(CliError::config(
                "solver",
                format!(
                    "{} needs a regularized problem, `{}` has none",
                    cfg.solver.name(),
                    cfg.problem
                ),
            ))
        }
        (false, true) => {
            return Err(CliError::config(
                "solver",
                format!(
                    "{} cannot handle the regularizer of `{}`",
                    cfg.solver.name(),
                    cfg.problem
                ),
            ))
        }
        _ => {}
    }
    let x0 = cfg.x0.build(&cfg.problem, problem.dim());
    run_solver(&cfg.solver, &problem, &x0, 0, &RunOptions::new(0))
        .map_err(|e| CliError::config("solver", e.to_string()))?;

    let (fstar, fstar_estimated, xbar) = match problem.known_opt_value() {
        Some(v) => (v, false, problem.project(&x0)),
        None => {
            let reference = reference_run(
                &problem,
                &x0,
                cfg.budget.saturating_mul(cfg.thresholds.reference_factor),
            )?;
            let min = reference
                .records
                .iter()
                .map(|r| r.objective)
                .fold(f64::INFINITY, f64::min);
            (min, true, Some(reference.final_iterate().clone()))
        }
    };
    Ok(Prepared {
        problem,
        x0,
        fstar,
        fstar_estimated,
        xbar,
    })
}

/// Long fixed-step run used to estimate `F*` and a minimiser.
pub fn reference_run(problem: &Problem, x0: &Vector, budget: usize) -> convrate::Result<Trace> {
    let l = problem.lipschitz();
    let opts = RunOptions::new(budget);
    if problem.regularizer().is_some() {
        proxgrad_fixed(problem, l, x0, &opts)
    } else {
        gd_fixed(problem, 1.0 / l, x0, &opts)
    }
}

fn termination_label(t: &Termination) -> String {
    match t {
        Termination::Budget => "budget".into(),
        Termination::ZeroGradient { k } => format!("zero gradient at k={k}"),
        Termination::Tolerance { k } => format!("tolerance reached at k={k}"),
    }
}

fn seed_verdicts(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    trace: &Trace,
    report: &RateReport,
    sequence: &SequenceVerdict,
) -> (Vec<Verdict>, Vec<String>) {
    let t = &cfg.thresholds;
    let mut notes = Vec::new();
    let est = prep.fstar_estimated;
    let problem = &prep.problem;
    let mut v = vec![Verdict::none_of(
        format!(
            "descent: F(x_k+1) <= F(x_k) + {:e} max(1, |F(x_k)|)",
            t.monotone_slack
        ),
        check_descent(trace, t.monotone_slack).violations.len(),
    )];
    if !cfg.solver.is_stochastic() {
        v.push(
            Verdict::at_most(
                "summability: final-decade share of the partial sum of delta_k",
                sequence.final_decade_share,
                t.summable_fraction,
            )
            .tagged(est),
        );
        v.push(
            Verdict::at_most(
                "k delta_k tail ratio: N delta_N / max_k k delta_k",
                report.kdelta_tail_ratio,
                t.tail_ratio,
            )
            .tagged(est),
        );
    }
    let l = problem.lipschitz();
    match &cfg.solver {
        SolverSpec::GdLineSearch(ls) | SolverSpec::ProxGradLineSearch(ls) => {
            let rule = ls.resolve(l);
            let replay = replay_decrease(trace, rule.gamma, t.monotone_slack);
            v.push(Verdict::none_of(
                format!(
                    "sufficient decrease replay: F(x_k+1) <= F(x_k) - gamma/(2 alpha_k) ||d_k||^2 + {:e} max(1, |F(x_k)|)",
                    t.monotone_slack
                ),
                replay.failures.len() + usize::from(replay.checked == 0 && trace.len() > 1),
            ));
            let outside = trace
                .step_lengths()
                .iter()
                .filter(|&&a| !(a >= rule.c2 && a <= rule.c1))
                .count();
            if replay.within_slack > 0 {
                notes.push(format!(
                    "{} of {} replayed steps hold only within the rounding slack",
                    replay.within_slack, replay.checked
                ));
            }
            if !trace.fallback_iterations.is_empty() {
                notes.push(format!(
                    "{} line searches fell back to c2 without the decrease holding in floating point",
                    trace.fallback_iterations.len()
                ));
            }
            v.push(Verdict::none_of("accepted steps within [c2, c1]", outside));
            if let Some(xbar) = &prep.xbar {
                let gap0 = trace.records[0].objective - prep.fstar;
                let (name, radius_sq) = if matches!(cfg.solver, SolverSpec::GdLineSearch(_)) {
                    (
                        "iterate bound: ||x_k - xbar||^2 <= ||x_0 - xbar||^2 + (2 c1/gamma)(f(x_0) - f*)",
                        line_search_radius_sq(&prep.x0, xbar, rule.gamma, rule.c1, gap0),
                    )
                } else {
                    (
                        "iterate bound: ||x_k - xbar||^2 <= ||x_0 - xbar||^2 + (2 L c1^2/gamma)(F(x_0) - F*)",
                        prox_line_search_radius_sq(&prep.x0, xbar, rule.gamma, rule.c1, l, gap0),
                    )
                };
                if let Ok(ball) = check_ball(trace, xbar, radius_sq, t.bound_tolerance) {
                    v.push(
                        Verdict::at_most(name, ball.max_dist_sq - radius_sq, t.bound_tolerance)
                            .tagged(est),
                    );
                }
            }
        }
        SolverSpec::ProxGradFixed { lbar } => {
            let alpha = 1.0 / lbar.resolve(l);
            let x = trace.final_iterate();
            let g = problem.gradient(x);
            if let Ok(x_next) = problem.prox(&(x - g * alpha), alpha) {
                v.push(Verdict::at_most(
                    "subgradient certificate: dist(-(grad f(x) + (x+ - x)/alpha), subdiff psi(x+)) at the final iterate",
                    prox_step_certificate(problem, x, &x_next, alpha),
                    t.certificate_tolerance,
                ));
            }
        }
        _ => {}
    }
    (v, notes)
}

struct SeedOutcome {
    summary: SeedSummary,
    trace: Trace,
}

fn run_seed(cfg: &ExperimentConfig, prep: &Prepared, seed: u64) -> CliResult<SeedOutcome> {
    let opts = RunOptions::new(cfg.budget).with_snapshots(cfg.snapshots);
    let trace = run_solver(&cfg.solver, &prep.problem, &prep.x0, seed, &opts)?;
    let stem = format!("{}_seed{seed}", cfg.output_prefix);
    let trace_path = cfg.output_dir.join(format!("{stem}.csv"));
    let snap_path = cfg.output_dir.join(format!("{stem}_snapshots.csv"));
    emit_trace(&trace, Some(prep.fstar), &trace_path, &snap_path)?;

    let deltas = DeltaSequence::from_trace(&trace, prep.fstar)?;
    let policy = SequencePolicy {
        monotone_slack: cfg.thresholds.monotone_slack,
        summable_fraction: cfg.thresholds.summable_fraction,
        tail_factor: cfg.thresholds.tail_ratio,
    };
    let window = cfg
        .thresholds
        .fit_window
        .or_else(|| default_window(trace.len()));
    let sequence = check_monotone_summable(&deltas, &policy)?;
    let report = RateReport::build(&deltas, window, &policy)?;
    let (verdicts, notes) = seed_verdicts(cfg, prep, &trace, &report, &sequence);
    Ok(SeedOutcome {
        summary: SeedSummary {
            seed,
            trace_file: trace_path.display().to_string(),
            snapshot_file: snap_path.display().to_string(),
            termination: termination_label(&trace.termination),
            records: trace.len(),
            final_objective: trace.final_record().objective,
            report,
            verdicts,
            notes,
        },
        trace,
    })
}

/// `(N/100, N)` when that spans at least one decade with `k_lo >= 1`.
fn default_window(len: usize) -> Option<(usize, usize)> {
    let hi = len.checked_sub(1)?;
    let lo = hi / 100;
    (lo >= 1).then_some((lo, hi))
}

fn aggregate(cfg: &ExperimentConfig, prep: &Prepared, traces: &[Trace]) -> CliResult<Aggregate> {
    let t = &cfg.thresholds;
    let est = prep.fstar_estimated;
    let shortest = traces.iter().map(|t| t.len()).min().unwrap_or(0);
    let grid = pow2_grid(shortest.saturating_sub(1));
    let mean = mean_on_grid(traces, prep.fstar, &grid)?;
    let increases = mean
        .windows(2)
        .filter(|w| {
            w[1] > w[0] * (1.0 + t.monotone_slack) + t.monotone_slack * prep.fstar.abs().max(1.0)
        })
        .count();
    let mut verdicts = vec![
        Verdict::none_of(format!(
            "seed-mean delta non-increasing on the snapshot grid, slack {:e} relative and {:e} max(1, |F*|)",
            t.monotone_slack, t.monotone_slack
        ), increases).tagged(est),
        Verdict::at_most(
            "seed-mean k delta_k tail ratio on the grid: N mean_N / max_k k mean_k",
            grid_tail_ratio(&grid, &mean),
            t.stochastic_tail_ratio,
        )
        .tagged(est),
    ];

    let mut mean_r_squared = None;
    if let (SolverSpec::ProxCd(c), Some(xbar)) = (&cfg.solver, &prep.xbar) {
        let lbar = c.lbar(&prep.problem);
        let dist = c.dist.build(&lbar)?;
        let ks: Vec<usize> = traces[0]
            .snapshots
            .iter()
            .map(|s| s.k)
            .filter(|&k| traces.iter().all(|t| t.snapshot(k).is_some()))
            .collect();
        let mut series = Vec::with_capacity(ks.len());
        for &k in &ks {
            let mut sum = 0.0;
            for tr in traces {
                sum += weighted_r_squared(tr.snapshot(k).expect("filtered"), xbar, &lbar, &dist)?;
            }
            series.push((k, sum / traces.len() as f64));
        }
        let r0 = weighted_r_squared(&prep.x0, xbar, &lbar, &dist)?;
        let gap0 = traces[0].records[0].objective - prep.fstar;
        let bound = r0 + 2.0 / dist.p_min() * gap0 + 1e-6;
        let worst = series
            .iter()
            .map(|&(_, r)| r - bound)
            .fold(f64::NEG_INFINITY, f64::max);
        verdicts.push(
            Verdict::at_most(
                "seed-mean r_k^2 <= r_0^2 + (2/p_min)(F(x_0) - F*) + 1e-6",
                worst,
                0.0,
            )
            .tagged(est),
        );
        mean_r_squared = Some(series);
    }
    Ok(Aggregate {
        grid,
        mean_delta: mean,
        mean_r_squared,
        verdicts,
    })
}

/// Runs every seed (at most `jobs` concurrently), writes per-seed traces
/// and the summary, and returns the summary.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    jobs: usize,
) -> CliResult<(SummaryDocument, PathBuf)> {
    cfg.check_ranges()?;
    let prep = prepare(cfg)?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| CliError::io(&cfg.output_dir, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::config("jobs", e.to_string()))?;
    let outcomes: Vec<CliResult<SeedOutcome>> = pool.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| run_seed(cfg, &prep, seed))
            .collect()
    });
    let outcomes = outcomes.into_iter().collect::<CliResult<Vec<_>>>()?;

    let aggregate = if cfg.solver.is_stochastic() {
        let traces: Vec<Trace> = outcomes.iter().map(|o| o.trace.clone()).collect();
        Some(aggregate(cfg, &prep, &traces)?)
    } else {
        None
    };
    let mut notes = Vec::new();
    if prep.xbar.is_none() {
        notes.push("no reference minimiser: iterate-bound verdicts not evaluated".into());
    }
    if prep.fstar_estimated {
        notes.push(format!(
            "F* estimated as the minimum objective of a {}x-budget fixed-step reference run",
            cfg.thresholds.reference_factor
        ));
    }
    let config_text = cfg.to_text();
    let mut doc = SummaryDocument {
        provenance: Provenance::new(&config_text),
        problem: prep.problem.id().to_string(),
        solver: cfg.solver.to_string(),
        fstar: FStar {
            value: prep.fstar,
            source: if prep.fstar_estimated {
                "estimated"
            } else {
                "known"
            }
            .into(),
        },
        seeds: outcomes.into_iter().map(|o| o.summary).collect(),
        aggregate,
        notes,
        passed: false,
    };
    let passed = doc.all_verdicts().all(|v| v.passed);
    doc.passed = passed;
    let path = cfg
        .output_dir
        .join(format!("{}_summary.json", cfg.output_prefix));
    crate::summary::write_json(&doc, &path)?;
    Ok((doc, path))
}
