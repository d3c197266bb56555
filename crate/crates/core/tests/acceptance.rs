//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use convrate::diagnostics::{
    check_ball, check_bounded_iterates, check_descent, check_monotone_summable, grid_tail_ratio,
    kdelta_tail_ratio, mean_on_grid, pow2_grid, prox_line_search_radius_sq, prox_step_certificate,
    replay_decrease, weighted_r_squared, DeltaSequence, SequencePolicy,
};
use convrate::oracle::{gallery, make_power, Problem, Vector};
use convrate::solvers::{
    cd_stochastic, gd_fixed, gd_linesearch, proxcd_stochastic, proxgrad_fixed, proxgrad_linesearch,
    LineSearch, RunOptions, SamplingDistribution, StepInit, Trace,
};
use convrate::tightness::{
    predicted_constant, run_flow, run_power, FlowExperiment, PowerExperiment,
};

const ROUNDING: f64 = 1e-12;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn null_space_quadratic() -> (Problem, Vector) {
    (
        gallery::quadratic(50, 10, 7, -2.0, 2.0).unwrap(),
        gallery::random_start(50, 0),
    )
}

fn lasso() -> (Problem, Vector) {
    (gallery::lasso(20, 10, 3, 0.1).unwrap(), Vector::zeros(20))
}

struct Reference {
    fstar: f64,
    final_objective: f64,
    xbar: Vector,
}

fn lasso_reference() -> Reference {
    let (p, x0) = lasso();
    let t = proxgrad_fixed(&p, p.lipschitz(), &x0, &RunOptions::new(1_000_000)).unwrap();
    Reference {
        fstar: t
            .records
            .iter()
            .map(|r| r.objective)
            .fold(f64::INFINITY, f64::min),
        final_objective: t.final_record().objective,
        xbar: t.final_iterate().clone(),
    }
}

fn last_decade_ratio(d: &DeltaSequence) -> f64 {
    check_monotone_summable(d, &SequencePolicy::default())
        .map(|v| v.final_decade_kdelta_ratio)
        .unwrap_or(f64::NAN)
}

fn criterion_1() -> Outcome {
    let (p, x0) = null_space_quadratic();
    let start = Instant::now();
    let t = gd_fixed(&p, 1.0 / p.lipschitz(), &x0, &RunOptions::new(100_000)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let d = DeltaSequence::from_trace(&t, 0.0).unwrap();
    let ratio = kdelta_tail_ratio(&d);
    outcome(
        ratio <= 0.05 && secs <= 5.0,
        format!(
            "tail ratio {ratio:.3e} (<= 0.05), last-decade ratio {:.3e} (info), {secs:.2}s (<= 5s)",
            last_decade_ratio(&d)
        ),
    )
}

fn criterion_2() -> Outcome {
    let (p, x0) = null_space_quadratic();
    let l = p.lipschitz();
    let gamma = 0.5;
    let rule = LineSearch::new(gamma, 10.0 / l, (2.0 - gamma) / l);
    let t = gd_linesearch(&p, &rule, &x0, &RunOptions::new(100_000)).unwrap();
    let replay = replay_decrease(&t, gamma, ROUNDING);
    let xbar = p.project(&x0).unwrap();
    let ball = check_bounded_iterates(&t, &xbar, gamma, rule.c1, 0.0).unwrap();
    let ratio = kdelta_tail_ratio(&DeltaSequence::from_trace(&t, 0.0).unwrap());
    outcome(
        replay.all_pass() && replay.checked == 100_000 && ball.holds && ratio <= 0.05,
        format!(
            "replay {}/{} pass ({} only within 1e-12 rounding slack, {} c2 fallbacks), bound holds at {} snapshots: {}, tail ratio {ratio:.3e}",
            replay.checked - replay.failures.len(),
            replay.checked,
            replay.within_slack,
            t.fallback_iterations.len(),
            ball.checked,
            ball.holds
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for (p, alpha) in [(4u32, 1.0 / 12.0), (6, 1.0 / 30.0), (8, 1.0 / 56.0)] {
        let start = Instant::now();
        let run = run_power(
            &PowerExperiment::new(p, alpha, 100_000)
                .unwrap()
                .with_window(1000, 100_000),
        )
        .unwrap();
        let secs = start.elapsed().as_secs_f64();
        let fit = run.report.fit.expect("fit over [1e3, 1e5]");
        let exp_ok = (fit.exponent - run.predicted_exponent).abs() <= 0.05;
        let c = predicted_constant(p, alpha).unwrap();
        let const_err = (fit.constant - c).abs() / c;
        let const_ok = p != 4 || const_err <= 0.1;
        passed &= exp_ok && const_ok && secs <= 2.0;
        parts.push(format!(
            "p={p}: q={:.4} (target {:.4}), c={:.4} vs {c:.4} ({:.1}%), {secs:.3}s",
            fit.exponent,
            run.predicted_exponent,
            fit.constant,
            100.0 * const_err
        ));
    }
    outcome(passed, parts.join("; "))
}

fn criterion_4() -> Outcome {
    let run = run_flow(&FlowExperiment::new(4, 2.0, 100.0, 100_000).unwrap()).unwrap();
    outcome(
        run.max_rel_deviation <= 1e-6,
        format!(
            "max relative deviation {:.3e} (<= 1e-6)",
            run.max_rel_deviation
        ),
    )
}

fn stochastic_mean(traces: &[Trace]) -> (Vec<usize>, Vec<f64>) {
    let grid = pow2_grid(traces[0].len() - 1);
    let mean = mean_on_grid(traces, 0.0, &grid).unwrap();
    (grid, mean)
}

fn criterion_5() -> Outcome {
    let p = gallery::quadratic(20, 5, 11, -2.0, 2.0).unwrap();
    let x0 = gallery::random_start(20, 0);
    let lbar = p.coord_lipschitz().to_vec();
    let mut skewed = vec![0.01; 20];
    skewed[0] = 1.0 - 0.01 * 19.0;
    let dists = [
        ("uniform", SamplingDistribution::uniform(20).unwrap()),
        ("skewed", SamplingDistribution::new(skewed).unwrap()),
    ];
    let start = Instant::now();
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, dist) in &dists {
        let traces: Vec<Trace> = (0..20)
            .map(|seed| {
                cd_stochastic(&p, &lbar, dist, seed, &x0, &RunOptions::new(100_000)).unwrap()
            })
            .collect();
        let (grid, mean) = stochastic_mean(&traces);
        let increases = mean
            .windows(2)
            .filter(|w| w[1] > w[0] * (1.0 + ROUNDING) + ROUNDING)
            .count();
        let ratio = grid_tail_ratio(&grid, &mean);
        passed &= increases == 0 && ratio <= 0.1;
        parts.push(format!(
            "{name} (p_min {}): {increases} grid increases, tail ratio {ratio:.3e}",
            dist.p_min()
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    passed &= secs <= 30.0;
    parts.push(format!("{secs:.2}s (<= 30s)"));
    outcome(passed, parts.join("; "))
}

fn criterion_6(reference: &Reference) -> Outcome {
    let (p, x0) = lasso();
    let l = p.lipschitz();
    let t = proxgrad_fixed(&p, l, &x0, &RunOptions::new(20_000)).unwrap();
    let descent = check_descent(&t, ROUNDING);
    let gap = (t.final_record().objective - reference.final_objective).abs();
    let x = t.final_iterate();
    let alpha = 1.0 / l;
    let x_next = p.prox(&(x - p.gradient(x) * alpha), alpha).unwrap();
    let cert = prox_step_certificate(&p, x, &x_next, alpha);
    outcome(
        descent.ok && gap <= 1e-8 && cert <= 1e-8,
        format!(
            "{} descent violations, |F - F_ref| = {gap:.3e} (<= 1e-8), certificate {cert:.3e} (<= 1e-8)",
            descent.violations.len()
        ),
    )
}

fn criterion_7(reference: &Reference) -> Outcome {
    let (p, x0) = lasso();
    let l = p.lipschitz();
    let gamma = 0.5;
    let rule =
        LineSearch::new(gamma, 10.0 / l, (2.0 - gamma) / l).with_init(StepInit::BarzilaiBorwein);
    let t = proxgrad_linesearch(&p, &rule, &x0, &RunOptions::new(20_000)).unwrap();
    let steps = t.step_lengths();
    let outside = steps
        .iter()
        .filter(|&&a| !(a >= rule.c2 && a <= rule.c1))
        .count();
    let replay = replay_decrease(&t, gamma, ROUNDING);
    let gap0 = t.records[0].objective - reference.fstar;
    let radius_sq = prox_line_search_radius_sq(&x0, &reference.xbar, gamma, rule.c1, l, gap0);
    let ball = check_ball(&t, &reference.xbar, radius_sq, 1e-9).unwrap();
    outcome(
        outside == 0 && replay.all_pass() && ball.holds,
        format!(
            "{outside}/{} steps outside [c2, c1], replay {}/{} pass ({} within rounding slack), max ||x_k - xbar||^2 = {:.3e} vs bound {:.3e}",
            steps.len(),
            replay.checked - replay.failures.len(),
            replay.checked,
            replay.within_slack,
            ball.max_dist_sq,
            radius_sq
        ),
    )
}

fn criterion_8(reference: &Reference) -> Outcome {
    let (p, x0) = lasso();
    let lbar = p.coord_lipschitz().to_vec();
    let dist = SamplingDistribution::uniform(20).unwrap();
    let traces: Vec<Trace> = (0..20)
        .map(|seed| {
            proxcd_stochastic(&p, &lbar, &dist, seed, &x0, &RunOptions::new(100_000)).unwrap()
        })
        .collect();
    let non_monotone = traces
        .iter()
        .filter(|t| !check_descent(t, ROUNDING).ok)
        .count();
    let r0 = weighted_r_squared(&x0, &reference.xbar, &lbar, &dist).unwrap();
    let bound = r0 + 2.0 / dist.p_min() * (traces[0].records[0].objective - reference.fstar) + 1e-6;
    let mut worst = f64::NEG_INFINITY;
    let mut checked = 0;
    for s in &traces[0].snapshots {
        let mut sum = 0.0;
        for t in &traces {
            sum += weighted_r_squared(t.snapshot(s.k).unwrap(), &reference.xbar, &lbar, &dist)
                .unwrap();
        }
        worst = worst.max(sum / traces.len() as f64);
        checked += 1;
    }
    outcome(
        non_monotone == 0 && worst <= bound,
        format!("{non_monotone}/20 non-monotone paths, max seed-mean r^2 {worst:.3e} <= bound {bound:.3e} over {checked} snapshots"),
    )
}

fn criterion_9() -> Outcome {
    let n = 1_000_000;
    let build = |f: &dyn Fn(f64) -> f64| {
        DeltaSequence::new((0..n).map(|k| f(k as f64)).collect(), "synthetic").unwrap()
    };
    let policy = SequencePolicy::default();
    let sq = check_monotone_summable(&build(&|k| 1.0 / ((k + 1.0) * (k + 1.0))), &policy).unwrap();
    let harm = check_monotone_summable(&build(&|k| 1.0 / (k + 1.0)), &policy).unwrap();
    let logsq = check_monotone_summable(
        &build(&|k| 1.0 / ((k + 2.0) * (k + 2.0).ln().powi(2))),
        &policy,
    )
    .unwrap();
    let ok = sq.all_pass() && harm.monotone && !harm.partial_sums_bounded && logsq.all_pass();
    outcome(
        ok,
        format!(
            "1/k^2 all pass: {}; 1/k monotone {} summable {}; 1/(k log^2 k) all pass: {}",
            sq.all_pass(),
            harm.monotone,
            harm.partial_sums_bounded,
            logsq.all_pass()
        ),
    )
}

fn criterion_10() -> Outcome {
    let problems = [
        null_space_quadratic().0,
        lasso().0,
        make_power(4).unwrap(),
        make_power(8).unwrap(),
    ];
    let fd = problems
        .iter()
        .map(|p| common::fd_gradient_error(p, 5, 1.0, 3))
        .fold(0.0, f64::max);
    let prox_err = common::scalar_prox_error(5, 20);
    let nonexp = common::nonexpansive_failures(6, 1000, 8);
    outcome(
        fd <= 1e-6 && prox_err <= 1e-5 && nonexp == 0,
        format!("finite-difference rel. error {fd:.2e} (<= 1e-6), prox vs grid {prox_err:.2e} (<= 1e-5), {nonexp} nonexpansiveness failures"),
    )
}

fn main() -> ExitCode {
    let reference = lasso_reference();

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        (
            "1 fixed-step gradient descent o(1/k) signature",
            Box::new(criterion_1),
        ),
        ("2 long-step line search", Box::new(criterion_2)),
        ("3 tightness exponent", Box::new(criterion_3)),
        ("4 gradient flow", Box::new(criterion_4)),
        ("5 stochastic coordinate descent", Box::new(criterion_5)),
        ("6 proximal gradient", Box::new(|| criterion_6(&reference))),
        (
            "7 line-search proximal gradient",
            Box::new(|| criterion_7(&reference)),
        ),
        (
            "8 proximal coordinate descent",
            Box::new(|| criterion_8(&reference)),
        ),
        ("9 sequence checker classification", Box::new(criterion_9)),
        ("10 oracle suite", Box::new(criterion_10)),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        let o = run();
        if !o.passed {
            failed += 1;
        }
        println!(
            "[{}] criterion {name}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
