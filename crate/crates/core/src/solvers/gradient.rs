use super::{
    check_finite, check_finite_vec, check_region, start_values, within_bound, LineSearch,
    RunOptions, Step, StepInit, Termination, Trace, TraceBuilder,
};
use crate::error::{invalid, Error, Result};
use crate::oracle::{Problem, Vector};

/// Result of one (possibly searched) step from `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub alpha: f64,
    pub x_new: Vector,
    pub f_new: f64,
    pub psi_new: f64,
    /// `||x_new - x||^2`.
    pub d_norm_sq: f64,
    /// Number of trial points evaluated.
    pub trials: usize,
    /// Whether the sufficient-decrease test held at the accepted step.
    pub condition_met: bool,
}

impl StepOutcome {
    pub fn objective_new(&self) -> f64 {
        self.f_new + self.psi_new
    }
}

/// Previous displacement `s = x_k - x_{k-1}` and gradient change
/// `y = grad f(x_k) - grad f(x_{k-1})`.
#[derive(Debug, Clone, Copy)]
pub struct BbPair<'a> {
    pub step: &'a Vector,
    pub grad_change: &'a Vector,
}

/// `<s,s>/<s,y>` clamped to `[c2, c1]`; `c1` when the curvature `<s,y>` is
/// not positive.
pub fn bb_initial_step(pair: BbPair<'_>, c1: f64, c2: f64) -> f64 {
    let curvature = pair.step.dot(pair.grad_change);
    if !(curvature > 0.0 && curvature.is_finite()) {
        return c1;
    }
    let trial = pair.step.norm_squared() / curvature;
    if trial.is_finite() {
        trial.clamp(c2, c1)
    } else {
        c1
    }
}

/// `x_new = prox_psi(x - alpha * g, alpha)`, or the plain gradient step when
/// the problem has no regularizer.
fn trial_point(problem: &Problem, x: &Vector, g: &Vector, alpha: f64) -> (Vector, f64, f64, f64) {
    let y = x - g * alpha;
    let x_new = match problem.regularizer() {
        Some(reg) => reg.prox_map(&y, alpha),
        None => y,
    };
    let d_norm_sq = (&x_new - x).norm_squared();
    let f_new = problem.f(&x_new);
    let psi_new = problem.psi(&x_new).finite().unwrap_or(f64::INFINITY);
    (x_new, f_new, psi_new, d_norm_sq)
}

fn decrease_holds(
    objective: f64,
    f_new: f64,
    psi_new: f64,
    alpha: f64,
    gamma: f64,
    d_norm_sq: f64,
) -> bool {
    let target = objective - gamma / (2.0 * alpha) * d_norm_sq;
    let new = f_new + psi_new;
    new.is_finite() && new <= target
}

fn fixed_step(problem: &Problem, x: &Vector, g: &Vector, alpha: f64) -> StepOutcome {
    let (x_new, f_new, psi_new, d_norm_sq) = trial_point(problem, x, g, alpha);
    StepOutcome {
        alpha,
        x_new,
        f_new,
        psi_new,
        d_norm_sq,
        trials: 1,
        condition_met: true,
    }
}

/// Backtracking ladder from `init`: shrink until the decrease condition
/// holds or the trial drops to `c2`, in which case `c2` is taken as is.
fn search(
    problem: &Problem,
    x: &Vector,
    objective: f64,
    g: &Vector,
    rule: &LineSearch,
    init: f64,
) -> StepOutcome {
    let mut trial = init.clamp(rule.c2, rule.c1);
    let mut trials = 0;
    loop {
        let alpha = if trial <= rule.c2 { rule.c2 } else { trial };
        let (x_new, f_new, psi_new, d_norm_sq) = trial_point(problem, x, g, alpha);
        trials += 1;
        let ok = decrease_holds(objective, f_new, psi_new, alpha, rule.gamma, d_norm_sq);
        if ok || alpha == rule.c2 {
            return StepOutcome {
                alpha,
                x_new,
                f_new,
                psi_new,
                d_norm_sq,
                trials,
                condition_met: ok,
            };
        }
        trial *= rule.shrink;
    }
}

fn initial_trial(rule: &LineSearch, prev: Option<BbPair<'_>>) -> f64 {
    match (rule.init, prev) {
        (StepInit::BarzilaiBorwein, Some(pair)) => bb_initial_step(pair, rule.c1, rule.c2),
        _ => rule.c1,
    }
}

/// Finds an admissible step at `x` for `rule`.
///
/// For problems without a regularizer this is the gradient-descent
/// condition; otherwise the proximal one. Returns an error when the
/// gradient vanishes on a smooth problem, since `x` is then optimal.
pub fn find_step(
    problem: &Problem,
    x: &Vector,
    rule: &LineSearch,
    prev: Option<BbPair<'_>>,
) -> Result<StepOutcome> {
    rule.validate(problem.lipschitz())?;
    let (f, psi) = start_values(problem, x)?;
    let g = problem.gradient(x);
    check_finite_vec(&g, "gradient", 0)?;
    if problem.regularizer().is_none() && g.iter().all(|&v| v == 0.0) {
        return Err(invalid("x", "gradient vanishes; x is already optimal"));
    }
    Ok(search(
        problem,
        x,
        f + psi,
        &g,
        rule,
        initial_trial(rule, prev),
    ))
}

enum Mode {
    Fixed(f64),
    Search(LineSearch),
}

fn run(
    problem: &Problem,
    mode: Mode,
    x0: &Vector,
    opts: &RunOptions,
    solver_id: String,
) -> Result<Trace> {
    let proximal = problem.regularizer().is_some();
    let (mut f, mut psi) = start_values(problem, x0)?;
    let mut x = x0.clone();
    let mut g = problem.gradient(&x);
    check_finite_vec(&g, "gradient", 0)?;
    let mut prev: Option<(Vector, Vector)> = None;
    let mut builder = TraceBuilder::new(opts);
    let ids = |id: String| (problem.id(), id, None);

    for k in 0..opts.budget {
        if !proximal {
            if g.iter().all(|&v| v == 0.0) {
                return Ok(builder.finish(
                    k,
                    &x,
                    f,
                    psi,
                    Termination::ZeroGradient { k },
                    ids(solver_id),
                ));
            }
            if opts.tolerance.is_some_and(|tol| g.norm() <= tol) {
                return Ok(builder.finish(
                    k,
                    &x,
                    f,
                    psi,
                    Termination::Tolerance { k },
                    ids(solver_id),
                ));
            }
        }
        let out = match &mode {
            Mode::Fixed(alpha) => fixed_step(problem, &x, &g, *alpha),
            Mode::Search(rule) => {
                let pair = prev.as_ref().map(|(s, y)| BbPair {
                    step: s,
                    grad_change: y,
                });
                search(problem, &x, f + psi, &g, rule, initial_trial(rule, pair))
            }
        };
        if !out.condition_met {
            builder.fallback(k);
        }
        check_finite(out.f_new, "objective", k + 1)?;
        check_finite(out.psi_new, "regularizer", k + 1)?;
        check_region(problem, &out.x_new, k + 1)?;
        builder.push(k, &x, f, psi, Some((Step::Alpha(out.alpha), out.d_norm_sq)));

        let g_new = problem.gradient(&out.x_new);
        check_finite_vec(&g_new, "gradient", k + 1)?;
        if matches!(&mode, Mode::Search(rule) if rule.init == StepInit::BarzilaiBorwein) {
            prev = Some((&out.x_new - &x, &g_new - &g));
        }
        x = out.x_new;
        f = out.f_new;
        psi = out.psi_new;
        g = g_new;

        if proximal
            && opts
                .tolerance
                .is_some_and(|tol| out.d_norm_sq.sqrt() <= tol)
        {
            return Ok(builder.finish(
                k + 1,
                &x,
                f,
                psi,
                Termination::Tolerance { k: k + 1 },
                ids(solver_id),
            ));
        }
    }
    Ok(builder.finish(opts.budget, &x, f, psi, Termination::Budget, ids(solver_id)))
}

fn require_smooth(problem: &Problem, solver: &str) -> Result<()> {
    if problem.regularizer().is_some() {
        return Err(Error::Incompatible(format!(
            "{solver} needs a problem without regularizer; use the proximal variant"
        )));
    }
    Ok(())
}

fn require_regularizer(problem: &Problem, solver: &str) -> Result<()> {
    if problem.regularizer().is_none() {
        return Err(Error::Incompatible(format!("{solver} needs a regularizer")));
    }
    Ok(())
}

/// Gradient descent `x_{k+1} = x_k - alpha grad f(x_k)` with fixed
/// `alpha in (0, 1/L]`.
pub fn gd_fixed(problem: &Problem, alpha: f64, x0: &Vector, opts: &RunOptions) -> Result<Trace> {
    require_smooth(problem, "gd_fixed")?;
    let bound = 1.0 / problem.lipschitz();
    if !(alpha > 0.0 && alpha.is_finite()) || !within_bound(alpha, bound) {
        return Err(invalid(
            "alpha",
            format!("must lie in (0, 1/L] = (0, {bound}], got {alpha}; longer fixed steps go through gd_linesearch with c1 = c2"),
        ));
    }
    run(
        problem,
        Mode::Fixed(alpha),
        x0,
        opts,
        format!("gd_fixed:alpha={alpha}"),
    )
}

/// Gradient descent with steps in `[c2, c1]` satisfying the sufficient
/// decrease condition.
pub fn gd_linesearch(
    problem: &Problem,
    rule: &LineSearch,
    x0: &Vector,
    opts: &RunOptions,
) -> Result<Trace> {
    require_smooth(problem, "gd_linesearch")?;
    rule.validate(problem.lipschitz())?;
    run(
        problem,
        Mode::Search(*rule),
        x0,
        opts,
        solver_label("gd_linesearch", rule),
    )
}

/// Proximal gradient with fixed `1/lbar`, `lbar >= L`.
pub fn proxgrad_fixed(
    problem: &Problem,
    lbar: f64,
    x0: &Vector,
    opts: &RunOptions,
) -> Result<Trace> {
    require_regularizer(problem, "proxgrad_fixed")?;
    let l = problem.lipschitz();
    if !(lbar.is_finite() && lbar > 0.0 && within_bound(l, lbar)) {
        return Err(invalid(
            "lbar",
            format!("must be finite and >= L = {l}, got {lbar}"),
        ));
    }
    let alpha = 1.0 / lbar;
    run(
        problem,
        Mode::Fixed(alpha),
        x0,
        opts,
        format!("proxgrad_fixed:lbar={lbar}"),
    )
}

/// Proximal gradient with steps in `[c2, c1]` satisfying
/// `F(x + d) <= F(x) - gamma / (2 alpha) ||d||^2`.
pub fn proxgrad_linesearch(
    problem: &Problem,
    rule: &LineSearch,
    x0: &Vector,
    opts: &RunOptions,
) -> Result<Trace> {
    require_regularizer(problem, "proxgrad_linesearch")?;
    rule.validate(problem.lipschitz())?;
    run(
        problem,
        Mode::Search(*rule),
        x0,
        opts,
        solver_label("proxgrad_linesearch", rule),
    )
}

fn solver_label(name: &str, rule: &LineSearch) -> String {
    let init = match rule.init {
        StepInit::Constant => "const",
        StepInit::BarzilaiBorwein => "bb",
    };
    format!(
        "{name}:gamma={},c1={},c2={},shrink={},init={init}",
        rule.gamma, rule.c1, rule.c2, rule.shrink
    )
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::oracle::{gallery, make_box, make_l1, make_power, make_quadratic, make_zero, Basis};

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn square() -> Problem {
        // f(x) = x^2, L = 2
        make_quadratic(&[2.0], 0, Basis::Identity, v(&[0.0])).unwrap()
    }

    #[test]
    fn one_step_to_optimum_on_square() {
        let t = gd_fixed(&square(), 0.5, &v(&[1.0]), &RunOptions::new(10)).unwrap();
        assert_eq!(t.records[1].f, 0.0);
        assert_eq!(t.final_iterate()[0], 0.0);
        assert_eq!(t.termination, Termination::ZeroGradient { k: 1 });
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn zero_gradient_start_gives_trivial_trace() {
        let t = gd_fixed(&square(), 0.5, &v(&[0.0]), &RunOptions::new(10)).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.records[0].step, None);
    }

    #[test]
    fn budget_plus_one_records() {
        let p = gallery::quadratic(5, 1, 2, -1.0, 1.0).unwrap();
        let t = gd_fixed(
            &p,
            1.0 / p.lipschitz(),
            &gallery::random_start(5, 0),
            &RunOptions::new(50),
        )
        .unwrap();
        assert_eq!(t.len(), 51);
        assert!(t.records.iter().enumerate().all(|(i, r)| r.k == i));
        assert_eq!(
            t.snapshots.iter().map(|s| s.k).collect::<Vec<_>>(),
            vec![0, 1, 2, 4, 8, 16, 32, 50]
        );
    }

    #[test]
    fn quartic_first_step() {
        let p = make_power(4).unwrap();
        let t = gd_fixed(&p, 1.0 / 12.0, &v(&[1.0]), &RunOptions::new(1)).unwrap();
        assert!((t.final_iterate()[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn descent_estimate_holds_for_fixed_steps() {
        let p = gallery::quadratic(10, 3, 5, -2.0, 2.0).unwrap();
        let l = p.lipschitz();
        let alpha = 0.7 / l;
        let m = alpha - 0.5 * l * alpha * alpha;
        let x0 = gallery::random_start(10, 5);
        let t = gd_fixed(
            &p,
            alpha,
            &x0,
            &RunOptions::new(200).with_snapshots(super::super::SnapshotPolicy::Every),
        )
        .unwrap();
        for w in t.snapshots.windows(2) {
            let g = p.gradient(&w[0].x);
            let drop = p.f(&w[0].x) - p.f(&w[1].x);
            assert!(drop >= m * g.norm_squared() - 1e-12 * (1.0 + p.f(&w[0].x)));
        }
    }

    #[test]
    fn gd_fixed_rejects_long_steps_and_regularized_problems() {
        assert!(gd_fixed(&square(), 0.51, &v(&[1.0]), &RunOptions::new(1)).is_err());
        assert!(gd_fixed(&square(), 0.0, &v(&[1.0]), &RunOptions::new(1)).is_err());
        let reg = square().with_regularizer(Arc::new(make_l1(1.0).unwrap()));
        assert!(matches!(
            gd_fixed(&reg, 0.5, &v(&[1.0]), &RunOptions::new(1)),
            Err(Error::Incompatible(_))
        ));
    }

    #[test]
    fn line_search_with_equal_bounds_matches_fixed() {
        let p = square();
        let rule = LineSearch::new(1.0, 0.5, 0.5);
        let x0 = v(&[1.0]);
        let a = gd_linesearch(&p, &rule, &x0, &RunOptions::new(5)).unwrap();
        let b = gd_fixed(&p, 0.5, &x0, &RunOptions::new(5)).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.snapshots, b.snapshots);

        let q = gallery::quadratic(8, 2, 1, -1.0, 1.0).unwrap();
        let alpha = 1.0 / q.lipschitz();
        let x0 = gallery::random_start(8, 3);
        let a = gd_linesearch(
            &q,
            &LineSearch::new(1.0, alpha, alpha),
            &x0,
            &RunOptions::new(100),
        )
        .unwrap();
        let b = gd_fixed(&q, alpha, &x0, &RunOptions::new(100)).unwrap();
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn long_step_equality_case_is_accepted() {
        // f = x^2, gamma = 0.5, alpha = 0.75: f(x - 0.75 * 2x) = 0.25 x^2 and
        // the target is x^2 - 0.1875 * 4 x^2 = 0.25 x^2.
        let p = square();
        let rule = LineSearch::new(0.5, 0.75, 0.75);
        let out = find_step(&p, &v(&[1.0]), &rule, None).unwrap();
        assert_eq!(out.alpha, 0.75);
        assert_eq!(out.f_new, 0.25);
        assert!(out.condition_met);
    }

    #[test]
    fn unit_curvature_boundary_passes() {
        // f = L/2 x^2 with gamma = 1: alpha = 1/L lands on the optimum and
        // meets the condition with equality.
        let l = 4.0;
        let p = make_quadratic(&[l], 0, Basis::Identity, v(&[0.0])).unwrap();
        let rule = LineSearch::new(1.0, 1.0 / l, 1.0 / l);
        let out = find_step(&p, &v(&[2.0]), &rule, None).unwrap();
        assert!(out.condition_met);
        assert_eq!(out.alpha, 0.25);
    }

    #[test]
    fn ladder_matches_enumeration() {
        // On f = L/2 x^2 the decrease condition with gamma = 0.5 holds iff
        // alpha <= 1.5 / L. Enumerating the ladder 4/L, 2/L, 1/L, ... the
        // first admissible trial is 1/L.
        let l = 8.0;
        let p = make_quadratic(&[l], 0, Basis::Identity, v(&[0.0])).unwrap();
        let rule = LineSearch::new(0.5, 4.0 / l, 0.5 / l);
        let admissible = |a: f64| {
            let x: f64 = 1.0;
            let xn = x - a * l * x;
            0.5 * l * xn * xn <= 0.5 * l * x * x - 0.5 / (2.0 * a) * (xn - x).powi(2)
        };
        let expected = (0..10)
            .map(|j| rule.c1 * rule.shrink.powi(j))
            .find(|&a| a <= rule.c2 || admissible(a))
            .unwrap();
        assert_eq!(expected, 1.0 / l);
        let out = find_step(&p, &v(&[1.0]), &rule, None).unwrap();
        assert_eq!(out.alpha, expected);
        assert_eq!(out.trials, 3);
    }

    #[test]
    fn fallback_to_c2() {
        // nothing above c2 = 1/L passes with gamma = 1 on a 1-D quadratic
        let l = 2.0;
        let p = make_quadratic(&[l], 0, Basis::Identity, v(&[0.0])).unwrap();
        let rule = LineSearch::new(1.0, 100.0, 0.5).with_shrink(0.9);
        let out = find_step(&p, &v(&[1.0]), &rule, None).unwrap();
        assert_eq!(out.alpha, 0.5);
        assert!(out.condition_met);
    }

    #[test]
    fn bb_step_is_clamped() {
        let s = v(&[1.0, 0.0]);
        let y = v(&[0.1, 0.0]);
        assert_eq!(
            bb_initial_step(
                BbPair {
                    step: &s,
                    grad_change: &y
                },
                5.0,
                0.5
            ),
            5.0
        );
        let y = v(&[100.0, 0.0]);
        assert_eq!(
            bb_initial_step(
                BbPair {
                    step: &s,
                    grad_change: &y
                },
                5.0,
                0.5
            ),
            0.5
        );
        let y = v(&[0.5, 0.0]);
        assert_eq!(
            bb_initial_step(
                BbPair {
                    step: &s,
                    grad_change: &y
                },
                5.0,
                0.5
            ),
            2.0
        );
        let y = v(&[-1.0, 0.0]);
        assert_eq!(
            bb_initial_step(
                BbPair {
                    step: &s,
                    grad_change: &y
                },
                5.0,
                0.5
            ),
            5.0
        );
    }

    #[test]
    fn find_step_rejects_stationary_point() {
        let rule = LineSearch::new(1.0, 0.5, 0.5);
        assert!(find_step(&square(), &v(&[0.0]), &rule, None).is_err());
    }

    #[test]
    fn prox_with_zero_regularizer_matches_gd() {
        let p = gallery::quadratic(6, 2, 4, -1.0, 1.0).unwrap();
        let lbar = p.lipschitz();
        let x0 = gallery::random_start(6, 4);
        let a = gd_fixed(&p, 1.0 / lbar, &x0, &RunOptions::new(60)).unwrap();
        let pz = p.clone().with_regularizer(Arc::new(make_zero()));
        let b = proxgrad_fixed(&pz, lbar, &x0, &RunOptions::new(60)).unwrap();
        assert_eq!(a.objectives(), b.objectives());
        assert_eq!(a.final_iterate(), b.final_iterate());
    }

    #[test]
    fn scalar_lasso_fixed_point() {
        // f = 1/2 (x - 3)^2, psi = |x|, lbar = 1: x1 = soft(3, 1) = 2
        let p = make_quadratic(&[1.0], 0, Basis::Identity, v(&[3.0]))
            .unwrap()
            .with_regularizer(Arc::new(make_l1(1.0).unwrap()));
        for x0 in [-5.0, 0.0, 0.7, 10.0] {
            let t = proxgrad_fixed(&p, 1.0, &v(&[x0]), &RunOptions::new(3)).unwrap();
            assert_eq!(t.snapshot(1).unwrap()[0], 2.0);
            assert_eq!(t.final_iterate()[0], 2.0);
        }
    }

    #[test]
    fn box_constrained_converges_to_boundary() {
        let p = make_quadratic(&[1.0], 0, Basis::Identity, v(&[2.0]))
            .unwrap()
            .with_regularizer(Arc::new(make_box(&v(&[0.0]), &v(&[1.0])).unwrap()));
        let t = proxgrad_fixed(&p, 1.0, &v(&[0.2]), &RunOptions::new(20)).unwrap();
        assert_eq!(t.final_iterate()[0], 1.0);
    }

    #[test]
    fn prox_rejects_infeasible_start_and_small_lbar() {
        let p = make_quadratic(&[1.0], 0, Basis::Identity, v(&[2.0]))
            .unwrap()
            .with_regularizer(Arc::new(make_box(&v(&[0.0]), &v(&[1.0])).unwrap()));
        assert_eq!(
            proxgrad_fixed(&p, 1.0, &v(&[3.0]), &RunOptions::new(2)).unwrap_err(),
            Error::InfeasibleStart
        );
        assert!(proxgrad_fixed(&p, 0.5, &v(&[0.5]), &RunOptions::new(2)).is_err());
        assert!(proxgrad_fixed(&square(), 2.0, &v(&[0.5]), &RunOptions::new(2)).is_err());
    }

    #[test]
    fn prox_line_search_with_equal_bounds_matches_fixed() {
        let p = gallery::lasso(12, 8, 2, 0.1).unwrap();
        let lbar = p.lipschitz();
        let x0 = Vector::zeros(12);
        let a = proxgrad_fixed(&p, lbar, &x0, &RunOptions::new(80)).unwrap();
        let rule = LineSearch::new(1.0, 1.0 / lbar, 1.0 / lbar);
        let b = proxgrad_linesearch(&p, &rule, &x0, &RunOptions::new(80)).unwrap();
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn power_instance_stays_in_region() {
        let p = make_power(4).unwrap();
        assert!(matches!(
            gd_fixed(&p, 1.0 / 12.0, &v(&[1.5]), &RunOptions::new(3)),
            Err(Error::OutsideValidityRegion { .. })
        ));
    }

    #[test]
    fn determinism() {
        let p = gallery::lasso(10, 6, 9, 0.2).unwrap();
        let rule = LineSearch::new(0.5, 10.0 / p.lipschitz(), 1.5 / p.lipschitz())
            .with_init(StepInit::BarzilaiBorwein);
        let x0 = Vector::zeros(10);
        let a = proxgrad_linesearch(&p, &rule, &x0, &RunOptions::new(300)).unwrap();
        let b = proxgrad_linesearch(&p, &rule, &x0, &RunOptions::new(300)).unwrap();
        assert_eq!(a, b);
    }
}
