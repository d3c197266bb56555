use rand::SeedableRng;

use super::{
    check_finite, check_region, start_values, within_bound, RunOptions, SamplingDistribution,
    SolverRng, Step, Termination, Trace, TraceBuilder,
};
use crate::error::{invalid, Error, Result};
use crate::oracle::{Problem, ScalarPenalty, Vector};

fn check_coordinate_setup(
    problem: &Problem,
    lbar: &[f64],
    dist: &SamplingDistribution,
) -> Result<()> {
    let n = problem.dim();
    if lbar.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: lbar.len(),
        });
    }
    if dist.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: dist.len(),
        });
    }
    for (i, (&lb, &li)) in lbar.iter().zip(problem.coord_lipschitz()).enumerate() {
        if !(lb.is_finite() && lb > 0.0 && within_bound(li, lb)) {
            return Err(invalid(
                "lbar",
                format!("lbar[{i}] = {lb} must be finite and >= L_{i} = {li}"),
            ));
        }
    }
    Ok(())
}

/// Runs the shared coordinate loop. `penalty(i)` is the scalar regularizer
/// for coordinate `i` (`None` for the smooth method).
fn run(
    problem: &Problem,
    lbar: &[f64],
    dist: &SamplingDistribution,
    seed: u64,
    x0: &Vector,
    opts: &RunOptions,
    solver_id: String,
    penalty: impl Fn(usize) -> Option<ScalarPenalty>,
) -> Result<Trace> {
    let (mut f, mut psi) = start_values(problem, x0)?;
    let mut x = x0.clone();
    let mut builder = TraceBuilder::new(opts);
    let ids = |id: String| (problem.id(), id, Some(seed));

    if problem.regularizer().is_none() && problem.gradient(&x).iter().all(|&v| v == 0.0) {
        return Ok(builder.finish(
            0,
            &x,
            f,
            psi,
            Termination::ZeroGradient { k: 0 },
            ids(solver_id),
        ));
    }

    let mut rng = SolverRng::seed_from_u64(seed);
    for k in 0..opts.budget {
        let i = dist.sample_index(&mut rng);
        let g = problem.smooth().coord_gradient(&x, i);
        check_finite(g, "coordinate gradient", k)?;
        let alpha = 1.0 / lbar[i];
        let old = x[i];
        let trial = old - alpha * g;
        let new = match penalty(i) {
            Some(p) => p.prox(trial, alpha),
            None => trial,
        };
        let d = new - old;
        let mut x_new = x.clone();
        x_new[i] = new;
        let f_new = problem.f(&x_new);
        check_finite(f_new, "objective", k + 1)?;
        let psi_new = problem.psi(&x_new).finite().ok_or(Error::NonFinite {
            context: "regularizer",
            k: k + 1,
        })?;
        check_region(problem, &x_new, k + 1)?;
        builder.push(k, &x, f, psi, Some((Step::Coordinate(i), d * d)));
        x = x_new;
        f = f_new;
        psi = psi_new;
    }
    Ok(builder.finish(opts.budget, &x, f, psi, Termination::Budget, ids(solver_id)))
}

/// Stochastic coordinate descent: draw `i ~ dist` and set
/// `x_i <- x_i - grad_i f(x) / lbar_i`.
pub fn cd_stochastic(
    problem: &Problem,
    lbar: &[f64],
    dist: &SamplingDistribution,
    seed: u64,
    x0: &Vector,
    opts: &RunOptions,
) -> Result<Trace> {
    if problem.regularizer().is_some() {
        return Err(Error::Incompatible(
            "cd_stochastic needs a problem without regularizer; use proxcd_stochastic".into(),
        ));
    }
    check_coordinate_setup(problem, lbar, dist)?;
    run(
        problem,
        lbar,
        dist,
        seed,
        x0,
        opts,
        "cd_stochastic".into(),
        |_| None,
    )
}

/// Stochastic proximal coordinate descent on a separable regularizer:
/// `x_i <- prox_{psi_i}(x_i - grad_i f(x) / lbar_i, 1 / lbar_i)`.
pub fn proxcd_stochastic(
    problem: &Problem,
    lbar: &[f64],
    dist: &SamplingDistribution,
    seed: u64,
    x0: &Vector,
    opts: &RunOptions,
) -> Result<Trace> {
    let reg = problem
        .regularizer()
        .ok_or_else(|| Error::Incompatible("proxcd_stochastic needs a regularizer".into()))?;
    if !reg.is_separable() {
        return Err(Error::Incompatible(format!(
            "proxcd_stochastic needs a separable regularizer, got {}",
            reg.name()
        )));
    }
    check_coordinate_setup(problem, lbar, dist)?;
    let components: Vec<ScalarPenalty> = (0..problem.dim())
        .map(|i| {
            reg.component(i)
                .expect("separable regularizer covers every coordinate")
        })
        .collect();
    run(
        problem,
        lbar,
        dist,
        seed,
        x0,
        opts,
        "proxcd_stochastic".into(),
        |i| Some(components[i]),
    )
}
