#![allow(dead_code)]

use convrate::oracle::{
    make_box, make_l1, make_zero, prox, GroupNorm, Problem, Regularizer, ScalarPenalty, Vector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Worst relative error of the analytic gradient against central
/// differences, over `points` random points in `[-radius, radius]^n`.
pub fn fd_gradient_error(problem: &Problem, points: usize, radius: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = problem.dim();
    let mut worst = 0.0f64;
    for _ in 0..points {
        let x = Vector::from_fn(n, |_, _| rng.random_range(-radius..radius));
        let g = problem.gradient(&x);
        let fd = Vector::from_fn(n, |i, _| {
            let h = 1e-5 * x[i].abs().max(1.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            (problem.f(&xp) - problem.f(&xm)) / (2.0 * h)
        });
        let err = (&fd - &g).norm() / g.norm().max(1e-8);
        worst = worst.max(err);
    }
    worst
}

/// Minimiser of `penalty(u) + (u - y)^2 / (2 lambda)` by a coarse grid over
/// `[y - 10, y + 10]` followed by a fine grid around the coarse winner.
pub fn brute_force_prox(penalty: &ScalarPenalty, y: f64, lambda: f64) -> f64 {
    let obj = |u: f64| match penalty.value(u).finite() {
        Some(v) => v + (u - y) * (u - y) / (2.0 * lambda),
        None => f64::INFINITY,
    };
    let argmin = |lo: f64, hi: f64, steps: usize| {
        let h = (hi - lo) / steps as f64;
        (0..=steps)
            .map(|j| lo + j as f64 * h)
            .min_by(|a, b| obj(*a).total_cmp(&obj(*b)))
            .unwrap()
    };
    let coarse = argmin(y - 10.0, y + 10.0, 20_000);
    argmin(coarse - 2e-3, coarse + 2e-3, 40_000)
}

pub fn scalar_penalties() -> Vec<ScalarPenalty> {
    vec![
        ScalarPenalty::Zero,
        ScalarPenalty::Abs { weight: 0.1 },
        ScalarPenalty::Abs { weight: 1.0 },
        ScalarPenalty::Abs { weight: 2.5 },
        ScalarPenalty::Interval {
            lower: -1.0,
            upper: 0.5,
        },
        ScalarPenalty::Interval {
            lower: 0.0,
            upper: 3.0,
        },
    ]
}

/// Worst `|prox - brute force|` over a fixed set of scalar problems.
pub fn scalar_prox_error(seed: u64, cases: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for pen in scalar_penalties() {
        for _ in 0..cases {
            let y = rng.random_range(-4.0..4.0);
            let lambda = rng.random_range(0.05..3.0);
            let err = (pen.prox(y, lambda) - brute_force_prox(&pen, y, lambda)).abs();
            worst = worst.max(err);
        }
    }
    worst
}

pub fn vector_regularizers(dim: usize) -> Vec<Box<dyn Regularizer>> {
    vec![
        Box::new(make_zero()),
        Box::new(make_l1(0.7).unwrap()),
        Box::new(
            make_box(
                &Vector::from_element(dim, -0.5),
                &Vector::from_element(dim, 1.5),
            )
            .unwrap(),
        ),
        Box::new(GroupNorm::new(1.3).unwrap()),
    ]
}

/// Number of random pairs violating `||prox(a) - prox(b)|| <= ||a - b||`.
pub fn nonexpansive_failures(dim: usize, pairs: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    for reg in vector_regularizers(dim) {
        for _ in 0..pairs {
            let a = Vector::from_fn(dim, |_, _| rng.random_range(-3.0..3.0));
            let b = Vector::from_fn(dim, |_, _| rng.random_range(-3.0..3.0));
            let lambda = rng.random_range(0.01..2.0);
            let pa = prox(reg.as_ref(), &a, lambda).unwrap();
            let pb = prox(reg.as_ref(), &b, lambda).unwrap();
            if (pa - pb).norm() > (&a - &b).norm() * (1.0 + 1e-12) {
                failures += 1;
            }
        }
    }
    failures
}
