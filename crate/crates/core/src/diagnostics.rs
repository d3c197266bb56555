//! Verdicts over traces.
//!
//! Asymptotic statements cannot be decided from finite data, so every
//! verdict here is a finite-sample proxy with an explicit threshold:
//!
//! * summability: the partial-sum increment over the final decade of `k`
//!   must be a small fraction of the total;
//! * `k * delta_k -> 0`: the largest `k * delta_k` over the final decade
//!   must be a small fraction of its global maximum, and the tail ratio
//!   reported by [`kdelta_tail_ratio`] compares the final value against the
//!   global maximum.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::oracle::{Problem, SolutionSet, Vector};
use crate::solvers::{SamplingDistribution, Step, Trace};

/// Negative gaps down to this magnitude are floating-point noise and get
/// clamped to zero.
pub const CLAMP_TOLERANCE: f64 = 1e-10;

/// Maximum number of log-spaced points used by a power-law fit.
pub const MAX_FIT_POINTS: usize = 200;

/// Suboptimality gaps `delta_k = F(x_k) - F*`, indexed by `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSequence {
    deltas: Vec<f64>,
    source: String,
    clamped: usize,
}

impl DeltaSequence {
    pub fn new(values: Vec<f64>, source: impl Into<String>) -> Result<Self> {
        let mut clamped = 0;
        let mut deltas = values;
        for (k, d) in deltas.iter_mut().enumerate() {
            if !d.is_finite() {
                return Err(Error::NonFinite {
                    context: "delta",
                    k,
                });
            }
            if *d < 0.0 {
                if *d < -CLAMP_TOLERANCE {
                    return Err(Error::NegativeDelta { k, value: *d });
                }
                *d = 0.0;
                clamped += 1;
            }
        }
        Ok(Self {
            deltas,
            source: source.into(),
            clamped,
        })
    }

    /// Gaps of a trace whose records are indexed contiguously from 0.
    pub fn from_trace(trace: &Trace, fstar: f64) -> Result<Self> {
        let values = trace.records.iter().map(|r| r.objective - fstar).collect();
        Self::new(values, format!("{}/{}", trace.problem_id, trace.solver_id))
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Number of tiny negative entries set to zero.
    pub fn clamped_count(&self) -> usize {
        self.clamped
    }

    pub fn last_k(&self) -> usize {
        self.deltas.len().saturating_sub(1)
    }

    pub fn partial_sums(&self) -> Vec<f64> {
        self.deltas
            .iter()
            .scan(0.0, |acc, &d| {
                *acc += d;
                Some(*acc)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequencePolicy {
    /// Relative slack in `delta_{k+1} <= delta_k (1 + slack)`.
    pub monotone_slack: f64,
    /// Largest admissible final-decade share of the total partial sum.
    pub summable_fraction: f64,
    /// Largest admissible final-decade `max k delta_k` relative to the
    /// global maximum.
    pub tail_factor: f64,
}

impl Default for SequencePolicy {
    fn default() -> Self {
        Self {
            monotone_slack: 1e-12,
            summable_fraction: 0.05,
            tail_factor: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceVerdict {
    pub monotone: bool,
    pub partial_sums_bounded: bool,
    pub kdelta_decreasing_tail: bool,
    pub first_increase: Option<usize>,
    /// `(S_N - S_{N/10}) / S_N`.
    pub final_decade_share: f64,
    /// `max_{k >= N/10} k delta_k / max_k k delta_k`.
    pub final_decade_kdelta_ratio: f64,
}

impl SequenceVerdict {
    pub fn all_pass(&self) -> bool {
        self.monotone && self.partial_sums_bounded && self.kdelta_decreasing_tail
    }
}

/// Checks monotonicity, (empirical) summability and the decay of
/// `k * delta_k` over the final decade.
pub fn check_monotone_summable(
    deltas: &DeltaSequence,
    policy: &SequencePolicy,
) -> Result<SequenceVerdict> {
    let d = deltas.deltas();
    if d.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "need at least 10 gaps, got {}",
            d.len()
        )));
    }
    let first_increase = d
        .windows(2)
        .position(|w| w[1] > w[0] * (1.0 + policy.monotone_slack));

    let last = d.len() - 1;
    let decade_start = last / 10;
    let sums = deltas.partial_sums();
    let total = sums[last];
    let share = if total > 0.0 {
        (total - sums[decade_start]) / total
    } else {
        0.0
    };

    let (global, tail) = kdelta_maxima(d, decade_start);
    let ratio = if global > 0.0 { tail / global } else { 0.0 };

    Ok(SequenceVerdict {
        monotone: first_increase.is_none(),
        partial_sums_bounded: share <= policy.summable_fraction,
        kdelta_decreasing_tail: ratio <= policy.tail_factor,
        first_increase,
        final_decade_share: share,
        final_decade_kdelta_ratio: ratio,
    })
}

fn kdelta_maxima(d: &[f64], tail_start: usize) -> (f64, f64) {
    let mut global = 0.0f64;
    let mut tail = 0.0f64;
    for (k, &v) in d.iter().enumerate() {
        let kd = k as f64 * v;
        global = global.max(kd);
        if k >= tail_start {
            tail = tail.max(kd);
        }
    }
    (global, tail)
}

/// `N delta_N / max_k k delta_k` (zero when every product vanishes).
pub fn kdelta_tail_ratio(deltas: &DeltaSequence) -> f64 {
    let d = deltas.deltas();
    let Some(&last) = d.last() else { return 0.0 };
    let (global, _) = kdelta_maxima(d, d.len());
    if global > 0.0 {
        (d.len() - 1) as f64 * last / global
    } else {
        0.0
    }
}

/// `delta_k ~ constant * k^(-exponent)` fitted over a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub exponent: f64,
    pub constant: f64,
    pub window: (usize, usize),
    pub samples: usize,
    pub warnings: Vec<String>,
}

/// Integer `k` values spread logarithmically over `[lo, hi]`, at most
/// `max_points` of them, deduplicated.
pub fn log_spaced(lo: usize, hi: usize, max_points: usize) -> Vec<usize> {
    if lo > hi || max_points == 0 {
        return Vec::new();
    }
    if lo == hi || max_points == 1 {
        return vec![lo];
    }
    let (a, b) = ((lo.max(1) as f64).ln(), (hi as f64).ln());
    let mut ks: Vec<usize> = (0..max_points)
        .map(|j| {
            let t = j as f64 / (max_points - 1) as f64;
            ((a + t * (b - a)).exp().round() as usize).clamp(lo, hi)
        })
        .collect();
    ks.dedup();
    ks
}

/// Least-squares fit of `log delta_k` against `log k` on log-spaced samples
/// of `window = (k_lo, k_hi)`.
///
/// Zeros inside the window shrink it to the positive prefix, with a
/// warning. Fewer than 10 usable samples is an error.
pub fn fit_rate_exponent(deltas: &DeltaSequence, window: (usize, usize)) -> Result<RateFit> {
    let (k_lo, mut k_hi) = window;
    let d = deltas.deltas();
    if k_lo == 0 {
        return Err(invalid("window", "k_lo must be at least 1"));
    }
    if k_hi < k_lo.saturating_mul(10) {
        return Err(invalid(
            "window",
            format!("({k_lo}, {k_hi}) spans less than a decade"),
        ));
    }
    if k_hi >= d.len() {
        return Err(invalid(
            "window",
            format!("k_hi = {k_hi} beyond the last index {}", deltas.last_k()),
        ));
    }
    let mut warnings = Vec::new();
    if let Some(off) = d[k_lo..=k_hi].iter().position(|&v| v <= 0.0) {
        let zero_at = k_lo + off;
        warnings.push(format!(
            "delta vanishes at k = {zero_at}; window shrunk to ({k_lo}, {})",
            zero_at.saturating_sub(1)
        ));
        if zero_at <= k_lo {
            return Err(Error::InsufficientData(
                "no positive gaps in the fit window".into(),
            ));
        }
        k_hi = zero_at - 1;
    }
    let ks = log_spaced(k_lo, k_hi, MAX_FIT_POINTS);
    if ks.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "only {} samples in window ({k_lo}, {k_hi})",
            ks.len()
        )));
    }
    let points: Vec<(f64, f64)> = ks.iter().map(|&k| ((k as f64).ln(), d[k].ln())).collect();
    let (slope, intercept) = least_squares_line(&points);
    Ok(RateFit {
        exponent: -slope,
        constant: intercept.exp(),
        window: (k_lo, k_hi),
        samples: ks.len(),
        warnings,
    })
}

fn least_squares_line(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Outcome of checking `||x_k - center||^2 <= radius_sq` on every snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallVerdict {
    pub holds: bool,
    pub radius_sq: f64,
    pub max_dist_sq: f64,
    pub violations: Vec<usize>,
    pub checked: usize,
}

pub fn check_ball(trace: &Trace, center: &Vector, radius_sq: f64, tol: f64) -> Result<BallVerdict> {
    if trace.snapshots.is_empty() {
        return Err(Error::InsufficientData(
            "trace has no iterate snapshots".into(),
        ));
    }
    let mut max_dist_sq = 0.0f64;
    let mut violations = Vec::new();
    for s in &trace.snapshots {
        let dsq = (&s.x - center).norm_squared();
        max_dist_sq = max_dist_sq.max(dsq);
        if dsq > radius_sq + tol {
            violations.push(s.k);
        }
    }
    Ok(BallVerdict {
        holds: violations.is_empty(),
        radius_sq,
        max_dist_sq,
        violations,
        checked: trace.snapshots.len(),
    })
}

/// Squared radius `||x0 - xbar||^2 + (2 c1 / gamma)(f(x0) - f*)` enclosing
/// all gradient-descent iterates under the sufficient-decrease rule.
pub fn line_search_radius_sq(x0: &Vector, xbar: &Vector, gamma: f64, c1: f64, gap0: f64) -> f64 {
    (x0 - xbar).norm_squared() + 2.0 * c1 / gamma * gap0
}

/// Squared radius `||x0 - xbar||^2 + (2 L c1^2 / gamma)(F(x0) - F*)` for
/// proximal gradient with line search.
pub fn prox_line_search_radius_sq(
    x0: &Vector,
    xbar: &Vector,
    gamma: f64,
    c1: f64,
    lipschitz: f64,
    gap0: f64,
) -> f64 {
    (x0 - xbar).norm_squared() + 2.0 * lipschitz * c1 * c1 / gamma * gap0
}

/// Checks every snapshot of a line-search gradient run against
/// [`line_search_radius_sq`] (with an absolute slack of `1e-9`).
pub fn check_bounded_iterates(
    trace: &Trace,
    xbar: &Vector,
    gamma: f64,
    c1: f64,
    fstar: f64,
) -> Result<BallVerdict> {
    if trace.snapshots.first().map(|s| s.k) != Some(0) {
        return Err(Error::InsufficientData(
            "trace lacks the x0 snapshot".into(),
        ));
    }
    let gap0 = trace.records[0].f - fstar;
    let radius_sq = line_search_radius_sq(trace.initial_iterate(), xbar, gamma, c1, gap0);
    check_ball(trace, xbar, radius_sq, 1e-9)
}

/// `sum_i (lbar_i / p_i) (x_i - xbar_i)^2`.
pub fn weighted_r_squared(
    x: &Vector,
    xbar: &Vector,
    lbar: &[f64],
    dist: &SamplingDistribution,
) -> Result<f64> {
    let n = x.len();
    for len in [xbar.len(), lbar.len(), dist.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: len,
            });
        }
    }
    Ok(x.iter()
        .zip(xbar.iter())
        .zip(lbar.iter().zip(dist.probabilities()))
        .map(|((xi, bi), (li, pi))| li / pi * (xi - bi) * (xi - bi))
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceProfile {
    pub ks: Vec<usize>,
    pub distances: Vec<f64>,
    /// Largest distance over the final decade divided by the initial one.
    pub tail_ratio: f64,
    pub decays: bool,
}

/// Distance of each snapshot to the solution set.
pub fn dist_to_solution(trace: &Trace, set: &SolutionSet, factor: f64) -> Result<DistanceProfile> {
    if trace.snapshots.is_empty() {
        return Err(Error::InsufficientData(
            "trace has no iterate snapshots".into(),
        ));
    }
    let ks: Vec<usize> = trace.snapshots.iter().map(|s| s.k).collect();
    let distances: Vec<f64> = trace.snapshots.iter().map(|s| set.distance(&s.x)).collect();
    let last_k = *ks.last().unwrap();
    let tail_max = ks
        .iter()
        .zip(&distances)
        .filter(|(&k, _)| k >= last_k / 10)
        .map(|(_, &d)| d)
        .fold(0.0, f64::max);
    let initial = distances[0];
    let tail_ratio = if initial > 0.0 {
        tail_max / initial
    } else {
        0.0
    };
    Ok(DistanceProfile {
        ks,
        distances,
        tail_ratio,
        decays: tail_ratio <= factor,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentVerdict {
    pub ok: bool,
    pub violations: Vec<usize>,
}

/// `F(x_{k+1}) <= F(x_k) + rel_tol * max(1, |F(x_k)|)` at every record.
pub fn check_descent(trace: &Trace, rel_tol: f64) -> DescentVerdict {
    let violations: Vec<usize> = trace
        .records
        .windows(2)
        .filter(|w| w[1].objective > w[0].objective + rel_tol * w[0].objective.abs().max(1.0))
        .map(|w| w[0].k)
        .collect();
    DescentVerdict {
        ok: violations.is_empty(),
        violations,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayVerdict {
    pub checked: usize,
    pub failures: Vec<usize>,
    /// Iterations that miss the inequality in exact floating-point
    /// comparison but are within the rounding slack.
    pub within_slack: usize,
}

impl ReplayVerdict {
    pub fn all_pass(&self) -> bool {
        self.failures.is_empty() && self.checked > 0
    }

    fn empty() -> Self {
        Self {
            checked: 0,
            failures: Vec::new(),
            within_slack: 0,
        }
    }

    /// Tallies `lhs <= rhs`, tolerating `slack`.
    fn record(&mut self, k: usize, lhs: f64, rhs: f64, slack: f64) {
        self.checked += 1;
        if lhs <= rhs {
            return;
        }
        if lhs <= rhs + slack {
            self.within_slack += 1;
        } else {
            self.failures.push(k);
        }
    }
}

/// Re-evaluates `F_{k+1} <= F_k - gamma / (2 alpha_k) ||d_k||^2` from the
/// stored records, allowing `rel_tol * max(1, |F_k|)` of rounding.
pub fn replay_decrease(trace: &Trace, gamma: f64, rel_tol: f64) -> ReplayVerdict {
    let mut v = ReplayVerdict::empty();
    for w in trace.records.windows(2) {
        let (Some(Step::Alpha(alpha)), Some(dsq)) = (w[0].step, w[0].d_norm_sq) else {
            continue;
        };
        let target = w[0].objective - gamma / (2.0 * alpha) * dsq;
        v.record(
            w[0].k,
            w[1].objective,
            target,
            rel_tol * w[0].objective.abs().max(1.0),
        );
    }
    v
}

/// Recomputes the decrease condition from the problem oracle at
/// consecutive snapshots. Smooth problems are checked in gradient form
/// `f(x_{k+1}) <= f(x_k) - (gamma alpha / 2) ||grad f(x_k)||^2`; composite
/// ones in displacement form. `rel_tol` scales with `max(1, |F(x_k)|)`.
pub fn replay_with_oracle(
    problem: &Problem,
    trace: &Trace,
    gamma: f64,
    rel_tol: f64,
) -> ReplayVerdict {
    let mut v = ReplayVerdict::empty();
    for w in trace.snapshots.windows(2) {
        if w[1].k != w[0].k + 1 {
            continue;
        }
        let Some(Step::Alpha(alpha)) = trace.records.get(w[0].k).and_then(|r| r.step) else {
            continue;
        };
        let (x, xn) = (&w[0].x, &w[1].x);
        match (
            problem.objective(x).finite(),
            problem.objective(xn).finite(),
        ) {
            (Some(fx), Some(fxn)) => {
                let target = if problem.regularizer().is_none() {
                    fx - gamma * alpha / 2.0 * problem.gradient(x).norm_squared()
                } else {
                    fx - gamma / (2.0 * alpha) * (xn - x).norm_squared()
                };
                v.record(w[0].k, fxn, target, rel_tol * fx.abs().max(1.0));
            }
            _ => v.record(w[0].k, f64::INFINITY, 0.0, 0.0),
        }
    }
    v
}

/// Slack of the proximal-step inequality
/// `b^T d + (a/2)||d||^2 + psi(x + d) - psi(x) <= -(a/2)||d||^2`
/// with `b = grad f(x)`, `a = 1/alpha`, `d = x_next - x`. Nonnegative when
/// the inequality holds.
pub fn prox_step_slack(problem: &Problem, x: &Vector, x_next: &Vector, alpha: f64) -> f64 {
    let d = x_next - x;
    let a = 1.0 / alpha;
    let dsq = d.norm_squared();
    let dpsi = match (problem.psi(x_next).finite(), problem.psi(x).finite()) {
        (Some(p1), Some(p0)) => p1 - p0,
        _ => return f64::NEG_INFINITY,
    };
    let lhs = problem.gradient(x).dot(&d) + 0.5 * a * dsq + dpsi;
    -0.5 * a * dsq - lhs
}

/// Distance from `-(grad f(x) + (x_next - x) / alpha)` to the
/// subdifferential of `psi` at `x_next`: zero when `x_next` solves the
/// proximal subproblem at `x`.
pub fn prox_step_certificate(problem: &Problem, x: &Vector, x_next: &Vector, alpha: f64) -> f64 {
    let g = problem.gradient(x) + (x_next - x) / alpha;
    subgradient_distance(problem, x_next, &(-g))
}

/// Distance from `-grad f(x)` to the subdifferential of `psi` at `x`: zero
/// exactly at minimisers of `F`.
pub fn optimality_residual(problem: &Problem, x: &Vector) -> f64 {
    subgradient_distance(problem, x, &(-problem.gradient(x)))
}

fn subgradient_distance(problem: &Problem, x: &Vector, g: &Vector) -> f64 {
    match problem.regularizer() {
        Some(reg) => reg.subgradient_distance(x, g),
        None => g.amax(),
    }
}

/// Per-step check of
/// `||x_{k+1} - xbar||^2 <= ||x_k - xbar||^2 + 2 alpha (f(x_k) - f(x_{k+1})) + 2 alpha (f* - f(x_k))`
/// for fixed-step
/// gradient descent, over consecutive snapshots.
pub fn check_distance_recursion(
    trace: &Trace,
    alpha: f64,
    xbar: &Vector,
    fstar: f64,
    tol: f64,
) -> ReplayVerdict {
    let mut v = ReplayVerdict::empty();
    for w in trace.snapshots.windows(2) {
        if w[1].k != w[0].k + 1 {
            continue;
        }
        let (fk, fk1) = (trace.records[w[0].k].f, trace.records[w[1].k].f);
        let lhs = (&w[1].x - xbar).norm_squared();
        let rhs =
            (&w[0].x - xbar).norm_squared() + 2.0 * alpha * (fk - fk1) + 2.0 * alpha * (fstar - fk);
        v.record(w[0].k, lhs, rhs, tol * rhs.abs().max(1.0));
    }
    v
}

/// Seed-mean gap at each grid index.
pub fn mean_on_grid(traces: &[Trace], fstar: f64, grid: &[usize]) -> Result<Vec<f64>> {
    if traces.is_empty() {
        return Err(Error::InsufficientData("no traces to aggregate".into()));
    }
    grid.iter()
        .map(|&k| {
            let mut sum = 0.0;
            for t in traces {
                let r = t.records.get(k).ok_or_else(|| {
                    Error::InsufficientData(format!("trace of length {} lacks k = {k}", t.len()))
                })?;
                sum += (r.objective - fstar).max(0.0);
            }
            Ok(sum / traces.len() as f64)
        })
        .collect()
}

/// `0` followed by powers of two up to `last`, then `last` itself.
pub fn pow2_grid(last: usize) -> Vec<usize> {
    let mut grid = vec![0];
    let mut k = 1;
    while k <= last {
        grid.push(k);
        k = match k.checked_mul(2) {
            Some(next) => next,
            None => break,
        };
    }
    if *grid.last().unwrap() != last {
        grid.push(last);
    }
    grid
}

/// `k * mean` at the last grid point over its maximum on the grid.
pub fn grid_tail_ratio(grid: &[usize], values: &[f64]) -> f64 {
    let products: Vec<f64> = grid
        .iter()
        .zip(values)
        .map(|(&k, &v)| k as f64 * v)
        .collect();
    let max = products.iter().copied().fold(0.0, f64::max);
    match products.last() {
        Some(&last) if max > 0.0 => last / max,
        _ => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl NamedCheck {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub source: String,
    pub fit: Option<RateFit>,
    pub kdelta_tail_ratio: f64,
    pub monotone_ok: bool,
    pub summable_ok: bool,
    pub kdelta_tail_ok: bool,
    /// Partial sums at the power-of-two grid, `(k, S_k)`.
    pub summable_partial_sums: Vec<(usize, f64)>,
    pub bound_checks: Vec<NamedCheck>,
    pub clamped: usize,
    pub notes: Vec<String>,
}

impl RateReport {
    /// Builds the standard report; a failed fit is recorded in `notes`
    /// rather than aborting.
    pub fn build(
        deltas: &DeltaSequence,
        window: Option<(usize, usize)>,
        policy: &SequencePolicy,
    ) -> Result<Self> {
        let verdict = check_monotone_summable(deltas, policy)?;
        let mut notes = Vec::new();
        let fit = match window {
            Some(w) => match fit_rate_exponent(deltas, w) {
                Ok(fit) => {
                    notes.extend(fit.warnings.iter().cloned());
                    Some(fit)
                }
                Err(e) => {
                    notes.push(format!("rate fit skipped: {e}"));
                    None
                }
            },
            None => None,
        };
        let sums = deltas.partial_sums();
        let summable_partial_sums = pow2_grid(deltas.last_k())
            .into_iter()
            .map(|k| (k, sums[k]))
            .collect();
        if deltas.clamped_count() > 0 {
            notes.push(format!(
                "{} tiny negative gaps clamped to zero",
                deltas.clamped_count()
            ));
        }
        Ok(Self {
            source: deltas.source().to_string(),
            fit,
            kdelta_tail_ratio: kdelta_tail_ratio(deltas),
            monotone_ok: verdict.monotone,
            summable_ok: verdict.partial_sums_bounded,
            kdelta_tail_ok: verdict.kdelta_decreasing_tail,
            summable_partial_sums,
            bound_checks: Vec::new(),
            clamped: deltas.clamped_count(),
            notes,
        })
    }

    pub fn push_check(&mut self, check: NamedCheck) {
        self.bound_checks.push(check);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{make_quadratic, Basis};
    use crate::solvers::{gd_fixed, RunOptions, SnapshotPolicy};

    fn seq(f: impl Fn(f64) -> f64, n: usize) -> DeltaSequence {
        DeltaSequence::new((0..n).map(|k| f(k as f64)).collect(), "synthetic").unwrap()
    }

    #[test]
    fn inverse_square_passes_everything() {
        let d = seq(|k| 1.0 / ((k + 1.0) * (k + 1.0)), 1_000_000);
        let v = check_monotone_summable(&d, &SequencePolicy::default()).unwrap();
        assert!(v.all_pass(), "{v:?}");
        let total = *d.partial_sums().last().unwrap();
        assert!(total < std::f64::consts::PI.powi(2) / 6.0);
    }

    #[test]
    fn harmonic_is_not_summable() {
        let d = seq(|k| 1.0 / (k + 1.0), 1_000_000);
        let v = check_monotone_summable(&d, &SequencePolicy::default()).unwrap();
        assert!(v.monotone);
        assert!(!v.partial_sums_bounded, "{v:?}");
        assert!(!v.kdelta_decreasing_tail);
    }

    #[test]
    fn clamps_tiny_negatives_and_rejects_large_ones() {
        let d = DeltaSequence::new(vec![1.0, -1e-12, 0.0], "x").unwrap();
        assert_eq!(d.deltas(), &[1.0, 0.0, 0.0]);
        assert_eq!(d.clamped_count(), 1);
        assert!(matches!(
            DeltaSequence::new(vec![1.0, -1e-6], "x"),
            Err(Error::NegativeDelta { k: 1, .. })
        ));
    }

    #[test]
    fn short_sequences_rejected() {
        let d = seq(|k| 1.0 / (k + 1.0), 9);
        assert!(check_monotone_summable(&d, &SequencePolicy::default()).is_err());
    }

    #[test]
    fn detects_increase() {
        let mut v: Vec<f64> = (0..20).map(|k| 1.0 / (k as f64 + 1.0)).collect();
        v[7] = 2.0;
        let d = DeltaSequence::new(v, "x").unwrap();
        let verdict = check_monotone_summable(&d, &SequencePolicy::default()).unwrap();
        assert_eq!(verdict.first_increase, Some(6));
    }

    #[test]
    fn exact_power_law_fit() {
        let d = DeltaSequence::new(
            (0..10_001)
                .map(|k| {
                    if k == 0 {
                        1.0
                    } else {
                        3.0 / (k as f64).powi(2)
                    }
                })
                .collect(),
            "x",
        )
        .unwrap();
        let fit = fit_rate_exponent(&d, (10, 10_000)).unwrap();
        assert!((fit.exponent - 2.0).abs() < 1e-10);
        assert!((fit.constant - 3.0).abs() < 1e-10);
        assert!(fit.samples <= MAX_FIT_POINTS);
    }

    #[test]
    fn fit_window_errors_and_shrink() {
        let d =
            DeltaSequence::new((0..1000).map(|k| 1.0 / (k as f64 + 1.0)).collect(), "x").unwrap();
        assert!(fit_rate_exponent(&d, (0, 100)).is_err());
        assert!(fit_rate_exponent(&d, (50, 100)).is_err());
        assert!(fit_rate_exponent(&d, (10, 5000)).is_err());

        let mut v: Vec<f64> = (0..1000).map(|k| 1.0 / (k as f64 + 1.0)).collect();
        for x in v.iter_mut().skip(500) {
            *x = 0.0;
        }
        let d = DeltaSequence::new(v, "x").unwrap();
        let fit = fit_rate_exponent(&d, (10, 900)).unwrap();
        assert_eq!(fit.window, (10, 499));
        assert_eq!(fit.warnings.len(), 1);

        let mut v: Vec<f64> = (0..1000).map(|k| 1.0 / (k as f64 + 1.0)).collect();
        for x in v.iter_mut().skip(15) {
            *x = 0.0;
        }
        let d = DeltaSequence::new(v, "x").unwrap();
        assert!(matches!(
            fit_rate_exponent(&d, (10, 900)),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn log_spacing() {
        let ks = log_spaced(1000, 100_000, 200);
        assert_eq!(ks[0], 1000);
        assert_eq!(*ks.last().unwrap(), 100_000);
        assert!(ks.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(log_spaced(3, 12, 200), (3..=12).collect::<Vec<_>>());
    }

    #[test]
    fn weighted_norm_examples() {
        let x = Vector::from_column_slice(&[3.0, 4.0]);
        let d2 = SamplingDistribution::uniform(2).unwrap();
        assert_eq!(weighted_r_squared(&x, &x, &[1.0, 4.0], &d2).unwrap(), 0.0);
        let xbar = Vector::from_column_slice(&[2.0, 3.0]);
        assert_eq!(
            weighted_r_squared(&x, &xbar, &[1.0, 4.0], &d2).unwrap(),
            10.0
        );

        let n = 5;
        let l = 3.0;
        let x = Vector::from_column_slice(&[1.0, -2.0, 0.5, 0.0, 4.0]);
        let xbar = Vector::zeros(n);
        let du = SamplingDistribution::uniform(n).unwrap();
        let r2 = weighted_r_squared(&x, &xbar, &vec![l; n], &du).unwrap();
        assert!((r2 - n as f64 * l * x.norm_squared()).abs() < 1e-12);
        assert!(weighted_r_squared(&x, &xbar, &[l; 4], &du).is_err());
    }

    #[test]
    fn bounded_iterates_square_example() {
        // f = x^2, x0 = 1, gamma = 1, c1 = 0.5: bound 1 + 2 * 0.5 * 1 = 2
        let p = make_quadratic(&[2.0], 0, Basis::Identity, Vector::zeros(1)).unwrap();
        let t = gd_fixed(&p, 0.5, &Vector::from_element(1, 1.0), &RunOptions::new(4)).unwrap();
        let v = check_bounded_iterates(&t, &Vector::zeros(1), 1.0, 0.5, 0.0).unwrap();
        assert!(v.holds);
        assert_eq!(v.radius_sq, 2.0);
    }

    #[test]
    fn bounded_iterates_detects_teleport() {
        let p = make_quadratic(&[2.0], 0, Basis::Identity, Vector::zeros(1)).unwrap();
        let mut t = gd_fixed(&p, 0.25, &Vector::from_element(1, 1.0), &RunOptions::new(4)).unwrap();
        t.snapshots[1].x[0] = 5.0;
        let v = check_bounded_iterates(&t, &Vector::zeros(1), 1.0, 0.5, 0.0).unwrap();
        assert!(!v.holds);
        assert_eq!(v.violations, vec![t.snapshots[1].k]);
    }

    #[test]
    fn distance_profile_geometric() {
        // f = 1/2 x^2 treated with L = 2: alpha = 1/2 halves x each step
        let p = make_quadratic(&[1.0], 0, Basis::Identity, Vector::zeros(1)).unwrap();
        let t = gd_fixed(
            &p,
            0.5,
            &Vector::from_element(1, 8.0),
            &RunOptions::new(40).with_snapshots(SnapshotPolicy::Every),
        )
        .unwrap();
        let prof = dist_to_solution(&t, p.solution_set().unwrap(), 0.5).unwrap();
        assert_eq!(prof.distances[..5], [8.0, 4.0, 2.0, 1.0, 0.5]);
        // final decade starts at k = 4
        assert_eq!(prof.tail_ratio, 1.0 / 16.0);
        assert!(prof.decays);

        let t0 = gd_fixed(&p, 0.5, &Vector::zeros(1), &RunOptions::new(6)).unwrap();
        let prof = dist_to_solution(&t0, p.solution_set().unwrap(), 0.5).unwrap();
        assert!(prof.distances.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn grid_helpers() {
        assert_eq!(pow2_grid(10), vec![0, 1, 2, 4, 8, 10]);
        assert_eq!(pow2_grid(8), vec![0, 1, 2, 4, 8]);
        assert_eq!(pow2_grid(0), vec![0]);
        let r = grid_tail_ratio(&[0, 1, 2, 4], &[1.0, 0.5, 0.2, 0.01]);
        assert!((r - 0.04 / 0.5).abs() < 1e-15);
    }

    #[test]
    fn kdelta_ratio_exact() {
        let d = DeltaSequence::new(vec![1.0, 0.5, 0.2, 0.01], "x").unwrap();
        // products 0, 0.5, 0.4, 0.03
        assert!((kdelta_tail_ratio(&d) - 0.06).abs() < 1e-15);
    }
}
