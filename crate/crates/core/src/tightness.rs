//! Gradient descent on `f(x) = x^p` (even `p >= 4`): a smooth convex
//! problem where `f(x_k)` decays like `C k^(-p/(p-2))`, so no rate of the
//! form `O(1/k^(1+eps))` holds uniformly. Includes the continuous-time
//! gradient flow, whose exact solution is `t^(-1/(p-2))`.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{DeltaSequence, RateReport, SequencePolicy};
use crate::error::{invalid, Error, Result};
use crate::oracle::Vector;
use crate::solvers::{RunOptions, SnapshotPolicy, Step, Termination, Trace, TraceBuilder};

/// Lower end of the per-step contraction `x_{k+1} / x_k`.
pub const SAFEGUARD_FLOOR: f64 = 2.0 / 3.0;

const SAFEGUARD_SLACK: f64 = 1e-15;

fn check_p(p: u32) -> Result<()> {
    if p < 4 || !p.is_multiple_of(2) {
        return Err(invalid(
            "p",
            format!("must be an even integer >= 4, got {p}"),
        ));
    }
    Ok(())
}

fn check_alpha(p: u32, alpha: f64) -> Result<()> {
    let l = f64::from(p) * f64::from(p - 1);
    if !(alpha > 0.0 && alpha < 2.0 / l) {
        return Err(invalid(
            "alpha",
            format!("must lie in (0, 2/{l}), got {alpha}"),
        ));
    }
    Ok(())
}

/// `p / (p - 2)`.
pub fn predicted_exponent(p: u32) -> Result<f64> {
    check_p(p)?;
    Ok(f64::from(p) / f64::from(p - 2))
}

/// The `C` with `p/(p-2) = p^2 alpha C^((p-2)/p)`, i.e.
/// `C = (p / ((p-2) p^2 alpha))^(p/(p-2))`.
pub fn predicted_constant(p: u32, alpha: f64) -> Result<f64> {
    check_p(p)?;
    check_alpha(p, alpha)?;
    let pf = f64::from(p);
    let base = pf / ((pf - 2.0) * pf * pf * alpha);
    Ok(base.powf(pf / (pf - 2.0)))
}

/// Smallest even `p >= 4` with `p >= 2(1 + eps)/eps`.
pub fn minimum_p_for_epsilon(epsilon: f64) -> Result<u32> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(invalid(
            "epsilon",
            format!("must lie in (0, 1], got {epsilon}"),
        ));
    }
    let v = 2.0 * (1.0 + epsilon) / epsilon;
    // absorb rounding in v so exact integers are not bumped
    let mut p = (v * (1.0 - 1e-12)).ceil() as u32;
    if p % 2 == 1 {
        p += 1;
    }
    Ok(p.max(4))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerExperiment {
    pub p: u32,
    pub alpha: f64,
    pub x0: f64,
    pub budget: usize,
    /// Fit window `(k_lo, k_hi)`; `None` fits over the last two decades.
    pub window: Option<(usize, usize)>,
}

impl PowerExperiment {
    pub fn new(p: u32, alpha: f64, budget: usize) -> Result<Self> {
        check_p(p)?;
        check_alpha(p, alpha)?;
        Ok(Self {
            p,
            alpha,
            x0: 1.0,
            budget,
            window: None,
        })
    }

    pub fn with_x0(mut self, x0: f64) -> Self {
        self.x0 = x0;
        self
    }

    pub fn with_window(mut self, lo: usize, hi: usize) -> Self {
        self.window = Some((lo, hi));
        self
    }

    pub fn predicted_exponent(&self) -> f64 {
        f64::from(self.p) / f64::from(self.p - 2)
    }

    pub fn predicted_constant(&self) -> Result<f64> {
        predicted_constant(self.p, self.alpha)
    }

    /// The window actually fitted.
    pub fn fit_window(&self) -> (usize, usize) {
        self.window.unwrap_or((self.budget / 100, self.budget))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PowerStatus {
    Completed,
    /// `x_k^p` underflowed: the optimum is reached to machine precision.
    MachinePrecision {
        k: usize,
    },
}

#[derive(Debug, Clone)]
pub struct PowerRun {
    pub trace: Trace,
    pub report: RateReport,
    pub status: PowerStatus,
    pub predicted_exponent: f64,
    pub predicted_constant: f64,
}

/// Iterates `x_{k+1} = x_k - p alpha x_k^(p-1)` directly and fits the decay
/// of `f(x_k) = x_k^p`. Aborts if a step leaves `(2/3 x_k, x_k)` (closed at
/// 2/3, which is attained at `x = 1`, `alpha = 1/(3p)`).
pub fn run_power(exp: &PowerExperiment) -> Result<PowerRun> {
    check_p(exp.p)?;
    check_alpha(exp.p, exp.alpha)?;
    if !(exp.x0.is_finite() && exp.x0.abs() <= 1.0) {
        return Err(invalid(
            "x0",
            format!("must lie in [-1, 1], got {}", exp.x0),
        ));
    }
    let p = exp.p as i32;
    let pa = f64::from(exp.p) * exp.alpha;
    let opts = RunOptions::new(exp.budget).with_snapshots(SnapshotPolicy::PowersOfTwo);
    let mut builder = TraceBuilder::new(&opts);
    let mut x = exp.x0;
    let mut status = PowerStatus::Completed;
    let mut termination = Termination::Budget;
    let mut last_k = exp.budget;

    for k in 0..exp.budget {
        let fx = x.powi(p);
        if x == 0.0 || fx < f64::MIN_POSITIVE {
            status = PowerStatus::MachinePrecision { k };
            termination = Termination::Tolerance { k };
            last_k = k;
            break;
        }
        let factor = 1.0 - pa * x.powi(p - 2);
        if !(SAFEGUARD_FLOOR - SAFEGUARD_SLACK..1.0).contains(&factor) {
            return Err(Error::Safeguard { k, factor });
        }
        let x_new = x - pa * x.powi(p - 1);
        let d = x_new - x;
        builder.push(
            k,
            &Vector::from_element(1, x),
            fx,
            0.0,
            Some((Step::Alpha(exp.alpha), d * d)),
        );
        x = x_new;
    }
    let fx = x.powi(p);
    let trace = builder.finish(
        last_k,
        &Vector::from_element(1, x),
        fx,
        0.0,
        termination,
        (
            &format!("power:p={}", exp.p),
            format!("gd_fixed:alpha={}", exp.alpha),
            None,
        ),
    );

    let deltas = DeltaSequence::from_trace(&trace, 0.0)?;
    let window = exp.fit_window();
    let report = RateReport::build(&deltas, Some(window), &SequencePolicy::default())?;
    Ok(PowerRun {
        trace,
        report,
        status,
        predicted_exponent: exp.predicted_exponent(),
        predicted_constant: exp.predicted_constant()?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowExperiment {
    pub p: u32,
    pub t0: f64,
    pub t1: f64,
    pub steps: usize,
    /// Global error the integration must be expected to meet.
    pub tolerance: f64,
    /// Number of evenly spaced trajectory samples to keep.
    pub sample_count: usize,
}

impl FlowExperiment {
    pub fn new(p: u32, t0: f64, t1: f64, steps: usize) -> Result<Self> {
        check_p(p)?;
        let exp = Self {
            p,
            t0,
            t1,
            steps,
            tolerance: 1e-6,
            sample_count: 1000,
        };
        exp.validate()?;
        Ok(exp)
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn with_sample_count(mut self, n: usize) -> Self {
        self.sample_count = n;
        self
    }

    /// `1 / (p - 2)`.
    pub fn theta(&self) -> f64 {
        1.0 / f64::from(self.p - 2)
    }

    /// `1 / (p (p - 2))`.
    pub fn alpha_flow(&self) -> f64 {
        1.0 / (f64::from(self.p) * f64::from(self.p - 2))
    }

    /// Smallest admissible start time `(p - 1) / (p - 2)`.
    pub fn min_t0(&self) -> f64 {
        f64::from(self.p - 1) / f64::from(self.p - 2)
    }

    pub fn exact(&self, t: f64) -> f64 {
        t.powf(-self.theta())
    }

    fn validate(&self) -> Result<()> {
        check_p(self.p)?;
        if !(self.t0.is_finite() && self.t0 >= self.min_t0()) {
            return Err(invalid(
                "t0",
                format!("must be >= {}, got {}", self.min_t0(), self.t0),
            ));
        }
        if !(self.t1.is_finite() && self.t1 > self.t0) {
            return Err(invalid(
                "t1",
                format!("must exceed t0 = {}, got {}", self.t0, self.t1),
            ));
        }
        if self.steps == 0 {
            return Err(invalid("steps", "must be positive"));
        }
        if !(self.tolerance > 0.0) {
            return Err(invalid("tolerance", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub t: f64,
    pub x: f64,
    pub exact: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRun {
    pub samples: Vec<FlowSample>,
    /// `max |x(t) - t^-theta| / t^-theta` over every step.
    pub max_rel_deviation: f64,
    /// Step-doubling estimate of the global error.
    pub error_estimate: f64,
}

fn rk4_step(rhs: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let k1 = rhs(x);
    let k2 = rhs(x + 0.5 * h * k1);
    let k3 = rhs(x + 0.5 * h * k2);
    let k4 = rhs(x + h * k3);
    x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Integrates `x' = -alpha p x^(p-1)` from `x(t0) = t0^-theta` with
/// fixed-step classical Runge-Kutta.
///
/// The step count should keep `steps >= (t1 - t0) / t0 * (p - 1) / (p - 2)`
/// for stability; accuracy is checked by comparing one step against two
/// half steps at `t0`, where the solution bends most, and rejecting the
/// run when that local estimate times `steps` exceeds `tolerance`.
pub fn run_flow(exp: &FlowExperiment) -> Result<FlowRun> {
    exp.validate()?;
    let p = exp.p as i32;
    let a = exp.alpha_flow() * f64::from(exp.p);
    let rhs = |x: f64| -a * x.powi(p - 1);
    let h = (exp.t1 - exp.t0) / exp.steps as f64;
    let x0 = exp.exact(exp.t0);

    let full = rk4_step(rhs, x0, h);
    let halves = rk4_step(rhs, rk4_step(rhs, x0, 0.5 * h), 0.5 * h);
    let local = (full - halves).abs() / 15.0 / halves.abs();
    let error_estimate = local * exp.steps as f64;
    if !(error_estimate <= exp.tolerance) {
        // A non-finite estimate means the step overshoots outright.
        let growth = match error_estimate.is_finite() {
            true => (error_estimate / exp.tolerance).powf(0.25),
            false => 16.0,
        };
        let suggested = (exp.steps as f64 * growth).ceil() as usize;
        return Err(Error::StepTooCoarse {
            estimate: error_estimate,
            tolerance: exp.tolerance,
            suggested_steps: suggested.max(exp.steps + 1),
        });
    }

    let stride = (exp.steps / exp.sample_count.max(1)).max(1);
    let mut samples = vec![FlowSample {
        t: exp.t0,
        x: x0,
        exact: x0,
    }];
    let mut x = x0;
    let mut max_rel = 0.0f64;
    for j in 1..=exp.steps {
        x = rk4_step(rhs, x, h);
        if !x.is_finite() {
            return Err(Error::NonFinite {
                context: "flow state",
                k: j,
            });
        }
        let t = if j == exp.steps {
            exp.t1
        } else {
            exp.t0 + j as f64 * h
        };
        let exact = exp.exact(t);
        max_rel = max_rel.max((x - exact).abs() / exact);
        if j % stride == 0 || j == exp.steps {
            samples.push(FlowSample { t, x, exact });
        }
    }
    Ok(FlowRun {
        samples,
        max_rel_deviation: max_rel,
        error_estimate,
    })
}
