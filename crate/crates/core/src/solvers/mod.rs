//! The six first-order methods and their step-size and sampling machinery.
//!
//! Every solver is a descent method and returns an immutable [`Trace`]: one
//! [`Record`] per iterate plus iterate snapshots chosen by a
//! [`SnapshotPolicy`]. A record at iteration `k` describes `x_k` and the
//! step that leaves it, so the last record carries no step.

mod coordinate;
mod gradient;
mod sampling;

pub use coordinate::{cd_stochastic, proxcd_stochastic};
pub use gradient::{
    bb_initial_step, find_step, gd_fixed, gd_linesearch, proxgrad_fixed, proxgrad_linesearch,
    BbPair, StepOutcome,
};
pub use sampling::{SamplingDistribution, SolverRng};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::oracle::{Problem, Vector};

/// Rounding slack allowed when comparing a step against its analytic bound,
/// so that `c2 = (2 - gamma) / L` computed by the caller is accepted.
const BOUND_SLACK: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepInit {
    /// Start every search from `c1`.
    Constant,
    /// First Barzilai-Borwein step `<s,s>/<s,y>`, clamped to `[c2, c1]`.
    BarzilaiBorwein,
}

/// Backtracking parameters. Accepted steps lie in `[c2, c1]` and satisfy
/// `F(x + d) <= F(x) - gamma / (2 alpha) ||d||^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSearch {
    pub gamma: f64,
    pub c1: f64,
    pub c2: f64,
    pub shrink: f64,
    pub init: StepInit,
}

impl LineSearch {
    pub fn new(gamma: f64, c1: f64, c2: f64) -> Self {
        Self {
            gamma,
            c1,
            c2,
            shrink: 0.5,
            init: StepInit::Constant,
        }
    }

    pub fn with_shrink(mut self, shrink: f64) -> Self {
        self.shrink = shrink;
        self
    }

    pub fn with_init(mut self, init: StepInit) -> Self {
        self.init = init;
        self
    }

    /// Checks the parameter ranges and `c2 <= (2 - gamma) / L`.
    pub fn validate(&self, lipschitz: f64) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(invalid(
                "gamma",
                format!("must lie in (0, 1], got {}", self.gamma),
            ));
        }
        if !(self.c2 > 0.0 && self.c2.is_finite()) {
            return Err(invalid("c2", format!("must be positive, got {}", self.c2)));
        }
        if !(self.c1 >= self.c2 && self.c1.is_finite()) {
            return Err(invalid(
                "c1",
                format!("must be finite and >= c2 = {}, got {}", self.c2, self.c1),
            ));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(invalid(
                "shrink",
                format!("must lie in (0, 1), got {}", self.shrink),
            ));
        }
        let bound = (2.0 - self.gamma) / lipschitz;
        if self.c2 > bound * (1.0 + BOUND_SLACK) {
            return Err(invalid(
                "c2",
                format!("must not exceed (2 - gamma) / L = {bound}, got {}", self.c2),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepRule {
    Fixed { alpha: f64 },
    LineSearch(LineSearch),
}

/// Which iterates to keep in [`Trace::snapshots`]. `x_0` and the final
/// iterate are always kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SnapshotPolicy {
    #[default]
    PowersOfTwo,
    Every,
    Stride(usize),
}

impl SnapshotPolicy {
    pub fn wants(&self, k: usize) -> bool {
        match *self {
            SnapshotPolicy::PowersOfTwo => k == 0 || k.is_power_of_two(),
            SnapshotPolicy::Every => true,
            SnapshotPolicy::Stride(s) => s > 0 && k.is_multiple_of(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    pub budget: usize,
    pub snapshots: SnapshotPolicy,
    /// Stop once `||grad f||` (smooth methods) or `||d_k||` (proximal
    /// methods) falls to this level.
    pub tolerance: Option<f64>,
}

impl RunOptions {
    pub fn new(budget: usize) -> Self {
        Self {
            budget,
            ..Self::default()
        }
    }

    pub fn with_snapshots(mut self, policy: SnapshotPolicy) -> Self {
        self.snapshots = policy;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = Some(tol);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Step {
    /// Step length used by a full-vector method.
    Alpha(f64),
    /// Coordinate updated by a coordinate method.
    Coordinate(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub k: usize,
    pub f: f64,
    pub psi: f64,
    pub objective: f64,
    pub step: Option<Step>,
    /// `||x_{k+1} - x_k||^2` for the step leaving `x_k`.
    pub d_norm_sq: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub k: usize,
    pub x: Vector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Budget,
    /// `grad f(x_k) = 0` with no regularizer: `x_k` is optimal.
    ZeroGradient {
        k: usize,
    },
    /// The configured tolerance was reached.
    Tolerance {
        k: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub problem_id: String,
    pub solver_id: String,
    pub seed: Option<u64>,
    pub records: Vec<Record>,
    pub snapshots: Vec<Snapshot>,
    pub termination: Termination,
    /// Iterations where the line search fell back to `c2` without the
    /// decrease condition holding in floating point.
    pub fallback_iterations: Vec<usize>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    pub fn final_record(&self) -> &Record {
        self.records.last().expect("traces hold at least x0")
    }

    pub fn initial_iterate(&self) -> &Vector {
        &self.snapshots.first().expect("x0 is always kept").x
    }

    pub fn final_iterate(&self) -> &Vector {
        &self
            .snapshots
            .last()
            .expect("final iterate is always kept")
            .x
    }

    pub fn snapshot(&self, k: usize) -> Option<&Vector> {
        self.snapshots
            .binary_search_by_key(&k, |s| s.k)
            .ok()
            .map(|i| &self.snapshots[i].x)
    }

    /// Step lengths of all records that carry one.
    pub fn step_lengths(&self) -> Vec<f64> {
        self.records
            .iter()
            .filter_map(|r| match r.step {
                Some(Step::Alpha(a)) => Some(a),
                _ => None,
            })
            .collect()
    }
}

/// Accumulates records and snapshots while a solver runs.
pub(crate) struct TraceBuilder {
    records: Vec<Record>,
    snapshots: Vec<Snapshot>,
    policy: SnapshotPolicy,
    fallbacks: Vec<usize>,
}

impl TraceBuilder {
    pub(crate) fn new(opts: &RunOptions) -> Self {
        let cap = opts.budget.saturating_add(1).min(1 << 24);
        Self {
            records: Vec::with_capacity(cap),
            snapshots: Vec::new(),
            policy: opts.snapshots,
            fallbacks: Vec::new(),
        }
    }

    pub(crate) fn push(
        &mut self,
        k: usize,
        x: &Vector,
        f: f64,
        psi: f64,
        step: Option<(Step, f64)>,
    ) {
        self.records.push(Record {
            k,
            f,
            psi,
            objective: f + psi,
            step: step.map(|s| s.0),
            d_norm_sq: step.map(|s| s.1),
        });
        if self.policy.wants(k) {
            self.snapshots.push(Snapshot { k, x: x.clone() });
        }
    }

    pub(crate) fn fallback(&mut self, k: usize) {
        self.fallbacks.push(k);
    }

    /// Pushes the final record (no outgoing step) and seals the trace.
    pub(crate) fn finish(
        mut self,
        k: usize,
        x: &Vector,
        f: f64,
        psi: f64,
        termination: Termination,
        ids: (&str, String, Option<u64>),
    ) -> Trace {
        self.push(k, x, f, psi, None);
        if self.snapshots.last().map(|s| s.k) != Some(k) {
            self.snapshots.push(Snapshot { k, x: x.clone() });
        }
        Trace {
            problem_id: ids.0.to_string(),
            solver_id: ids.1,
            seed: ids.2,
            records: self.records,
            snapshots: self.snapshots,
            termination,
            fallback_iterations: self.fallbacks,
        }
    }
}

pub(crate) fn check_finite(value: f64, context: &'static str, k: usize) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { context, k })
    }
}

pub(crate) fn check_finite_vec(x: &Vector, context: &'static str, k: usize) -> Result<()> {
    if crate::oracle::all_finite(x) {
        Ok(())
    } else {
        Err(Error::NonFinite { context, k })
    }
}

pub(crate) fn check_region(problem: &Problem, x: &Vector, k: usize) -> Result<()> {
    if let Some(radius) = problem.smooth().validity_radius() {
        if let Some(&value) = x.iter().find(|v| v.abs() > radius) {
            return Err(Error::OutsideValidityRegion { k, value, radius });
        }
    }
    Ok(())
}

/// Validates `x0` and returns `(f, psi)` there.
pub(crate) fn start_values(problem: &Problem, x0: &Vector) -> Result<(f64, f64)> {
    problem.check_dim(x0)?;
    check_finite_vec(x0, "x0", 0)?;
    check_region(problem, x0, 0)?;
    let f = problem.f(x0);
    check_finite(f, "f(x0)", 0)?;
    let psi = problem.psi(x0).finite().ok_or(Error::InfeasibleStart)?;
    Ok((f, psi))
}

pub(crate) fn within_bound(value: f64, bound: f64) -> bool {
    value <= bound * (1.0 + BOUND_SLACK)
}
