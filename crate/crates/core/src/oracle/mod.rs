//! Problem abstraction and the test-problem gallery.
//!
//! A [`Problem`] is a smooth convex part `f`, an optional regularizer `psi`
//! and optional ground truth (optimal value and a projector onto the
//! solution set). Problems are immutable after construction and can be
//! shared across threads.

mod regularizer;
mod smooth;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub use regularizer::{
    make_box, make_l1, make_zero, prox, soft_threshold, Extended, GroupNorm, Regularizer,
    ScalarPenalty, Separable,
};
pub use smooth::{LeastSquares, Power, Quadratic, SmoothFunction};

use crate::error::{invalid, Error, Result};

pub type Vector = nalgebra::DVector<f64>;

pub fn all_finite(x: &Vector) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// Projection onto a closed convex solution set.
#[derive(Debug, Clone, PartialEq)]
pub enum SolutionSet {
    /// A single minimiser.
    Point(Vector),
    /// `offset + span(basis)` with orthonormal basis columns.
    Affine { offset: Vector, basis: DMatrix<f64> },
}

impl SolutionSet {
    pub fn project(&self, x: &Vector) -> Vector {
        match self {
            SolutionSet::Point(p) => p.clone(),
            SolutionSet::Affine { offset, basis } => {
                if basis.ncols() == 0 {
                    return offset.clone();
                }
                let shifted = x - offset;
                offset + basis * basis.tr_mul(&shifted)
            }
        }
    }

    pub fn distance(&self, x: &Vector) -> f64 {
        (x - self.project(x)).norm()
    }
}

#[derive(Clone)]
pub struct Problem {
    id: String,
    smooth: Arc<dyn SmoothFunction>,
    regularizer: Option<Arc<dyn Regularizer>>,
    known_opt_value: Option<f64>,
    solution_set: Option<SolutionSet>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("id", &self.id)
            .field("dim", &self.dim())
            .field("lipschitz", &self.smooth.lipschitz())
            .field("regularizer", &self.regularizer.as_ref().map(|r| r.name()))
            .field("known_opt_value", &self.known_opt_value)
            .finish()
    }
}

impl Problem {
    pub fn new(id: impl Into<String>, smooth: Arc<dyn SmoothFunction>) -> Self {
        Self {
            id: id.into(),
            smooth,
            regularizer: None,
            known_opt_value: None,
            solution_set: None,
        }
    }

    /// Attaches `psi`. Any ground truth recorded for the smooth part alone
    /// is dropped since it no longer describes the composite problem.
    pub fn with_regularizer(mut self, reg: Arc<dyn Regularizer>) -> Self {
        self.regularizer = Some(reg);
        self.known_opt_value = None;
        self.solution_set = None;
        self
    }

    pub fn with_known_opt_value(mut self, value: f64) -> Self {
        self.known_opt_value = Some(value);
        self
    }

    pub fn with_solution_set(mut self, set: SolutionSet) -> Self {
        self.solution_set = Some(set);
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }

    pub fn smooth(&self) -> &dyn SmoothFunction {
        self.smooth.as_ref()
    }

    pub fn regularizer(&self) -> Option<&dyn Regularizer> {
        self.regularizer.as_deref()
    }

    pub fn lipschitz(&self) -> f64 {
        self.smooth.lipschitz()
    }

    pub fn coord_lipschitz(&self) -> &[f64] {
        self.smooth.coord_lipschitz()
    }

    pub fn known_opt_value(&self) -> Option<f64> {
        self.known_opt_value
    }

    pub fn solution_set(&self) -> Option<&SolutionSet> {
        self.solution_set.as_ref()
    }

    pub fn project(&self, x: &Vector) -> Option<Vector> {
        self.solution_set.as_ref().map(|s| s.project(x))
    }

    pub fn f(&self, x: &Vector) -> f64 {
        self.smooth.value(x)
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        self.smooth.gradient(x)
    }

    pub fn psi(&self, x: &Vector) -> Extended {
        match &self.regularizer {
            Some(r) => r.value(x),
            None => Extended::Finite(0.0),
        }
    }

    /// `F = f + psi`.
    pub fn objective(&self, x: &Vector) -> Extended {
        self.psi(x) + self.f(x)
    }

    /// Prox of `psi` (identity when absent).
    pub fn prox(&self, y: &Vector, lambda: f64) -> Result<Vector> {
        match &self.regularizer {
            Some(r) => prox(r.as_ref(), y, lambda),
            None => prox(&make_zero(), y, lambda),
        }
    }

    pub(crate) fn check_dim(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// Orthogonal basis for building quadratics.
#[derive(Debug, Clone)]
pub enum Basis {
    Identity,
    /// Q factor of a seeded Gaussian matrix.
    Random {
        seed: u64,
    },
    Given(DMatrix<f64>),
}

/// `f(x) = 1/2 (x - offset)^T A (x - offset)` where `A` has eigenvalues
/// `spectrum` followed by `null_dim` zeros in the columns of `basis`.
///
/// Records `f* = 0` and the affine projector onto `offset + null(A)`.
pub fn make_quadratic(
    spectrum: &[f64],
    null_dim: usize,
    basis: Basis,
    offset: Vector,
) -> Result<Problem> {
    let mut full: Vec<f64> = spectrum.to_vec();
    full.extend(std::iter::repeat_n(0.0, null_dim));
    let n = full.len();
    if n == 0 {
        return Err(invalid("spectrum", "dimension must be at least 1"));
    }
    if full.iter().any(|&s| !(s >= 0.0 && s.is_finite())) {
        return Err(invalid(
            "spectrum",
            "eigenvalues must be finite and nonnegative",
        ));
    }
    if full.iter().all(|&s| s == 0.0) {
        return Err(invalid(
            "spectrum",
            "at least one eigenvalue must be positive",
        ));
    }
    if offset.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: offset.len(),
        });
    }
    if !all_finite(&offset) {
        return Err(invalid("offset", "entries must be finite"));
    }
    let q = match basis {
        Basis::Identity => DMatrix::identity(n, n),
        Basis::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            random_orthogonal(n, &mut rng)
        }
        Basis::Given(q) => {
            if q.nrows() != n || q.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: q.nrows(),
                });
            }
            let defect = (q.tr_mul(&q) - DMatrix::<f64>::identity(n, n)).amax();
            if defect > 1e-10 {
                return Err(invalid(
                    "basis",
                    format!("not orthogonal (defect {defect:e})"),
                ));
            }
            q
        }
    };
    let quad = Quadratic::new(q, full, offset.clone());
    let set = SolutionSet::Affine {
        offset,
        basis: quad.null_basis(),
    };
    Ok(
        Problem::new(format!("quadratic:dim={n},null={null_dim}"), Arc::new(quad))
            .with_known_opt_value(0.0)
            .with_solution_set(set),
    )
}

/// `f(x) = x^p` for even `p >= 4`, with `L = p (p - 1)` valid on `[-1, 1]`.
pub fn make_power(p: u32) -> Result<Problem> {
    if p < 4 || !p.is_multiple_of(2) {
        return Err(invalid(
            "p",
            format!("must be an even integer >= 4, got {p}"),
        ));
    }
    Ok(
        Problem::new(format!("power:p={p}"), Arc::new(Power::new(p)))
            .with_known_opt_value(0.0)
            .with_solution_set(SolutionSet::Point(Vector::zeros(1))),
    )
}

/// `f(x) = 1/2 ||B x - b||^2` without a regularizer.
pub fn make_least_squares(design: DMatrix<f64>, target: Vector) -> Result<Problem> {
    if design.nrows() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: design.nrows(),
            got: target.len(),
        });
    }
    if design.ncols() == 0 || design.iter().all(|&v| v == 0.0) {
        return Err(invalid("design", "must have at least one nonzero entry"));
    }
    let (m, n) = design.shape();
    Ok(Problem::new(
        format!("least_squares:rows={m},dim={n}"),
        Arc::new(LeastSquares::new(design, target)),
    ))
}

pub(crate) fn random_orthogonal(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    // fix column signs so the factorisation is unique
    let mut q = q;
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Seeded instances used by tests, the acceptance suite and the CLI.
pub mod gallery {
    use super::*;

    /// Quadratic with `dim - null` eigenvalues drawn log-uniformly from
    /// `[10^log_lo, 10^log_hi]`, `null` zero eigenvalues, a random rotation
    /// and a standard-normal offset. The solution set is unbounded whenever
    /// `null > 0`.
    pub fn quadratic(
        dim: usize,
        null: usize,
        seed: u64,
        log_lo: f64,
        log_hi: f64,
    ) -> Result<Problem> {
        if null >= dim {
            return Err(invalid(
                "null",
                format!("must be below dim = {dim}, got {null}"),
            ));
        }
        if !(log_lo <= log_hi) {
            return Err(invalid("spectrum range", format!("{log_lo} > {log_hi}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spectrum: Vec<f64> = (0..dim - null)
            .map(|_| 10f64.powf(rng.random_range(log_lo..=log_hi)))
            .collect();
        let q = random_orthogonal(dim, &mut rng);
        let offset = Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        Ok(make_quadratic(&spectrum, null, Basis::Given(q), offset)?
            .with_id(format!("quadratic:dim={dim},null={null},seed={seed}")))
    }

    /// Lasso `1/2 ||B x - b||^2 + weight ||x||_1` with Gaussian `B`
    /// (`rows x dim`, scaled by `1/sqrt(rows)`) and Gaussian `b`.
    pub fn lasso(dim: usize, rows: usize, seed: u64, weight: f64) -> Result<Problem> {
        if dim == 0 || rows == 0 {
            return Err(invalid("lasso", "dim and rows must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (rows as f64).sqrt();
        let design = DMatrix::from_fn(rows, dim, |_, _| {
            scale * rng.sample::<f64, _>(StandardNormal)
        });
        let target = Vector::from_fn(rows, |_, _| rng.sample::<f64, _>(StandardNormal));
        Ok(make_least_squares(design, target)?
            .with_regularizer(Arc::new(make_l1(weight)?))
            .with_id(format!(
                "lasso:dim={dim},rows={rows},seed={seed},weight={weight}"
            )))
    }

    /// Standard-normal start vector, seeded independently of the problem.
    pub fn random_start(dim: usize, seed: u64) -> Vector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed);
        Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal))
    }
}
