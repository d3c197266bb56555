use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};

use super::Vector;
use crate::error::{invalid, Error, Result};

/// A value on the extended real line `(-inf, +inf]`.
///
/// Indicator regularizers take the value `+inf` outside their domain. Keeping
/// that as a separate variant means `f + psi` never goes through IEEE
/// infinity arithmetic and comparisons stay well defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Extended {
    Finite(f64),
    Infinite,
}

impl Extended {
    pub fn is_finite(self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::Infinite => None,
        }
    }

    /// `self <= other` on the extended line.
    pub fn le(self, other: Extended) -> bool {
        match (self, other) {
            (_, Extended::Infinite) => true,
            (Extended::Infinite, Extended::Finite(_)) => false,
            (Extended::Finite(a), Extended::Finite(b)) => a <= b,
        }
    }
}

impl Add for Extended {
    type Output = Extended;

    fn add(self, rhs: Extended) -> Extended {
        match (self, rhs) {
            (Extended::Finite(a), Extended::Finite(b)) => Extended::Finite(a + b),
            _ => Extended::Infinite,
        }
    }
}

impl Add<f64> for Extended {
    type Output = Extended;

    fn add(self, rhs: f64) -> Extended {
        self + Extended::Finite(rhs)
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::Infinite => f.write_str("+inf"),
        }
    }
}

/// One scalar component `psi_i` of a separable regularizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarPenalty {
    Zero,
    Abs { weight: f64 },
    Interval { lower: f64, upper: f64 },
}

impl ScalarPenalty {
    pub fn value(&self, t: f64) -> Extended {
        match *self {
            ScalarPenalty::Zero => Extended::Finite(0.0),
            ScalarPenalty::Abs { weight } => Extended::Finite(weight * t.abs()),
            ScalarPenalty::Interval { lower, upper } => {
                if (lower..=upper).contains(&t) {
                    Extended::Finite(0.0)
                } else {
                    Extended::Infinite
                }
            }
        }
    }

    /// Minimiser of `psi_i(t) + (t - y)^2 / (2 lambda)`.
    pub fn prox(&self, y: f64, lambda: f64) -> f64 {
        match *self {
            ScalarPenalty::Zero => y,
            ScalarPenalty::Abs { weight } => soft_threshold(y, weight * lambda),
            ScalarPenalty::Interval { lower, upper } => y.clamp(lower, upper),
        }
    }

    /// The subdifferential at `t` as a closed interval, `None` outside the
    /// domain.
    pub fn subdifferential(&self, t: f64) -> Option<(f64, f64)> {
        match *self {
            ScalarPenalty::Zero => Some((0.0, 0.0)),
            ScalarPenalty::Abs { weight } => Some(if t > 0.0 {
                (weight, weight)
            } else if t < 0.0 {
                (-weight, -weight)
            } else {
                (-weight, weight)
            }),
            ScalarPenalty::Interval { lower, upper } => {
                if !(lower..=upper).contains(&t) {
                    None
                } else if lower == upper {
                    Some((f64::NEG_INFINITY, f64::INFINITY))
                } else if t == lower {
                    Some((f64::NEG_INFINITY, 0.0))
                } else if t == upper {
                    Some((0.0, f64::INFINITY))
                } else {
                    Some((0.0, 0.0))
                }
            }
        }
    }

    /// Distance from `g` to the subdifferential at `t` (`+inf` outside the
    /// domain).
    pub fn subgradient_distance(&self, t: f64, g: f64) -> f64 {
        match self.subdifferential(t) {
            None => f64::INFINITY,
            Some((lo, hi)) => {
                if g < lo {
                    lo - g
                } else if g > hi {
                    g - hi
                } else {
                    0.0
                }
            }
        }
    }
}

pub fn soft_threshold(y: f64, threshold: f64) -> f64 {
    if y > threshold {
        y - threshold
    } else if y < -threshold {
        y + threshold
    } else {
        0.0
    }
}

/// A closed proper convex function with a cheap proximal map.
pub trait Regularizer: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn value(&self, x: &Vector) -> Extended;

    /// Proximal map for an already validated `lambda > 0`; use [`prox`] for
    /// the checked entry point.
    fn prox_map(&self, y: &Vector, lambda: f64) -> Vector;

    /// Scalar component `psi_i`, or `None` when the regularizer does not
    /// split across coordinates.
    fn component(&self, i: usize) -> Option<ScalarPenalty>;

    fn is_separable(&self) -> bool {
        self.component(0).is_some()
    }

    /// Largest per-block distance from `g` to the subdifferential at `x`.
    fn subgradient_distance(&self, x: &Vector, g: &Vector) -> f64;
}

/// Evaluates the proximal map of `reg` at `y` with parameter `lambda`.
pub fn prox(reg: &dyn Regularizer, y: &Vector, lambda: f64) -> Result<Vector> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(
            "lambda",
            format!("must be positive and finite, got {lambda}"),
        ));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "prox input",
            k: 0,
        });
    }
    Ok(reg.prox_map(y, lambda))
}

#[derive(Debug, Clone, PartialEq)]
enum Components {
    Uniform(ScalarPenalty),
    PerCoordinate(Vec<ScalarPenalty>),
}

/// `psi(x) = sum_i psi_i(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Separable {
    name: String,
    components: Components,
}

impl Separable {
    pub fn uniform(name: impl Into<String>, penalty: ScalarPenalty) -> Self {
        Self {
            name: name.into(),
            components: Components::Uniform(penalty),
        }
    }

    pub fn per_coordinate(name: impl Into<String>, penalties: Vec<ScalarPenalty>) -> Self {
        Self {
            name: name.into(),
            components: Components::PerCoordinate(penalties),
        }
    }

    fn penalty(&self, i: usize) -> ScalarPenalty {
        match &self.components {
            Components::Uniform(p) => *p,
            Components::PerCoordinate(ps) => ps[i],
        }
    }

    fn check_dim(&self, n: usize) {
        if let Components::PerCoordinate(ps) = &self.components {
            assert_eq!(ps.len(), n, "regularizer dimension mismatch");
        }
    }
}

impl Regularizer for Separable {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn value(&self, x: &Vector) -> Extended {
        self.check_dim(x.len());
        x.iter()
            .enumerate()
            .fold(Extended::Finite(0.0), |acc, (i, &t)| {
                acc + self.penalty(i).value(t)
            })
    }

    fn prox_map(&self, y: &Vector, lambda: f64) -> Vector {
        self.check_dim(y.len());
        Vector::from_iterator(
            y.len(),
            y.iter()
                .enumerate()
                .map(|(i, &t)| self.penalty(i).prox(t, lambda)),
        )
    }

    fn component(&self, i: usize) -> Option<ScalarPenalty> {
        match &self.components {
            Components::Uniform(p) => Some(*p),
            Components::PerCoordinate(ps) => ps.get(i).copied(),
        }
    }

    fn is_separable(&self) -> bool {
        true
    }

    fn subgradient_distance(&self, x: &Vector, g: &Vector) -> f64 {
        x.iter()
            .zip(g.iter())
            .enumerate()
            .map(|(i, (&t, &gi))| self.penalty(i).subgradient_distance(t, gi))
            .fold(0.0, f64::max)
    }
}

/// `psi(x) = weight * ||x||_2`. Not separable; its prox is block
/// soft-thresholding.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupNorm {
    weight: f64,
}

impl GroupNorm {
    pub fn new(weight: f64) -> Result<Self> {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(invalid("weight", format!("must be positive, got {weight}")));
        }
        Ok(Self { weight })
    }
}

impl Regularizer for GroupNorm {
    fn name(&self) -> String {
        format!("group_l2(weight={})", self.weight)
    }

    fn value(&self, x: &Vector) -> Extended {
        Extended::Finite(self.weight * x.norm())
    }

    fn prox_map(&self, y: &Vector, lambda: f64) -> Vector {
        let norm = y.norm();
        let t = self.weight * lambda;
        if norm <= t {
            Vector::zeros(y.len())
        } else {
            y * (1.0 - t / norm)
        }
    }

    fn component(&self, _i: usize) -> Option<ScalarPenalty> {
        None
    }

    fn subgradient_distance(&self, x: &Vector, g: &Vector) -> f64 {
        let norm = x.norm();
        if norm > 0.0 {
            (g - x * (self.weight / norm)).norm()
        } else {
            (g.norm() - self.weight).max(0.0)
        }
    }
}

/// `psi = 0`; the prox is the identity.
pub fn make_zero() -> Separable {
    Separable::uniform("zero", ScalarPenalty::Zero)
}

/// `psi(x) = weight * ||x||_1`.
pub fn make_l1(weight: f64) -> Result<Separable> {
    if !(weight > 0.0 && weight.is_finite()) {
        return Err(invalid("weight", format!("must be positive, got {weight}")));
    }
    Ok(Separable::uniform(
        format!("l1(weight={weight})"),
        ScalarPenalty::Abs { weight },
    ))
}

/// Indicator of the box `[lower, upper]`.
pub fn make_box(lower: &Vector, upper: &Vector) -> Result<Separable> {
    if lower.len() != upper.len() {
        return Err(Error::DimensionMismatch {
            expected: lower.len(),
            got: upper.len(),
        });
    }
    let mut penalties = Vec::with_capacity(lower.len());
    for (i, (&lo, &hi)) in lower.iter().zip(upper.iter()).enumerate() {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(invalid(
                "box",
                format!("lower[{i}] = {lo} exceeds upper[{i}] = {hi}"),
            ));
        }
        penalties.push(ScalarPenalty::Interval {
            lower: lo,
            upper: hi,
        });
    }
    Ok(Separable::per_coordinate("box", penalties))
}
