use std::fmt;

use nalgebra::DMatrix;

use super::Vector;

/// A convex function with Lipschitz gradient, together with its global and
/// coordinate-wise Lipschitz constants.
pub trait SmoothFunction: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn value(&self, x: &Vector) -> f64;

    fn gradient(&self, x: &Vector) -> Vector;

    /// Entry `i` of the gradient. Implementations override this when a
    /// single entry is cheaper than the full vector.
    fn coord_gradient(&self, x: &Vector, i: usize) -> f64 {
        self.gradient(x)[i]
    }

    /// Global Lipschitz constant `L` of the gradient.
    fn lipschitz(&self) -> f64;

    /// Coordinate-wise constants `L_i`, each in `(0, L]`.
    fn coord_lipschitz(&self) -> &[f64];

    /// Radius of the box `|x_i| <= r` on which the constants are valid, when
    /// they only hold locally.
    fn validity_radius(&self) -> Option<f64> {
        None
    }
}

/// `f(x) = 1/2 (x - c)^T A (x - c)` with `A = Q diag(s) Q^T`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    basis: DMatrix<f64>,
    spectrum: Vec<f64>,
    offset: Vector,
    matrix: DMatrix<f64>,
    lipschitz: f64,
    coord_lipschitz: Vec<f64>,
}

impl Quadratic {
    /// `basis` must be orthogonal and square with the same dimension as
    /// `spectrum` and `offset`; validation happens in `make_quadratic`.
    pub(crate) fn new(basis: DMatrix<f64>, spectrum: Vec<f64>, offset: Vector) -> Self {
        let scaled = &basis * DMatrix::from_diagonal(&Vector::from_column_slice(&spectrum));
        let product = scaled * basis.transpose();
        // symmetrise away the rounding of the two products
        let matrix = (&product + product.transpose()) * 0.5;
        let lipschitz = spectrum.iter().copied().fold(0.0, f64::max);
        // A_ii = 0 forces row i of a PSD matrix to vanish, so the i-th partial
        // derivative is constant and any positive constant is valid.
        let coord_lipschitz = (0..spectrum.len())
            .map(|i| {
                let a = matrix[(i, i)];
                if a > 0.0 {
                    a.min(lipschitz)
                } else {
                    lipschitz
                }
            })
            .collect();
        Self {
            basis,
            spectrum,
            offset,
            matrix,
            lipschitz,
            coord_lipschitz,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn offset(&self) -> &Vector {
        &self.offset
    }

    /// Columns of the basis paired with zero eigenvalues.
    pub fn null_basis(&self) -> DMatrix<f64> {
        let cols: Vec<_> = self
            .spectrum
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == 0.0)
            .map(|(j, _)| self.basis.column(j).into_owned())
            .collect();
        if cols.is_empty() {
            DMatrix::zeros(self.spectrum.len(), 0)
        } else {
            DMatrix::from_columns(&cols)
        }
    }
}

impl SmoothFunction for Quadratic {
    fn dim(&self) -> usize {
        self.spectrum.len()
    }

    fn value(&self, x: &Vector) -> f64 {
        // through the eigenbasis so the value is never negative
        let y = self.basis.tr_mul(&(x - &self.offset));
        0.5 * y
            .iter()
            .zip(&self.spectrum)
            .map(|(yj, s)| s * yj * yj)
            .sum::<f64>()
    }

    fn gradient(&self, x: &Vector) -> Vector {
        Vector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|i| self.coord_gradient(x, i)),
        )
    }

    fn coord_gradient(&self, x: &Vector, i: usize) -> f64 {
        // the matrix is exactly symmetric, so column i is row i
        self.matrix
            .column(i)
            .iter()
            .zip(x.iter().zip(self.offset.iter()))
            .map(|(a, (xj, cj))| a * (xj - cj))
            .sum()
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn coord_lipschitz(&self) -> &[f64] {
        &self.coord_lipschitz
    }
}

/// One-dimensional `f(x) = x^p` for even `p >= 4`. The curvature bound
/// `p (p - 1)` only holds on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct Power {
    p: u32,
    lipschitz: [f64; 1],
}

impl Power {
    pub(crate) fn new(p: u32) -> Self {
        let pf = f64::from(p);
        Self {
            p,
            lipschitz: [pf * (pf - 1.0)],
        }
    }

    pub fn exponent(&self) -> u32 {
        self.p
    }
}

impl SmoothFunction for Power {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &Vector) -> f64 {
        x[0].powi(self.p as i32)
    }

    fn gradient(&self, x: &Vector) -> Vector {
        Vector::from_element(1, self.coord_gradient(x, 0))
    }

    fn coord_gradient(&self, x: &Vector, _i: usize) -> f64 {
        f64::from(self.p) * x[0].powi(self.p as i32 - 1)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz[0]
    }

    fn coord_lipschitz(&self) -> &[f64] {
        &self.lipschitz
    }

    fn validity_radius(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// `f(x) = 1/2 ||B x - b||^2`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    design: DMatrix<f64>,
    target: Vector,
    lipschitz: f64,
    coord_lipschitz: Vec<f64>,
}

impl LeastSquares {
    pub(crate) fn new(design: DMatrix<f64>, target: Vector) -> Self {
        let gram = design.tr_mul(&design);
        let lipschitz = gram
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(0.0, f64::max);
        let coord_lipschitz = design
            .column_iter()
            .map(|c| {
                let sq = c.norm_squared();
                if sq > 0.0 {
                    sq.min(lipschitz)
                } else {
                    lipschitz
                }
            })
            .collect();
        Self {
            design,
            target,
            lipschitz,
            coord_lipschitz,
        }
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn target(&self) -> &Vector {
        &self.target
    }

    fn residual(&self, x: &Vector) -> Vector {
        &self.design * x - &self.target
    }
}

impl SmoothFunction for LeastSquares {
    fn dim(&self) -> usize {
        self.design.ncols()
    }

    fn value(&self, x: &Vector) -> f64 {
        0.5 * self.residual(x).norm_squared()
    }

    fn gradient(&self, x: &Vector) -> Vector {
        let r = self.residual(x);
        Vector::from_iterator(self.dim(), self.design.column_iter().map(|c| c.dot(&r)))
    }

    fn coord_gradient(&self, x: &Vector, i: usize) -> f64 {
        self.design.column(i).dot(&self.residual(x))
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn coord_lipschitz(&self) -> &[f64] {
        &self.coord_lipschitz
    }
}
