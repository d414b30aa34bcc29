//! The output pair `(A, C)` and its `(C, A)` stack.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::vstack;

/// An output pair: `A` is the `n×n` advance matrix, `C` the `d×n`
/// measurement matrix.
///
/// Properties such as output normality or stability are always recomputed
/// from the matrices; nothing is cached.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputPair {
    a: DMatrix<f64>,
    c: DMatrix<f64>,
}

impl OutputPair {
    pub fn new(a: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension(format!("A must be square, got {}x{}", a.nrows(), a.ncols())));
        }
        if a.nrows() == 0 {
            return Err(Error::Dimension("state dimension n must be at least 1".into()));
        }
        if c.ncols() != a.ncols() {
            return Err(Error::Dimension(format!("C has {} columns but A is {}x{}", c.ncols(), a.nrows(), a.ncols())));
        }
        if c.nrows() == 0 {
            return Err(Error::Dimension("output dimension d must be at least 1".into()));
        }
        if a.iter().chain(c.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Domain("pair contains non-finite entries".into()));
        }
        Ok(Self { a, c })
    }

    /// Split an `(n+d)×n` stack `[C; A]` back into a pair.
    pub fn from_stack(stack: &DMatrix<f64>, d: usize) -> Result<Self> {
        let n = stack.ncols();
        if stack.nrows() != n + d {
            return Err(Error::Dimension(format!("stack has {} rows, expected n+d = {}", stack.nrows(), n + d)));
        }
        Self::new(stack.rows(d, n).into_owned(), stack.rows(0, d).into_owned())
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Output dimension.
    pub fn d(&self) -> usize {
        self.c.nrows()
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DMatrix<f64>) {
        (self.a, self.c)
    }

    /// The `(n+d)×n` stack `[C; A]`.
    pub fn stack(&self) -> DMatrix<f64> {
        vstack(&self.c, &self.a)
    }

    /// `‖I − AᵀA − CᵀC‖_F`; zero exactly when the pair is output normal.
    pub fn on_residual(&self) -> f64 {
        let n = self.n();
        let g = self.a.transpose() * &self.a + self.c.transpose() * &self.c;
        (DMatrix::<f64>::identity(n, n) - g).norm()
    }

    pub fn is_output_normal(&self, tol: f64) -> bool {
        self.on_residual() <= tol
    }

    /// `(UᵀAU, CU)` for an orthogonal `U`.
    pub fn orthogonal_conjugate(&self, u: &DMatrix<f64>) -> Result<Self> {
        if u.nrows() != self.n() || u.ncols() != self.n() {
            return Err(Error::Dimension(format!(
                "transform is {}x{}, pair has n = {}",
                u.nrows(),
                u.ncols(),
                self.n()
            )));
        }
        Self::new(u.transpose() * &self.a * u, &self.c * u)
    }

    /// `(T⁻¹AT, CT)` for a general similarity given with its inverse.
    pub fn similarity(&self, t: &DMatrix<f64>, t_inv: &DMatrix<f64>) -> Result<Self> {
        if t.shape() != (self.n(), self.n()) || t_inv.shape() != (self.n(), self.n()) {
            return Err(Error::Dimension("similarity transform has wrong shape".into()));
        }
        Self::new(t_inv * &self.a * t, &self.c * t)
    }

    /// Largest eigenvalue modulus of `A`.
    pub fn spectral_radius(&self) -> Result<f64> {
        crate::grammians::spectral_radius(&self.a)
    }
}
