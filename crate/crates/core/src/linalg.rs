//! Small dense helpers shared by the reductions.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// QR sweeps allowed per row before one Schur attempt gives up.
const SCHUR_MAX_SWEEPS: usize = 1000;
const SCHUR_RETRIES: usize = 3;

/// Rotation coefficients `(c, s, r)` with `c*a - s*b = r >= 0` and
/// `s*a + c*b = 0`.
///
/// With `G = [[c, s], [-s, c]]` this is the rotation whose transpose maps
/// `(a, b)` onto `(r, 0)`. Both inputs zero gives the identity.
pub fn zeroing(a: f64, b: f64) -> (f64, f64, f64) {
    if b == 0.0 {
        if a >= 0.0 {
            return (1.0, 0.0, a);
        }
        return (-1.0, 0.0, -a);
    }
    let r = a.hypot(b);
    (a / r, -b / r, r)
}

/// `rows (p, q) <- G^T rows`, i.e. `(r_p, r_q) <- (c r_p - s r_q, s r_p + c r_q)`.
pub fn rotate_rows(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for j in 0..m.ncols() {
        let x = m[(p, j)];
        let y = m[(q, j)];
        m[(p, j)] = c * x - s * y;
        m[(q, j)] = s * x + c * y;
    }
}

/// `cols (p, q) <- cols G`, the same map applied to columns.
pub fn rotate_cols(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..m.nrows() {
        let x = m[(i, p)];
        let y = m[(i, q)];
        m[(i, p)] = c * x - s * y;
        m[(i, q)] = s * x + c * y;
    }
}

/// `‖UᵀU − I‖_F`.
pub fn orthogonality_residual(u: &DMatrix<f64>) -> f64 {
    let n = u.ncols();
    (u.transpose() * u - DMatrix::<f64>::identity(n, n)).norm()
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Stack `top` above `bottom`.
pub fn vstack(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(top.ncols(), bottom.ncols());
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

/// `(U, T)` with `A = U T Uᵀ` in real Schur form.
///
/// The shifted QR iteration occasionally cycles on unlucky inputs. When it
/// does, the decomposition is retried on `HAH` for a fixed Householder
/// reflector `H` and `U` is mapped back.
pub fn schur_unpacked(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let sweeps = SCHUR_MAX_SWEEPS * n.max(10);
    if let Some(s) = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, sweeps) {
        return Ok(s.unpack());
    }
    for attempt in 1..=SCHUR_RETRIES {
        let v = DVector::from_fn(n, |i, _| ((i + 1) as f64 * attempt as f64 * 0.7).sin());
        let v = &v / v.norm();
        let h = DMatrix::<f64>::identity(n, n) - &v * v.transpose() * 2.0;
        if let Some(s) = nalgebra::linalg::Schur::try_new(&h * a * &h, f64::EPSILON, sweeps) {
            let (u, t) = s.unpack();
            return Ok((h * u, t));
        }
    }
    Err(Error::NoConvergence(format!("real Schur iteration did not converge after {} attempts", SCHUR_RETRIES + 1)))
}
