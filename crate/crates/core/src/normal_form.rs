//! Output normalization by Cholesky factorization of the observability
//! Grammian, and the input/output duality map.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::grammians::solve_dual_stein;
use crate::pair::OutputPair;

const REFINE_PASSES: usize = 2;
const REFINE_TRIGGER: f64 = 1e-13;

/// A state transformation `x -> T⁻¹x` with its inverse kept explicitly.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityTransform {
    pub t: DMatrix<f64>,
    pub t_inv: DMatrix<f64>,
}

impl SimilarityTransform {
    pub fn identity(n: usize) -> Self {
        Self { t: DMatrix::identity(n, n), t_inv: DMatrix::identity(n, n) }
    }

    /// `‖T T⁻¹ − I‖_F`.
    pub fn inverse_residual(&self) -> f64 {
        let n = self.t.nrows();
        (&self.t * &self.t_inv - DMatrix::<f64>::identity(n, n)).norm()
    }

    /// The transform of applying `self` first and then `next`.
    pub fn then(&self, next: &Self) -> Self {
        Self { t: &self.t * &next.t, t_inv: &next.t_inv * &self.t_inv }
    }
}

fn normalize_once(pair: &OutputPair) -> Result<(OutputPair, SimilarityTransform)> {
    let n = pair.n();
    let p = solve_dual_stein(pair.a(), pair.c())?;
    let eig = SymmetricEigen::new(p.clone()).eigenvalues;
    let floor = 1e-12 * p.trace() / n as f64;
    if eig.min() <= floor {
        return Err(Error::Unobservable(format!(
            "observability Grammian has eigenvalue {:.3e} (threshold {floor:.3e})",
            eig.min()
        )));
    }
    let l = nalgebra::linalg::Cholesky::new(p)
        .ok_or_else(|| Error::Unobservable("observability Grammian is not positive definite".into()))?
        .l();
    let lt = l.transpose();
    let t = lt
        .solve_upper_triangular(&DMatrix::identity(n, n))
        .ok_or_else(|| Error::Singular("Cholesky factor has a zero pivot".into()))?;
    let a = &lt * pair.a() * &t;
    let c = pair.c() * &t;
    Ok((OutputPair::new(a, c)?, SimilarityTransform { t, t_inv: lt }))
}

/// Output-normal realization `(T⁻¹AT, CT)` with `T = L⁻ᵀ`, `P_obs = LLᵀ`.
///
/// Up to two refinement passes are applied when roundoff leaves a residual
/// above `1e−13`; each pass renormalizes the previous result.
pub fn to_output_normal(pair: &OutputPair) -> Result<(OutputPair, SimilarityTransform)> {
    let (mut out, mut transform) = normalize_once(pair)?;
    for _ in 0..REFINE_PASSES {
        if out.on_residual() <= REFINE_TRIGGER {
            break;
        }
        let (next, step) = normalize_once(&out)?;
        out = next;
        transform = transform.then(&step);
    }
    Ok((out, transform))
}

/// `(A, B) -> (Aᵀ, Bᵀ)`: input normality of `(A, B)` is output normality of
/// the returned pair.
pub fn dual_input_pair(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<OutputPair> {
    OutputPair::new(a.transpose(), b.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_example() {
        let pair = OutputPair::new(DMatrix::from_element(1, 1, 0.5), DMatrix::from_element(1, 1, 1.0)).unwrap();
        let (on, tr) = to_output_normal(&pair).unwrap();
        assert!((on.a()[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((on.c()[(0, 0)] - 0.75f64.sqrt()).abs() < 1e-15);
        assert!((tr.t[(0, 0)] - 0.75f64.sqrt()).abs() < 1e-15);
        assert!(tr.inverse_residual() < 1e-15);
    }

    #[test]
    fn already_normal_is_fixed() {
        let pair = OutputPair::new(DMatrix::from_element(1, 1, 0.6), DMatrix::from_element(1, 1, 0.8)).unwrap();
        let (on, tr) = to_output_normal(&pair).unwrap();
        assert!((tr.t[(0, 0)] - 1.0).abs() < 1e-10);
        assert!((on.c()[(0, 0)] - 0.8).abs() < 1e-10);
    }

    #[test]
    fn unobservable_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.3]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let pair = OutputPair::new(a, c).unwrap();
        assert!(matches!(to_output_normal(&pair), Err(Error::Unobservable(_))));
    }

    #[test]
    fn duality_is_an_involution() {
        let a = DMatrix::from_row_slice(2, 2, &[0.1, 0.2, 0.3, 0.4]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, -2.0]);
        let dual = dual_input_pair(&a, &b).unwrap();
        assert_eq!(dual.a().transpose(), a);
        assert_eq!(dual.c().transpose(), b);
        let scalar = dual_input_pair(&DMatrix::from_element(1, 1, 0.6), &DMatrix::from_element(1, 1, 0.8)).unwrap();
        assert!(scalar.on_residual() < 1e-15);
    }
}
