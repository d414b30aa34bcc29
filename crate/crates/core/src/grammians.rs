//! Stein equations, Grammians, Hankel singular values and the
//! conditioning inequality `κ(Σ)² ≤ κ(P_ctrl) κ(P_obs)`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Spectral radius below which `A` counts as stable.
pub const STABILITY_MARGIN: f64 = 1e-10;
const MAX_DOUBLINGS: usize = 128;
const DOUBLING_TOL: f64 = 1e-14;

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!("matrix is {}x{}, not square", a.nrows(), a.ncols())));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    // exact eigenvalues; the QR iteration smears nilpotent Jordan blocks
    if is_lower_triangular(a) || is_lower_triangular(&a.transpose()) {
        return Ok(a.diagonal().iter().fold(0.0_f64, |acc, x| acc.max(x.abs())));
    }
    let (_, t) = crate::linalg::schur_unpacked(a)?;
    let mut rho = 0.0_f64;
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            // complex pair of a 2×2 block: |λ|² = det
            let det = t[(i, i)] * t[(i + 1, i + 1)] - t[(i, i + 1)] * t[(i + 1, i)];
            let tr = 0.5 * (t[(i, i)] + t[(i + 1, i + 1)]);
            let disc = tr * tr - det;
            rho = if disc >= 0.0 { rho.max(tr.abs() + disc.sqrt()) } else { rho.max(det.sqrt()) };
            i += 2;
        } else {
            rho = rho.max(t[(i, i)].abs());
            i += 1;
        }
    }
    Ok(rho)
}

fn is_lower_triangular(a: &DMatrix<f64>) -> bool {
    (0..a.ncols()).all(|j| (0..j).all(|i| a[(i, j)] == 0.0))
}

fn check_stable(a: &DMatrix<f64>) -> Result<()> {
    let rho = spectral_radius(a)?;
    if rho >= 1.0 - STABILITY_MARGIN {
        return Err(Error::Unstable(rho));
    }
    Ok(())
}

/// Solve `P − A P Aᵀ = B Bᵀ` by the doubling iteration.
pub fn solve_stein(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension("A must be square".into()));
    }
    if b.nrows() != n {
        return Err(Error::Dimension(format!("B has {} rows, A is {n}x{n}", b.nrows())));
    }
    check_stable(a)?;
    let mut p = b * b.transpose();
    let mut ak = a.clone();
    for _ in 0..MAX_DOUBLINGS {
        let inc = &ak * &p * ak.transpose();
        p += &inc;
        p = (&p + p.transpose()) * 0.5;
        ak = &ak * &ak;
        if inc.norm() <= DOUBLING_TOL * p.norm() {
            return Ok(p);
        }
    }
    Err(Error::NoConvergence(format!("Stein doubling did not settle in {MAX_DOUBLINGS} steps")))
}

/// Solve `P − Aᵀ P A = Cᵀ C`, the observability Grammian.
pub fn solve_dual_stein(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if c.ncols() != a.nrows() {
        return Err(Error::Dimension(format!("C has {} columns, A is {}x{}", c.ncols(), a.nrows(), a.ncols())));
    }
    solve_stein(&a.transpose(), &c.transpose())
}

/// Grammians and the condition numbers derived from them.
#[derive(Clone, Debug)]
pub struct GrammianReport {
    pub p_ctrl: DMatrix<f64>,
    pub p_obs: DMatrix<f64>,
    /// Hankel singular values, nonincreasing.
    pub hankel: Vec<f64>,
    pub kappa_ctrl: f64,
    pub kappa_obs: f64,
    pub kappa_sigma: f64,
    /// `κ_ctrl κ_obs / κ_sigma²`, at least one.
    pub excess: f64,
}

fn spd_condition(p: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(p.clone()).eigenvalues;
    let max = eig.max();
    let min = eig.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn grammian_report(a: &DMatrix<f64>, b: Option<&DMatrix<f64>>, c: &DMatrix<f64>) -> Result<GrammianReport> {
    let b = b.ok_or_else(|| Error::Missing("B required for the controllability Grammian".into()))?;
    let p_ctrl = solve_stein(a, b)?;
    let p_obs = solve_dual_stein(a, c)?;
    let hankel = hankel_values(&p_ctrl, &p_obs)?;
    let kappa_ctrl = spd_condition(&p_ctrl);
    let kappa_obs = spd_condition(&p_obs);
    let hmax = hankel[0];
    let hmin = *hankel.last().unwrap();
    let kappa_sigma = if hmin > 0.0 { hmax / hmin } else { f64::INFINITY };
    let excess = kappa_ctrl * kappa_obs / (kappa_sigma * kappa_sigma);
    Ok(GrammianReport { p_ctrl, p_obs, hankel, kappa_ctrl, kappa_obs, kappa_sigma, excess })
}

/// Square roots of the eigenvalues of `P_ctrl P_obs`, computed from the
/// symmetric product `Lᵀ P_ctrl L` with `P_obs = L Lᵀ`.
pub fn hankel_values(p_ctrl: &DMatrix<f64>, p_obs: &DMatrix<f64>) -> Result<Vec<f64>> {
    let l = nalgebra::linalg::Cholesky::new(p_obs.clone())
        .ok_or_else(|| Error::Unobservable("observability Grammian is not positive definite".into()))?
        .l();
    let m = l.transpose() * p_ctrl * &l;
    let m = (&m + m.transpose()) * 0.5;
    let mut h: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().map(|x| x.max(0.0).sqrt()).collect();
    h.sort_by(|x, y| y.total_cmp(x));
    Ok(h)
}
