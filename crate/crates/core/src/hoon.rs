//! Hessenberg-observer output-normal (HOON) pairs:
//!
//! `[Ĉ; A] = V⁽¹⁾(θ_1) ⋯ V⁽ⁿ⁻¹⁾(θ_{n−1}) V⁽ⁿ⁾(θ_n) [0_{d−1,n}; P(γ)]`
//!
//! with `C₁ = (√(1−γ²), 0, …, 0)` and `Ĉ` the remaining `d−1` rows of `C`.
//! `V⁽ᵏ⁾` acts on the first `d` rows of the stack and row `d+k−1`
//! (0-based); `V⁽ⁿ⁾` only on the first `d` rows.

use nalgebra::DMatrix;

use crate::canonical::ON_GATE;
use crate::error::{Error, Result};
use crate::otson::{classify_mus, DomainStatus};
use crate::pair::OutputPair;
use crate::rotations::{orp_reduce, FlopCounter, OrpFamily, OrpKind, OrpParam};

#[derive(Clone, Debug, PartialEq)]
pub struct HoonParams {
    n: usize,
    d: usize,
    gamma: f64,
    stages: Vec<OrpParam>,
    last: OrpParam,
    final_sign: f64,
}

impl HoonParams {
    /// `stages` are the `n−1` factors on `O(d+1)` to `e_{d+1}`, `last` the
    /// factor on `O(d)` to `e_d`.
    ///
    /// For `d = 1` the last factor is the `1×1` identity, which cannot
    /// carry the sign of the last stack column; `final_sign` stores it.
    /// For `d ≥ 2` it must be `+1`.
    pub fn new(n: usize, d: usize, gamma: f64, stages: Vec<OrpParam>, last: OrpParam, final_sign: f64) -> Result<Self> {
        if n < 2 || d == 0 {
            return Err(Error::Dimension(format!("HOON parameters need n ≥ 2 and d ≥ 1, got n = {n}, d = {d}")));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::Domain(format!("gamma = {gamma} is outside [0, 1)")));
        }
        if stages.len() != n - 1 {
            return Err(Error::Dimension(format!("expected {} stages, got {}", n - 1, stages.len())));
        }
        let fam = stages[0].family();
        if fam.dim() != d + 1 || fam.target() != d {
            return Err(Error::Domain(format!("HOON stages need a family on O({}) targeting e{}", d + 1, d + 1)));
        }
        if stages.iter().any(|s| s.family() != fam) {
            return Err(Error::Domain("all stages must share one family".into()));
        }
        let lf = last.family();
        if lf.dim() != d || lf.target() != d - 1 || lf.kind() != fam.kind() {
            return Err(Error::Domain(format!("last factor needs the same family on O({d}) targeting e{d}")));
        }
        if final_sign != 1.0 && final_sign != -1.0 {
            return Err(Error::Domain("final sign must be +1 or -1".into()));
        }
        if d > 1 && final_sign != 1.0 && fam.is_signed() {
            return Err(Error::Domain("final sign is only free when d = 1".into()));
        }
        Ok(Self { n, d, gamma, stages, last, final_sign })
    }

    /// Build from `γ` and the flattened angles (`θ_1` first).
    pub fn from_flat(n: usize, d: usize, kind: OrpKind, gamma: f64, thetas: &[f64], final_sign: f64) -> Result<Self> {
        let (fam, last_fam) = families_for(kind, d)?;
        let want = (n.saturating_sub(1)) * d + (d - 1);
        if thetas.len() != want {
            return Err(Error::Dimension(format!("HOON needs (n−1)·d + d−1 = {want} angles, got {}", thetas.len())));
        }
        let split = (n - 1) * d;
        let stages = thetas[..split].chunks(d).map(|c| OrpParam::new(fam, c.to_vec())).collect::<Result<Vec<_>>>()?;
        let last = OrpParam::new(last_fam, thetas[split..].to_vec())?;
        Self::new(n, d, gamma, stages, last, final_sign)
    }

    pub fn zero(n: usize, d: usize, kind: OrpKind, gamma: f64) -> Result<Self> {
        let count = (n.saturating_sub(1)) * d + d.saturating_sub(1);
        Self::from_flat(n, d, kind, gamma, &vec![0.0; count], 1.0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn final_sign(&self) -> f64 {
        self.final_sign
    }

    pub fn family(&self) -> OrpFamily {
        self.stages[0].family()
    }

    pub fn stages(&self) -> &[OrpParam] {
        &self.stages
    }

    pub fn last(&self) -> &OrpParam {
        &self.last
    }

    pub fn flat(&self) -> Vec<f64> {
        self.stages.iter().chain(std::iter::once(&self.last)).flat_map(|s| s.thetas().iter().copied()).collect()
    }

    /// Stage `k`, with `k = n−1` the last factor.
    pub(crate) fn stage_mut(&mut self, k: usize) -> Option<&mut OrpParam> {
        if k + 1 == self.n {
            Some(&mut self.last)
        } else {
            self.stages.get_mut(k)
        }
    }

    pub(crate) fn set_gamma_unchecked(&mut self, gamma: f64) {
        self.gamma = gamma;
    }

    /// `μ_k` of the first `n−1` stages.
    pub fn mus(&self) -> Vec<f64> {
        let d = self.d;
        self.stages.iter().map(|s| s.matrix()[(d, d)]).collect()
    }

    /// Stack rows touched by stage `k` (0-based): rows `0..d` and `d+k`.
    pub(crate) fn coords(&self, k: usize) -> Vec<usize> {
        (0..self.d).chain(std::iter::once(self.d + k)).collect()
    }

    pub fn c11(&self) -> f64 {
        (1.0 - self.gamma * self.gamma).sqrt()
    }
}

/// Stage and last-factor families of kind `kind`.
pub fn families_for(kind: OrpKind, d: usize) -> Result<(OrpFamily, OrpFamily)> {
    if d == 0 {
        return Err(Error::Dimension("output dimension must be positive".into()));
    }
    match kind {
        OrpKind::Q3 => Ok((OrpFamily::q3(d + 1), OrpFamily::q3(d))),
        OrpKind::Householder => Ok((OrpFamily::householder(d + 1, d)?, OrpFamily::householder(d, d - 1)?)),
        _ => Err(Error::Domain(format!("HOON stages target the last coordinate; {kind:?} targets e1"))),
    }
}

/// Strict needs every `μ_k > 0` and `γ > 0`.
pub fn hoon_domain_check(params: &HoonParams, tol: f64) -> DomainStatus {
    let mut mus = params.mus();
    mus.push(params.gamma);
    classify_mus(&mus, tol)
}

/// `P(γ)`: `P₂₁ = γ`, `P_{k+1,k} = 1` for `2 ≤ k < n`, `P₁ₙ = 1`.
pub fn scaled_permutation(n: usize, gamma: f64) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(Error::Dimension("scaled permutation needs n ≥ 2".into()));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Domain(format!("gamma = {gamma} is outside [0, 1)")));
    }
    let mut p = DMatrix::zeros(n, n);
    p[(1, 0)] = gamma;
    for k in 1..n - 1 {
        p[(k + 1, k)] = 1.0;
    }
    p[(0, n - 1)] = 1.0;
    Ok(p)
}

fn check_ho_input(pair: &OutputPair) -> Result<()> {
    let r = pair.on_residual();
    if r > ON_GATE {
        return Err(Error::Form(format!("pair is not output normal (residual {r:.3e})")));
    }
    let (a, c) = (pair.a(), pair.c());
    let n = pair.n();
    let tol = 1e-8 * pair.stack().norm().max(1.0);
    for j in 1..n {
        if c[(0, j)].abs() > tol {
            return Err(Error::Form(format!("C[1,{}] = {:.3e} is not zero", j + 1, c[(0, j)])));
        }
    }
    for j in 0..n {
        for i in j + 2..n {
            if a[(i, j)].abs() > tol {
                return Err(Error::Form(format!("A is not Hessenberg: A[{},{}] = {:.3e}", i + 1, j + 1, a[(i, j)])));
            }
        }
    }
    Ok(())
}

/// Below this `γ` the pair is treated as degenerate by the factorization.
pub const GAMMA_FLOOR: f64 = 1e-12;

/// `(γ, θ_1, …, θ_n)` of a standard nondegenerate HOON pair.
pub fn hoon_factor(pair: &OutputPair, kind: OrpKind) -> Result<HoonParams> {
    check_ho_input(pair)?;
    let n = pair.n();
    let d = pair.d();
    if n < 2 {
        return Err(Error::Dimension("HOON factorization needs n ≥ 2".into()));
    }
    let (fam, last_fam) = families_for(kind, d)?;
    let c11 = pair.c()[(0, 0)];
    if c11 < 0.0 {
        return Err(Error::Form(format!("C11 = {c11} is negative; standardize the pair first")));
    }
    // [Ĉ; A]
    let mut w = pair.stack().rows(1, n + d - 1).into_owned();
    // γ² = 1 − C11², computed without the cancellation
    let gamma = w.column(0).norm();
    if gamma <= GAMMA_FLOOR {
        return Err(Error::Degenerate(format!(
            "C11 = {c11} has modulus 1 (gamma = {gamma:.1e}); split the identity block first"
        )));
    }
    let mut counter = FlopCounter::new();
    let mut stages = Vec::with_capacity(n - 1);
    for k in 0..n - 1 {
        let coords: Vec<usize> = (0..d).chain(std::iter::once(d + k)).collect();
        let h: Vec<f64> = coords.iter().map(|&i| w[(i, k)]).collect();
        let p = orp_reduce(fam, &h)?;
        for j in k..n {
            let mut col: Vec<f64> = w.column(j).iter().copied().collect();
            p.apply_embedded(&mut col, &coords, true, &mut counter);
            for &i in &coords {
                w[(i, j)] = col[i];
            }
        }
        if w[(d + k, k)] < 0.0 {
            return Err(Error::NotStrict(format!(
                "column {} reduces to a negative pivot; the unsigned family cannot represent it",
                k + 1
            )));
        }
        stages.push(p);
    }
    let h: Vec<f64> = (0..d).map(|i| w[(i, n - 1)]).collect();
    let last = orp_reduce(last_fam, &h)?;
    let reduced = last.matrix().transpose() * nalgebra::DVector::from_column_slice(&h);
    let final_sign = if reduced[d - 1] < 0.0 { -1.0 } else { 1.0 };
    if final_sign < 0.0 && d > 1 && last_fam.is_signed() {
        return Err(Error::Invariant("signed last factor left a negative pivot".into()));
    }
    let gamma = gamma.min(1.0 - f64::EPSILON);
    HoonParams::new(n, d, gamma, stages, last, final_sign)
}

/// Running blocks of `X⁽ᵏ⁾ = V⁽¹⁾ ⋯ V⁽ᵏ⁾` on its first `d+k` rows:
/// `N_k` (first `d` columns) and the upper triangular `H_k` (columns
/// `d..d+k`).
#[derive(Clone, Debug, PartialEq)]
pub struct XState {
    pub nn: DMatrix<f64>,
    pub h: DMatrix<f64>,
}

impl XState {
    pub fn initial(d: usize) -> Self {
        Self { nn: DMatrix::identity(d, d), h: DMatrix::zeros(d, 0) }
    }

    pub fn k(&self) -> usize {
        self.h.ncols()
    }

    pub fn step(&self, stage: &OrpParam) -> Result<Self> {
        let b = stage.blocks()?;
        let d = self.nn.ncols();
        let rows = self.nn.nrows();
        let k = self.k();
        let mut nn = DMatrix::zeros(rows + 1, d);
        nn.view_mut((0, 0), (rows, d)).copy_from(&(&self.nn * &b.o_tilde));
        nn.view_mut((rows, 0), (1, d)).copy_from(&b.y.transpose());
        let mut h = DMatrix::zeros(rows + 1, k + 1);
        h.view_mut((0, 0), (rows, k)).copy_from(&self.h);
        h.view_mut((0, k), (rows, 1)).copy_from(&(&self.nn * &b.x));
        h[(rows, k)] = b.mu;
        Ok(Self { nn, h })
    }

    /// `‖[N H]ᵀ[N H] − I‖_F`.
    pub fn column_residual(&self) -> f64 {
        let mut full = DMatrix::zeros(self.nn.nrows(), self.nn.ncols() + self.h.ncols());
        full.columns_mut(0, self.nn.ncols()).copy_from(&self.nn);
        full.columns_mut(self.nn.ncols(), self.h.ncols()).copy_from(&self.h);
        crate::linalg::orthogonality_residual(&full)
    }
}

/// The `(d−1+n)×n` stack `[Ĉ; A]`.
pub fn hoon_stack(params: &HoonParams) -> Result<DMatrix<f64>> {
    let (n, d) = (params.n, params.d);
    let mut state = XState::initial(d);
    for stage in &params.stages {
        state = state.step(stage)?;
    }
    let rows = d + n - 1;
    let mut s = DMatrix::zeros(rows, n);
    for j in 0..n - 1 {
        let scale = if j == 0 { params.gamma } else { 1.0 };
        s.column_mut(j).copy_from(&(state.h.column(j) * scale));
    }
    let v = params.last.matrix().column(d - 1) * params.final_sign;
    s.column_mut(n - 1).copy_from(&(&state.nn * v));
    Ok(s)
}

/// The HOON pair `(A, C)` of a parameter set.
pub fn hoon_reconstruct(params: &HoonParams) -> Result<OutputPair> {
    let (n, d) = (params.n, params.d);
    let s = hoon_stack(params)?;
    let mut c = DMatrix::zeros(d, n);
    c[(0, 0)] = params.c11();
    c.view_mut((1, 0), (d - 1, n)).copy_from(&s.rows(0, d - 1));
    let a = s.rows(d - 1, n).into_owned();
    OutputPair::new(a, c)
}

/// Dense product `V⁽¹⁾ ⋯ V⁽ⁿ⁾ [0; P(γ)]` with full factors.
pub fn hoon_dense_product(params: &HoonParams) -> Result<DMatrix<f64>> {
    let (n, d) = (params.n, params.d);
    let m = n + d - 1;
    let mut x = DMatrix::<f64>::identity(m, m);
    for (k, stage) in params.stages.iter().enumerate() {
        let coords = params.coords(k);
        let local = stage.matrix();
        let mut v = DMatrix::<f64>::identity(m, m);
        for (a, &i) in coords.iter().enumerate() {
            for (b, &j) in coords.iter().enumerate() {
                v[(i, j)] = local[(a, b)];
            }
        }
        x *= v;
    }
    let mut vn = DMatrix::<f64>::identity(m, m);
    let mut last = params.last.matrix();
    last.column_mut(d - 1).scale_mut(params.final_sign);
    vn.view_mut((0, 0), (d, d)).copy_from(&last);
    x *= vn;
    let mut seed = DMatrix::zeros(m, n);
    seed.view_mut((d - 1, 0), (n, n)).copy_from(&scaled_permutation(n, params.gamma)?);
    Ok(x * seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaled_permutation_pattern() {
        let p = scaled_permutation(3, 0.5).unwrap();
        let want = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 0.5, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(p, want);
        let ptp = p.transpose() * &p;
        assert_eq!(ptp, DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.25, 1.0, 1.0])));
        let z = scaled_permutation(4, 0.0).unwrap();
        assert!(z.column(0).iter().all(|&x| x == 0.0));
        assert!(scaled_permutation(1, 0.5).is_err());
    }

    #[test]
    fn zero_angles_give_scaled_permutation() {
        for d in 1..4 {
            let p = HoonParams::zero(4, d, OrpKind::Q3, 0.6).unwrap();
            let pair = hoon_reconstruct(&p).unwrap();
            assert_eq!(pair.a(), &scaled_permutation(4, 0.6).unwrap());
            assert_eq!(pair.c()[(0, 0)], 0.8);
            assert!(pair.c().rows(1, d - 1).iter().all(|&x| x == 0.0));
            assert!(pair.on_residual() < 1e-15);
            let back = hoon_factor(&pair, OrpKind::Q3).unwrap();
            assert!((back.gamma() - 0.6).abs() < 1e-15);
            assert!(back.flat().iter().all(|&t| t == 0.0));
        }
    }

    #[test]
    fn unit_hessenberg_sign() {
        // d = 1 pair whose last column needs the stored sign
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 0.8, 0.0]);
        let c = DMatrix::from_row_slice(1, 2, &[0.6, 0.0]);
        let pair = OutputPair::new(a, c).unwrap();
        let p = hoon_factor(&pair, OrpKind::Q3).unwrap();
        assert_eq!(p.final_sign(), -1.0);
        let back = hoon_reconstruct(&p).unwrap();
        assert!((back.a() - pair.a()).norm() < 1e-15);
        assert!((hoon_dense_product(&p).unwrap() - pair.a()).norm() < 1e-15);
    }

    #[test]
    fn degenerate_is_refused() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let pair = OutputPair::new(a, c).unwrap();
        let err = hoon_factor(&pair, OrpKind::Q3).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
        assert!(err.to_string().contains("C11"));
    }
}
