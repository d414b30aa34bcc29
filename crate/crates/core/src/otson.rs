//! Observer-triangular output-normal (OTSON) pairs as products of `n`
//! embedded ORP factors:
//!
//! `[C; A] = Q⁽ⁿ⁾(θ_n) ⋯ Q⁽¹⁾(θ_1) [I_n; 0]`
//!
//! where `Q⁽ᵏ⁾` acts on row `k` and the last `d` rows of the stack.

use nalgebra::{DMatrix, DVector};

use crate::canonical::ON_GATE;
use crate::error::{Error, Result};
use crate::pair::OutputPair;
use crate::rotations::{orp_reduce, FlopCounter, OrpFamily, OrpKind, OrpParam};

/// Default `|μ_k|` threshold for the boundary of the parameter domain.
pub const BOUNDARY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct OtsonParams {
    n: usize,
    d: usize,
    family: OrpFamily,
    stages: Vec<OrpParam>,
}

impl OtsonParams {
    pub fn new(n: usize, d: usize, family: OrpFamily, stages: Vec<OrpParam>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::Dimension("OTSON parameters need n ≥ 1 and d ≥ 1".into()));
        }
        if family.dim() != d + 1 || family.target() != 0 {
            return Err(Error::Domain(format!(
                "OTSON stages need a family on O({}) targeting e1, got {:?}",
                d + 1,
                family
            )));
        }
        if stages.len() != n {
            return Err(Error::Dimension(format!("expected {n} stages, got {}", stages.len())));
        }
        if stages.iter().any(|s| s.family() != family) {
            return Err(Error::Domain("all stages must share one family".into()));
        }
        Ok(Self { n, d, family, stages })
    }

    /// Build from flattened angles, stage-major (`θ_1` first).
    pub fn from_flat(n: usize, d: usize, family: OrpFamily, thetas: &[f64]) -> Result<Self> {
        if thetas.len() != n * d {
            return Err(Error::Dimension(format!("OTSON needs n·d = {} angles, got {}", n * d, thetas.len())));
        }
        let stages = thetas.chunks(d).map(|c| OrpParam::new(family, c.to_vec())).collect::<Result<Vec<_>>>()?;
        Self::new(n, d, family, stages)
    }

    /// All parameters zero: `C = [I_d 0]`, `A` the shift by `d`.
    pub fn zero(n: usize, d: usize, family: OrpFamily) -> Result<Self> {
        Self::from_flat(n, d, family, &vec![0.0; n * d])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn family(&self) -> OrpFamily {
        self.family
    }

    pub fn stages(&self) -> &[OrpParam] {
        &self.stages
    }

    pub fn flat(&self) -> Vec<f64> {
        self.stages.iter().flat_map(|s| s.thetas().iter().copied()).collect()
    }

    pub(crate) fn stages_mut(&mut self) -> &mut [OrpParam] {
        &mut self.stages
    }

    /// `μ_k` of every stage.
    pub fn mus(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.matrix()[(0, 0)]).collect()
    }

    /// Rows touched by stage `k` (0-based): row `k`, then rows `n..n+d`.
    pub(crate) fn coords(&self, k: usize) -> Vec<usize> {
        std::iter::once(k).chain(self.n..self.n + self.d).collect()
    }
}

/// Whether parameters lie inside, or on the boundary of, the identifiable
/// domain `{μ_k > 0}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainStatus {
    /// All `μ_k > 0` (and `γ > 0` for HOON).
    Strict,
    /// No `μ_k` vanishes but some are negative.
    Unreduced,
    /// Some `|μ_k| ≤ tol`.
    Boundary,
}

impl std::fmt::Display for DomainStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DomainStatus::Strict => "strict",
            DomainStatus::Unreduced => "unreduced",
            DomainStatus::Boundary => "boundary",
        })
    }
}

pub(crate) fn classify_mus(mus: &[f64], tol: f64) -> DomainStatus {
    if mus.iter().any(|m| m.abs() <= tol) {
        DomainStatus::Boundary
    } else if mus.iter().all(|&m| m > 0.0) {
        DomainStatus::Strict
    } else {
        DomainStatus::Unreduced
    }
}

pub fn otson_domain_check(params: &OtsonParams, tol: f64) -> DomainStatus {
    classify_mus(&params.mus(), tol)
}

fn check_ots_input(pair: &OutputPair) -> Result<()> {
    let r = pair.on_residual();
    if r > ON_GATE {
        return Err(Error::Form(format!("pair is not output normal (residual {r:.3e})")));
    }
    let q = pair.stack();
    let tol = 1e-8 * q.norm().max(1.0);
    for i in 0..q.nrows() {
        for j in i + 1..q.ncols() {
            if q[(i, j)].abs() > tol {
                return Err(Error::Form(format!("stack is not lower triangular: Q[{i},{j}] = {:.3e}", q[(i, j)])));
            }
        }
    }
    Ok(())
}

/// Angles of an OTSON pair, determined from `θ_n` down to `θ_1`.
///
/// Each stage zeroes the last `d` rows of column `k` of the partially
/// reduced stack. The unsigned Householder family only works when every
/// diagonal entry `Q_kk` is positive.
pub fn otson_factor(pair: &OutputPair, family: OrpFamily) -> Result<OtsonParams> {
    check_ots_input(pair)?;
    let n = pair.n();
    let d = pair.d();
    if family.dim() != d + 1 || family.target() != 0 {
        return Err(Error::Domain(format!("family {family:?} does not act on O({}) to e1", d + 1)));
    }
    let mut w = pair.stack();
    let mut stages = vec![OrpParam::identity(family); n];
    let coords_of = |k: usize| -> Vec<usize> { std::iter::once(k).chain(n..n + d).collect() };
    let mut counter = FlopCounter::new();
    for k in (0..n).rev() {
        let coords = coords_of(k);
        let h: Vec<f64> = coords.iter().map(|&i| w[(i, k)]).collect();
        let p = orp_reduce(family, &h)?;
        for j in 0..=k {
            let mut col: Vec<f64> = w.column(j).iter().copied().collect();
            p.apply_embedded(&mut col, &coords, true, &mut counter);
            for &i in &coords {
                w[(i, j)] = col[i];
            }
        }
        if w[(k, k)] < 0.0 {
            return Err(Error::NotStrict(format!(
                "column {} reduces to a negative pivot; the unsigned family cannot represent it",
                k + 1
            )));
        }
        stages[k] = p;
    }
    OtsonParams::new(n, d, family, stages)
}

/// Running blocks of `Γ⁽ᵏ⁾ = Q⁽ᵏ⁾ ⋯ Q⁽¹⁾` restricted to rows `1..k` and
/// the last `d` rows: `[[L_k, ·, N_k], [M_k, ·, P_k]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaState {
    pub l: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub nn: DMatrix<f64>,
    pub p: DMatrix<f64>,
}

impl GammaState {
    pub fn initial(d: usize) -> Self {
        Self { l: DMatrix::zeros(0, 0), m: DMatrix::zeros(d, 0), nn: DMatrix::zeros(0, d), p: DMatrix::identity(d, d) }
    }

    pub fn k(&self) -> usize {
        self.l.nrows()
    }

    /// Apply one more stage.
    pub fn step(&self, stage: &OrpParam) -> Result<Self> {
        let b = stage.blocks()?;
        let k = self.k();
        let d = self.p.nrows();
        let mut l = DMatrix::zeros(k + 1, k + 1);
        l.view_mut((0, 0), (k, k)).copy_from(&self.l);
        let yt_m = b.y.transpose() * &self.m;
        l.view_mut((k, 0), (1, k)).copy_from(&yt_m);
        l[(k, k)] = b.mu;
        let mut m = DMatrix::zeros(d, k + 1);
        m.view_mut((0, 0), (d, k)).copy_from(&(&b.o_tilde * &self.m));
        m.column_mut(k).copy_from(&b.x);
        let mut nn = DMatrix::zeros(k + 1, d);
        nn.view_mut((0, 0), (k, d)).copy_from(&self.nn);
        nn.view_mut((k, 0), (1, d)).copy_from(&(b.y.transpose() * &self.p));
        let p = &b.o_tilde * &self.p;
        Ok(Self { l, m, nn, p })
    }

    /// `‖[L; M]ᵀ[L; M] − I‖_F`.
    pub fn column_residual(&self) -> f64 {
        let k = self.k();
        let g = self.l.transpose() * &self.l + self.m.transpose() * &self.m;
        (g - DMatrix::<f64>::identity(k, k)).norm()
    }
}

/// `[L_n; M_n]` by the block recurrences.
pub fn otson_stack(params: &OtsonParams) -> Result<DMatrix<f64>> {
    let (n, d) = (params.n, params.d);
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut m = DMatrix::<f64>::zeros(d, n);
    for (k, stage) in params.stages.iter().enumerate() {
        let b = stage.blocks()?;
        for j in 0..k {
            l[(k, j)] = b.y.dot(&m.column(j));
        }
        l[(k, k)] = b.mu;
        let head = &b.o_tilde * m.columns(0, k);
        m.columns_mut(0, k).copy_from(&head);
        m.column_mut(k).copy_from(&b.x);
    }
    let mut stack = DMatrix::zeros(n + d, n);
    stack.rows_mut(0, n).copy_from(&l);
    stack.rows_mut(n, d).copy_from(&m);
    Ok(stack)
}

/// The OTSON pair `(A, C)` of a parameter set.
pub fn otson_reconstruct(params: &OtsonParams) -> Result<OutputPair> {
    OutputPair::from_stack(&otson_stack(params)?, params.d)
}

/// Dense product `Q⁽ⁿ⁾ ⋯ Q⁽¹⁾ [I; 0]` with full `(n+d)×(n+d)` factors.
pub fn otson_dense_product(params: &OtsonParams) -> DMatrix<f64> {
    let (n, d) = (params.n, params.d);
    let mut gamma = DMatrix::<f64>::identity(n + d, n + d);
    for (k, stage) in params.stages.iter().enumerate() {
        let coords = params.coords(k);
        let local = stage.matrix();
        let mut q = DMatrix::<f64>::identity(n + d, n + d);
        for (a, &i) in coords.iter().enumerate() {
            for (b, &j) in coords.iter().enumerate() {
                q[(i, j)] = local[(a, b)];
            }
        }
        gamma = q * gamma;
    }
    gamma.columns(0, n).into_owned()
}

/// The last `d+2` rows of `A` in closed form from `M_{n−2}` and the
/// blocks of the final two stages.
pub fn otson_bottom_rows(params: &OtsonParams) -> Result<DMatrix<f64>> {
    let (n, d) = (params.n, params.d);
    if n < d + 2 {
        return Err(Error::Dimension(format!("closed form needs n ≥ d+2, got n = {n}, d = {d}")));
    }
    let mut state = GammaState::initial(d);
    for stage in &params.stages[..n - 2] {
        state = state.step(stage)?;
    }
    let m = &state.m;
    let b1 = params.stages[n - 2].blocks()?;
    let b2 = params.stages[n - 1].blocks()?;
    let k = n - 2;
    let mut out = DMatrix::zeros(d + 2, n);
    out.view_mut((0, 0), (1, k)).copy_from(&(b1.y.transpose() * m));
    out[(0, k)] = b1.mu;
    out.view_mut((1, 0), (1, k)).copy_from(&(b2.y.transpose() * &b1.o_tilde * m));
    out[(1, k)] = b2.y.dot(&b1.x);
    out[(1, k + 1)] = b2.mu;
    out.view_mut((2, 0), (d, k)).copy_from(&(&b2.o_tilde * &b1.o_tilde * m));
    let ox: DVector<f64> = &b2.o_tilde * &b1.x;
    out.view_mut((2, k), (d, 1)).copy_from(&ox);
    out.view_mut((2, k + 1), (d, 1)).copy_from(&b2.x);
    Ok(out)
}

/// Default family for OTSON factorization.
pub fn default_family(d: usize) -> OrpFamily {
    OrpFamily::q1(d)
}

/// Family of kind `kind` usable for OTSON stages with output dimension `d`.
pub fn family_for(kind: OrpKind, d: usize) -> Result<OrpFamily> {
    match kind {
        OrpKind::Q1 => Ok(OrpFamily::q1(d)),
        OrpKind::Q2 => Ok(OrpFamily::q2(d)),
        OrpKind::Householder => OrpFamily::householder(d + 1, 0),
        OrpKind::Q3 => Err(Error::Domain("OTSON stages target e1; Q3 targets the last coordinate".into())),
    }
}
