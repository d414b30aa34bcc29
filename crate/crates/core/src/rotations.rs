//! Givens rotations, signature matrices and orthogonal reduction
//! parameterizations (ORPs).
//!
//! An ORP of `O(m)` to `e_k` is an `(m-1)`-parameter family of orthogonal
//! matrices `Q(θ)` such that every vector `h` has exactly one `θ(h)` with
//! `Q(θ)ᵀ h = ‖h‖ e_k`. Three Givens families are provided:
//!
//! * [`OrpKind::Q1`]: `G(1,m)(θ_{m-1}) ⋯ G(1,3)(θ_2) G(1,2)(θ_1)`, target `e_1`
//! * [`OrpKind::Q2`]: `G(m-1,m)(θ_{m-1}) ⋯ G(2,3)(θ_2) G(1,2)(θ_1)`, target `e_1`
//! * [`OrpKind::Q3`]: `G(1,2)(θ_1) G(2,3)(θ_2) ⋯ G(m-1,m)(θ_{m-1})`, target `e_m`
//!
//! plus an unsigned Householder family. Indices in the formulas above are
//! 1-based; the Rust API is 0-based throughout.
//!
//! Every rotation uses `g_ii = g_jj = cos θ`, `g_ij = -g_ji = sin θ` for
//! `i < j`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::pair::OutputPair;

/// Multiply counter threaded through the implicit kernels.
///
/// Multiplies and fused multiply-adds both count as one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FlopCounter {
    mults: u64,
}

impl FlopCounter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, k: u64) {
        self.mults += k;
    }

    pub fn count(&self) -> u64 {
        self.mults
    }
}

/// Which of `G` or `Gᵀ` to apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    LeftTranspose,
}

/// `(v_p, v_q) <- G (v_p, v_q)` or `Gᵀ (v_p, v_q)`; four multiplies.
#[inline]
pub(crate) fn rotate(v: &mut [f64], p: usize, q: usize, c: f64, s: f64, side: Side, counter: &mut FlopCounter) {
    let x = v[p];
    let y = v[q];
    match side {
        Side::Left => {
            v[p] = c * x + s * y;
            v[q] = -s * x + c * y;
        }
        Side::LeftTranspose => {
            v[p] = c * x - s * y;
            v[q] = s * x + c * y;
        }
    }
    counter.add(4);
}

/// `(v_p, v_q) <- G'(θ) (v_p, v_q)` where `G' = dG/dθ`. The derivative
/// matrix vanishes outside the `(p, q)` plane, so the caller must clear the
/// remaining coordinates.
#[inline]
pub(crate) fn rotate_derivative(v: &mut [f64], p: usize, q: usize, c: f64, s: f64, counter: &mut FlopCounter) {
    let x = v[p];
    let y = v[q];
    v[p] = -s * x + c * y;
    v[q] = -c * x - s * y;
    counter.add(4);
}

/// A plane rotation `G_{ij}(θ)` acting on coordinates `i < j` (0-based).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GivensRotation {
    i: usize,
    j: usize,
    theta: f64,
    c: f64,
    s: f64,
}

impl GivensRotation {
    pub fn new(i: usize, j: usize, theta: f64) -> Result<Self> {
        if i >= j {
            return Err(Error::Index(format!("rotation plane needs i < j, got ({i}, {j})")));
        }
        if !theta.is_finite() {
            return Err(Error::Domain("rotation angle is not finite".into()));
        }
        let (s, c) = theta.sin_cos();
        Ok(Self { i, j, theta, c, s })
    }

    pub fn i(&self) -> usize {
        self.i
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Dense `m×m` matrix of the rotation.
    pub fn matrix(&self, m: usize) -> Result<DMatrix<f64>> {
        self.check_dim(m)?;
        let mut g = DMatrix::identity(m, m);
        g[(self.i, self.i)] = self.c;
        g[(self.j, self.j)] = self.c;
        g[(self.i, self.j)] = self.s;
        g[(self.j, self.i)] = -self.s;
        Ok(g)
    }

    /// Rotate `v` in place. Only entries `i` and `j` change.
    pub fn apply(&self, v: &mut [f64], side: Side, counter: &mut FlopCounter) -> Result<()> {
        self.check_dim(v.len())?;
        rotate(v, self.i, self.j, self.c, self.s, side, counter);
        Ok(())
    }

    fn check_dim(&self, m: usize) -> Result<()> {
        if self.j >= m {
            return Err(Error::Index(format!("rotation plane ({}, {}) outside dimension {m}", self.i, self.j)));
        }
        Ok(())
    }
}

/// Apply `G` or `Gᵀ` to a copy of `v`, returning the rotated vector and the
/// number of multiplies spent.
pub fn apply_givens(g: &GivensRotation, v: &[f64], side: Side) -> Result<(Vec<f64>, u64)> {
    let mut out = v.to_vec();
    let mut counter = FlopCounter::new();
    g.apply(&mut out, side, &mut counter)?;
    Ok((out, counter.count()))
}

/// Diagonal `±1` matrix `E`.
#[derive(Clone, Debug, PartialEq)]
pub struct SignatureMatrix {
    signs: Vec<f64>,
}

impl SignatureMatrix {
    pub fn identity(n: usize) -> Self {
        Self { signs: vec![1.0; n] }
    }

    /// Build from a list of signs; every entry must be exactly `1` or `-1`.
    pub fn new(signs: Vec<f64>) -> Result<Self> {
        if signs.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(Error::Domain("signature entries must be +1 or -1".into()));
        }
        Ok(Self { signs })
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.signs.iter().all(|&s| s == 1.0)
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.signs))
    }

    /// Entrywise product `E₁E₂`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::Dimension("signature lengths differ".into()));
        }
        Ok(Self { signs: self.signs.iter().zip(&other.signs).map(|(a, b)| a * b).collect() })
    }
}

/// `(A, C) -> (EAE, CE)`. Sign flips only, so the result is exact.
pub fn apply_signature(pair: &OutputPair, e: &SignatureMatrix) -> Result<OutputPair> {
    let n = pair.n();
    if e.len() != n {
        return Err(Error::Dimension(format!("signature has length {}, pair has n = {n}", e.len())));
    }
    let mut a = pair.a().clone();
    let mut c = pair.c().clone();
    for j in 0..n {
        let sj = e.signs[j];
        for i in 0..n {
            a[(i, j)] *= e.signs[i] * sj;
        }
        for i in 0..c.nrows() {
            c[(i, j)] *= sj;
        }
    }
    OutputPair::new(a, c)
}

/// The concrete ORP families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OrpKind {
    Q1,
    Q2,
    Q3,
    Householder,
}

/// An ORP family: kind, ambient dimension `m` and target coordinate `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct OrpFamily {
    kind: OrpKind,
    dim: usize,
    target: usize,
}

impl OrpFamily {
    /// Q̃1 on `O(d+1)` to `e_1`.
    pub fn q1(d: usize) -> Self {
        Self { kind: OrpKind::Q1, dim: d + 1, target: 0 }
    }

    /// Q̃2 on `O(d+1)` to `e_1`.
    pub fn q2(d: usize) -> Self {
        Self { kind: OrpKind::Q2, dim: d + 1, target: 0 }
    }

    /// Q̃3 on `O(m)` to `e_m`.
    pub fn q3(m: usize) -> Self {
        Self { kind: OrpKind::Q3, dim: m, target: m.saturating_sub(1) }
    }

    /// Householder reflections on `O(m)` to `e_target` (unsigned).
    pub fn householder(m: usize, target: usize) -> Result<Self> {
        Self::new(OrpKind::Householder, m, target)
    }

    pub fn new(kind: OrpKind, dim: usize, target: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("ORP dimension must be positive".into()));
        }
        let ok = match kind {
            OrpKind::Q1 | OrpKind::Q2 => target == 0,
            OrpKind::Q3 => target == dim - 1,
            OrpKind::Householder => target < dim,
        };
        if !ok {
            return Err(Error::Domain(format!("{kind:?} family of dimension {dim} cannot target coordinate {target}")));
        }
        Ok(Self { kind, dim, target })
    }

    pub fn kind(&self) -> OrpKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn n_params(&self) -> usize {
        self.dim - 1
    }

    /// Signed families reduce `h` to `+‖h‖e_k`; the Householder family only
    /// to the `e_k` direction.
    pub fn is_signed(&self) -> bool {
        self.kind != OrpKind::Householder
    }

    pub fn is_givens(&self) -> bool {
        self.kind != OrpKind::Householder
    }

    /// Index of the angle carrying the doubled range `(-π, π]`.
    fn full_range_angle(&self) -> Option<usize> {
        match self.kind {
            OrpKind::Q1 | OrpKind::Q2 if self.dim > 1 => Some(0),
            OrpKind::Q3 if self.dim > 1 => Some(self.dim - 2),
            _ => None,
        }
    }

    /// Givens factors `(p, q, angle)` in the order the product is written.
    fn factors(&self) -> Vec<(usize, usize, usize)> {
        let r = self.n_params();
        match self.kind {
            OrpKind::Q1 => (0..r).rev().map(|a| (0, a + 1, a)).collect(),
            OrpKind::Q2 => (0..r).rev().map(|a| (a, a + 1, a)).collect(),
            OrpKind::Q3 => (0..r).map(|a| (a, a + 1, a)).collect(),
            OrpKind::Householder => Vec::new(),
        }
    }

    /// Whether `theta` lies in the angle domain of parameter `idx`.
    pub fn angle_in_domain(&self, idx: usize, theta: f64) -> bool {
        if !theta.is_finite() {
            return false;
        }
        if Some(idx) == self.full_range_angle() {
            theta > -PI && theta <= PI
        } else {
            theta > -FRAC_PI_2 && theta <= FRAC_PI_2
        }
    }
}

/// Cached data for the Householder family: `H = I - β w wᵀ`.
#[derive(Clone, Debug, PartialEq)]
struct Reflector {
    w: Vec<f64>,
    beta: f64,
}

/// A parameter vector `θ` of an ORP family.
///
/// For Givens families the entries are angles; for the Householder family
/// they are the coordinates of the reflected unit vector with the target
/// coordinate removed (that one is recovered as a nonnegative square root).
#[derive(Clone, Debug, PartialEq)]
pub struct OrpParam {
    family: OrpFamily,
    thetas: Vec<f64>,
    cs: Vec<(f64, f64)>,
    reflector: Option<Reflector>,
}

impl OrpParam {
    pub fn new(family: OrpFamily, thetas: Vec<f64>) -> Result<Self> {
        if thetas.len() != family.n_params() {
            return Err(Error::Dimension(format!(
                "{:?} family of dimension {} takes {} parameters, got {}",
                family.kind,
                family.dim,
                family.n_params(),
                thetas.len()
            )));
        }
        let mut thetas = thetas;
        if family.kind == OrpKind::Householder {
            let sq: f64 = thetas.iter().map(|t| t * t).sum();
            if thetas.iter().any(|t| !t.is_finite()) || sq > 1.0 + 1e-12 {
                return Err(Error::Domain("Householder coordinates must lie in the unit ball".into()));
            }
            let reflector = Self::reflector(family, &thetas);
            return Ok(Self { family, thetas, cs: Vec::new(), reflector: Some(reflector) });
        }
        for (idx, t) in thetas.iter_mut().enumerate() {
            if *t == -PI && Some(idx) == family.full_range_angle() {
                *t = PI;
            }
            if !family.angle_in_domain(idx, *t) {
                return Err(Error::Domain(format!("angle {idx} = {t} outside the {:?} domain", family.kind)));
            }
        }
        let cs = thetas.iter().map(|t| {
            let (s, c) = t.sin_cos();
            (c, s)
        });
        Ok(Self { family, cs: cs.collect(), thetas, reflector: None })
    }

    /// Copy with angle `idx` moved by `delta`, without the domain check.
    /// Used for finite differences, which may step just outside the domain.
    pub fn shifted(&self, idx: usize, delta: f64) -> Result<Self> {
        if self.reflector.is_some() {
            return Err(Error::Unsupported("angle shifts are defined for the Givens families".into()));
        }
        if idx >= self.thetas.len() {
            return Err(Error::Index(format!("angle {idx} out of range for {} parameters", self.thetas.len())));
        }
        let mut out = self.clone();
        out.thetas[idx] += delta;
        let (s, c) = out.thetas[idx].sin_cos();
        out.cs[idx] = (c, s);
        Ok(out)
    }

    pub fn identity(family: OrpFamily) -> Self {
        Self::new(family, vec![0.0; family.n_params()]).expect("zero parameters are in every domain")
    }

    fn reflector(family: OrpFamily, coords: &[f64]) -> Reflector {
        let k = family.target;
        let sq: f64 = coords.iter().map(|t| t * t).sum::<f64>().min(1.0);
        let uk = (1.0 - sq).sqrt();
        let mut w = Vec::with_capacity(family.dim);
        w.extend_from_slice(&coords[..k]);
        // u_k - 1 without cancellation
        w.push(-sq / (1.0 + uk));
        w.extend_from_slice(&coords[k..]);
        let ww: f64 = w.iter().map(|x| x * x).sum();
        let beta = if ww == 0.0 { 0.0 } else { 2.0 / ww };
        Reflector { w, beta }
    }

    pub fn family(&self) -> OrpFamily {
        self.family
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    /// Dense `m×m` matrix, the Givens factors multiplied in written order.
    pub fn matrix(&self) -> DMatrix<f64> {
        let m = self.family.dim;
        if let Some(r) = &self.reflector {
            let w = DVector::from_column_slice(&r.w);
            return DMatrix::identity(m, m) - r.beta * &w * w.transpose();
        }
        let mut q = DMatrix::identity(m, m);
        for (p, qq, a) in self.family.factors() {
            let (c, s) = self.cs[a];
            crate::linalg::rotate_cols(&mut q, p, qq, c, s);
        }
        q
    }

    pub fn blocks(&self) -> Result<OrpBlocks> {
        OrpBlocks::from_matrix(&self.matrix(), self.family.target)
    }

    /// Apply the embedded matrix (or its transpose) to `v`, where local
    /// coordinate `l` of the family lives at `v[coords[l]]`.
    pub fn apply_embedded(&self, v: &mut [f64], coords: &[usize], transpose: bool, counter: &mut FlopCounter) {
        debug_assert_eq!(coords.len(), self.family.dim);
        if let Some(r) = &self.reflector {
            if r.beta == 0.0 {
                return;
            }
            let dot: f64 = coords.iter().zip(&r.w).map(|(&i, w)| v[i] * w).sum();
            let scale = r.beta * dot;
            for (&i, w) in coords.iter().zip(&r.w) {
                v[i] -= scale * w;
            }
            counter.add(2 * coords.len() as u64 + 1);
            return;
        }
        let factors = self.family.factors();
        if transpose {
            for &(p, q, a) in &factors {
                let (c, s) = self.cs[a];
                rotate(v, coords[p], coords[q], c, s, Side::LeftTranspose, counter);
            }
        } else {
            for &(p, q, a) in factors.iter().rev() {
                let (c, s) = self.cs[a];
                rotate(v, coords[p], coords[q], c, s, Side::Left, counter);
            }
        }
    }

    /// Apply `∂Q̃/∂θ_angle` (embedded) to `v`.
    ///
    /// Coordinates of `v` outside the embedding are zeroed, since the
    /// derivative of an embedded block has zero identity part.
    pub fn apply_embedded_derivative(
        &self,
        v: &mut [f64],
        coords: &[usize],
        angle: usize,
        counter: &mut FlopCounter,
    ) -> Result<()> {
        if !self.family.is_givens() {
            return Err(Error::Unsupported("derivatives are defined for the Givens families".into()));
        }
        if angle >= self.thetas.len() {
            return Err(Error::Index(format!("angle {angle} out of range for {} parameters", self.thetas.len())));
        }
        let factors = self.family.factors();
        let pos = factors.iter().position(|f| f.2 == angle).expect("every angle has a factor");
        for &(p, q, a) in factors[pos + 1..].iter().rev() {
            let (c, s) = self.cs[a];
            rotate(v, coords[p], coords[q], c, s, Side::Left, counter);
        }
        let (p, q, a) = factors[pos];
        let (gp, gq) = (coords[p], coords[q]);
        let (c, s) = self.cs[a];
        rotate_derivative(v, gp, gq, c, s, counter);
        for (i, x) in v.iter_mut().enumerate() {
            if i != gp && i != gq {
                *x = 0.0;
            }
        }
        for &(p, q, a) in factors[..pos].iter().rev() {
            let (c, s) = self.cs[a];
            rotate(v, coords[p], coords[q], c, s, Side::Left, counter);
        }
        Ok(())
    }
}

/// Angle in `(-π/2, π/2]` whose rotation transpose zeroes `b` in `(a, b)`.
fn zero_second_half(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        return if b == 0.0 { 0.0 } else { FRAC_PI_2 };
    }
    clean((-b / a).atan())
}

/// Angle in `(-π, π]` whose rotation transpose maps `(a, b)` to `(r, 0)`, `r ≥ 0`.
fn zero_second_full(a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        return 0.0;
    }
    clean_full((-b).atan2(a))
}

/// Angle in `(-π/2, π/2]` whose rotation transpose zeroes `a` in `(a, b)`.
fn zero_first_half(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        return if a == 0.0 { 0.0 } else { FRAC_PI_2 };
    }
    clean((a / b).atan())
}

/// Angle in `(-π, π]` whose rotation transpose maps `(a, b)` to `(0, r)`, `r ≥ 0`.
fn zero_first_full(a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        return 0.0;
    }
    clean_full(a.atan2(b))
}

fn clean(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t
    }
}

fn clean_full(t: f64) -> f64 {
    if t <= -PI {
        PI
    } else {
        clean(t)
    }
}

/// The unique `θ(h)` with `Q̃(θ)ᵀ h = ‖h‖ e_k`.
///
/// When a rotation pivot is exactly `(0, 0)` its angle is set to zero. The
/// Householder family only aligns `h` with `±e_k` and rejects `h = 0`.
/// Dimension-one families have no parameters and return the empty vector.
pub fn orp_reduce(family: OrpFamily, h: &[f64]) -> Result<OrpParam> {
    let m = family.dim;
    if h.len() != m {
        return Err(Error::Dimension(format!("vector has length {}, family dimension is {m}", h.len())));
    }
    if h.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("vector contains non-finite entries".into()));
    }
    let r = m - 1;
    let mut thetas = vec![0.0; r];
    match family.kind {
        OrpKind::Q1 if r > 0 => {
            let mut a = h[0];
            for idx in (1..r).rev() {
                let b = h[idx + 1];
                let t = zero_second_half(a, b);
                thetas[idx] = t;
                let (s, c) = t.sin_cos();
                a = c * a - s * b;
            }
            thetas[0] = zero_second_full(a, h[1]);
        }
        OrpKind::Q2 if r > 0 => {
            let mut b = h[r];
            for idx in (1..r).rev() {
                let a = h[idx];
                let t = zero_second_half(a, b);
                thetas[idx] = t;
                let (s, c) = t.sin_cos();
                b = c * a - s * b;
            }
            thetas[0] = zero_second_full(h[0], b);
        }
        OrpKind::Q3 if r > 0 => {
            let mut a = h[0];
            for idx in 0..r - 1 {
                let b = h[idx + 1];
                let t = zero_first_half(a, b);
                thetas[idx] = t;
                let (s, c) = t.sin_cos();
                a = s * a + c * b;
            }
            thetas[r - 1] = zero_first_full(a, h[r]);
        }
        OrpKind::Householder => {
            let norm = h.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::Domain("the unsigned Householder family cannot reduce the zero vector".into()));
            }
            let k = family.target;
            let pivot = if h[k] != 0.0 { h[k] } else { *h.iter().find(|x| **x != 0.0).unwrap() };
            let sign = pivot.signum();
            thetas = h.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, x)| sign * x / norm).collect();
        }
        _ => {}
    }
    OrpParam::new(family, thetas)
}

pub fn orp_matrix(p: &OrpParam) -> DMatrix<f64> {
    p.matrix()
}

pub fn orp_blocks(p: &OrpParam) -> Result<OrpBlocks> {
    p.blocks()
}

/// Partition of an `(d+1)×(d+1)` orthogonal ORP member.
///
/// Target `e_1`: `[[μ, yᵀ], [x, Õ]]`. Target `e_{d+1}`: `[[Õ, x], [yᵀ, μ]]`.
/// In both layouts `(x; μ)` is the column that `h/‖h‖` is mapped from.
#[derive(Clone, Debug, PartialEq)]
pub struct OrpBlocks {
    pub mu: f64,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub o_tilde: DMatrix<f64>,
}

impl OrpBlocks {
    fn from_matrix(m: &DMatrix<f64>, target: usize) -> Result<Self> {
        let dim = m.nrows();
        let d = dim - 1;
        if target == 0 {
            Ok(Self {
                mu: m[(0, 0)],
                y: DVector::from_iterator(d, m.row(0).iter().skip(1).copied()),
                x: DVector::from_iterator(d, m.column(0).iter().skip(1).copied()),
                o_tilde: m.view((1, 1), (d, d)).into_owned(),
            })
        } else if target == d {
            Ok(Self {
                mu: m[(d, d)],
                y: DVector::from_iterator(d, m.row(d).iter().take(d).copied()),
                x: DVector::from_iterator(d, m.column(d).iter().take(d).copied()),
                o_tilde: m.view((0, 0), (d, d)).into_owned(),
            })
        } else {
            Err(Error::Unsupported(format!(
                "blocks are defined for families targeting the first or last coordinate, not {target}"
            )))
        }
    }

    pub fn d(&self) -> usize {
        self.x.len()
    }

    /// Largest violation of the orthogonality identities
    /// `μ² + ‖x‖² = 1`, `μx = −Õy`, `μy = −Õᵀx`, `ÕÕᵀ + xxᵀ = I`.
    pub fn identity_residual(&self) -> f64 {
        let d = self.d();
        let r1 = (self.mu * self.mu + self.x.norm_squared() - 1.0).abs();
        let r2 = (self.mu * &self.x + &self.o_tilde * &self.y).norm();
        let r3 = (self.mu * &self.y + self.o_tilde.transpose() * &self.x).norm();
        let r4 = (&self.o_tilde * self.o_tilde.transpose() + &self.x * self.x.transpose()
            - DMatrix::<f64>::identity(d, d))
        .norm();
        r1.max(r2).max(r3).max(r4)
    }
}
