//! Orthogonal reductions of output-normal pairs to Hessenberg-observer (HO)
//! and observer-triangular (OTS) form, sign standardization,
//! classification, degenerate splitting and partial Schur reduction.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{rotate_cols, rotate_rows, zeroing};
use crate::pair::OutputPair;
use crate::rotations::{apply_signature, SignatureMatrix};
use crate::schur::{order_blocks, real_schur, standardize_qd, OrderConvention, SchurForm};

/// Largest ON residual accepted by the reductions.
pub const ON_GATE: f64 = 1e-8;
/// Threshold on `1 − |C₁₁|` below which an HO pair is degenerate.
pub const DEGENERATE_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Form {
    Ots,
    Ho,
    Schur,
    None,
}

impl std::fmt::Display for Form {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Form::Ots => "ots",
            Form::Ho => "hoon",
            Form::Schur => "schur",
            Form::None => "none",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FormClassification {
    pub form: Form,
    pub standard: bool,
    pub unreduced: bool,
    pub strict: bool,
    /// HO only: `|C₁₁| ≥ 1 − 1e−8`.
    pub degenerate: bool,
    /// 1-based `k` of the first vanishing `Q_kk` (OTS) or `A_{k+1,k}` (HO).
    pub reducible_index: Option<usize>,
    /// Largest entry that the form requires to vanish.
    pub structure_residual: f64,
}

/// Default zero threshold `1e−8·‖[C; A]‖_F`.
pub fn default_tol(pair: &OutputPair) -> f64 {
    1e-8 * pair.stack().norm()
}

fn check_on(pair: &OutputPair) -> Result<()> {
    let r = pair.on_residual();
    if r > ON_GATE {
        return Err(Error::Form(format!("pair is not output normal (residual {r:.3e})")));
    }
    Ok(())
}

struct Work {
    a: DMatrix<f64>,
    c: DMatrix<f64>,
    u: DMatrix<f64>,
}

impl Work {
    fn new(pair: &OutputPair) -> Self {
        let n = pair.n();
        Self { a: pair.a().clone(), c: pair.c().clone(), u: DMatrix::identity(n, n) }
    }

    /// Similarity by the rotation `G` in plane `(p, q)`.
    fn similarity(&mut self, p: usize, q: usize, c: f64, s: f64) {
        rotate_rows(&mut self.a, p, q, c, s);
        rotate_cols(&mut self.a, p, q, c, s);
        rotate_cols(&mut self.c, p, q, c, s);
        rotate_cols(&mut self.u, p, q, c, s);
    }
}

fn signature_for(pair: &OutputPair, form: Form) -> SignatureMatrix {
    let n = pair.n();
    let d = pair.d();
    let (a, c) = (pair.a(), pair.c());
    let sign = |x: f64| if x < 0.0 { -1.0 } else { 1.0 };
    let mut e = vec![1.0; n];
    match form {
        Form::Ots => {
            for i in 0..n {
                e[i] = if i < d { sign(c[(i, i)]) } else { sign(e[i - d] * a[(i - d, i)]) };
            }
        }
        Form::Ho => {
            e[0] = sign(c[(0, 0)]);
            for i in 1..n {
                e[i] = sign(a[(i, i - 1)] * e[i - 1]);
            }
        }
        Form::Schur | Form::None => {}
    }
    SignatureMatrix::new(e).expect("entries are ±1")
}

/// Signature conjugation making the form's standard inequalities hold:
/// `Q_ii ≥ 0` for OTS, `C₁₁ ≥ 0` and `A_{i+1,i} ≥ 0` for HO.
pub fn standardize(pair: &OutputPair, form: Form) -> Result<(OutputPair, SignatureMatrix)> {
    if !matches!(form, Form::Ots | Form::Ho) {
        return Err(Error::Unsupported(format!("no sign standardization for form {form}")));
    }
    let e = signature_for(pair, form);
    Ok((apply_signature(pair, &e)?, e))
}

/// Orthogonally equivalent HO pair, standardized.
pub fn to_hessenberg_observer(pair: &OutputPair) -> Result<(OutputPair, DMatrix<f64>)> {
    check_on(pair)?;
    let n = pair.n();
    let mut w = Work::new(pair);
    for j in (1..n).rev() {
        let (c, s, _) = zeroing(w.c[(0, j - 1)], w.c[(0, j)]);
        w.similarity(j - 1, j, c, s);
        w.c[(0, j)] = 0.0;
    }
    for j in 0..n.saturating_sub(2) {
        for i in (j + 2..n).rev() {
            let (c, s, _) = zeroing(w.a[(i - 1, j)], w.a[(i, j)]);
            w.similarity(i - 1, i, c, s);
            w.a[(i, j)] = 0.0;
        }
    }
    let reduced = OutputPair::new(w.a, w.c)?;
    let (out, e) = standardize(&reduced, Form::Ho)?;
    Ok((out, w.u * e.matrix()))
}

/// Orthogonally equivalent OTS pair (lower triangular stack), standardized.
pub fn to_ots(pair: &OutputPair) -> Result<(OutputPair, DMatrix<f64>)> {
    check_on(pair)?;
    let n = pair.n();
    let d = pair.d();
    let mut w = Work::new(pair);
    for r in 0..d.min(n) {
        for j in (r + 1..n).rev() {
            let (c, s, _) = zeroing(w.c[(r, j - 1)], w.c[(r, j)]);
            w.similarity(j - 1, j, c, s);
            w.c[(r, j)] = 0.0;
        }
    }
    for i in 0..n {
        for j in (i + d + 1..n).rev() {
            let (c, s, _) = zeroing(w.a[(i, j - 1)], w.a[(i, j)]);
            w.similarity(j - 1, j, c, s);
            w.a[(i, j)] = 0.0;
        }
    }
    let reduced = OutputPair::new(w.a, w.c)?;
    let (out, e) = standardize(&reduced, Form::Ots)?;
    Ok((out, w.u * e.matrix()))
}

fn ots_structure(pair: &OutputPair) -> f64 {
    let q = pair.stack();
    let mut worst = 0.0_f64;
    for i in 0..q.nrows() {
        for j in i + 1..q.ncols() {
            worst = worst.max(q[(i, j)].abs());
        }
    }
    worst
}

fn ho_structure(pair: &OutputPair) -> f64 {
    let (a, c) = (pair.a(), pair.c());
    let n = pair.n();
    let mut worst = 0.0_f64;
    for j in 1..n {
        worst = worst.max(c[(0, j)].abs());
    }
    for j in 0..n {
        for i in j + 2..n {
            worst = worst.max(a[(i, j)].abs());
        }
    }
    worst
}

fn quasi_triangular_structure(a: &DMatrix<f64>, tol: f64) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in j + 2..n {
            worst = worst.max(a[(i, j)].abs());
        }
    }
    // two consecutive nonzero subdiagonals would make a 3×3 block
    for i in 1..n.saturating_sub(1) {
        let (x, y) = (a[(i, i - 1)].abs(), a[(i + 1, i)].abs());
        if x >= tol && y >= tol {
            worst = worst.max(x.min(y));
        }
    }
    worst
}

/// Classification against one particular form.
pub fn classify_as(pair: &OutputPair, form: Form, tol: f64) -> FormClassification {
    let n = pair.n();
    let (a, c) = (pair.a(), pair.c());
    let mut out = FormClassification {
        form,
        standard: false,
        unreduced: false,
        strict: false,
        degenerate: false,
        reducible_index: None,
        structure_residual: f64::INFINITY,
    };
    match form {
        Form::Ots => {
            let q = pair.stack();
            out.structure_residual = ots_structure(pair);
            out.standard = (0..n).all(|i| q[(i, i)] >= 0.0 || q[(i, i)].abs() < tol);
            out.reducible_index = (0..n).find(|&i| q[(i, i)].abs() < tol).map(|i| i + 1);
        }
        Form::Ho => {
            out.structure_residual = ho_structure(pair);
            out.standard = (c[(0, 0)] >= 0.0 || c[(0, 0)].abs() < tol)
                && (1..n).all(|i| a[(i, i - 1)] >= 0.0 || a[(i, i - 1)].abs() < tol);
            out.reducible_index = (1..n).find(|&i| a[(i, i - 1)].abs() < tol);
            out.degenerate = c[(0, 0)].abs() >= 1.0 - DEGENERATE_TOL;
        }
        Form::Schur => {
            out.structure_residual = quasi_triangular_structure(a, tol);
            if out.structure_residual < tol {
                if let Ok(sf) = schur_view(a, tol) {
                    let qd_ok = sf.blocks.iter().filter(|b| b.size == 2).all(|b| {
                        crate::schur::standardize_qd_block(sf.two_by_two(*b))
                            .map(|blk| {
                                (0..2).all(|i| {
                                    (0..2).all(|j| (blk.z[i][j] - sf.t[(b.start + i, b.start + j)]).abs() < tol)
                                })
                            })
                            .unwrap_or(false)
                    });
                    out.standard = qd_ok && sf.is_ordered(OrderConvention::Ascending);
                }
            }
        }
        Form::None => {
            out.structure_residual = 0.0;
        }
    }
    out.unreduced = out.reducible_index.is_none();
    out.strict = out.standard && out.unreduced;
    out
}

/// Read the block structure of an already quasi-triangular matrix.
fn schur_view(a: &DMatrix<f64>, tol: f64) -> Result<SchurForm> {
    let n = a.nrows();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && a[(i + 1, i)].abs() >= tol {
            blocks.push(crate::schur::Block { start: i, size: 2 });
            i += 2;
        } else {
            blocks.push(crate::schur::Block { start: i, size: 1 });
            i += 1;
        }
    }
    Ok(SchurForm { u: DMatrix::identity(n, n), t: a.clone(), blocks, mode: crate::schur::BlockMode::Raw })
}

/// First matching form in the order OTS, HO, Schur.
pub fn classify(pair: &OutputPair, tol: f64) -> FormClassification {
    for form in [Form::Ots, Form::Ho, Form::Schur] {
        let c = classify_as(pair, form, tol);
        if c.structure_residual < tol {
            return c;
        }
    }
    classify_as(pair, Form::None, tol)
}

/// Split `[C; A] = I_m ⊕ Q̂` off a degenerate HO stack.
///
/// Returns `m` and the pair read from `Q̂` with the same output dimension:
/// `Ĉ` is the first `d` rows of `Q̂`, `Â` the rest.
pub fn split_degenerate(pair: &OutputPair) -> Result<(usize, OutputPair)> {
    let n = pair.n();
    let d = pair.d();
    let q = pair.stack();
    let mut m = 0;
    while m < d && m < n && q[(m, m)].abs() >= 1.0 - DEGENERATE_TOL {
        let row_off = (0..n).filter(|&j| j != m).map(|j| q[(m, j)].abs()).fold(0.0, f64::max);
        let col_off = (0..n + d).filter(|&i| i != m).map(|i| q[(i, m)].abs()).fold(0.0, f64::max);
        if row_off.max(col_off) > 1e-8 {
            return Err(Error::Form(format!(
                "stack has |Q[{m},{m}]| = 1 but its row or column is not a unit vector (off entry {:.3e})",
                row_off.max(col_off)
            )));
        }
        m += 1;
    }
    if m == 0 {
        return Ok((0, pair.clone()));
    }
    if m == n {
        return Err(Error::Degenerate("stack is an identity block with no remainder".into()));
    }
    let rest = q.view((m, m), (n + d - m, n - m)).into_owned();
    Ok((m, OutputPair::from_stack(&rest, d)?))
}

/// Orthogonal `U = I_k ⊕ U₂` putting the trailing block of a reducible HO
/// pair in ordered qd Schur form.
///
/// `k` is the first index with `A_{k+1,k} ≈ 0`. The leading `k×k` block of
/// `A` and the first `k` columns of `C` are left bit-identical.
pub fn reduce_partial_schur(pair: &OutputPair, tol: f64) -> Result<(OutputPair, DMatrix<f64>)> {
    check_on(pair)?;
    let cls = classify_as(pair, Form::Ho, tol);
    if cls.structure_residual >= tol {
        return Err(Error::Form("pair is not in HO form".into()));
    }
    if cls.degenerate {
        return Err(Error::Degenerate(format!("|C11| = {} is 1; split it first", pair.c()[(0, 0)])));
    }
    let k = cls.reducible_index.ok_or_else(|| Error::Form("pair is not reducible: no vanishing subdiagonal".into()))?;
    let n = pair.n();
    let d = pair.d();
    let a22 = pair.a().view((k, k), (n - k, n - k)).into_owned();
    let sf = real_schur(&a22)?;
    let sf = order_blocks(&sf, OrderConvention::Ascending)?;
    let mut sf = standardize_qd(&sf)?;

    // sign freedom: first non-negligible entry of each block's [C; A_12] columns
    let coupling = {
        let top =
            DMatrix::from_fn(d + k, n - k, |i, j| if i < d { pair.c()[(i, k + j)] } else { pair.a()[(i - d, k + j)] });
        top * &sf.u
    };
    let scale = coupling.norm().max(f64::MIN_POSITIVE);
    for b in sf.blocks.clone() {
        let lead = (b.start..b.start + b.size)
            .flat_map(|j| (0..coupling.nrows()).map(move |i| (i, j)))
            .map(|(i, j)| coupling[(i, j)])
            .find(|x| x.abs() > 1e-8 * scale)
            .unwrap_or(0.0);
        if lead < 0.0 {
            for j in b.start..b.start + b.size {
                sf.u.column_mut(j).neg_mut();
                sf.t.column_mut(j).neg_mut();
                sf.t.row_mut(j).neg_mut();
            }
        }
    }

    let mut u = DMatrix::<f64>::identity(n, n);
    u.view_mut((k, k), (n - k, n - k)).copy_from(&sf.u);
    let mut a = pair.a().clone();
    let a12 = pair.a().view((0, k), (k, n - k)) * &sf.u;
    a.view_mut((0, k), (k, n - k)).copy_from(&a12);
    a.view_mut((k, k), (n - k, n - k)).copy_from(&sf.t);
    for i in k..n {
        for j in 0..k {
            a[(i, j)] = 0.0;
        }
    }
    let mut c = pair.c().clone();
    let c2 = pair.c().view((0, k), (d, n - k)) * &sf.u;
    c.view_mut((0, k), (d, n - k)).copy_from(&c2);
    Ok((OutputPair::new(a, c)?, u))
}

/// `s_k = C A^k Cᵀ` for `k = 0..2n−1`.
pub fn signature_sequence(pair: &OutputPair) -> Vec<DMatrix<f64>> {
    let n = pair.n();
    let mut w = pair.c().transpose();
    let mut out = Vec::with_capacity(2 * n);
    for _ in 0..2 * n {
        out.push(pair.c() * &w);
        w = pair.a() * w;
    }
    out
}

/// Largest elementwise difference between two signature sequences.
pub fn signature_distance(x: &[DMatrix<f64>], y: &[DMatrix<f64>]) -> f64 {
    if x.len() != y.len() {
        return f64::INFINITY;
    }
    x.iter()
        .zip(y)
        .map(|(p, q)| if p.shape() != q.shape() { f64::INFINITY } else { (p - q).amax() })
        .fold(0.0, f64::max)
}
