//! Ordered real Schur forms, 2×2 block standardizations and the Schur
//! output-normal pipeline.
//!
//! A real Schur form `T = UᵀAU` is quasi-upper-triangular with all 2×2
//! blocks (complex pairs) placed ahead of the 1×1 blocks. Block `k`
//! (1-based) starts at row `m(k) = 2k − 1` for `k ≤ ℓ` and `m(k) = k + ℓ`
//! for `k > ℓ`.

use std::cmp::Ordering;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{rotate_cols, rotate_rows};
use crate::normal_form::to_output_normal;
use crate::pair::OutputPair;

const ORDER_TOL: f64 = 1e-10;
const SWAP_TOL: f64 = 1e-10;

/// Which 2×2 standardization has been applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockMode {
    Raw,
    LambdaR,
    Qd,
}

/// Block order inside the complex and real groups.
///
/// `Ascending` places small moduli first (`|λ_j| ≥ |λ_i|` for `i < j`);
/// `Descending` is the reverse convention.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OrderConvention {
    #[default]
    Ascending,
    Descending,
}

/// A diagonal block of a quasi-triangular matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Block {
    pub start: usize,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchurForm {
    pub u: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub blocks: Vec<Block>,
    pub mode: BlockMode,
}

impl SchurForm {
    pub fn n(&self) -> usize {
        self.t.nrows()
    }

    /// Number of complex-conjugate pairs.
    pub fn ell(&self) -> usize {
        self.blocks.iter().filter(|b| b.size == 2).count()
    }

    /// Number of diagonal blocks, `n − ℓ`.
    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// 1-based start row `m(k)` of the 1-based block `k`.
    pub fn block_index(&self, k: usize) -> usize {
        let ell = self.ell();
        if k <= ell {
            2 * k - 1
        } else {
            k + ell
        }
    }

    /// Representative eigenvalue of each block (nonnegative imaginary part).
    pub fn block_eigenvalues(&self) -> Vec<Complex<f64>> {
        self.blocks.iter().map(|b| block_eigenvalue(&self.t, *b)).collect()
    }

    /// All eigenvalues, conjugate pairs listed together.
    pub fn eigenvalues(&self) -> Vec<Complex<f64>> {
        let mut out = Vec::with_capacity(self.n());
        for b in &self.blocks {
            let z = block_eigenvalue(&self.t, *b);
            out.push(z);
            if b.size == 2 {
                out.push(z.conj());
            }
        }
        out
    }

    /// `‖UᵀAU − T‖_F`.
    pub fn residual(&self, a: &DMatrix<f64>) -> f64 {
        (self.u.transpose() * a * &self.u - &self.t).norm()
    }

    /// Largest entry below the block diagonal.
    pub fn lower_residual(&self) -> f64 {
        let mut worst = 0.0_f64;
        for b in &self.blocks {
            for j in b.start..b.start + b.size {
                for i in b.start + b.size..self.n() {
                    worst = worst.max(self.t[(i, j)].abs());
                }
            }
        }
        worst
    }

    /// Whether the blocks satisfy the ordering predicate.
    pub fn is_ordered(&self, convention: OrderConvention) -> bool {
        let ev = self.block_eigenvalues();
        let complex_first = self.blocks.windows(2).all(|w| w[0].size >= w[1].size);
        complex_first
            && self.blocks.windows(2).zip(ev.windows(2)).all(|(b, e)| {
                b[0].size != b[1].size || compare_eigenvalues(e[0], e[1], convention) != Ordering::Greater
            })
    }

    pub fn two_by_two(&self, b: Block) -> [[f64; 2]; 2] {
        let s = b.start;
        [[self.t[(s, s)], self.t[(s, s + 1)]], [self.t[(s + 1, s)], self.t[(s + 1, s + 1)]]]
    }
}

fn block_eigenvalue(t: &DMatrix<f64>, b: Block) -> Complex<f64> {
    let s = b.start;
    if b.size == 1 {
        return Complex::new(t[(s, s)], 0.0);
    }
    let (a, bb, c, d) = (t[(s, s)], t[(s, s + 1)], t[(s + 1, s)], t[(s + 1, s + 1)]);
    let half = 0.5 * (a + d);
    let disc = 0.25 * (a - d) * (a - d) + bb * c;
    if disc >= 0.0 {
        Complex::new(half + disc.sqrt(), 0.0)
    } else {
        Complex::new(half, (-disc).sqrt())
    }
}

/// Order relation used for sorting blocks: `Less` means `x` goes first.
pub fn compare_eigenvalues(x: Complex<f64>, y: Complex<f64>, convention: OrderConvention) -> Ordering {
    let scale = 1.0_f64.max(x.norm()).max(y.norm());
    let tol = ORDER_TOL * scale;
    let (mx, my) = (x.norm(), y.norm());
    if (mx - my).abs() > tol {
        let ord = mx.total_cmp(&my);
        return match convention {
            OrderConvention::Ascending => ord,
            OrderConvention::Descending => ord.reverse(),
        };
    }
    if (x.re - y.re).abs() > tol {
        return y.re.total_cmp(&x.re);
    }
    if (x.im.abs() - y.im.abs()).abs() > tol {
        return x.im.abs().total_cmp(&y.im.abs());
    }
    Ordering::Equal
}

/// `T <- WᵀTW` on rows/columns `s..s+k` and `U <- UW`.
fn block_similarity(t: &mut DMatrix<f64>, u: &mut DMatrix<f64>, s: usize, w: &DMatrix<f64>) {
    let k = w.nrows();
    let rows = w.transpose() * t.rows(s, k);
    t.rows_mut(s, k).copy_from(&rows);
    let cols = t.columns(s, k) * w;
    t.columns_mut(s, k).copy_from(&cols);
    let ucols = u.columns(s, k) * w;
    u.columns_mut(s, k).copy_from(&ucols);
}

/// `T <- GᵀTG` and `U <- UG` for a rotation in plane `(p, q)`.
fn rotation_similarity(t: &mut DMatrix<f64>, u: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    rotate_rows(t, p, q, c, s);
    rotate_cols(t, p, q, c, s);
    rotate_cols(u, p, q, c, s);
}

fn zero_below_blocks(t: &mut DMatrix<f64>, blocks: &[Block]) {
    let n = t.nrows();
    for b in blocks {
        for j in b.start..b.start + b.size {
            for i in b.start + b.size..n {
                t[(i, j)] = 0.0;
            }
        }
    }
}

/// Real Schur decomposition with 2×2 blocks moved ahead of 1×1 blocks.
pub fn real_schur(a: &DMatrix<f64>) -> Result<SchurForm> {
    let n = a.nrows();
    if a.ncols() != n || n == 0 {
        return Err(Error::Dimension(format!("matrix is {}x{}, expected square and nonempty", a.nrows(), a.ncols())));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("matrix contains non-finite entries".into()));
    }
    let (mut u, mut t) = crate::linalg::schur_unpacked(a)?;

    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        let coupled = i + 1 < n && {
            let sub = t[(i + 1, i)].abs();
            sub > f64::EPSILON * (t[(i, i)].abs() + t[(i + 1, i + 1)].abs()) && sub > f64::MIN_POSITIVE
        };
        if !coupled {
            if i + 1 < n {
                t[(i + 1, i)] = 0.0;
            }
            blocks.push(Block { start: i, size: 1 });
            i += 1;
            continue;
        }
        let (p, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
        let disc = 0.25 * (p - d) * (p - d) + b * c;
        if disc >= 0.0 {
            // real pair left coupled by the iteration: deflate by an eigenvector rotation
            let lambda = 0.5 * (p + d) + if p >= d { disc.sqrt() } else { -disc.sqrt() };
            let v1 = (b, lambda - p);
            let v2 = (lambda - d, c);
            let (x, y) = if v1.0.hypot(v1.1) >= v2.0.hypot(v2.1) { v1 } else { v2 };
            let r = x.hypot(y);
            rotation_similarity(&mut t, &mut u, i, i + 1, x / r, -y / r);
            t[(i + 1, i)] = 0.0;
            blocks.push(Block { start: i, size: 1 });
            blocks.push(Block { start: i + 1, size: 1 });
        } else {
            blocks.push(Block { start: i, size: 2 });
        }
        i += 2;
    }
    zero_below_blocks(&mut t, &blocks);

    let mut sf = SchurForm { u, t, blocks, mode: BlockMode::Raw };
    loop {
        let pos = sf.blocks.windows(2).position(|w| w[0].size == 1 && w[1].size == 2);
        match pos {
            Some(k) => swap_adjacent(&mut sf, k)?,
            None => break,
        }
    }
    Ok(sf)
}

/// Exchange blocks `k` and `k+1` by an orthogonal similarity.
pub fn swap_adjacent(sf: &mut SchurForm, k: usize) -> Result<()> {
    if k + 1 >= sf.blocks.len() {
        return Err(Error::Index(format!("no block after block {k}")));
    }
    let (b1, b2) = (sf.blocks[k], sf.blocks[k + 1]);
    let (s, p, q) = (b1.start, b1.size, b2.size);
    let a11 = sf.t.view((s, s), (p, p)).into_owned();
    let a12 = sf.t.view((s, s + p), (p, q)).into_owned();
    let a22 = sf.t.view((s + p, s + p), (q, q)).into_owned();

    // A11 X − X A22 = A12 in column-major vec form
    let mut kron = DMatrix::<f64>::zeros(p * q, p * q);
    for j in 0..q {
        for i in 0..p {
            let row = j * p + i;
            for l in 0..p {
                kron[(row, j * p + l)] += a11[(i, l)];
            }
            for l in 0..q {
                kron[(row, l * p + i)] -= a22[(l, j)];
            }
        }
    }
    let rhs = DVector::from_column_slice(a12.as_slice());
    let x = kron.lu().solve(&rhs).ok_or_else(|| Error::SwapFailed(format!("blocks at {s} share an eigenvalue")))?;
    let x = DMatrix::from_column_slice(p, q, x.as_slice());

    // columns [−X; I_q] span the invariant subspace of A22's eigenvalues
    let m = p + q;
    let mut basis = DMatrix::<f64>::zeros(m, m);
    basis.view_mut((0, 0), (p, q)).copy_from(&(-&x));
    basis.view_mut((p, 0), (q, q)).fill_with_identity();
    basis.view_mut((0, q), (p, p)).fill_with_identity();
    let w = basis.qr().q();

    let local_norm = sf.t.view((s, s), (m, m)).norm();
    block_similarity(&mut sf.t, &mut sf.u, s, &w);
    let spill = sf.t.view((s + q, s), (p, q)).norm();
    if !spill.is_finite() || spill > SWAP_TOL * local_norm.max(1.0) {
        return Err(Error::SwapFailed(format!("exchange at row {s} left {spill:.3e} below the diagonal")));
    }
    sf.t.view_mut((s + q, s), (p, q)).fill(0.0);
    sf.blocks[k] = Block { start: s, size: q };
    sf.blocks[k + 1] = Block { start: s + q, size: p };
    let blocks = sf.blocks.clone();
    zero_below_blocks(&mut sf.t, &blocks);
    Ok(())
}

/// Reorder blocks inside the complex and the real group.
///
/// Ties in modulus are broken by larger real part first, then by smaller
/// `|Im λ|`.
pub fn order_blocks(sf: &SchurForm, convention: OrderConvention) -> Result<SchurForm> {
    let mut out = sf.clone();
    let nb = out.blocks.len();
    loop {
        let mut swapped = false;
        for k in 0..nb.saturating_sub(1) {
            if out.blocks[k].size != out.blocks[k + 1].size {
                continue;
            }
            let x = block_eigenvalue(&out.t, out.blocks[k]);
            let y = block_eigenvalue(&out.t, out.blocks[k + 1]);
            if compare_eigenvalues(x, y, convention) == Ordering::Greater {
                swap_adjacent(&mut out, k)?;
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
    if out.mode != BlockMode::Raw {
        out = match out.mode {
            BlockMode::Qd => standardize_qd(&out)?,
            BlockMode::LambdaR => standardize_lambda_r(&out)?,
            BlockMode::Raw => out,
        };
    }
    Ok(out)
}

/// Standardize every 2×2 block to equal diagonal entries with
/// `z12 z21 < 0` and `z12 + z21 ≥ 0`.
///
/// A block of the form `r·rotation` is invariant under rotations; for it
/// the sign is fixed by `z12 > 0`.
pub fn standardize_lambda_r(sf: &SchurForm) -> Result<SchurForm> {
    let mut out = sf.clone();
    for b in sf.blocks.iter().filter(|b| b.size == 2) {
        let s = b.start;
        let (a, bb, c, d) = (out.t[(s, s)], out.t[(s, s + 1)], out.t[(s + 1, s)], out.t[(s + 1, s + 1)]);
        let phi = 0.5 * (d - a).atan2(bb + c);
        let (sn, cs) = phi.sin_cos();
        rotation_similarity(&mut out.t, &mut out.u, s, s + 1, cs, -sn);
        let (z12, z21) = (out.t[(s, s + 1)], out.t[(s + 1, s)]);
        if z12 + z21 < 0.0 || (z12 + z21 == 0.0 && z12 < 0.0) {
            rotation_similarity(&mut out.t, &mut out.u, s, s + 1, 0.0, 1.0);
        }
        let mean = 0.5 * (out.t[(s, s)] + out.t[(s + 1, s + 1)]);
        out.t[(s, s)] = mean;
        out.t[(s + 1, s + 1)] = mean;
        if out.t[(s, s + 1)] * out.t[(s + 1, s)] >= 0.0 {
            return Err(Error::Form(format!("block at row {s} has real eigenvalues")));
        }
    }
    out.mode = BlockMode::LambdaR;
    Ok(out)
}

/// A standardized 2×2 block `Ẑ = WᵀZW`.
///
/// In qd form `Ẑ = QD` with `D = diag(d1, d2)`, `d1 ≥ d2 > 0`, `s ≥ 0`,
/// and `Q = [[c, s], [−s, c]]` when `det Z > 0`. A matrix with negative
/// determinant gets the reflection `Q = [[c, s], [s, −c]]` instead.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoByTwoBlock {
    pub z: [[f64; 2]; 2],
    pub w: [[f64; 2]; 2],
    pub c: f64,
    pub s: f64,
    pub d1: f64,
    pub d2: f64,
    pub reflection: bool,
}

impl TwoByTwoBlock {
    /// Largest violation of the qd conditions.
    pub fn qd_residual(&self) -> f64 {
        let z = &self.z;
        let orth = (z[0][0] * z[0][1] + z[1][0] * z[1][1]).abs();
        let n1 = (z[0][0].hypot(z[1][0]) - self.d1).abs();
        let n2 = (z[0][1].hypot(z[1][1]) - self.d2).abs();
        let sgn = if self.reflection { -1.0 } else { 1.0 };
        let q = (z[1][0] + sgn * self.s * self.d1).abs().max((z[1][1] - sgn * self.c * self.d2).abs());
        let signs = (-z[0][1]).max(0.0).max(-self.s).max(self.d2 - self.d1).max(0.0);
        orth.max(n1).max(n2).max(q).max(signs)
    }
}

fn mat2(m: &[[f64; 2]; 2]) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]])
}

fn arr2(m: &DMatrix<f64>) -> [[f64; 2]; 2] {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

/// The unique qd representative of a nonsingular 2×2 matrix.
///
/// `W` holds the right singular vectors of `Z`, ordered by decreasing
/// singular value, with the sign of its second column chosen so `ẑ12 ≥ 0`.
/// When `det Z < 0` and the singular values coincide, `Z` is a scaled
/// symmetric reflection and `W` diagonalizes it instead.
pub fn standardize_qd_block(z: [[f64; 2]; 2]) -> Result<TwoByTwoBlock> {
    let zm = mat2(&z);
    if zm.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("block contains non-finite entries".into()));
    }
    let det = z[0][0] * z[1][1] - z[0][1] * z[1][0];
    let scale = zm.norm();
    if scale == 0.0 || det.abs() <= f64::EPSILON * scale * scale {
        return Err(Error::Singular("2x2 block is singular".into()));
    }
    let reflection = det < 0.0;
    // right singular vectors of Z diagonalize ZᵀZ = [[p, r], [r, q]]
    let ztz = zm.transpose() * &zm;
    let (p, r, q) = (ztz[(0, 0)], ztz[(0, 1)], ztz[(1, 1)]);
    let gap = (p - q).hypot(2.0 * r);
    let phi = if reflection && gap <= 1e-14 * (p + q) {
        // Z = ρ·(symmetric reflection); rotate its +ρ eigenvector onto e1
        let sym = 0.5 * (z[0][1] + z[1][0]);
        0.5 * (2.0 * sym).atan2(z[0][0] - z[1][1])
    } else {
        0.5 * (2.0 * r).atan2(p - q)
    };
    let (sn, cs) = phi.sin_cos();
    let mut w = DMatrix::from_row_slice(2, 2, &[cs, -sn, sn, cs]);
    let mut zh = w.transpose() * &zm * &w;
    let col = |m: &DMatrix<f64>, j: usize| m[(0, j)].hypot(m[(1, j)]);
    if col(&zh, 0) < col(&zh, 1) {
        w = &w * DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        zh = w.transpose() * &zm * &w;
    }
    if zh[(0, 1)] < 0.0 {
        w.column_mut(1).neg_mut();
        zh = w.transpose() * &zm * &w;
    }
    let d1 = col(&zh, 0);
    let d2 = col(&zh, 1);
    let s = zh[(0, 1)] / d2;
    let c = zh[(0, 0)] / d1;
    Ok(TwoByTwoBlock { z: arr2(&zh), w: arr2(&w), c, s, d1, d2, reflection })
}

/// Put every 2×2 block of `sf` in qd form.
pub fn standardize_qd(sf: &SchurForm) -> Result<SchurForm> {
    let mut out = sf.clone();
    for b in sf.blocks.iter().filter(|b| b.size == 2) {
        let blk = standardize_qd_block(out.two_by_two(*b))?;
        block_similarity(&mut out.t, &mut out.u, b.start, &mat2(&blk.w));
        let s = b.start;
        for i in 0..2 {
            for j in 0..2 {
                out.t[(s + i, s + j)] = blk.z[i][j];
            }
        }
    }
    out.mode = BlockMode::Qd;
    Ok(out)
}

/// Output-normal pair in ordered Schur form with qd blocks.
///
/// The returned `SchurForm` carries `U` relative to the output-normal
/// realization and `T` equal to the returned `A`. Column signs of `C` are
/// fixed so the first entry of each block's leading column that is not
/// negligible is positive; this removes the remaining diagonal freedom.
pub fn schur_on(pair: &OutputPair, convention: OrderConvention) -> Result<(OutputPair, SchurForm)> {
    let (on, _) = to_output_normal(pair)?;
    let sf = real_schur(on.a())?;
    let sf = order_blocks(&sf, convention)?;
    let mut sf = standardize_qd(&sf)?;
    let mut c = on.c() * &sf.u;
    let cnorm = c.norm().max(f64::MIN_POSITIVE);
    for b in sf.blocks.clone() {
        let lead = (b.start..b.start + b.size)
            .flat_map(|j| (0..c.nrows()).map(move |i| (i, j)))
            .map(|(i, j)| c[(i, j)])
            .find(|x| x.abs() > 1e-8 * cnorm)
            .unwrap_or(0.0);
        if lead < 0.0 {
            for j in b.start..b.start + b.size {
                c.column_mut(j).neg_mut();
                sf.u.column_mut(j).neg_mut();
                sf.t.column_mut(j).neg_mut();
                sf.t.row_mut(j).neg_mut();
            }
        }
    }
    let out = OutputPair::new(sf.t.clone(), c)?;
    Ok((out, sf))
}

/// Off-block mass of a similarity between two ordered Schur forms.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockStructureReport {
    /// Index ranges `[start, end)` of eigenvalue groups.
    pub groups: Vec<(usize, usize)>,
    pub max_off_block: f64,
}

/// Group the blocks of `a1` by eigenvalue (separation `1e−4`) and report
/// the largest entry of `u` outside the diagonal group blocks.
pub fn block_diagonal_structure_check(
    a1: &SchurForm,
    a2: &SchurForm,
    u: &DMatrix<f64>,
) -> Result<BlockStructureReport> {
    let n = a1.n();
    if a2.n() != n || u.shape() != (n, n) {
        return Err(Error::Dimension("Schur forms and similarity differ in size".into()));
    }
    let ev = a1.block_eigenvalues();
    let mut groups: Vec<(usize, usize)> = Vec::new();
    for (k, b) in a1.blocks.iter().enumerate() {
        let joins = k > 0 && (ev[k] - ev[k - 1]).norm() < 1e-4 && a1.blocks[k - 1].size == b.size;
        if joins {
            groups.last_mut().unwrap().1 = b.start + b.size;
        } else {
            groups.push((b.start, b.start + b.size));
        }
    }
    let group_of = |i: usize| groups.iter().position(|&(s, e)| i >= s && i < e).unwrap();
    let mut max_off_block = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            if group_of(i) != group_of(j) {
                max_off_block = max_off_block.max(u[(i, j)].abs());
            }
        }
    }
    Ok(BlockStructureReport { groups, max_off_block })
}
