#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use orthopair::hoon::{families_for, HoonParams};
use orthopair::io::random_system;
use orthopair::otson::OtsonParams;
use orthopair::rotations::{OrpFamily, OrpKind, OrpParam};
use orthopair::OutputPair;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let qr = normal(rng, n, n).qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Random angles for `family` with the block's `μ` at least `floor`.
pub fn random_stage(rng: &mut ChaCha8Rng, family: OrpFamily, floor: f64) -> OrpParam {
    let target = family.target();
    loop {
        let thetas: Vec<f64> = if family.kind() == OrpKind::Householder {
            let mut v: Vec<f64> = (0..family.n_params()).map(|_| rng.random_range(-0.6..0.6)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.95 {
                v.iter_mut().for_each(|x| *x *= 0.95 / norm);
            }
            v
        } else {
            (0..family.n_params())
                .map(|i| {
                    let wide = family.angle_in_domain(i, 3.0);
                    let lim = if wide { PI } else { FRAC_PI_2 };
                    rng.random_range(-lim * 0.98..lim * 0.98)
                })
                .collect()
        };
        let p = OrpParam::new(family, thetas).unwrap();
        if p.matrix()[(target, target)] >= floor {
            return p;
        }
    }
}

pub fn strict_otson(seed: u64, n: usize, d: usize, family: OrpFamily) -> OtsonParams {
    strict_otson_floor(seed, n, d, family, 0.05)
}

/// Strict OTSON parameters with every `μ_k ≥ floor`.
pub fn strict_otson_floor(seed: u64, n: usize, d: usize, family: OrpFamily, floor: f64) -> OtsonParams {
    let mut r = rng(seed);
    let stages = (0..n).map(|_| random_stage(&mut r, family, floor)).collect();
    OtsonParams::new(n, d, family, stages).unwrap()
}

pub fn strict_hoon(seed: u64, n: usize, d: usize, kind: OrpKind) -> HoonParams {
    strict_hoon_floor(seed, n, d, kind, 0.05)
}

/// Strict HOON parameters with every stage `μ_k ≥ floor`.
pub fn strict_hoon_floor(seed: u64, n: usize, d: usize, kind: OrpKind, floor: f64) -> HoonParams {
    let mut r = rng(seed);
    let (fam, last_fam) = families_for(kind, d).unwrap();
    let stages = (0..n - 1).map(|_| random_stage(&mut r, fam, floor)).collect();
    let last = random_stage(&mut r, last_fam, f64::NEG_INFINITY);
    let gamma = r.random_range(0.05..0.95);
    let sign = if d == 1 && r.random_bool(0.5) { -1.0 } else { 1.0 };
    HoonParams::new(n, d, gamma, stages, last, sign).unwrap()
}

/// Random stable observable pair.
pub fn random_pair(seed: u64, n: usize, d: usize, rho: f64) -> OutputPair {
    random_system(n, d, 1, rho, seed).unwrap().pair().unwrap()
}

pub fn random_model_b(seed: u64, n: usize, d: usize, m: usize) -> (OutputPair, DMatrix<f64>) {
    let mf = random_system(n, d, m, 0.8, seed).unwrap();
    (mf.pair().unwrap(), mf.b_matrix().unwrap().unwrap())
}

pub fn max_diff(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}
