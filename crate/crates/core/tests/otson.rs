mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;

use common::{max_diff, random_orthogonal, rng, strict_otson};
use orthopair::canonical::{classify_as, standardize, Form};
use orthopair::otson::*;
use orthopair::rotations::{apply_signature, OrpFamily, OrpParam, SignatureMatrix};

fn lower_residual(q: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..q.nrows() {
        for j in i + 1..q.ncols() {
            worst = worst.max(q[(i, j)].abs());
        }
    }
    worst
}

#[test]
fn factor_recovers_strict_8x8() {
    let p = strict_otson(21, 8, 2, OrpFamily::q1(2));
    let pair = otson_reconstruct(&p).unwrap();
    let back = otson_factor(&pair, OrpFamily::q1(2)).unwrap();
    assert!(max_diff(&back.flat(), &p.flat()) < 1e-10);
}

#[test]
fn dense_product_matches_recurrence() {
    for (seed, fam) in [(1, OrpFamily::q1(3)), (2, OrpFamily::q2(3))] {
        let p = strict_otson(seed, 6, 3, fam);
        let stack = otson_stack(&p).unwrap();
        let dense = otson_dense_product(&p);
        assert!((stack - dense).amax() < 1e-12);
    }
}

#[test]
fn bottom_rows_match() {
    for (n, d) in [(6, 2), (4, 2), (3, 1), (9, 4)] {
        let p = strict_otson(n as u64 * 7 + d as u64, n, d, OrpFamily::q1(d));
        let a = otson_reconstruct(&p).unwrap().a().clone();
        let rows = otson_bottom_rows(&p).unwrap();
        let tail = a.rows(n - d - 2, d + 2);
        assert!((rows - tail).amax() < 1e-12, "n={n} d={d}");
    }
    let z = OtsonParams::zero(5, 2, OrpFamily::q1(2)).unwrap();
    let a = otson_reconstruct(&z).unwrap().a().clone();
    assert_eq!(otson_bottom_rows(&z).unwrap(), a.rows(1, 4).into_owned());
}

#[test]
fn boundary_is_flagged() {
    let fam = OrpFamily::q1(2);
    // μ = cos θ₁ cos θ₂ for Q1, so θ₂ = π/2 gives μ = 0
    let stages = vec![
        OrpParam::identity(fam),
        OrpParam::new(fam, vec![0.3, std::f64::consts::FRAC_PI_2]).unwrap(),
        OrpParam::identity(fam),
    ];
    let p = OtsonParams::new(3, 2, fam, stages).unwrap();
    assert!(p.mus()[1].abs() < 1e-15);
    assert_eq!(otson_domain_check(&p, BOUNDARY_TOL), DomainStatus::Boundary);
    assert_eq!(otson_domain_check(&strict_otson(5, 4, 2, fam), BOUNDARY_TOL), DomainStatus::Strict);
}

#[test]
fn factor_rejects_non_triangular() {
    let p = strict_otson(3, 4, 1, OrpFamily::q1(1));
    let pair = otson_reconstruct(&p).unwrap();
    let u = random_orthogonal(&mut rng(9), 4);
    let moved = pair.orthogonal_conjugate(&u).unwrap();
    assert!(otson_factor(&moved, OrpFamily::q1(1)).is_err());
}

#[test]
fn gamma_state_blocks_stay_orthonormal() {
    let p = strict_otson(8, 7, 3, OrpFamily::q2(3));
    let mut st = GammaState::initial(3);
    for s in p.stages() {
        st = st.step(s).unwrap();
        assert!(st.column_residual() < 1e-11);
        for i in 0..st.k() {
            for j in i + 1..st.k() {
                assert_eq!(st.l[(i, j)], 0.0);
            }
        }
    }
    let stack = otson_stack(&p).unwrap();
    assert!((stack.rows(0, 7) - &st.l).amax() < 1e-13);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip_q1_q2(seed in any::<u64>(), n in 1usize..12, d in 1usize..5, q2 in any::<bool>()) {
        let fam = if q2 { OrpFamily::q2(d) } else { OrpFamily::q1(d) };
        let p = strict_otson(seed, n, d, fam);
        let pair = otson_reconstruct(&p).unwrap();
        prop_assert!(pair.on_residual() < 1e-11);
        prop_assert!(lower_residual(&pair.stack()) < 1e-12);
        let back = otson_factor(&pair, fam).unwrap();
        prop_assert!(max_diff(&back.flat(), &p.flat()) < 1e-10);
        let again = otson_reconstruct(&back).unwrap();
        prop_assert!((again.stack() - pair.stack()).amax() < 1e-10);
    }

    #[test]
    fn round_trip_householder(seed in any::<u64>(), n in 1usize..10, d in 1usize..5) {
        let fam = OrpFamily::householder(d + 1, 0).unwrap();
        let p = strict_otson(seed, n, d, fam);
        let pair = otson_reconstruct(&p).unwrap();
        let back = otson_factor(&pair, fam).unwrap();
        prop_assert!(max_diff(&back.flat(), &p.flat()) < 1e-10);
    }

    #[test]
    fn signature_orbit_collapses(seed in any::<u64>(), n in 2usize..9, d in 1usize..4) {
        let fam = OrpFamily::q1(d);
        let p = strict_otson(seed, n, d, fam);
        let pair = otson_reconstruct(&p).unwrap();
        let signs: Vec<f64> = (0..n).map(|i| if (seed >> (i % 64)) & 1 == 1 { -1.0 } else { 1.0 }).collect();
        let flipped = apply_signature(&pair, &SignatureMatrix::new(signs).unwrap()).unwrap();
        let (std_pair, _) = standardize(&flipped, Form::Ots).unwrap();
        prop_assert!(classify_as(&std_pair, Form::Ots, 1e-10).strict);
        let back = otson_factor(&std_pair, fam).unwrap();
        prop_assert!(max_diff(&back.flat(), &p.flat()) < 1e-10);
    }
}
