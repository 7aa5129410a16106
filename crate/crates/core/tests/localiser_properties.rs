use localiser_lab::localiser::{
    build_localiser, congruence_check, half_signature_index, signature, signature_banded,
    spectral_decompose, HalfSignatureOptions, LocaliserMatrix,
};
use localiser_lab::models::{circle_model, custom_model, fredholm_index_oracle};
use localiser_lab::operators::{BandedSymmetric, CMatrix, HermitianMatrix, C64};
use localiser_lab::pairing::{build_frame, build_model_pair, default_functions};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let a = CMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    (&a + a.adjoint()) * C64::new(0.5, 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn sylvester_invariance(seed in any::<u64>(), n in 2_usize..24) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = HermitianMatrix::new(random_hermitian(&mut rng, n)).unwrap();
        let s = CMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { 3.0 } else { 0.0 };
            C64::new(d + rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let base = signature(&h, None);
        prop_assume!(base.is_ok());
        let cong = s.adjoint() * h.matrix() * &s;
        let cong = HermitianMatrix::hermitian_part(&cong).unwrap();
        if let Ok(r) = signature(&cong, None) {
            prop_assert_eq!(r.sig, base.unwrap().sig);
        }
    }

    #[test]
    fn banded_and_dense_inertia_agree(seed in any::<u64>(), n in 1_usize..300, bw in 0_usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = BandedSymmetric::from_fn(n, bw, |_, _| rng.gen_range(-1.0..1.0));
        let dense = signature(&b.to_hermitian().unwrap(), None);
        let banded = signature_banded(&b, None);
        if let (Ok(d), Ok(s)) = (dense, banded) {
            prop_assert_eq!((d.n_pos, d.n_neg), (s.n_pos, s.n_neg));
            prop_assert!(s.gap <= d.gap * (1.0 + 1e-12));
        }
    }
}

#[test]
fn inertia_paths_agree_on_large_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (n, bw) in [(2000, 3), (1500, 9), (500, 499)] {
        let b = BandedSymmetric::from_fn(n, bw, |_, _| rng.gen_range(-1.0..1.0));
        let d = signature(&b.to_hermitian().unwrap(), None).unwrap();
        let s = signature_banded(&b, None).unwrap();
        assert_eq!((d.n_pos, d.n_neg), (s.n_pos, s.n_neg), "n = {n}, bw = {bw}");
    }
}

#[test]
fn random_complex_hermitian_through_the_band_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = HermitianMatrix::new(random_hermitian(&mut rng, 500)).unwrap();
    let d = signature(&h, None).unwrap();
    let (b, mult) = BandedSymmetric::from_hermitian(&h);
    assert_eq!(mult, 2);
    let s = signature_banded(&b, None).unwrap();
    assert_eq!((2 * d.n_pos, 2 * d.n_neg), (s.n_pos, s.n_neg));
}

#[test]
fn half_signature_equals_oracle_and_congruence_holds() {
    let (t, lambda) = (20.0, 200.5);
    let mut by_k = Vec::new();
    for k in -3_i64..=3 {
        let m = circle_model(256, k).unwrap();
        let opts = HalfSignatureOptions {
            t: Some(t),
            lambda: Some(lambda),
            ..Default::default()
        };
        let r = half_signature_index(&m, 0.1, 0.1, &opts).unwrap();
        let oracle = fredholm_index_oracle(&m).unwrap().index;
        assert_eq!(r.index, oracle, "k = {k}");

        let sd = spectral_decompose(&m, lambda).unwrap();
        let pair = build_model_pair(&build_frame(&m, t, default_functions()).unwrap()).unwrap();
        let mut loc = build_localiser(&m, 1.0 / t, lambda).unwrap();
        let c = congruence_check(&pair, &sd, &mut loc).unwrap();
        assert!(c.equal && c.residual <= c.tolerance, "k = {k}: {c:?}");
        by_k.push((k, r.index));
    }
    for &(k, i) in &by_k {
        let (_, j) = by_k.iter().find(|(kk, _)| *kk == -k).unwrap();
        assert_eq!(i, -j);
    }
}

fn as_dense(m: &LocaliserMatrix) -> DMatrix<f64> {
    match m {
        LocaliserMatrix::Banded(b) => b.to_dense(),
        LocaliserMatrix::Dense(h) => h.matrix().map(|z| z.re),
    }
}

#[test]
fn localiser_is_independent_of_truncation_past_the_edge_guard() {
    for k in [-2_i64, 1, 3] {
        let lambda = 40.5;
        let n = (lambda as usize) + k.unsigned_abs() as usize + 1;
        let a = build_localiser(&circle_model(n, k).unwrap(), 0.1, lambda).unwrap();
        let b = build_localiser(&circle_model(n + 16, k).unwrap(), 0.1, lambda).unwrap();
        assert_eq!(as_dense(&a.matrix), as_dense(&b.matrix));

        let dense = |n: usize| {
            let m = circle_model(n, k).unwrap();
            let c = custom_model(m.dirac().to_vec(), m.unitary_matrix()).unwrap();
            build_localiser(&c, 0.1, lambda).unwrap()
        };
        assert_eq!(as_dense(&dense(n).matrix), as_dense(&dense(n + 16).matrix));
        assert_eq!(as_dense(&dense(n).matrix), as_dense(&a.matrix));
    }
}
