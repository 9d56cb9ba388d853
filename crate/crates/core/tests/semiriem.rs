use almost_soliton::semiriem::{inner, project_tangent, validate_conformal_matrix, AmbientSpace, ConformalMatrix, Signature};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn signature() -> impl Strategy<Value = Signature> {
    (2usize..=6)
        .prop_flat_map(|m| (Just(m), 0..=m))
        .prop_map(|(m, index)| Signature::new((0..m).map(|i| if i < index { -1.0 } else { 1.0 }).collect()).unwrap())
}

fn sig_and_pair() -> impl Strategy<Value = (Signature, Vec<f64>, Vec<f64>)> {
    signature().prop_flat_map(|s| {
        let m = s.dim();
        (
            Just(s),
            prop::collection::vec(-10.0f64..10.0, m),
            prop::collection::vec(-10.0f64..10.0, m),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn inner_is_symmetric((sig, u, v) in sig_and_pair()) {
        prop_assert_eq!(inner(&sig, &u, &v).unwrap(), inner(&sig, &v, &u).unwrap());
    }
}

/// A uniformly drawn point of the unit sphere or the upper unit hyperboloid.
fn quadric_point(rng: &mut ChaCha8Rng, ambient: &AmbientSpace) -> Vec<f64> {
    let m = ambient.container_dim();
    let tail: Vec<f64> = (0..m - 1).map(|_| rng.gen_range(-2.0..2.0)).collect();
    match ambient.quadric_sign() {
        Some(s) if s < 0.0 => {
            let r2: f64 = tail.iter().map(|t| t * t).sum();
            let mut x = vec![(1.0 + r2).sqrt()];
            x.extend(tail);
            x
        }
        _ => {
            let mut x = tail;
            x.push(rng.gen_range(-2.0..2.0));
            let r = x.iter().map(|t| t * t).sum::<f64>().sqrt();
            x.iter().map(|t| t / r).collect()
        }
    }
}

#[test]
fn projection_is_idempotent_and_tangent() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for ambient in [
        AmbientSpace::quadric(Signature::euclidean(4), 1.0).unwrap(),
        AmbientSpace::quadric(Signature::lorentz(4), -1.0).unwrap(),
    ] {
        let sig = &ambient.signature;
        for _ in 0..100 {
            let x = quadric_point(&mut rng, &ambient);
            let w: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let p = project_tangent(sig, &x, &w).unwrap();
            let pp = project_tangent(sig, &x, p.as_slice()).unwrap();
            assert!((&pp - &p).amax() <= 1e-12);
            assert!(inner(sig, p.as_slice(), &x).unwrap().abs() <= 1e-12);
        }
    }
}

#[test]
fn projection_rejects_points_off_the_quadric() {
    let sig = Signature::euclidean(3);
    assert!(project_tangent(&sig, &[1.0, 1.0, 0.0], &[0.0, 0.0, 1.0]).is_err());
}

/// Random B that is either a combination of elementary generators or that
/// plus a random perturbation.
fn random_matrix(rng: &mut ChaCha8Rng, sig: &Signature, perturb: bool) -> DMatrix<f64> {
    let m = sig.dim();
    let mut b = DMatrix::zeros(m, m);
    for j in 0..m {
        for k in (j + 1)..m {
            b += ConformalMatrix::elementary(sig.clone(), j, k, rng.gen_range(-2.0..2.0))
                .unwrap()
                .matrix();
        }
    }
    if perturb {
        let (j, k) = (rng.gen_range(0..m), rng.gen_range(0..m));
        b[(j, k)] += rng.gen_range(0.1..1.0);
    }
    b
}

/// Independent check: inner(Bu, v) + inner(u, Bv) vanishes on 100 random pairs.
fn isometry_on_probes(rng: &mut ChaCha8Rng, sig: &Signature, b: &DMatrix<f64>) -> bool {
    let m = sig.dim();
    (0..100).all(|_| {
        let u = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
        let v = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
        let bu = b * &u;
        let bv = b * &v;
        let s = inner(sig, bu.as_slice(), v.as_slice()).unwrap() + inner(sig, u.as_slice(), bv.as_slice()).unwrap();
        s.abs() <= 1e-12
    })
}

#[test]
fn matrix_validation_matches_the_isometry_condition() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for eps in [vec![1.0, 1.0, 1.0], vec![-1.0, 1.0, 1.0, 1.0], vec![-1.0, -1.0, 1.0, 1.0]] {
        let sig = Signature::new(eps).unwrap();
        for trial in 0..40 {
            let b = random_matrix(&mut rng, &sig, trial % 2 == 1);
            let accepted = validate_conformal_matrix(&sig, &b).unwrap().is_valid();
            assert_eq!(accepted, isometry_on_probes(&mut rng, &sig, &b), "{b}");
        }
    }
}

#[test]
fn violations_name_the_offending_pairs() {
    let sig = Signature::euclidean(3);
    let mut b = DMatrix::zeros(3, 3);
    b[(0, 1)] = 1.0;
    b[(1, 0)] = 1.0;
    let check = validate_conformal_matrix(&sig, &b).unwrap();
    assert_eq!(check.violations.iter().map(|v| (v.0, v.1)).collect::<Vec<_>>(), vec![(0, 1)]);
    let mut d = DMatrix::zeros(3, 3);
    d[(2, 2)] = 1.0;
    let check = validate_conformal_matrix(&sig, &d).unwrap();
    assert_eq!((check.violations[0].0, check.violations[0].1), (2, 2));
}
