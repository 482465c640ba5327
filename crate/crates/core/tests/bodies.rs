use std::sync::Arc;

use minksym::bodies::{
    cross_dual_norm, kt_dual_norm, BodyDescriptor, EuclideanBall, EvalMode, IntersectionBody, PolytopeHull,
    ScaledCrossPolytope, SupportBody, SymmetrizedBody,
};
use minksym::linalg::{sample_haar_basis, sample_sphere, OrthogonalBasis, Seed};

#[test]
fn cross_evaluator_matches_generic_stack() {
    for n in [2usize, 3, 5, 8] {
        let u = sample_haar_basis(n, Seed(n as u64)).unwrap();
        let f = sample_haar_basis(n, Seed(100 + n as u64)).unwrap();
        let q = Arc::new(ScaledCrossPolytope::new(n, (n as f64).sqrt(), Some(f.clone())).unwrap());
        let body = SymmetrizedBody::new(q, EvalMode::Exact)
            .unwrap()
            .symmetrize_basis(&u, true)
            .unwrap();
        for i in 0..5 {
            let x = sample_sphere(n, Seed(9).index(i)).unwrap();
            let want = body.h(x.as_slice());
            let got = cross_dual_norm(x.as_slice(), &u, &f, EvalMode::Exact).unwrap();
            assert!((got.value - want).abs() < 1e-12, "n={n}: {} vs {want}", got.value);
        }
    }
}

#[test]
fn cross_evaluator_monte_carlo_brackets_exact() {
    let n = 12;
    let u = sample_haar_basis(n, Seed(1)).unwrap();
    let e = OrthogonalBasis::identity(n);
    let x = sample_sphere(n, Seed(2)).unwrap();
    let exact = cross_dual_norm(x.as_slice(), &u, &e, EvalMode::Exact).unwrap();
    let mc = cross_dual_norm(
        x.as_slice(),
        &u,
        &e,
        EvalMode::MonteCarlo { samples: 20_000, seed: Seed(3) },
    )
    .unwrap();
    assert!((mc.value - exact.value).abs() < 1.5 * mc.half_width.max(1e-3));
}

#[test]
fn kt_evaluator_matches_generic_stack() {
    for n in [2usize, 3, 5, 7] {
        let t = (n as f64).sqrt() * 0.55;
        let u = sample_haar_basis(n, Seed(n as u64)).unwrap();
        let v = sample_haar_basis(n, Seed(50 + n as u64)).unwrap();
        let body = SymmetrizedBody::new(Arc::new(IntersectionBody::new(n, t).unwrap()), EvalMode::Exact)
            .unwrap()
            .symmetrize_basis(&u, true)
            .unwrap()
            .symmetrize_basis(&v, true)
            .unwrap();
        for i in 0..3 {
            let x = sample_sphere(n, Seed(4).index(i)).unwrap();
            let want = body.h(x.as_slice());
            let got = kt_dual_norm(x.as_slice(), t, &u, &v, EvalMode::Exact).unwrap();
            assert!((got.value - want).abs() < 1e-12, "n={n}: {} vs {want}", got.value);
            let mc = kt_dual_norm(x.as_slice(), t, &u, &v, EvalMode::MonteCarlo { samples: 4000, seed: Seed(i) })
                .unwrap();
            assert!((mc.value - want).abs() < 2.0 * mc.half_width + 1e-12);
        }
    }
}

#[test]
fn specialized_evaluators_reject_bad_input() {
    let u = OrthogonalBasis::identity(3);
    let e = OrthogonalBasis::identity(4);
    assert!(cross_dual_norm(&[1.0, 0.0, 0.0], &u, &e, EvalMode::Exact).is_err());
    assert!(kt_dual_norm(&[1.0, 0.0, 0.0], 2.0, &u, &u, EvalMode::Exact).is_err());
    let big = OrthogonalBasis::identity(22);
    assert!(cross_dual_norm(&[1.0; 22], &big, &big, EvalMode::Exact).is_err());
}

fn roundtrip(body: &dyn SupportBody) {
    let d = body.descriptor().unwrap();
    let json = d.to_json().unwrap();
    let back = BodyDescriptor::from_json(&json).unwrap();
    assert_eq!(back, d);
    assert_eq!(back.to_json().unwrap(), json);
    let rebuilt = back.build().unwrap();
    for i in 0..4 {
        let x = sample_sphere(body.dim(), Seed(77).index(i)).unwrap();
        assert_eq!(rebuilt.h(x.as_slice()).to_bits(), body.h(x.as_slice()).to_bits());
    }
}

#[test]
fn descriptors_round_trip_bit_exactly() {
    let n = 5;
    let hull = PolytopeHull::new(&[vec![0.1, 0.2, 0.3, 0.4, 0.5], vec![-1.0 / 3.0, 0.0, 1e-17, 2.0, 7.0]]).unwrap();
    roundtrip(&hull);
    roundtrip(&EuclideanBall::new(n, 0.1).unwrap());
    roundtrip(&ScaledCrossPolytope::new(n, 5f64.sqrt(), Some(sample_haar_basis(n, Seed(1)).unwrap())).unwrap());
    roundtrip(&IntersectionBody::new(n, 1.3).unwrap());
    let stack = SymmetrizedBody::new(Arc::new(hull), EvalMode::MonteCarlo { samples: 50, seed: Seed(4) })
        .unwrap()
        .symmetrize_basis(&sample_haar_basis(n, Seed(2)).unwrap(), true)
        .unwrap()
        .symmetrize(&sample_sphere(n, Seed(3)).unwrap())
        .unwrap()
        .with_exact_tail(1)
        .unwrap();
    roundtrip(&stack);
}

#[test]
fn malformed_descriptors_are_rejected() {
    assert!(BodyDescriptor::from_json(r#"{"kind":"ball","n":3}"#).is_err());
    let d = BodyDescriptor::from_json(r#"{"kind":"hull","n":3,"vertices":[[1.0,2.0]]}"#).unwrap();
    assert!(d.build().is_err());
    let d = BodyDescriptor::from_json(r#"{"kind":"cross_polytope","n":2,"scale":1.0,"frame":[[1.0,0.0],[1.0,0.0]]}"#);
    assert!(d.is_err());
}
