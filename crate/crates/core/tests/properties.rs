use std::f64::consts::PI;

use kaehler_core::bending::*;
use kaehler_core::gausspar::*;
use kaehler_core::geometry::point_frame;
use kaehler_core::weierstrass::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn m4r5_point() -> impl Strategy<Value = Vec<f64>> {
    let r = 0.5 / 2f64.sqrt() - 0.01;
    (-r..r, -r..r, -0.29..0.29f64, -0.29..0.29f64).prop_map(|(a, b, c, d)| vec![a, b, c, d])
}

fn killing() -> impl Strategy<Value = TrivialData> {
    (prop::collection::vec(-1.0..1.0f64, 10), prop::collection::vec(-1.0..1.0f64, 5)).prop_map(|(upper, w)| {
        let mut d = DMatrix::zeros(5, 5);
        let mut k = 0;
        for i in 0..5 {
            for j in i + 1..5 {
                d[(i, j)] = upper[k];
                d[(j, i)] = -upper[k];
                k += 1;
            }
        }
        TrivialData::new(d, DVector::from_vec(w)).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn b_is_linear_in_the_bending(p in m4r5_point(), kd in killing(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let s = WeierstrassSurface::new(m4r5_seed()).unwrap();
        let f = s.f();
        let t1 = BendingField::conjugate(&s);
        let t2 = make_trivial(&kd, &f).unwrap();
        let combo = t1.combine(a, &t2, b).unwrap();
        let lhs = b_by_formula(f.as_ref(), &combo, &p).unwrap().b;
        let rhs = b_by_formula(f.as_ref(), &t1, &p).unwrap().b * a + b_by_formula(f.as_ref(), &t2, &p).unwrap().b * b;
        let scale = b_by_formula(f.as_ref(), &t1, &p).unwrap().b.amax();
        prop_assert!((lhs - rhs).amax() < 1e-10 * scale.max(1.0));
    }

    #[test]
    fn adding_a_killing_field_keeps_the_class(kd in killing(), c in 0.5..3.0f64) {
        let s = WeierstrassSurface::new(m4r5_seed()).unwrap();
        let f = s.f();
        let fbar = BendingField::conjugate(&s);
        // enough points for their images to span R^5 affinely
        let pts = f.domain().shrunk(0.05).grid(&[3, 3, 2, 2]).unwrap();
        let t = fbar.combine(c, &make_trivial(&kd, &f).unwrap(), 1.0).unwrap();
        let dec = decompose_against_conjugate(f.as_ref(), &fbar, &t, &pts).unwrap();
        prop_assert!((dec.c - c).abs() < 1e-6);
        prop_assert!((&dec.trivial.d - &kd.d).amax() < 1e-6 && (&dec.trivial.w - &kd.w).amax() < 1e-6);
        prop_assert!(!classify_triviality(f.as_ref(), &t, &pts, TRIVIALITY_TOL).unwrap().trivial);
    }

    #[test]
    fn gauss_map_identity_holds_for_any_support(
        coeffs in prop::collection::vec((-2i32..3, -2i32..3, -1.0..1.0f64, -1.0..1.0f64), 1..5),
        offset in 1.5..3.0f64,
        x in -3.0..3.0f64, y in -3.0..3.0f64, w in -1.0..1.0f64,
    ) {
        let mut terms: Vec<(f64, f64, f64, f64)> = coeffs.into_iter().map(|(j, l, a, b)| (j as f64, l as f64, 0.2 * a, 0.2 * b)).collect();
        terms.push((0.0, 0.0, offset, 0.0));
        let g = clifford_surface();
        let gamma = trig_support(terms);
        let psi = gauss_param(&g, &gamma, &[x, y], &[w], default_gauss_step()).unwrap();
        prop_assume!(psi.regular);
        let n = psi.normal();
        let perp = &psi.gauss - &n * n.dot(&psi.gauss);
        prop_assert!(perp.norm() < GAUSS_IDENTITY_TOL);
    }

    #[test]
    fn associated_family_is_isometric(p in m4r5_point(), theta in 0.0..PI) {
        let s = WeierstrassSurface::new(m4r5_seed()).unwrap();
        let a = point_frame(&s.f().jet(&p).unwrap()).unwrap();
        let b = point_frame(&s.associated(theta).unwrap().jet(&p).unwrap()).unwrap();
        prop_assert!((&a.g - &b.g).amax() < 1e-10);
        prop_assert!((&a.normal - &b.normal).norm() < 1e-10);
        prop_assert!((&b.a - &a.a * rotated_complex_structure(2, theta)).amax() < 1e-8 * a.a.amax());
    }

    #[test]
    fn conjugate_is_a_bending_everywhere(p in m4r5_point()) {
        let s = WeierstrassSurface::new(m4r5_seed()).unwrap();
        let r = bending_residual(s.f().as_ref(), &BendingField::conjugate(&s), &[p]).unwrap();
        prop_assert!(r.pass);
    }
}
