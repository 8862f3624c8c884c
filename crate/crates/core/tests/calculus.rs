use std::sync::Arc;

use approx::assert_relative_eq;
use minkowski_core::calculus::{
    divergence_laplacian, field_point, gradient, hessian_form, laplacian, laplacian_trace_check, volume_constants,
    ComposedField, CylinderPotential, FiniteDifferenceField, LinearField, NormPlusLinear, QuadraticField, ScalarField,
    SpherePotential, Volume,
};
use minkowski_core::duality::{dual_norm, legendre};
use minkowski_core::randers::{randers_gradient, RandersData};
use minkowski_core::{Covector, Error, MinkowskiNorm, PowerProfile, Vector};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, 3).prop_filter("regular", |v| v[0] * v[0] + v[1] * v[1] > 0.05)
}

fn catalog(norm: &MinkowskiNorm) -> Vec<Box<dyn ScalarField>> {
    vec![
        Box::new(LinearField::new(Covector::new(vec![0.3, -0.7, 1.1])).unwrap()),
        Box::new(SpherePotential::new(norm, false)),
        Box::new(SpherePotential::new(norm, true)),
        Box::new(CylinderPotential::new(norm, 2, false).unwrap()),
        Box::new(CylinderPotential::new(norm, 2, true).unwrap()),
        Box::new(NormPlusLinear::new(vec![0.1, 0.0, 0.2], 2).unwrap()),
    ]
}

#[test]
fn gradient_examples() {
    let norm = MinkowskiNorm::randers(vec![0.5, 0.0]).unwrap();
    let c = Covector::new(vec![0.4, -1.0]);
    let lin = LinearField::new(c.clone()).unwrap();
    let g1 = gradient(&norm, &lin, &Vector::new(vec![1.0, 2.0])).unwrap();
    let g2 = gradient(&norm, &lin, &Vector::new(vec![-3.0, 0.5])).unwrap();
    assert_relative_eq!(g1.as_dvector(), g2.as_dvector(), epsilon = 1e-15);
    assert_relative_eq!(legendre(&norm, &g1).unwrap().as_dvector(), c.as_dvector(), epsilon = 1e-12);

    let sphere = SpherePotential::new(&norm, false);
    let g = gradient(&norm, &sphere, &Vector::new(vec![1.0, 0.0])).unwrap();
    assert_relative_eq!(g.as_dvector(), &DVector::from_vec(vec![1.0, 0.0]), epsilon = 1e-13);
}

#[test]
fn closed_form_randers_gradient_matches_inversion() {
    let data = RandersData::new(vec![0.3, -0.2, 0.45]).unwrap();
    let norm = data.norm().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let fields = catalog(&norm);
    for _ in 0..100 {
        let x = Vector::new((0..3).map(|_| rng.random_range(-2.0..2.0)).collect());
        let field = &fields[rng.random_range(0..fields.len())];
        let Ok(df) = field.differential(&x) else { continue };
        let generic = gradient(&norm, field.as_ref(), &x).unwrap();
        let closed = randers_gradient(&data, &df).unwrap();
        assert!((&generic - &closed).euclidean_norm() <= 1e-9 * (1.0 + closed.euclidean_norm()));
    }
}

#[test]
fn hessian_form_examples() {
    let norm = MinkowskiNorm::randers(vec![0.5, 0.0, 0.0]).unwrap();
    let lin = LinearField::new(Covector::new(vec![0.3, -0.7, 1.1])).unwrap();
    let x = Vector::new(vec![1.0, 2.0, 3.0]);
    let u = Vector::new(vec![0.2, 1.0, -0.4]);
    assert_eq!(hessian_form(&norm, &lin, &x, &u, &u).unwrap(), 0.0);

    let e = MinkowskiNorm::euclidean(2).unwrap();
    let sphere = SpherePotential::new(&e, false);
    let x = Vector::new(vec![2.0, 0.0]);
    assert_relative_eq!(hessian_form(&e, &sphere, &x, &x, &x).unwrap(), 4.0, epsilon = 1e-13);
}

#[test]
fn laplacian_examples() {
    for norm in [
        MinkowskiNorm::euclidean(3).unwrap(),
        MinkowskiNorm::randers(vec![0.5, 0.0, 0.0]).unwrap(),
        MinkowskiNorm::randers(vec![0.1, -0.3, 0.4]).unwrap(),
        MinkowskiNorm::kth_root(3, 4).unwrap(),
    ] {
        let x = Vector::new(vec![0.7, -1.1, 0.4]);
        for volume in [Volume::BusemannHausdorff, Volume::HolmesThompson] {
            let fwd = laplacian(&norm, &SpherePotential::new(&norm, false), &x, volume).unwrap();
            let rev = laplacian(&norm, &SpherePotential::new(&norm, true), &x, volume).unwrap();
            assert_relative_eq!(fwd, 3.0, epsilon = 1e-10);
            assert_relative_eq!(rev, -3.0, epsilon = 1e-10);
            let cyl = laplacian(&norm, &CylinderPotential::new(&norm, 2, false).unwrap(), &x, volume).unwrap();
            assert_relative_eq!(cyl, 2.0, epsilon = 1e-9);
            let lin = LinearField::new(Covector::new(vec![0.3, -0.7, 1.1])).unwrap();
            assert_eq!(laplacian(&norm, &lin, &x, volume).unwrap(), 0.0);
        }
    }
}

#[test]
fn trace_check_examples() {
    let norm = MinkowskiNorm::randers(vec![0.1, 0.0, 0.2]).unwrap();
    let x = Vector::new(vec![0.7, -1.1, 0.4]);
    let (a, b) = laplacian_trace_check(&norm, &SpherePotential::new(&norm, false), &x).unwrap();
    assert_relative_eq!(a, 3.0, epsilon = 1e-9);
    assert_relative_eq!(b, 3.0, epsilon = 1e-9);
    let lin = LinearField::new(Covector::new(vec![0.3, -0.7, 1.1])).unwrap();
    assert_eq!(laplacian_trace_check(&norm, &lin, &x).unwrap(), (0.0, 0.0));
    let ex4 = NormPlusLinear::new(vec![0.1, 0.0, 0.2], 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let x = Vector::new((0..3).map(|_| rng.random_range(-2.0..2.0)).collect());
        let (a, b) = laplacian_trace_check(&norm, &ex4, &x).unwrap();
        assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()));
    }
}

#[test]
fn critical_points_are_refused() {
    let norm = MinkowskiNorm::randers(vec![0.5, 0.0, 0.0]).unwrap();
    let sphere = SpherePotential::new(&norm, false);
    let origin = Vector::zeros(3);
    assert!(field_point(&norm, &sphere, &Vector::new(vec![1e-12, 0.0, 0.0])).is_err());
    assert!(gradient(&norm, &sphere, &origin).is_err());
    let q = QuadraticField::new(DMatrix::identity(3, 3), vec![-1.0, 0.0, 0.0]).unwrap();
    assert!(matches!(field_point(&norm, &q, &Vector::new(vec![1.0, 0.0, 0.0])), Err(Error::CriticalPoint { .. })));
}

#[test]
fn composed_and_finite_difference_fields() {
    let norm = MinkowskiNorm::randers(vec![0.3, 0.1, 0.0]).unwrap();
    let inner: Arc<dyn ScalarField> = Arc::new(SpherePotential::new(&norm, false));
    // sqrt(2 f) = F: the distance function from the origin.
    let dist = ComposedField::new(inner, Arc::new(PowerProfile { scale: 2f64.sqrt(), exponent: 0.5 }));
    let x = Vector::new(vec![0.7, -1.1, 0.4]);
    let p = field_point(&norm, &dist, &x).unwrap();
    assert_relative_eq!(p.value, norm.eval(&x).unwrap(), epsilon = 1e-13);
    assert_relative_eq!(p.fstar, 1.0, epsilon = 1e-12);
    assert_relative_eq!(p.laplacian(), 2.0 / norm.eval(&x).unwrap(), epsilon = 1e-11);

    let n2 = norm.clone();
    let fd = FiniteDifferenceField::new(
        3,
        Arc::new(move |x: &Vector| {
            let f = n2.eval(x).unwrap_or(0.0);
            0.5 * f * f
        }),
        (0.0, f64::INFINITY),
    );
    assert!(fd.uses_finite_differences());
    let q = field_point(&norm, &fd, &x).unwrap();
    assert_relative_eq!(q.fstar, norm.eval(&x).unwrap(), max_relative = 1e-7);
    assert_relative_eq!(q.laplacian(), 3.0, max_relative = 1e-4);
}

#[test]
fn volume_constant_examples() {
    let e = volume_constants(&MinkowskiNorm::euclidean(3).unwrap()).unwrap();
    assert_relative_eq!(e.sigma_bh, 1.0, epsilon = 1e-10);
    assert_relative_eq!(e.sigma_ht, 1.0, epsilon = 1e-10);
    let r = volume_constants(&MinkowskiNorm::randers(vec![0.5, 0.0]).unwrap()).unwrap();
    assert_relative_eq!(r.sigma_bh, 0.75f64.powf(1.5), max_relative = 1e-4);
    assert!(r.bh_error <= 1e-4 && r.ht_error <= 1e-4);
    assert!(r.sigma_ht > 0.0);
    assert!(matches!(volume_constants(&MinkowskiNorm::euclidean(7).unwrap()), Err(Error::DimensionTooLarge { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gradient_identities(x in point(), b in prop::collection::vec(-0.5..0.5f64, 3)) {
        let norm = MinkowskiNorm::randers(b).unwrap();
        for field in catalog(&norm) {
            let x = Vector::new(x.clone());
            let Ok(p) = field_point(&norm, field.as_ref(), &x) else { continue };
            let fstar = dual_norm(&norm, &p.df).unwrap();
            prop_assert!((p.fstar - fstar).abs() <= 1e-10 * fstar);
            prop_assert!((p.df.pair(&p.gradient) - fstar * fstar).abs() <= 1e-9 * fstar * fstar);
            let back = legendre(&norm, &p.gradient).unwrap();
            prop_assert!((back.as_dvector() - p.df.as_dvector()).amax() <= 1e-10 * (1.0 + p.df.max_abs()));
        }
    }

    #[test]
    fn hessian_form_symmetry(x in point(), u in prop::collection::vec(-1.0..1.0f64, 3), v in prop::collection::vec(-1.0..1.0f64, 3)) {
        let norm = MinkowskiNorm::randers(vec![0.4, -0.2, 0.1]).unwrap();
        for field in catalog(&norm) {
            let x = Vector::new(x.clone());
            let Ok(p) = field_point(&norm, field.as_ref(), &x) else { continue };
            let (u, v) = (DVector::from_vec(u.clone()), DVector::from_vec(v.clone()));
            let scale = 1.0 + p.hessian.amax();
            prop_assert!((p.hessian_form(&u, &v) - p.hessian_form(&v, &u)).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn laplacian_forms_agree(x in point()) {
        let norm = MinkowskiNorm::randers(vec![0.25, 0.3, -0.2]).unwrap();
        for field in catalog(&norm) {
            let x = Vector::new(x.clone());
            let Ok(p) = field_point(&norm, field.as_ref(), &x) else { continue };
            let lap = p.laplacian();
            let trace = p.hessian_trace().unwrap();
            prop_assert!((lap - trace).abs() <= 1e-8 * (1.0 + lap.abs()));
            let div = divergence_laplacian(&norm, field.as_ref(), &x).unwrap();
            prop_assert!((lap - div).abs() <= 1e-4 * (1.0 + lap.abs()));
        }
    }
}
