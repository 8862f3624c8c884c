use approx::assert_relative_eq;
use minkowski_core::calculus::{
    field_point, CylinderPotential, LinearField, NormPlusLinear, QuadraticField, ScalarField, SpherePotential,
};
use minkowski_core::duality::{dual_norm, legendre_inverse, SubspaceDual};
use minkowski_core::hypersurface::frame_at;
use minkowski_core::isoparametric::{verify, Verdict, VerifyOptions};
use minkowski_core::randers::{
    cartan_curvature_identity, counterexample_field, counterexample_profiles, cylinder_equation,
    dual_subspace_condition_check, orthogonal_triple, randers_gradient, randers_isoparametric_residual,
    randers_laplacian, RandersData,
};
use minkowski_core::{Covector, Error, MinkowskiNorm, PolynomialProfile, PowerProfile, Vector};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let len = v.norm();
        if len > 0.1 && len <= 1.0 {
            return v / len;
        }
    }
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::new((0..n).map(|_| rng.random_range(-2.0..2.0)).collect())
}

#[test]
fn dual_coefficients() {
    let data = RandersData::new(vec![0.3, -0.4, 0.0]).unwrap();
    let lambda = 0.75;
    assert_relative_eq!(data.lambda, lambda, epsilon = 1e-15);
    let b = data.drift();
    let want = (DMatrix::identity(3, 3) * lambda + &b * b.transpose()) / (lambda * lambda);
    assert_relative_eq!(data.a_star_matrix(), want, epsilon = 1e-15);
    assert_relative_eq!(DVector::from_vec(data.b_star.clone()), -&b / lambda, epsilon = 1e-15);
    for m in 1..3 {
        let split = data.clone().with_split(m).unwrap();
        assert!(split.cylinder_scale() <= 1.0 + 1e-15);
    }
    let inside = RandersData::new(vec![0.3, -0.4, 0.0]).unwrap().with_split(2).unwrap();
    assert_relative_eq!(inside.cylinder_scale(), 1.0, epsilon = 1e-15);
    assert!(RandersData::new(vec![0.3, -0.4, 0.5]).unwrap().with_split(2).unwrap().cylinder_scale() < 1.0);
    assert!(matches!(data.clone().with_split(3), Err(Error::BadDimension(_))));
}

#[test]
fn dual_coefficients_match_generic_dual() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for len in [0.1, 0.3, 0.5, 0.7, 0.9 * 0.999] {
        let b = random_unit(&mut rng, 3) * len;
        let data = RandersData::new(b.as_slice().to_vec()).unwrap();
        let norm = data.norm().unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let xi = Covector::new((0..3).map(|_| rng.random_range(-2.0..2.0)).collect());
            let closed = data.dual_norm(&xi);
            let generic = dual_norm(&norm, &xi).unwrap();
            worst = worst.max((closed - generic).abs() / generic);
        }
        assert!(worst <= 1e-8, "|b| = {len}: {worst}");
    }
}

#[test]
fn gradient_examples() {
    let data = RandersData::new(vec![0.0, 0.0, 0.0]).unwrap();
    let df = Covector::new(vec![0.3, -1.2, 2.0]);
    assert_relative_eq!(randers_gradient(&data, &df).unwrap().as_dvector(), df.as_dvector(), epsilon = 1e-15);

    let data = RandersData::new(vec![0.5, 0.0]).unwrap();
    let g = randers_gradient(&data, &Covector::new(vec![2.25, 0.0])).unwrap();
    assert_relative_eq!(g.as_dvector(), &DVector::from_vec(vec![1.0, 0.0]), epsilon = 1e-14);
    assert!(matches!(randers_gradient(&data, &Covector::new(vec![0.0, 0.0])), Err(Error::ZeroCovector { .. })));

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let data = RandersData::new(vec![0.25, 0.4, -0.3]).unwrap();
    let norm = data.norm().unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let xi = Covector::new((0..3).map(|_| rng.random_range(-2.0..2.0)).collect());
        let closed = randers_gradient(&data, &xi).unwrap();
        let generic = legendre_inverse(&norm, &xi).unwrap();
        worst = worst.max((&closed - &generic).euclidean_norm() / (1.0 + generic.euclidean_norm()));
    }
    assert!(worst <= 1e-10, "{worst}");
}

#[test]
fn laplacian_matches_primal_path_on_catalog() {
    let data = RandersData::new(vec![0.2, -0.35, 0.3]).unwrap();
    let norm = data.norm().unwrap();
    let fields: Vec<Box<dyn ScalarField>> = vec![
        Box::new(LinearField::new(Covector::new(vec![0.3, -0.7, 1.1])).unwrap()),
        Box::new(SpherePotential::new(&norm, false)),
        Box::new(SpherePotential::new(&norm, true)),
        Box::new(CylinderPotential::new(&norm, 2, false).unwrap()),
        Box::new(CylinderPotential::new(&norm, 2, true).unwrap()),
        Box::new(NormPlusLinear::new(vec![0.2, -0.35, 0.3], 2).unwrap()),
        Box::new(
            QuadraticField::new(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 0.5])), vec![0.1, 0.0, -0.2])
                .unwrap(),
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for field in &fields {
        for _ in 0..20 {
            let x = random_vector(&mut rng, 3);
            let Ok(p) = field_point(&norm, field.as_ref(), &x) else { continue };
            let closed = randers_laplacian(&data, field.as_ref(), &x).unwrap();
            let primal = p.laplacian();
            assert!(
                (closed - primal).abs() <= 1e-8 * (1.0 + primal.abs()),
                "{}: {closed} vs {primal}",
                field.describe()
            );
        }
    }
}

#[test]
fn isoparametric_residual_examples() {
    let data = RandersData::new(vec![0.2, -0.35, 0.3]).unwrap();
    let norm = data.norm().unwrap();
    let sphere = SpherePotential::new(&norm, false);
    // a(t) = sqrt(2t), b(t) = n.
    let a = PowerProfile { scale: 2f64.sqrt(), exponent: 0.5 };
    let b = PolynomialProfile::new(vec![3.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let x = random_vector(&mut rng, 3);
        let (r1, r2) = randers_isoparametric_residual(&data, &sphere, &x, &a, &b).unwrap();
        assert!(r1.abs() <= 1e-9 && r2.abs() <= 1e-9, "{r1} {r2}");
    }

    let data = RandersData::new(vec![0.1, 0.0, 0.2]).unwrap().with_split(2).unwrap();
    let field = counterexample_field(&data).unwrap();
    let (a, b) = counterexample_profiles(&data);
    let mut failures = 0;
    for _ in 0..50 {
        let x = random_vector(&mut rng, 3);
        let Ok((r1, r2)) = randers_isoparametric_residual(&data, &field, &x, &a, &b) else { continue };
        assert!(r1.abs() <= 1e-12);
        if x[2].abs() > 1e-3 && r2.abs() > 1e-3 {
            failures += 1;
        }
    }
    assert!(failures > 40, "{failures}");
    let whole = RandersData::new(vec![0.1, 0.0, 0.2]).unwrap();
    assert!(matches!(counterexample_field(&whole), Err(Error::BadDimension(_))));
}

#[test]
fn cylinder_examples() {
    let data = RandersData::new(vec![0.3, 0.0, 0.0]).unwrap();
    let (field, level) = cylinder_equation(&data, 2, 1.0, false).unwrap();
    assert_eq!(level, 0.5);
    for theta in [0.0f64, 1.0, 2.5, 4.0] {
        // |x_bar| + 0.3 x1 = 1 in polar form.
        let rho = 1.0 / (1.0 + 0.3 * theta.cos());
        let x = Vector::new(vec![rho * theta.cos(), rho * theta.sin(), 0.7]);
        assert_relative_eq!(field.value(&x).unwrap(), level, epsilon = 1e-14);
        let fr = frame_at(&data.norm().unwrap(), &field, &x).unwrap();
        assert_relative_eq!(fr.principal_curvatures[0], -1.0, epsilon = 1e-9);
        assert!(fr.principal_curvatures[1].abs() <= 1e-9);
    }

    let data = RandersData::new(vec![0.0, 0.0, 0.3]).unwrap();
    let (field, level) = cylinder_equation(&data, 2, 2.0, false).unwrap();
    for theta in [0.0f64, 1.0, 2.5] {
        let rho = 2.0 / 0.91f64.sqrt();
        let x = Vector::new(vec![rho * theta.cos(), rho * theta.sin(), -1.3]);
        assert_relative_eq!(field.value(&x).unwrap(), level, epsilon = 1e-13);
    }

    let (reverse, level) = cylinder_equation(&data, 2, 1.0, true).unwrap();
    assert_eq!(level, -0.5);
    assert!(reverse.is_reverse());
    assert!(matches!(cylinder_equation(&data, 3, 1.0, false), Err(Error::BadDimension(_))));
    assert!(cylinder_equation(&data, 2, 0.0, false).is_err());
}

#[test]
fn cartan_closed_form() {
    let data = RandersData::new(vec![0.0, 0.0, 0.0]).unwrap();
    let e = |v: [f64; 3]| Vector::from_slice(&v);
    let (lhs, rhs) =
        cartan_curvature_identity(&data, &e([1.0, 0.0, 0.0]), &e([0.0, 1.0, 0.0]), &e([0.0, 0.0, 1.0])).unwrap();
    assert_relative_eq!(lhs, 1.0, epsilon = 1e-12);
    assert_relative_eq!(rhs, 1.0, epsilon = 1e-15);

    let data = RandersData::new(vec![0.5, 0.0, 0.0]).unwrap();
    let norm = data.norm().unwrap();
    let (y, u, v) = orthogonal_triple(&norm, &e([0.0, 1.0, 0.0]), &e([1.0, 0.0, 0.0]), &e([0.0, 0.0, 1.0])).unwrap();
    let (lhs, rhs) = cartan_curvature_identity(&data, &y, &u, &v).unwrap();
    assert_relative_eq!(rhs, (1.0 - 0.5 * y[0]) * 0.75, epsilon = 1e-15);
    assert_relative_eq!(lhs, rhs, epsilon = 1e-7);

    assert!(matches!(cartan_curvature_identity(&data, &e([0.0, 2.0, 0.0]), &u, &v), Err(Error::NotUnit { .. })));
    assert!(matches!(cartan_curvature_identity(&data, &y, &e([1.0, 1.0, 0.0]), &v), Err(Error::NotOrthogonal { .. })));

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let b = random_unit(&mut rng, 4) * rng.random_range(0.0..0.9);
        let data = RandersData::new(b.as_slice().to_vec()).unwrap();
        let norm = data.norm().unwrap();
        let (y, u, v) = orthogonal_triple(
            &norm,
            &random_vector(&mut rng, 4),
            &random_vector(&mut rng, 4),
            &random_vector(&mut rng, 4),
        )
        .unwrap();
        let (lhs, rhs) = cartan_curvature_identity(&data, &y, &u, &v).unwrap();
        assert!(lhs > 0.0 && rhs > 0.0);
        worst = worst.max((lhs - rhs).abs());
    }
    assert!(worst <= 1e-7, "{worst}");
}

#[test]
fn subspace_condition_examples() {
    for m in 1..3 {
        let k = MinkowskiNorm::kth_root(3, 4).unwrap();
        let c = dual_subspace_condition_check(&k, m, 64).unwrap();
        assert!(c.holds);
        assert!(c.max_gap.abs() <= 1e-8 && c.min_gap.abs() <= 1e-8);
    }

    let r = MinkowskiNorm::randers(vec![0.4, 0.0, 0.0]).unwrap();
    for m in 1..3 {
        let c = dual_subspace_condition_check(&r, m, 64).unwrap();
        assert!(c.holds);
        assert!(c.max_gap.abs() <= 1e-8 && c.min_gap.abs() <= 1e-8);
    }

    let r = MinkowskiNorm::randers(vec![0.0, 0.0, 0.3]).unwrap();
    let c = dual_subspace_condition_check(&r, 2, 64).unwrap();
    assert!(!c.holds);
    assert_relative_eq!(c.max_transverse, 0.3, epsilon = 1e-12);
    assert!(c.min_gap > 0.0);
    let tilde = SubspaceDual::new(&r, 2).unwrap().eval(&Vector::new(vec![1.0, 0.0])).unwrap();
    assert!(tilde < 1.0);

    assert!(matches!(dual_subspace_condition_check(&r, 3, 8), Err(Error::BadDimension(_))));
}

#[test]
fn quartic_cylinder_has_two_constant_curvatures() {
    let norm = MinkowskiNorm::kth_root(3, 4).unwrap();
    let field = CylinderPotential::new(&norm, 2, false).unwrap();
    let report = verify(&norm, &field, &[0.5, 1.0, 2.0], 24, VerifyOptions::default()).unwrap();
    assert_eq!(report.isoparametric, Verdict::Yes);
    assert_eq!(report.constant_principal_curvatures, Verdict::Yes);
    for level in &report.levels {
        assert_eq!(level.groups.len(), 2);
    }
    // The level set is x^4 + y^4 = r^4.
    for s in &report.samples {
        let r = (2.0 * s.level).sqrt();
        for p in &s.points {
            let x = p.x.as_slice();
            assert_relative_eq!(x[0].powi(4) + x[1].powi(4), r.powi(4), max_relative = 1e-10);
        }
    }
}

#[test]
fn isoparametric_verdicts_have_at_most_two_curvatures() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut yes = 0;
    for _ in 0..12 {
        let b = random_unit(&mut rng, 3) * rng.random_range(0.0..0.8);
        let norm = MinkowskiNorm::randers(b.as_slice().to_vec()).unwrap();
        let mut fields: Vec<(Box<dyn ScalarField>, Vec<f64>)> = vec![
            (
                Box::new(LinearField::new(Covector::from_dvector(random_unit(&mut rng, 3))).unwrap()),
                vec![-1.0, 0.0, 1.0],
            ),
            (Box::new(SpherePotential::new(&norm, false)), vec![0.5, 1.0, 2.0]),
            (Box::new(CylinderPotential::new(&norm, 2, true).unwrap()), vec![-2.0, -1.0, -0.5]),
        ];
        let diag = DVector::from_fn(3, |_, _| rng.random_range(0.5..2.0));
        let c: Vec<f64> = (0..3).map(|_| rng.random_range(-0.2..0.2)).collect();
        let shift = 0.5 * c.iter().zip(diag.iter()).map(|(c, d)| c * c / d).sum::<f64>();
        fields.push((
            Box::new(QuadraticField::new(DMatrix::from_diagonal(&diag), c).unwrap()),
            vec![0.5 - shift, 1.0 - shift, 2.0 - shift],
        ));
        for (field, levels) in fields {
            let Ok(report) = verify(&norm, field.as_ref(), &levels, 16, VerifyOptions::default()) else { continue };
            if report.isoparametric.is_yes() {
                yes += 1;
                for level in &report.levels {
                    assert!((1..=2).contains(&level.groups.len()), "{}", field.describe());
                }
            }
        }
    }
    assert!(yes >= 36);
}
