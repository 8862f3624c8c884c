//! Closed-form Randers machinery with Euclidean `alpha`: dual coefficients,
//! gradient and Laplacian formulas, the Euclidean form of the isoparametric
//! system, Minkowski cylinders and the transnormal counterexample.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::calculus::{CylinderPotential, NormPlusLinear, ScalarField};
use crate::duality::SubspaceDual;
use crate::error::{Error, Result};
use crate::hypersurface::cartan_curvature_q;
use crate::isoparametric::{randers_residuals, EuclideanData};
use crate::norms::{MinkowskiNorm, NormFamily};
use crate::profile::{PolynomialProfile, PowerProfile, Profile};
use crate::sphere;
use crate::vector::{Covector, Vector};

/// Tolerance on `F(y) = 1` for unit-vector inputs.
pub const UNIT_TOLERANCE: f64 = 1e-10;
/// Largest transverse derivative accepted by the subspace condition.
pub const SUBSPACE_CONDITION_TOLERANCE: f64 = 1e-8;

/// Coefficients of `F = |y| + <b, y>` and of its dual, with an optional
/// split `R^n = R^m x R^{n-m}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandersData {
    pub b: Vec<f64>,
    /// `1 - |b|^2`.
    pub lambda: f64,
    /// Row-major `a*^{ij} = (lambda delta^{ij} + b^i b^j) / lambda^2`.
    pub a_star: Vec<f64>,
    /// `b*^i = -b^i / lambda`.
    pub b_star: Vec<f64>,
    /// Dimension of the leading subspace.
    pub m: usize,
    /// `|b_bar|^2` over the first `m` components.
    pub bbar2: f64,
    /// `1 - bbar2 / (lambda + bbar2)`.
    pub lambda_bar: f64,
}

impl RandersData {
    /// Data for drift `b`, split at `m = n`.
    pub fn new(b: Vec<f64>) -> Result<Self> {
        let n = b.len();
        if n < 2 {
            return Err(Error::BadDimension(format!("need dim >= 2, got {n}")));
        }
        let bv = DVector::from_vec(b.clone());
        let b2 = bv.norm_squared();
        if !(b2 < 1.0) {
            return Err(Error::InvalidParameter(format!("drift norm {} must be < 1", b2.sqrt())));
        }
        let lambda = 1.0 - b2;
        let a = (DMatrix::identity(n, n) * lambda + &bv * bv.transpose()) / (lambda * lambda);
        let a_star = (0..n * n).map(|k| a[(k / n, k % n)]).collect();
        let b_star = b.iter().map(|v| -v / lambda).collect();
        Ok(Self { b, lambda, a_star, b_star, m: n, bbar2: b2, lambda_bar: 1.0 - b2 / (lambda + b2) })
    }

    pub fn from_norm(norm: &MinkowskiNorm) -> Result<Self> {
        match norm.family() {
            NormFamily::Randers { b } => Self::new(b.as_slice().to_vec()),
            other => Err(Error::Unsupported(format!("{} is not a Randers norm with Euclidean alpha", other.name()))),
        }
    }

    /// Split off the first `m` coordinates, `1 <= m < n`.
    pub fn with_split(mut self, m: usize) -> Result<Self> {
        let n = self.dim();
        if m == 0 || m >= n {
            return Err(Error::BadDimension(format!("subspace dimension {m} not in 1..{n}")));
        }
        self.m = m;
        self.bbar2 = self.b[..m].iter().map(|v| v * v).sum();
        self.lambda_bar = 1.0 - self.bbar2 / (self.lambda + self.bbar2);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn drift(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.b)
    }

    pub fn a_star_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim(), self.dim(), &self.a_star)
    }

    pub fn norm(&self) -> Result<MinkowskiNorm> {
        MinkowskiNorm::randers(self.b.clone())
    }

    /// `lambda + bbar2`, the squared scale of `|y_bar|` in the subspace dual.
    pub fn cylinder_scale(&self) -> f64 {
        self.lambda + self.bbar2
    }

    pub fn alpha_star(&self, xi: &Covector) -> f64 {
        let x = xi.as_dvector();
        x.dot(&(self.a_star_matrix() * x)).sqrt()
    }

    pub fn beta_star(&self, xi: &Covector) -> f64 {
        self.b_star.iter().zip(xi.iter()).map(|(b, x)| b * x).sum()
    }

    /// `F*(xi) = alpha*(xi) + beta*(xi)`.
    pub fn dual_norm(&self, xi: &Covector) -> f64 {
        self.alpha_star(xi) + self.beta_star(xi)
    }

    fn check(&self, xi: &Covector) -> Result<()> {
        if xi.dim() != self.dim() {
            return Err(Error::BadDimension(format!("expected {} components, got {}", self.dim(), xi.dim())));
        }
        let norm = xi.euclidean_norm();
        if norm == 0.0 {
            return Err(Error::ZeroCovector { norm });
        }
        Ok(())
    }
}

/// `grad f = F*/(lambda alpha*) (df^sharp - F* b)`.
pub fn randers_gradient(data: &RandersData, df: &Covector) -> Result<Vector> {
    data.check(df)?;
    let fstar = data.dual_norm(df);
    let scale = fstar / (data.lambda * data.alpha_star(df));
    let v = (df.as_dvector() - data.drift() * fstar) * scale;
    Ok(Vector::from_dvector(v))
}

/// `Delta f` through the Euclidean divergence of the closed-form gradient.
pub fn randers_laplacian(data: &RandersData, field: &dyn ScalarField, x: &Vector) -> Result<f64> {
    let df = field.differential(x)?;
    data.check(&df)?;
    let hf = field.hessian(x)?;
    let xi = df.as_dvector();
    let b = data.drift();
    let a_star = data.a_star_matrix();
    let alpha = data.alpha_star(&df);
    let fstar = alpha + data.beta_star(&df);
    // d(alpha*(df)) and d(F*(df)) by the chain rule through Hf.
    let dalpha = &hf * (&a_star * xi / alpha);
    let dfstar = &dalpha + &hf * DVector::from_column_slice(&data.b_star);
    let phi = fstar / (data.lambda * alpha);
    let dphi = (&dfstar * alpha - &dalpha * fstar) / (data.lambda * alpha * alpha);
    Ok(phi * hf.trace() + (xi - &b * fstar).dot(&dphi) - phi * dfstar.dot(&b))
}

/// Residuals of the Euclidean isoparametric system at `x` for candidate
/// profiles `a(t)` and `b(t)`, with `t = f(x)`.
pub fn randers_isoparametric_residual(
    data: &RandersData,
    field: &dyn ScalarField,
    x: &Vector,
    a_tilde: &dyn Profile,
    b_tilde: &dyn Profile,
) -> Result<(f64, f64)> {
    let t = field.value(x)?;
    let df = field.differential(x)?;
    data.check(&df)?;
    let e = EuclideanData {
        df_norm_sq: df.as_dvector().norm_squared(),
        drift_pairing: data.drift().dot(df.as_dvector()),
        laplacian: field.hessian(x)?.trace(),
    };
    let a = a_tilde.derivatives(t);
    Ok(randers_residuals(data.lambda, &e, a[0], a[1], b_tilde.value(t)))
}

/// `f = +-F~(+-x_bar)^2 / 2` and the level `+-r^2/2` cutting out the
/// (reverse) Minkowski cylinder of radius `r` over the first `m` axes.
pub fn cylinder_equation(data: &RandersData, m: usize, r: f64, reverse: bool) -> Result<(CylinderPotential, f64)> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    let field = CylinderPotential::new(&data.norm()?, m, reverse)?;
    let level = field.level_for_radius(r);
    Ok((field, level))
}

/// Both sides of `1 - Q_y(X, Y) = alpha(y) (1 - |b|^2)` for unit `y`.
pub fn cartan_curvature_identity(data: &RandersData, y: &Vector, u: &Vector, v: &Vector) -> Result<(f64, f64)> {
    let norm = data.norm()?;
    let fy = norm.eval(y)?;
    if (fy - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::NotUnit { value: fy });
    }
    let lhs = 1.0 - cartan_curvature_q(&norm, y, u, v)?;
    let beta: f64 = data.b.iter().zip(y.iter()).map(|(b, y)| b * y).sum();
    Ok((lhs, (1.0 - beta) * data.lambda))
}

/// Normalize `y` to `F(y) = 1` and make `u`, `v` `g_y`-orthogonal to `y`
/// and to each other.
pub fn orthogonal_triple(norm: &MinkowskiNorm, y: &Vector, u: &Vector, v: &Vector) -> Result<(Vector, Vector, Vector)> {
    let y = y.scaled(1.0 / norm.eval(y)?);
    let g = norm.fundamental_tensor(&y)?;
    let ip = |a: &DVector<f64>, b: &DVector<f64>| a.dot(&(&g * b));
    let yd = y.as_dvector();
    let mut basis: Vec<DVector<f64>> = vec![yd.clone()];
    for w in [u, v] {
        let mut e = w.as_dvector().clone();
        for q in &basis {
            e -= q * (ip(q, &e) / ip(q, q));
        }
        let len = ip(&e, &e).sqrt();
        if !(len > 1e-8 * w.euclidean_norm()) {
            return Err(Error::InvalidParameter("vectors are linearly dependent".into()));
        }
        basis.push(e / len);
    }
    let v = Vector::from_dvector(basis.pop().expect("three vectors"));
    let u = Vector::from_dvector(basis.pop().expect("three vectors"));
    Ok((y, u, v))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubspaceCondition {
    /// All transverse derivatives vanish on the subspace.
    pub holds: bool,
    /// Largest `|F_{y^k}(y_bar)|` with `k > m`, over unit `y_bar`.
    pub max_transverse: f64,
    /// Largest and smallest `F(y_bar) - F~(y_bar)`.
    pub max_gap: f64,
    pub min_gap: f64,
    pub samples: usize,
}

/// Test whether `F` has vanishing transverse derivatives along the first
/// `m` axes, and compare the restricted norm with the subspace dual there.
pub fn dual_subspace_condition_check(norm: &MinkowskiNorm, m: usize, samples: usize) -> Result<SubspaceCondition> {
    let n = norm.dim();
    if m == 0 || m >= n {
        return Err(Error::BadDimension(format!("subspace dimension {m} not in 1..{n}")));
    }
    let dual = SubspaceDual::new(norm, m)?;
    let dirs = if m == 1 {
        vec![Vector::new(vec![1.0]), Vector::new(vec![-1.0])]
    } else {
        sphere::directions(m, samples.max(2), 0)?
    };
    let mut max_transverse: f64 = 0.0;
    let mut max_gap = f64::NEG_INFINITY;
    let mut min_gap = f64::INFINITY;
    for d in &dirs {
        let mut y = DVector::zeros(n);
        y.rows_mut(0, m).copy_from(d.as_dvector());
        let y = Vector::from_dvector(y);
        let grad = norm.gradient(&y)?;
        for k in m..n {
            max_transverse = max_transverse.max(grad[k].abs());
        }
        let gap = norm.eval(&y)? - dual.eval(d)?;
        max_gap = max_gap.max(gap);
        min_gap = min_gap.min(gap);
    }
    Ok(SubspaceCondition {
        holds: max_transverse <= SUBSPACE_CONDITION_TOLERANCE,
        max_transverse,
        max_gap,
        min_gap,
        samples: dirs.len(),
    })
}

/// `f(x) = |x_bar| + <b, x>`: transnormal with `a = 1` in the Randers space
/// of drift `b`, but not isoparametric once `b` leaves the subspace.
pub fn counterexample_field(data: &RandersData) -> Result<NormPlusLinear> {
    if data.m >= data.dim() {
        return Err(Error::BadDimension("counterexample needs a split with m < n".into()));
    }
    NormPlusLinear::new(data.b.clone(), data.m)
}

/// The candidate profiles probed against the counterexample: `a = 1` and
/// `b(t) = (m - 1) / t`.
pub fn counterexample_profiles(data: &RandersData) -> (PolynomialProfile, PowerProfile) {
    (PolynomialProfile::new(vec![1.0]), PowerProfile { scale: (data.m - 1) as f64, exponent: -1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::field_point;
    use crate::duality::{dual_norm, legendre_inverse};
    use approx::assert_relative_eq;

    #[test]
    fn dual_coefficients_match_generic_dual() {
        let data = RandersData::new(vec![0.3, -0.2, 0.4]).unwrap();
        let norm = data.norm().unwrap();
        let xi = Covector::new(vec![0.7, 1.1, -0.4]);
        assert_relative_eq!(data.dual_norm(&xi), dual_norm(&norm, &xi).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn gradient_of_drifted_plane() {
        let data = RandersData::new(vec![0.5, 0.0]).unwrap();
        let g = randers_gradient(&data, &Covector::new(vec![2.25, 0.0])).unwrap();
        assert_relative_eq!(g.as_dvector(), &DVector::from_vec(vec![1.0, 0.0]), epsilon = 1e-14);
        let norm = data.norm().unwrap();
        let xi = Covector::new(vec![-0.3, 0.9]);
        let generic = legendre_inverse(&norm, &xi).unwrap();
        let closed = randers_gradient(&data, &xi).unwrap();
        assert_relative_eq!(generic.as_dvector(), closed.as_dvector(), epsilon = 1e-12);
    }

    #[test]
    fn split_constants() {
        let data = RandersData::new(vec![0.0, 0.0, 0.3]).unwrap().with_split(2).unwrap();
        assert_relative_eq!(data.cylinder_scale(), 0.91, epsilon = 1e-15);
        assert_eq!(data.lambda_bar, 1.0);
        let inside = RandersData::new(vec![0.3, 0.0, 0.0]).unwrap().with_split(2).unwrap();
        assert_relative_eq!(inside.cylinder_scale(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn laplacian_formula_matches_dual_trace() {
        let data = RandersData::new(vec![0.4, 0.1, -0.2]).unwrap();
        let norm = data.norm().unwrap();
        let field = crate::calculus::SpherePotential::new(&norm, false);
        let x = Vector::new(vec![0.3, -1.2, 0.8]);
        let primal = field_point(&norm, &field, &x).unwrap().laplacian();
        assert_relative_eq!(randers_laplacian(&data, &field, &x).unwrap(), primal, epsilon = 1e-11);
        assert_relative_eq!(primal, 3.0, epsilon = 1e-11);
    }

    #[test]
    fn counterexample_is_transnormal_only() {
        let data = RandersData::new(vec![0.1, 0.0, 0.2]).unwrap().with_split(2).unwrap();
        let field = counterexample_field(&data).unwrap();
        let (a, b) = counterexample_profiles(&data);
        let x = Vector::new(vec![0.6, -0.5, 1.3]);
        let (r1, r2) = randers_isoparametric_residual(&data, &field, &x, &a, &b).unwrap();
        assert!(r1.abs() < 1e-14);
        assert!(r2.abs() > 1e-3);
    }

    #[test]
    fn rejects_non_randers() {
        let norm = MinkowskiNorm::kth_root(3, 4).unwrap();
        assert!(matches!(RandersData::from_norm(&norm), Err(Error::Unsupported(_))));
    }
}
