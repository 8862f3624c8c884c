//! Scalar fields on a Minkowski space and their nonlinear gradient, Hessian
//! form and Finsler-Laplacian.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::duality::{legendre_inverse, randers_dual_form, SubspaceDual};
use crate::error::{Error, Result};
use crate::linalg::{sorted_symmetric_eigen, spd_inverse};
use crate::norms::{DerivativeStrategy, MinkowskiNorm, NormFamily};
use crate::profile::Profile;
use crate::sphere;
use crate::vector::{Covector, Vector};

/// Below `CRITICAL_THRESHOLD * field.scale()` the dual norm of `df` counts as zero.
pub const CRITICAL_THRESHOLD: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Linear,
    HalfSquaredNorm,
    HalfSquaredSubspaceDual,
    HalfSquaredRestriction,
    NormPlusLinear,
    Quadratic,
    Composed,
    Custom,
}

/// How level sets of a field are sampled.
#[derive(Clone, Debug, PartialEq)]
pub enum Sampling {
    /// Bisection along rays from `anchor`.
    Radial { anchor: Vector },
    /// Level sets are parallel hyperplanes `<normal, x> = t`.
    Hyperplane { normal: Covector },
}

/// A smooth function on `R^n` with first and second derivatives.
///
/// Implementations must be free of side effects; verification evaluates
/// them concurrently.
pub trait ScalarField: Send + Sync + Debug {
    fn dim(&self) -> usize;
    fn kind(&self) -> FieldKind;
    fn value(&self, x: &Vector) -> Result<f64>;
    fn differential(&self, x: &Vector) -> Result<Covector>;
    fn hessian(&self, x: &Vector) -> Result<DMatrix<f64>>;

    fn sampling(&self) -> Sampling {
        Sampling::Radial { anchor: Vector::zeros(self.dim()) }
    }

    /// Open interval of regular values.
    fn regular_range(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    fn uses_finite_differences(&self) -> bool {
        false
    }

    /// Typical size of `F*(df)`, used to scale the critical-point threshold.
    fn scale(&self) -> f64 {
        1.0
    }

    /// Number of nonzero principal curvatures of the level sets, when known
    /// in closed form.
    fn curved_directions(&self) -> Option<usize> {
        None
    }

    fn describe(&self) -> String;
}

fn check_dim(expected: usize, x: &Vector) -> Result<()> {
    if x.dim() == expected {
        Ok(())
    } else {
        Err(Error::BadDimension(format!("expected {expected} components, got {}", x.dim())))
    }
}

/// `f(x) = <c, x>`.
#[derive(Clone, Debug)]
pub struct LinearField {
    c: Covector,
}

impl LinearField {
    pub fn new(c: Covector) -> Result<Self> {
        if c.euclidean_norm() == 0.0 {
            return Err(Error::InvalidParameter("linear field needs a nonzero covector".into()));
        }
        Ok(Self { c })
    }

    pub fn covector(&self) -> &Covector {
        &self.c
    }
}

impl ScalarField for LinearField {
    fn dim(&self) -> usize {
        self.c.dim()
    }
    fn kind(&self) -> FieldKind {
        FieldKind::Linear
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        check_dim(self.dim(), x)?;
        Ok(self.c.pair(x))
    }
    fn differential(&self, x: &Vector) -> Result<Covector> {
        check_dim(self.dim(), x)?;
        Ok(self.c.clone())
    }
    fn hessian(&self, x: &Vector) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), x)?;
        Ok(DMatrix::zeros(self.dim(), self.dim()))
    }
    fn sampling(&self) -> Sampling {
        Sampling::Hyperplane { normal: self.c.clone() }
    }
    fn scale(&self) -> f64 {
        self.c.euclidean_norm()
    }
    fn curved_directions(&self) -> Option<usize> {
        Some(0)
    }
    fn describe(&self) -> String {
        format!("linear {:?}", self.c.as_slice())
    }
}

/// Forward potential `F(x)^2/2` or reverse potential `-F(-x)^2/2`.
///
/// Regular levels are `F(x) = r` at `t = r^2/2`, respectively `F(-x) = r` at
/// `t = -r^2/2`.
#[derive(Clone, Debug)]
pub struct SpherePotential {
    norm: MinkowskiNorm,
    reverse: bool,
}

impl SpherePotential {
    pub fn new(norm: &MinkowskiNorm, reverse: bool) -> Self {
        Self { norm: norm.clone(), reverse }
    }

    pub fn is_reverse(&self) -> bool {
        self.reverse
    }

    fn sign(&self) -> f64 {
        if self.reverse {
            -1.0
        } else {
            1.0
        }
    }

    /// Level value whose level set has radius `r`.
    pub fn level_for_radius(&self, r: f64) -> f64 {
        self.sign() * 0.5 * r * r
    }
}

impl ScalarField for SpherePotential {
    fn dim(&self) -> usize {
        self.norm.dim()
    }
    fn kind(&self) -> FieldKind {
        FieldKind::HalfSquaredNorm
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        check_dim(self.dim(), x)?;
        if x.euclidean_norm() == 0.0 {
            return Ok(0.0);
        }
        let f = self.norm.eval(&x.scaled(self.sign()))?;
        Ok(self.sign() * 0.5 * f * f)
    }
    fn differential(&self, x: &Vector) -> Result<Covector> {
        check_dim(self.dim(), x)?;
        if x.euclidean_norm() == 0.0 {
            return Ok(Covector::zeros(self.dim()));
        }
        Ok(Covector::from_dvector(self.norm.local(&x.scaled(self.sign()), 1)?.legendre))
    }
    fn hessian(&self, x: &Vector) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), x)?;
        Ok(self.norm.local(&x.scaled(self.sign()), 2)?.g * self.sign())
    }
    fn regular_range(&self) -> (f64, f64) {
        if self.reverse {
            (f64::NEG_INFINITY, 0.0)
        } else {
            (0.0, f64::INFINITY)
        }
    }
    fn uses_finite_differences(&self) -> bool {
        self.norm.strategy() == DerivativeStrategy::FiniteDifference
    }
    fn curved_directions(&self) -> Option<usize> {
        Some(self.dim() - 1)
    }
    fn describe(&self) -> String {
        format!(
            "{} sphere potential of {}",
            if self.reverse { "reverse" } else { "forward" },
            self.norm.family().name()
        )
    }
}

/// `+-F~(+-x_bar)^2/2` where `F~` is the subspace dual on the first `m` axes.
#[derive(Clone, Debug)]
pub struct CylinderPotential {
    dual: SubspaceDual,
    reverse: bool,
}

impl CylinderPotential {
    pub fn new(norm: &MinkowskiNorm, m: usize, reverse: bool) -> Result<Self> {
        Ok(Self { dual: SubspaceDual::new(norm, m)?, reverse })
    }

    pub fn from_dual(dual: SubspaceDual, reverse: bool) -> Self {
        Self { dual, reverse }
    }

    pub fn subspace_dual(&self) -> &SubspaceDual {
        &self.dual
    }

    pub fn is_reverse(&self) -> bool {
        self.reverse
    }

    fn sign(&self) -> f64 {
        if self.reverse {
            -1.0
        } else {
            1.0
        }
    }

    fn head(&self, x: &Vector) -> Vector {
        let m = self.dual.subspace_dim();
        Vector::from_slice(&x.as_slice()[..m]).scaled(self.sign())
    }

    pub fn level_for_radius(&self, r: f64) -> f64 {
        self.sign() * 0.5 * r * r
    }
}

impl ScalarField for CylinderPotential {
    fn dim(&self) -> usize {
        self.dual.base().dim()
    }
    fn kind(&self) -> FieldKind {
        FieldKind::HalfSquaredSubspaceDual
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        check_dim(self.dim(), x)?;
        let h = self.head(x);
        if h.euclidean_norm() == 0.0 {
            return Ok(0.0);
        }
        let f = self.dual.eval(&h)?;
        Ok(self.sign() * 0.5 * f * f)
    }
    fn differential(&self, x: &Vector) -> Result<Covector> {
        check_dim(self.dim(), x)?;
        let h = self.head(x);
        if h.euclidean_norm() == 0.0 {
            return Ok(Covector::zeros(self.dim()));
        }
        let local = self.dual.local(&h)?;
        let mut out = DVector::zeros(self.dim());
        out.rows_mut(0, local.legendre.len()).copy_from(&local.legendre);
        Ok(Covector::from_dvector(out))
    }
    fn hessian(&self, x: &Vector) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), x)?;
        let local = self.dual.local(&self.head(x))?;
        let m = self.dual.subspace_dim();
        let mut out = DMatrix::zeros(self.dim(), self.dim());
        out.view_mut((0, 0), (m, m)).copy_from(&(local.g * self.sign()));
        Ok(out)
    }
    fn regular_range(&self) -> (f64, f64) {
        if self.reverse {
            (f64::NEG_INFINITY, 0.0)
        } else {
            (0.0, f64::INFINITY)
        }
    }
    fn uses_finite_differences(&self) -> bool {
        self.dual.base().strategy() == DerivativeStrategy::FiniteDifference
    }
    fn curved_directions(&self) -> Option<usize> {
        Some(self.dual.subspace_dim() - 1)
    }
    fn describe(&self) -> String {
        format!(
            "{} cylinder potential (m = {}) of {}",
            if self.reverse { "reverse" } else { "forward" },
            self.dual.subspace_dim(),
            self.dual.base().family().name()
        )
    }
}

/// `F(x_bar, 0)^2/2`: the potential of the restricted norm on the first `m`
/// axes, which differs from the subspace dual in general.
#[derive(Clone, Debug)]
pub struct RestrictedPotential {
    norm: MinkowskiNorm,
    m: usize,
}

impl RestrictedPotential {
    pub fn new(norm: &MinkowskiNorm, m: usize) -> Result<Self> {
        if m == 0 || m >= norm.dim() {
            return Err(Error::BadDimension(format!("subspace dimension {m} not in 1..{}", norm.dim())));
        }
        Ok(Self { norm: norm.clone(), m })
    }

    fn project(&self, x: &Vector) -> Vector {
        let mut p = x.as_dvector().clone();
        p.rows_mut(self.m, self.norm.dim() - self.m).fill(0.0);
        Vector::from_dvector(p)
    }
}

impl ScalarField for RestrictedPotential {
    fn dim(&self) -> usize {
        self.norm.dim()
    }
    fn kind(&self) -> FieldKind {
        FieldKind::HalfSquaredRestriction
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        check_dim(self.dim(), x)?;
        let p = self.project(x);
        if p.euclidean_norm() == 0.0 {
            return Ok(0.0);
        }
        let f = self.norm.eval(&p)?;
        Ok(0.5 * f * f)
    }
    fn differential(&self, x: &Vector) -> Result<Covector> {
        check_dim(self.dim(), x)?;
        let mut d = self.norm.local(&self.project(x), 1)?.legendre;
        d.rows_mut(self.m, self.dim() - self.m).fill(0.0);
        Ok(Covector::from_dvector(d))
    }
    fn hessian(&self, x: &Vector) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), x)?;
        let g = self.norm.local(&self.project(x), 2)?.g;
        let mut out = DMatrix::zeros(self.dim(), self.dim());
        out.view_mut((0, 0), (self.m, self.m)).copy_from(&g.view((0, 0), (self.m, self.m)));
        Ok(out)
    }
    fn regular_range(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }
    fn uses_finite_differences(&self) -> bool {
        self.norm.strategy() == DerivativeStrategy::FiniteDifference
    }
    fn describe(&self) -> String {
        format!("restricted potential (m = {}) of {}", self.m, self.norm.family().name())
    }
}

/// `f(x) = |x_bar| + <b, x>` with `x_bar` the first `m` coordinates.
#[derive(Clone, Debug)]
pub struct NormPlusLinear {
    b: DVector<f64>,
    m: usize,
}

impl NormPlusLinear {
    pub fn new(b: Vec<f64>, m: usize) -> Result<Self> {
        if m == 0 || m >= b.len() {
            return Err(Error::BadDimension(format!("subspace dimension {m} not in 1..{}", b.len())));
        }
        Ok(Self { b: DVector::from_vec(b), m })
    }

    fn head_norm(&self, x: &Vector) -> f64 {
        x.as_dvector().rows(0, self.m).norm()
    }
}

impl ScalarField for NormPlusLinear {
    fn dim(&self) -> usize {
        self.b.len()
    }
    fn kind(&self) -> FieldKind {
        FieldKind::NormPlusLinear
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        check_dim(self.dim(), x)?;
        Ok(self.head_norm(x) + self.b.dot(x.as_dvector()))
    }
    fn differential(&self, x: &Vector) -> Result<Covector> {
        check_dim(self.dim(), x)?;
        let r = self.head_norm(x);
        if r == 0.0 {
            return Err(Error::CriticalPoint { fstar: 0.0 });
        }
        let mut d = self.b.clone();
        for i in 0..self.m {
            d[i] += x[i] / r;
        }
        Ok(Covector::from_dvector(d))
    }
    fn hessian(&self, x: &Vector) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), x)?;
        let r = self.head_norm(x);
        if r == 0.0 {
            return Err(Error::CriticalPoint { fstar: 0.0 });
        }
        let n = self.dim();
        Ok(DMatrix::from_fn(n, n, |i, j| {
            if i < self.m && j < self.m {
                (if i == j { 1.0 } else { 0.0 } - x[i] * x[j] / (r * r)) / r
            } else {
                0.0
            }
        }))
    }
    fn regular_range(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }
    fn describe(&self) -> String {
        format!("|x_bar| + <b, x> (m = {}, b = {:?})", self.m, self.b.as_slice())
    }
}

/// `f(x) = x^T Q x / 2 + <c, x>`.
#[derive(Clone, Debug)]
pub struct QuadraticField {
    q: DMatrix<f64>,
    c: DVector<f64>,
}

impl QuadraticField {
    pub fn new(q: DMatrix<f64>, c: Vec<f64>) -> Result<Self> {
        if q.nrows() != c.len() || q.ncols() != c.len() {
            return Err(Error::BadDimension("quadratic form and linear term disagree".into()));
        }
        let q = (&q + q.transpose()) * 0.5;
        Ok(Self { q, c: DVector::from_vec(c) })
    }
}

impl ScalarField for QuadraticField {
    fn dim(&self) -> usize {
        self.c.len()
    }
    fn kind(&self) -> FieldKind {
        FieldKind::Quadratic
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        check_dim(self.dim(), x)?;
        let x = x.as_dvector();
        Ok(0.5 * x.dot(&(&self.q * x)) + self.c.dot(x))
    }
    fn differential(&self, x: &Vector) -> Result<Covector> {
        check_dim(self.dim(), x)?;
        Ok(Covector::from_dvector(&self.q * x.as_dvector() + &self.c))
    }
    fn hessian(&self, x: &Vector) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), x)?;
        Ok(self.q.clone())
    }
    fn describe(&self) -> String {
        "quadratic".into()
    }
}

/// `phi(f)` for a profile `phi`.
#[derive(Clone, Debug)]
pub struct ComposedField {
    inner: Arc<dyn ScalarField>,
    phi: Arc<dyn Profile>,
}

impl ComposedField {
    pub fn new(inner: Arc<dyn ScalarField>, phi: Arc<dyn Profile>) -> Self {
        Self { inner, phi }
    }

    pub fn inner(&self) -> &Arc<dyn ScalarField> {
        &self.inner
    }

    pub fn profile(&self) -> &Arc<dyn Profile> {
        &self.phi
    }
}

impl ScalarField for ComposedField {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn kind(&self) -> FieldKind {
        FieldKind::Composed
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        Ok(self.phi.value(self.inner.value(x)?))
    }
    fn differential(&self, x: &Vector) -> Result<Covector> {
        let d = self.phi.derivatives(self.inner.value(x)?);
        Ok(self.inner.differential(x)?.scaled(d[1]))
    }
    fn hessian(&self, x: &Vector) -> Result<DMatrix<f64>> {
        let d = self.phi.derivatives(self.inner.value(x)?);
        let df = self.inner.differential(x)?.into_dvector();
        Ok(self.inner.hessian(x)? * d[1] + &df * df.transpose() * d[2])
    }
    fn sampling(&self) -> Sampling {
        self.inner.sampling()
    }
    fn regular_range(&self) -> (f64, f64) {
        let (lo, hi) = self.inner.regular_range();
        let map = |t: f64| if t.is_finite() { self.phi.value(t) } else { t };
        let (a, b) = (map(lo), map(hi));
        (a.min(b), a.max(b))
    }
    fn uses_finite_differences(&self) -> bool {
        self.inner.uses_finite_differences()
    }
    fn scale(&self) -> f64 {
        self.inner.scale()
    }
    fn describe(&self) -> String {
        format!("{} composed with {}", self.inner.describe(), self.phi.describe())
    }
}

type ValueFn = dyn Fn(&Vector) -> f64 + Send + Sync;

/// A user-supplied field known only through its values; derivatives are
/// Richardson-extrapolated central differences.
#[derive(Clone)]
pub struct FiniteDifferenceField {
    dim: usize,
    f: Arc<ValueFn>,
    range: (f64, f64),
    sampling: Sampling,
    step: f64,
}

impl Debug for FiniteDifferenceField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FiniteDifferenceField").field("dim", &self.dim).field("range", &self.range).finish()
    }
}

impl FiniteDifferenceField {
    pub fn new(dim: usize, f: Arc<ValueFn>, range: (f64, f64)) -> Self {
        Self { dim, f, range, sampling: Sampling::Radial { anchor: Vector::zeros(dim) }, step: 1e-3 }
    }

    pub fn with_sampling(mut self, sampling: Sampling) -> Self {
        self.sampling = sampling;
        self
    }

    fn h(&self, x: &Vector) -> f64 {
        self.step * x.euclidean_norm().max(1.0)
    }

    fn at(&self, x: &Vector, moves: &[(usize, f64)]) -> f64 {
        let mut p = x.as_dvector().clone();
        for &(i, h) in moves {
            p[i] += h;
        }
        (self.f)(&Vector::from_dvector(p))
    }
}

impl ScalarField for FiniteDifferenceField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn kind(&self) -> FieldKind {
        FieldKind::Custom
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        check_dim(self.dim, x)?;
        Ok((self.f)(x))
    }
    fn differential(&self, x: &Vector) -> Result<Covector> {
        check_dim(self.dim, x)?;
        let h = self.h(x);
        let d = |i: usize, h: f64| (self.at(x, &[(i, h)]) - self.at(x, &[(i, -h)])) / (2.0 * h);
        Ok(Covector::from_dvector(DVector::from_fn(self.dim, |i, _| (4.0 * d(i, h / 2.0) - d(i, h)) / 3.0)))
    }
    fn hessian(&self, x: &Vector) -> Result<DMatrix<f64>> {
        check_dim(self.dim, x)?;
        let h = 3.0 * self.h(x);
        let c = (self.f)(x);
        let d = |i: usize, j: usize, h: f64| {
            if i == j {
                (self.at(x, &[(i, h)]) - 2.0 * c + self.at(x, &[(i, -h)])) / (h * h)
            } else {
                (self.at(x, &[(i, h), (j, h)]) - self.at(x, &[(i, h), (j, -h)]) - self.at(x, &[(i, -h), (j, h)])
                    + self.at(x, &[(i, -h), (j, -h)]))
                    / (4.0 * h * h)
            }
        };
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in 0..=i {
                let v = (4.0 * d(i, j, h / 2.0) - d(i, j, h)) / 3.0;
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        Ok(out)
    }
    fn sampling(&self) -> Sampling {
        self.sampling.clone()
    }
    fn regular_range(&self) -> (f64, f64) {
        self.range
    }
    fn uses_finite_differences(&self) -> bool {
        true
    }
    fn describe(&self) -> String {
        "custom (finite differences)".into()
    }
}

/// Everything the differential operators need at one regular point.
#[derive(Clone, Debug)]
pub struct FieldPoint {
    pub x: Vector,
    pub value: f64,
    pub df: Covector,
    pub hessian: DMatrix<f64>,
    /// `grad f = L^{-1}(df)`.
    pub gradient: Vector,
    /// `F*(df) = F(grad f)`.
    pub fstar: f64,
    /// `g` at `grad f`.
    pub g_gradient: DMatrix<f64>,
    /// `g*` at `df`.
    pub g_dual: DMatrix<f64>,
}

/// Evaluate `f`, `df`, the Hessian and the gradient data at `x`.
pub fn field_point(norm: &MinkowskiNorm, field: &dyn ScalarField, x: &Vector) -> Result<FieldPoint> {
    if field.dim() != norm.dim() {
        return Err(Error::BadDimension(format!(
            "field dimension {} differs from norm dimension {}",
            field.dim(),
            norm.dim()
        )));
    }
    let value = field.value(x)?;
    let df = field.differential(x)?;
    let threshold = CRITICAL_THRESHOLD * field.scale();
    if df.euclidean_norm() < threshold {
        return Err(Error::CriticalPoint { fstar: df.euclidean_norm() });
    }
    let gradient = legendre_inverse(norm, &df)?;
    let fstar = norm.eval(&gradient)?;
    if fstar < threshold {
        return Err(Error::CriticalPoint { fstar });
    }
    let g_gradient = norm.local(&gradient, 2)?.g;
    let g_dual = match (norm.family(), norm.strategy()) {
        (NormFamily::Randers { b }, DerivativeStrategy::Analytic) => randers_dual_form(b).local(df.as_dvector(), 2)?.g,
        _ => spd_inverse(&g_gradient)?,
    };
    let hessian = field.hessian(x)?;
    Ok(FieldPoint { x: x.clone(), value, df, hessian, gradient, fstar, g_gradient, g_dual })
}

/// `grad f(x) = L^{-1}(df(x))`.
pub fn gradient(norm: &MinkowskiNorm, field: &dyn ScalarField, x: &Vector) -> Result<Vector> {
    let df = field.differential(x)?;
    let threshold = CRITICAL_THRESHOLD * field.scale();
    if df.euclidean_norm() < threshold {
        return Err(Error::CriticalPoint { fstar: df.euclidean_norm() });
    }
    let grad = legendre_inverse(norm, &df)?;
    let fstar = norm.eval(&grad)?;
    if fstar < threshold {
        return Err(Error::CriticalPoint { fstar });
    }
    Ok(grad)
}

impl FieldPoint {
    /// `D^2 f(X, Y) = g_{grad f}(nabla^2 f(X), Y)` with
    /// `nabla^2 f(X) = X^j d_j(grad f) = g*(df) Hf X`.
    pub fn hessian_form(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let second = &self.g_dual * (&self.hessian * x);
        y.dot(&(&self.g_gradient * second))
    }

    /// `g*^{ij}(df) f_ij`.
    pub fn laplacian(&self) -> f64 {
        (&self.g_dual * &self.hessian).trace()
    }

    /// Trace of `D^2 f` over a `g_{grad f}`-orthonormal basis.
    pub fn hessian_trace(&self) -> Result<f64> {
        let basis = orthonormal_basis(&self.g_gradient)?;
        Ok((0..basis.ncols())
            .map(|i| {
                let e = basis.column(i).into_owned();
                self.hessian_form(&e, &e)
            })
            .sum())
    }
}

/// Columns form a `g`-orthonormal basis.
pub fn orthonormal_basis(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(ch) = g.clone().cholesky() {
        if let Some(linv) = ch.l().try_inverse() {
            return Ok(linv.transpose());
        }
    }
    // Semidefinite g (k-th root norms on coordinate hyperplanes): an
    // orthonormal basis of its range.
    let (vals, vecs) = sorted_symmetric_eigen(g)?;
    let top = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if vals.iter().any(|&v| v < -1e-10 * top) || top == 0.0 {
        return Err(Error::DegenerateMetric("g is not positive semidefinite".into()));
    }
    let cols: Vec<DVector<f64>> =
        (0..vals.len()).filter(|&i| vals[i] > 1e-12 * top).map(|i| vecs.column(i) / vals[i].sqrt()).collect();
    Ok(DMatrix::from_columns(&cols))
}

pub fn hessian_form(norm: &MinkowskiNorm, field: &dyn ScalarField, x: &Vector, u: &Vector, v: &Vector) -> Result<f64> {
    let p = field_point(norm, field, x)?;
    Ok(p.hessian_form(u.as_dvector(), v.as_dvector()))
}

/// Volume form used for the divergence. Both are constant multiples of
/// Lebesgue measure on a Minkowski space, so they give the same Laplacian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Volume {
    BusemannHausdorff,
    HolmesThompson,
}

/// Finsler-Laplacian `g*^{ij}(df) f_ij`.
pub fn laplacian(norm: &MinkowskiNorm, field: &dyn ScalarField, x: &Vector, _volume: Volume) -> Result<f64> {
    Ok(field_point(norm, field, x)?.laplacian())
}

/// `(dual-trace Laplacian, trace of D^2 f over a g_{grad f}-orthonormal basis)`.
pub fn laplacian_trace_check(norm: &MinkowskiNorm, field: &dyn ScalarField, x: &Vector) -> Result<(f64, f64)> {
    let p = field_point(norm, field, x)?;
    Ok((p.laplacian(), p.hessian_trace()?))
}

/// `d_i (grad f)^i` by a fourth-order central difference of the gradient.
pub fn divergence_laplacian(norm: &MinkowskiNorm, field: &dyn ScalarField, x: &Vector) -> Result<f64> {
    let h = 1e-3 * x.euclidean_norm().max(1.0);
    let mut total = 0.0;
    for i in 0..x.dim() {
        let at = |s: f64| -> Result<f64> {
            let mut p = x.as_dvector().clone();
            p[i] += s;
            Ok(gradient(norm, field, &Vector::from_dvector(p))?[i])
        };
        total += (-at(2.0 * h)? + 8.0 * at(h)? - 8.0 * at(-h)? + at(-2.0 * h)?) / (12.0 * h);
    }
    Ok(total)
}

/// Busemann-Hausdorff and Holmes-Thompson densities relative to Lebesgue measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeConstant {
    pub sigma_bh: f64,
    pub sigma_ht: f64,
    pub bh_error: f64,
    pub ht_error: f64,
}

pub const MAX_VOLUME_DIM: usize = 6;

/// `sigma_BH = vol(B^n) / vol{F < 1}` and
/// `sigma_HT = (1/vol(B^n)) * int_{F < 1} det g`, by sphere quadrature at two
/// resolutions.
pub fn volume_constants(norm: &MinkowskiNorm) -> Result<VolumeConstant> {
    let n = norm.dim();
    if n > MAX_VOLUME_DIM {
        return Err(Error::DimensionTooLarge { dim: n, max: MAX_VOLUME_DIM });
    }
    let (lo, hi) = match n {
        2 => (96, 160),
        3 => (40, 64),
        4 => (20, 30),
        5 => (14, 20),
        _ => (10, 14),
    };
    let ball = sphere::unit_ball_volume(n);
    let weighted = |nodes: usize, det: bool| -> Result<f64> {
        sphere::integrate(n, nodes, |y| {
            let jet = norm.local(y, 2)?;
            let w = jet.value.powi(-(n as i32)) / n as f64;
            Ok(if det { w * jet.g.determinant() } else { w })
        })
    };
    let (bh_lo, bh_hi) = (weighted(lo, false)?, weighted(hi, false)?);
    let (ht_lo, ht_hi) = (weighted(lo, true)?, weighted(hi, true)?);
    let sigma_bh = ball / bh_hi;
    let sigma_ht = ht_hi / ball;
    Ok(VolumeConstant {
        sigma_bh,
        sigma_ht,
        bh_error: ((bh_hi - bh_lo) / bh_hi).abs(),
        ht_error: ((ht_hi - ht_lo) / ht_hi).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_potential_laplacian_is_dimension() {
        let norm = MinkowskiNorm::randers(vec![0.5, 0.0, 0.2]).unwrap();
        let f = SpherePotential::new(&norm, false);
        let x = Vector::new(vec![0.3, -1.2, 0.7]);
        let (a, b) = laplacian_trace_check(&norm, &f, &x).unwrap();
        assert_relative_eq!(a, 3.0, epsilon = 1e-12);
        assert_relative_eq!(b, 3.0, epsilon = 1e-12);
        let g = gradient(&norm, &f, &x).unwrap();
        assert_relative_eq!(g.as_dvector(), x.as_dvector(), epsilon = 1e-12);
    }

    #[test]
    fn composed_field_derivatives() {
        let norm = MinkowskiNorm::euclidean(2).unwrap();
        let inner: Arc<dyn ScalarField> = Arc::new(SpherePotential::new(&norm, false));
        let phi = Arc::new(crate::profile::PolynomialProfile::new(vec![0.0, 0.0, 1.0]));
        let f = ComposedField::new(inner, phi);
        let x = Vector::new(vec![1.0, 2.0]);
        // (|x|^2/2)^2 = |x|^4/4; Hessian = |x|^2 I + 2 x x^T
        let h = f.hessian(&x).unwrap();
        assert_relative_eq!(h[(0, 0)], 5.0 + 2.0, epsilon = 1e-14);
        assert_relative_eq!(h[(0, 1)], 4.0, epsilon = 1e-14);
    }

    #[test]
    fn randers_volume_constants() {
        let norm = MinkowskiNorm::randers(vec![0.5, 0.0]).unwrap();
        let v = volume_constants(&norm).unwrap();
        assert_relative_eq!(v.sigma_bh, 0.75f64.powf(1.5), max_relative = 1e-9);
        assert_relative_eq!(v.sigma_ht, 1.0, max_relative = 1e-9);
        assert!(v.bh_error < 1e-4 && v.ht_error < 1e-4);
    }
}
