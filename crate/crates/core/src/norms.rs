//! Minkowski norm families and their derivatives up to order four.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{Jet, JetSpace};
use crate::linalg::{Tensor3, Tensor4};
use crate::profile::Profile;
use crate::sphere;
use crate::vector::Vector;

/// Vectors shorter than this (Euclidean length) are treated as zero.
pub const ZERO_THRESHOLD: f64 = 1e-8;

/// How derivatives of `F^2/2` are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeStrategy {
    /// Closed forms where available (Euclidean, Randers, k-th root).
    Analytic,
    /// Truncated Taylor arithmetic through the norm's formula.
    TaylorArithmetic,
    /// Richardson-extrapolated central differences of the norm values.
    FiniteDifference,
}

impl DerivativeStrategy {
    pub fn name(self) -> &'static str {
        match self {
            DerivativeStrategy::Analytic => "analytic",
            DerivativeStrategy::TaylorArithmetic => "taylor",
            DerivativeStrategy::FiniteDifference => "fd",
        }
    }
}

#[derive(Clone, Debug)]
pub enum NormFamily {
    Euclidean,
    /// `|y| + <b, y>` with `|b| < 1`.
    Randers {
        b: DVector<f64>,
    },
    /// `(sum_i (y^i)^k)^(1/k)` for even `k > 2`.
    KthRoot {
        k: u32,
    },
    /// `|y| * phi(<b, y> / |y|)`.
    AlphaBeta {
        b: DVector<f64>,
        profile: Arc<dyn Profile>,
    },
}

impl NormFamily {
    pub fn name(&self) -> &'static str {
        match self {
            NormFamily::Euclidean => "euclidean",
            NormFamily::Randers { .. } => "randers",
            NormFamily::KthRoot { .. } => "kth_root",
            NormFamily::AlphaBeta { .. } => "alpha_beta",
        }
    }
}

/// Value, Legendre covector and derivative tensors of `F^2/2` at one point.
#[derive(Clone, Debug)]
pub struct NormJet {
    pub value: f64,
    /// Gradient of `F^2/2`, i.e. the Legendre image of the point.
    pub legendre: DVector<f64>,
    pub g: DMatrix<f64>,
    pub c: Option<Tensor3>,
    pub ccal: Option<Tensor4>,
}

/// The Cartan tensor and its derivative at a direction.
#[derive(Clone, Debug)]
pub struct CartanData {
    /// `C_ijk = (1/2) dg_ij/dy^k`.
    pub c: Tensor3,
    /// `dC_ijk/dy^l`.
    pub ccal: Tensor4,
}

/// An immutable Minkowski norm on `R^dim`.
#[derive(Clone)]
pub struct MinkowskiNorm {
    family: NormFamily,
    dim: usize,
    strategy: DerivativeStrategy,
}

impl fmt::Debug for MinkowskiNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MinkowskiNorm")
            .field("family", &self.family)
            .field("dim", &self.dim)
            .field("strategy", &self.strategy)
            .finish()
    }
}

impl MinkowskiNorm {
    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::build(NormFamily::Euclidean, dim)
    }

    pub fn randers(b: Vec<f64>) -> Result<Self> {
        let b = DVector::from_vec(b);
        let len = b.norm();
        if !(len < 1.0) {
            return Err(Error::InvalidParameter(format!("Randers drift needs |b| < 1, got {len}")));
        }
        let dim = b.len();
        Self::build(NormFamily::Randers { b }, dim)
    }

    pub fn kth_root(dim: usize, k: u32) -> Result<Self> {
        if k <= 2 || !k.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("k-th root norm needs even k > 2, got {k}")));
        }
        Self::build(NormFamily::KthRoot { k }, dim)
    }

    pub fn alpha_beta(b: Vec<f64>, profile: Arc<dyn Profile>) -> Result<Self> {
        let b = DVector::from_vec(b);
        let dim = b.len();
        Self::build(NormFamily::AlphaBeta { b, profile }, dim)
    }

    fn build(family: NormFamily, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::BadDimension(format!("norm dimension must be >= 2, got {dim}")));
        }
        let norm = MinkowskiNorm { family, dim, strategy: DerivativeStrategy::Analytic };
        norm.validate_convexity()?;
        Ok(norm)
    }

    /// Falsification test of strong convexity on a deterministic sphere grid.
    fn validate_convexity(&self) -> Result<()> {
        let count = 1usize << 8.max(self.dim + 4);
        for y in sphere::directions(self.dim, count, 0)? {
            let jet = self.local(&y, 2).map_err(|e| match e {
                Error::NotInDomain { value } => {
                    Error::DegenerateMetric(format!("F = {value} at direction {:?}", y.as_slice()))
                }
                other => other,
            })?;
            if jet.g.iter().any(|v| !v.is_finite()) || jet.g.clone().cholesky().is_none() {
                return Err(Error::DegenerateMetric(format!(
                    "g is not positive definite at direction {:?}",
                    y.as_slice()
                )));
            }
        }
        Ok(())
    }

    /// Same norm with a different derivative strategy.
    pub fn with_strategy(mut self, strategy: DerivativeStrategy) -> Result<Self> {
        if strategy == DerivativeStrategy::TaylorArithmetic && self.dim > crate::jet::MAX_VARS {
            return Err(Error::DimensionTooLarge { dim: self.dim, max: crate::jet::MAX_VARS });
        }
        self.strategy = strategy;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> &NormFamily {
        &self.family
    }

    pub fn strategy(&self) -> DerivativeStrategy {
        self.strategy
    }

    /// The drift `b` of a Randers norm.
    pub fn randers_drift(&self) -> Option<&DVector<f64>> {
        match &self.family {
            NormFamily::Randers { b } => Some(b),
            _ => None,
        }
    }

    pub fn is_reversible(&self) -> bool {
        match &self.family {
            NormFamily::Euclidean | NormFamily::KthRoot { .. } => true,
            NormFamily::Randers { b } => b.norm() == 0.0,
            NormFamily::AlphaBeta { b, profile } => {
                b.norm() == 0.0 || {
                    let s = 0.5 * b.norm();
                    (profile.value(s) - profile.value(-s)).abs() == 0.0
                }
            }
        }
    }

    /// The same norm expressed in coordinates `y' = Q y` for orthogonal `Q`.
    pub fn rotated(&self, q: &DMatrix<f64>) -> Result<Self> {
        if q.nrows() != self.dim || q.ncols() != self.dim {
            return Err(Error::BadDimension("rotation has the wrong shape".into()));
        }
        let defect = (q.transpose() * q - DMatrix::identity(self.dim, self.dim)).amax();
        if defect > 1e-10 {
            return Err(Error::InvalidParameter(format!("matrix is not orthogonal (defect {defect:e})")));
        }
        let family = match &self.family {
            NormFamily::Euclidean => NormFamily::Euclidean,
            NormFamily::Randers { b } => NormFamily::Randers { b: q * b },
            NormFamily::AlphaBeta { b, profile } => NormFamily::AlphaBeta { b: q * b, profile: profile.clone() },
            NormFamily::KthRoot { .. } => {
                return Err(Error::Unsupported(
                    "k-th root norms are not rotation invariant; rotate the data instead".into(),
                ))
            }
        };
        Ok(MinkowskiNorm { family, dim: self.dim, strategy: self.strategy })
    }

    fn check_vector(&self, y: &DVector<f64>) -> Result<()> {
        if y.len() != self.dim {
            return Err(Error::BadDimension(format!("expected {} components, got {}", self.dim, y.len())));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite vector component".into()));
        }
        let len = y.norm();
        if len < ZERO_THRESHOLD {
            return Err(Error::ZeroVector { norm: len });
        }
        Ok(())
    }

    /// `F(y)`.
    pub fn eval(&self, y: &Vector) -> Result<f64> {
        self.check_vector(y.as_dvector())?;
        self.value_unchecked(y.as_dvector())
    }

    pub(crate) fn value_unchecked(&self, y: &DVector<f64>) -> Result<f64> {
        let f = match &self.family {
            NormFamily::Euclidean => y.norm(),
            NormFamily::Randers { b } => y.norm() + b.dot(y),
            NormFamily::KthRoot { k } => {
                let s: f64 = y.iter().map(|v| v.powi(*k as i32)).sum();
                s.powf(1.0 / *k as f64)
            }
            NormFamily::AlphaBeta { b, profile } => {
                let a = y.norm();
                a * profile.value(b.dot(y) / a)
            }
        };
        if f > 0.0 {
            Ok(f)
        } else {
            Err(Error::NotInDomain { value: f })
        }
    }

    /// `g_ij(y) = (1/2) [F^2]_{y^i y^j}`.
    pub fn fundamental_tensor(&self, y: &Vector) -> Result<DMatrix<f64>> {
        let g = self.local(y, 2)?.g;
        if g.clone().cholesky().is_none() && !matches!(self.family, NormFamily::KthRoot { .. }) {
            return Err(Error::DegenerateMetric(format!("at {:?}", y.as_slice())));
        }
        Ok(g)
    }

    /// Cartan tensor and its derivative.
    pub fn cartan_tensors(&self, y: &Vector) -> Result<CartanData> {
        let jet = self.local(y, 4)?;
        Ok(CartanData {
            c: jet.c.expect("order 4 jet carries C"),
            ccal: jet.ccal.expect("order 4 jet carries the derivative of C"),
        })
    }

    /// `F_{y^i}(y)`.
    pub fn gradient(&self, y: &Vector) -> Result<DVector<f64>> {
        let jet = self.local(y, 1)?;
        Ok(jet.legendre / jet.value)
    }

    /// Value and derivatives of `F^2/2` up to `order` (1..=4).
    pub fn local(&self, y: &Vector, order: usize) -> Result<NormJet> {
        let y = y.as_dvector();
        self.check_vector(y)?;
        if !(1..=4).contains(&order) {
            return Err(Error::InvalidParameter(format!("derivative order {order} not in 1..=4")));
        }
        match self.strategy {
            DerivativeStrategy::FiniteDifference => self.fd_local(y, order),
            DerivativeStrategy::TaylorArithmetic => self.jet_local(y, order),
            DerivativeStrategy::Analytic => match &self.family {
                NormFamily::Euclidean => Ok(euclidean_local(y, order)),
                NormFamily::Randers { b } => {
                    RandersForm { a: DMatrix::identity(self.dim, self.dim), b: b.clone() }.local(y, order)
                }
                NormFamily::KthRoot { k } => Ok(kth_root_local(*k, y, order)),
                NormFamily::AlphaBeta { .. } => self.jet_local(y, order),
            },
        }
    }

    fn jet_f(&self, vars: &[Jet]) -> Jet {
        let space = vars[0].space().clone();
        let sum_sq = |vars: &[Jet]| {
            let mut acc = Jet::constant(&space, 0.0);
            for v in vars {
                acc = &acc + &(v * v);
            }
            acc
        };
        let linear = |b: &DVector<f64>| {
            let mut acc = Jet::constant(&space, 0.0);
            for (v, bi) in vars.iter().zip(b.iter()) {
                acc = &acc + &v.scale(*bi);
            }
            acc
        };
        match &self.family {
            NormFamily::Euclidean => sum_sq(vars).sqrt(),
            NormFamily::Randers { b } => &sum_sq(vars).sqrt() + &linear(b),
            NormFamily::KthRoot { k } => {
                let mut acc = Jet::constant(&space, 0.0);
                for v in vars {
                    acc = &acc + &v.powi(*k);
                }
                acc.powf(1.0 / *k as f64)
            }
            NormFamily::AlphaBeta { b, profile } => {
                let alpha = sum_sq(vars).sqrt();
                let s = &linear(b) * &alpha.recip();
                let phi = s.compose(&profile.derivatives(s.value()));
                &alpha * &phi
            }
        }
    }

    fn jet_local(&self, y: &DVector<f64>, order: usize) -> Result<NormJet> {
        let n = self.dim;
        let space = JetSpace::get(n, order)?;
        let vars = Jet::variables(&space, y.as_slice());
        let f = self.jet_f(&vars);
        if !(f.value() > 0.0) {
            return Err(Error::NotInDomain { value: f.value() });
        }
        let l = (&f * &f).scale(0.5);
        let legendre = DVector::from_fn(n, |i, _| l.derivative(&[i]));
        let g = if order >= 2 { DMatrix::from_fn(n, n, |i, j| l.derivative(&[i, j])) } else { DMatrix::zeros(n, n) };
        let c = (order >= 3).then(|| {
            let mut t = Tensor3::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        t.set(i, j, k, 0.5 * l.derivative(&[i, j, k]));
                    }
                }
            }
            t
        });
        let ccal = (order >= 4).then(|| {
            let mut t = Tensor4::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for m in 0..n {
                            t.set(i, j, k, m, 0.5 * l.derivative(&[i, j, k, m]));
                        }
                    }
                }
            }
            t
        });
        Ok(NormJet { value: f.value(), legendre, g, c, ccal })
    }

    fn fd_local(&self, y: &DVector<f64>, order: usize) -> Result<NormJet> {
        let n = self.dim;
        let scale = y.norm();
        let l = |p: &DVector<f64>| -> Result<f64> {
            let f = self.value_unchecked(p)?;
            Ok(0.5 * f * f)
        };
        let value = self.value_unchecked(y)?;
        let legendre = fd_gradient(&l, y, 1e-3 * scale)?;
        let g = if order >= 2 { fd_hessian(&l, y, 3e-3 * scale)? } else { DMatrix::zeros(n, n) };
        let c = if order >= 3 {
            let mut t = fd_third(&l, y, 5e-3 * scale, 3e-3 * scale)?;
            symmetrize3(&mut t);
            t.scale(0.5);
            Some(t)
        } else {
            None
        };
        let ccal = if order >= 4 {
            let mut t = fd_fourth(&l, y, 1e-2 * scale, 5e-3 * scale, 3e-3 * scale)?;
            symmetrize4(&mut t);
            t.scale(0.5);
            Some(t)
        } else {
            None
        };
        Ok(NormJet { value, legendre, g, c, ccal })
    }
}

fn euclidean_local(y: &DVector<f64>, order: usize) -> NormJet {
    let n = y.len();
    NormJet {
        value: y.norm(),
        legendre: y.clone(),
        g: DMatrix::identity(n, n),
        c: (order >= 3).then(|| Tensor3::zeros(n)),
        ccal: (order >= 4).then(|| Tensor4::zeros(n)),
    }
}

/// Set partitions of `{0, .., m-1}` for `m <= 4`.
fn set_partitions(m: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out: Vec<Vec<Vec<usize>>> = vec![vec![]];
    for e in 0..m {
        let mut next = Vec::new();
        for p in &out {
            for b in 0..p.len() {
                let mut q = p.clone();
                q[b].push(e);
                next.push(q);
            }
            let mut q = p.clone();
            q.push(vec![e]);
            next.push(q);
        }
        out = next;
    }
    out
}

/// Closed-form derivatives of `F^2/2 = psi(S)`, `S = sum (y^i)^k`, `psi = S^(2/k)/2`.
fn kth_root_local(k: u32, y: &DVector<f64>, order: usize) -> NormJet {
    let n = y.len();
    let kf = k as f64;
    let s: f64 = y.iter().map(|v| v.powi(k as i32)).sum();
    // psi^(j)(S)
    let mut psi = [0.0; 5];
    let mut c = 0.5;
    for (j, slot) in psi.iter_mut().enumerate() {
        *slot = c * s.powf(2.0 / kf - j as f64);
        c *= 2.0 / kf - j as f64;
    }
    // d^j/dy^j of y^k
    let mono = |v: f64, j: usize| -> f64 {
        let falling: f64 = (0..j).map(|i| kf - i as f64).product();
        falling * v.powi(k as i32 - j as i32)
    };
    let partitions: Vec<Vec<Vec<Vec<usize>>>> = (0..=4).map(set_partitions).collect();
    let deriv = |idx: &[usize]| -> f64 {
        let mut total = 0.0;
        'outer: for p in &partitions[idx.len()] {
            let mut prod = psi[p.len()];
            for block in p {
                let i = idx[block[0]];
                if block.iter().any(|&e| idx[e] != i) {
                    continue 'outer;
                }
                prod *= mono(y[i], block.len());
            }
            total += prod;
        }
        total
    };
    let legendre = DVector::from_fn(n, |i, _| deriv(&[i]));
    let g = DMatrix::from_fn(n, n, |i, j| deriv(&[i, j]));
    let c = (order >= 3).then(|| {
        let mut t = Tensor3::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    t.set(i, j, l, 0.5 * deriv(&[i, j, l]));
                }
            }
        }
        t
    });
    let ccal = (order >= 4).then(|| {
        let mut t = Tensor4::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    for m in 0..n {
                        t.set(i, j, l, m, 0.5 * deriv(&[i, j, l, m]));
                    }
                }
            }
        }
        t
    });
    NormJet { value: s.powf(1.0 / kf), legendre, g, c, ccal }
}

/// A Randers-type norm `sqrt(y^T A y) + <b, y>` with constant positive-definite `A`.
///
/// Covers the primal Randers norm (`A = I`), its dual (`A = a*`) and the
/// subspace dual, all with the same closed-form tensors.
#[derive(Clone, Debug)]
pub struct RandersForm {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl RandersForm {
    pub fn value(&self, y: &DVector<f64>) -> Result<f64> {
        let f = (y.dot(&(&self.a * y))).sqrt() + self.b.dot(y);
        if f > 0.0 {
            Ok(f)
        } else {
            Err(Error::NotInDomain { value: f })
        }
    }

    pub fn local(&self, y: &DVector<f64>, order: usize) -> Result<NormJet> {
        let n = y.len();
        let ay = &self.a * y;
        let alpha = y.dot(&ay).sqrt();
        let beta = self.b.dot(y);
        let f = alpha + beta;
        if !(f > 0.0) {
            return Err(Error::NotInDomain { value: f });
        }
        let ai = &ay / alpha;
        let fi = &ai + &self.b;
        let legendre = &fi * f;
        if order < 2 {
            return Ok(NormJet { value: f, legendre, g: DMatrix::zeros(n, n), c: None, ccal: None });
        }
        let h = &self.a - &ai * ai.transpose();
        let aij = &h / alpha;
        let ratio = f / alpha;
        let g = &h * ratio + &fi * fi.transpose();
        if order < 3 {
            return Ok(NormJet { value: f, legendre, g, c: None, ccal: None });
        }
        let a2 = alpha * alpha;
        let q = (&self.b * alpha - &ai * beta) / a2;
        let mut a3 = Tensor3::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let v = -(h[(i, k)] * ai[j] + h[(j, k)] * ai[i] + h[(i, j)] * ai[k]) / a2;
                    a3.set(i, j, k, v);
                }
            }
        }
        let mut c = Tensor3::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let v = q[k] * h[(i, j)] - ratio * (aij[(i, k)] * ai[j] + ai[i] * aij[(j, k)])
                        + aij[(i, k)] * fi[j]
                        + fi[i] * aij[(j, k)];
                    c.set(i, j, k, 0.5 * v);
                }
            }
        }
        if order < 4 {
            return Ok(NormJet { value: f, legendre, g, c: Some(c), ccal: None });
        }
        // Second derivative of F/alpha.
        let rkl = DMatrix::from_fn(n, n, |k, l| {
            (ai[l] * self.b[k] - self.b[l] * ai[k] - beta * aij[(k, l)]) / a2 - 2.0 * q[k] * ai[l] / alpha
        });
        let mut ccal = Tensor4::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = rkl[(k, l)] * h[(i, j)]
                            - q[k] * (aij[(i, l)] * ai[j] + ai[i] * aij[(j, l)])
                            - q[l] * (aij[(i, k)] * ai[j] + ai[i] * aij[(j, k)])
                            - ratio
                                * (a3.get(i, k, l) * ai[j]
                                    + aij[(i, k)] * aij[(j, l)]
                                    + aij[(i, l)] * aij[(j, k)]
                                    + ai[i] * a3.get(j, k, l))
                            + a3.get(i, k, l) * fi[j]
                            + aij[(i, k)] * aij[(j, l)]
                            + aij[(i, l)] * aij[(j, k)]
                            + fi[i] * a3.get(j, k, l);
                        ccal.set(i, j, k, l, 0.5 * v);
                    }
                }
            }
        }
        Ok(NormJet { value: f, legendre, g, c: Some(c), ccal: Some(ccal) })
    }
}

type ScalarFn<'a> = dyn Fn(&DVector<f64>) -> Result<f64> + 'a;

fn shifted(y: &DVector<f64>, i: usize, h: f64) -> DVector<f64> {
    let mut p = y.clone();
    p[i] += h;
    p
}

fn richardson(coarse: f64, fine: f64) -> f64 {
    (4.0 * fine - coarse) / 3.0
}

fn fd_gradient(l: &ScalarFn<'_>, y: &DVector<f64>, h: f64) -> Result<DVector<f64>> {
    let n = y.len();
    let mut out = DVector::zeros(n);
    for i in 0..n {
        let d = |h: f64| -> Result<f64> { Ok((l(&shifted(y, i, h))? - l(&shifted(y, i, -h))?) / (2.0 * h)) };
        out[i] = richardson(d(h)?, d(h / 2.0)?);
    }
    Ok(out)
}

fn fd_hessian(l: &ScalarFn<'_>, y: &DVector<f64>, h: f64) -> Result<DMatrix<f64>> {
    let n = y.len();
    let center = l(y)?;
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        let d =
            |h: f64| -> Result<f64> { Ok((l(&shifted(y, i, h))? - 2.0 * center + l(&shifted(y, i, -h))?) / (h * h)) };
        out[(i, i)] = richardson(d(h)?, d(h / 2.0)?);
        for j in 0..i {
            let d = |h: f64| -> Result<f64> {
                let pp = l(&shifted(&shifted(y, i, h), j, h))?;
                let pm = l(&shifted(&shifted(y, i, h), j, -h))?;
                let mp = l(&shifted(&shifted(y, i, -h), j, h))?;
                let mm = l(&shifted(&shifted(y, i, -h), j, -h))?;
                Ok((pp - pm - mp + mm) / (4.0 * h * h))
            };
            let v = richardson(d(h)?, d(h / 2.0)?);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

fn fd_third(l: &ScalarFn<'_>, y: &DVector<f64>, h: f64, h2: f64) -> Result<Tensor3> {
    let n = y.len();
    let mut out = Tensor3::zeros(n);
    for k in 0..n {
        let d = |h: f64| -> Result<DMatrix<f64>> {
            Ok((fd_hessian(l, &shifted(y, k, h), h2)? - fd_hessian(l, &shifted(y, k, -h), h2)?) / (2.0 * h))
        };
        let (coarse, fine) = (d(h)?, d(h / 2.0)?);
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, k, richardson(coarse[(i, j)], fine[(i, j)]));
            }
        }
    }
    Ok(out)
}

fn fd_fourth(l: &ScalarFn<'_>, y: &DVector<f64>, h: f64, h3: f64, h2: f64) -> Result<Tensor4> {
    let n = y.len();
    let mut out = Tensor4::zeros(n);
    for m in 0..n {
        let d = |h: f64| -> Result<Vec<f64>> {
            let p = fd_third(l, &shifted(y, m, h), h3, h2)?;
            let q = fd_third(l, &shifted(y, m, -h), h3, h2)?;
            let mut v = Vec::with_capacity(n * n * n);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        v.push((p.get(i, j, k) - q.get(i, j, k)) / (2.0 * h));
                    }
                }
            }
            Ok(v)
        };
        let (coarse, fine) = (d(h)?, d(h / 2.0)?);
        let mut idx = 0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    out.set(i, j, k, m, richardson(coarse[idx], fine[idx]));
                    idx += 1;
                }
            }
        }
    }
    Ok(out)
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(m - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, m - 1);
            out.push(q);
        }
    }
    out
}

fn symmetrize3(t: &mut Tensor3) {
    let n = t.dim();
    let perms = permutations(3);
    let src = t.clone();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let idx = [i, j, k];
                let s: f64 = perms.iter().map(|p| src.get(idx[p[0]], idx[p[1]], idx[p[2]])).sum();
                t.set(i, j, k, s / perms.len() as f64);
            }
        }
    }
}

fn symmetrize4(t: &mut Tensor4) {
    let n = t.dim();
    let perms = permutations(4);
    let src = t.clone();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let idx = [i, j, k, l];
                    let s: f64 = perms.iter().map(|p| src.get(idx[p[0]], idx[p[1]], idx[p[2]], idx[p[3]])).sum();
                    t.set(i, j, k, l, s / perms.len() as f64);
                }
            }
        }
    }
}
