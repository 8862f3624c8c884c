//! Legendre transform, dual norm, dual fundamental tensor and the dual of a
//! restricted co-norm on a coordinate subspace.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{spd_inverse, spd_solve};
use crate::norms::{DerivativeStrategy, MinkowskiNorm, NormFamily, RandersForm, ZERO_THRESHOLD};
use crate::sphere;
use crate::vector::{Covector, Vector};

const MAX_NEWTON: usize = 50;

/// `L(y) = g_y(y, .)`, the Legendre image of `y`.
pub fn legendre(norm: &MinkowskiNorm, y: &Vector) -> Result<Covector> {
    Ok(Covector::from_dvector(norm.local(y, 1)?.legendre))
}

fn check_covector(norm: &MinkowskiNorm, xi: &Covector) -> Result<f64> {
    if xi.dim() != norm.dim() {
        return Err(Error::BadDimension(format!("expected {} components, got {}", norm.dim(), xi.dim())));
    }
    if xi.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite covector component".into()));
    }
    let len = xi.euclidean_norm();
    if len < ZERO_THRESHOLD {
        return Err(Error::ZeroCovector { norm: len });
    }
    Ok(len)
}

fn accept_tolerance(norm: &MinkowskiNorm) -> f64 {
    match norm.strategy() {
        DerivativeStrategy::FiniteDifference => 1e-7,
        _ => 1e-12,
    }
}

/// Inverse Legendre map by damped Newton iteration on `L(y) = xi`.
pub fn legendre_inverse(norm: &MinkowskiNorm, xi: &Covector) -> Result<Vector> {
    let scale = check_covector(norm, xi)?;
    // The map is 1-homogeneous: solve for the unit covector and rescale.
    let target = xi.as_dvector() / scale;
    // Minimize the convex potential F(y)^2/2 - <xi, y>, whose gradient is L(y) - xi.
    let potential = |y: &DVector<f64>| -> Result<f64> {
        let f = norm.eval(&Vector::from_dvector(y.clone()))?;
        Ok(0.5 * f * f - target.dot(y))
    };
    let residual_of = |y: &DVector<f64>| -> Result<(f64, DVector<f64>)> {
        let r = norm.local(&Vector::from_dvector(y.clone()), 1)?.legendre - &target;
        Ok((r.amax(), r))
    };
    // Seeds: the minimizer along the Euclidean raise of xi, and one metric solve from it.
    let ray = target.clone() * (1.0 / norm.eval(&Vector::from_dvector(target.clone()))?.powi(2));
    let mut y = ray.clone();
    let mut pot = potential(&y)?;
    let g0 = norm.local(&Vector::from_dvector(ray.clone()), 2)?.g;
    if let Ok(alt) = spd_solve(&g0, &target) {
        if alt.norm() >= ZERO_THRESHOLD && alt.iter().all(|v| v.is_finite()) {
            if let Ok(p) = potential(&alt) {
                if p < pot {
                    y = alt;
                    pot = p;
                }
            }
        }
    }
    let (mut res, mut r) = residual_of(&y)?;
    let mut iterations = 0;
    while iterations < MAX_NEWTON && res > 0.0 {
        iterations += 1;
        let g = norm.local(&Vector::from_dvector(y.clone()), 2)?.g;
        // A small shift keeps the step finite where g degenerates (k-th root
        // norms on coordinate hyperplanes); the line search tames its length.
        let shift = 1e-15 * g.diagonal().amax();
        let step = spd_solve(&(g + DMatrix::identity(y.len(), y.len()) * shift), &(-&r))?;
        // Squared Newton decrement: the metric size of the residual. Small
        // components of xi stay resolved even when the max-norm residual is at rounding level.
        let decrement = -r.dot(&step);
        if !(decrement > 1e-32) || step.amax() <= 1e-16 * y.amax() {
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = &y + &step * t;
            if trial.norm() >= ZERO_THRESHOLD {
                if let (Ok(tpot), Ok((tres, tr))) = (potential(&trial), residual_of(&trial)) {
                    // Armijo on the potential far from the solution; close to it
                    // the potential is flat to rounding and full steps are taken.
                    let close = decrement < 1e-8 && tres <= 10.0 * res.max(1e-16);
                    if close || tpot <= pot - 1e-4 * t * decrement || tres < res {
                        y = trial;
                        pot = tpot;
                        res = tres;
                        r = tr;
                        accepted = true;
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if res <= accept_tolerance(norm) {
        Ok(Vector::from_dvector(y * scale))
    } else {
        Err(Error::NoConvergence { iterations, residual: res })
    }
}

/// Dual coefficients `(a*, b*)` of the Randers norm with drift `b`.
pub fn randers_dual_form(b: &DVector<f64>) -> RandersForm {
    let n = b.len();
    let lambda = 1.0 - b.norm_squared();
    let a = (DMatrix::identity(n, n) * lambda + b * b.transpose()) / (lambda * lambda);
    RandersForm { a, b: -b / lambda }
}

/// How `F*` is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualMode {
    /// Closed-form dual coefficients of a Randers norm.
    AnalyticRanders,
    /// Maximization of `xi(y)/F(y)` over a sphere grid with local refinement.
    SupOverIndicatrix,
    /// `F(L^{-1}(xi))`.
    NewtonLegendre,
}

/// The dual norm `F*` of a Minkowski norm.
#[derive(Clone, Debug)]
pub struct DualNorm {
    base: MinkowskiNorm,
    mode: DualMode,
    randers: Option<RandersForm>,
}

impl DualNorm {
    pub fn new(base: &MinkowskiNorm, mode: DualMode) -> Result<Self> {
        let randers = match base.family() {
            NormFamily::Randers { b } => Some(randers_dual_form(b)),
            _ => None,
        };
        if mode == DualMode::AnalyticRanders && randers.is_none() {
            return Err(Error::Unsupported(format!(
                "analytic dual needs a Randers norm, got {}",
                base.family().name()
            )));
        }
        Ok(Self { base: base.clone(), mode, randers })
    }

    /// Analytic for Randers norms, Newton otherwise.
    pub fn auto(base: &MinkowskiNorm) -> Self {
        let mode = match base.family() {
            NormFamily::Randers { .. } => DualMode::AnalyticRanders,
            _ => DualMode::NewtonLegendre,
        };
        Self::new(base, mode).expect("mode matches family")
    }

    pub fn base(&self) -> &MinkowskiNorm {
        &self.base
    }

    pub fn mode(&self) -> DualMode {
        self.mode
    }

    pub fn eval(&self, xi: &Covector) -> Result<f64> {
        check_covector(&self.base, xi)?;
        match self.mode {
            DualMode::AnalyticRanders => self.randers.as_ref().expect("checked").value(xi.as_dvector()),
            DualMode::NewtonLegendre => self.base.eval(&legendre_inverse(&self.base, xi)?),
            DualMode::SupOverIndicatrix => sup_over_indicatrix(&self.base, xi),
        }
    }

    /// `g*(xi)`, the fundamental tensor of `F*`.
    pub fn fundamental_tensor(&self, xi: &Covector) -> Result<DMatrix<f64>> {
        check_covector(&self.base, xi)?;
        match (&self.randers, self.base.strategy()) {
            (Some(form), DerivativeStrategy::Analytic) => Ok(form.local(xi.as_dvector(), 2)?.g),
            _ => {
                let y = legendre_inverse(&self.base, xi)?;
                spd_inverse(&self.base.local(&y, 2)?.g)
            }
        }
    }
}

/// `F*(xi)` with the default evaluation mode.
pub fn dual_norm(norm: &MinkowskiNorm, xi: &Covector) -> Result<f64> {
    DualNorm::auto(norm).eval(xi)
}

/// `g*(xi)` with the default evaluation mode.
pub fn dual_fundamental_tensor(norm: &MinkowskiNorm, xi: &Covector) -> Result<DMatrix<f64>> {
    DualNorm::auto(norm).fundamental_tensor(xi)
}

/// Brute-force `sup xi(y)/F(y)`: sphere grid, then coordinate pattern search.
fn sup_over_indicatrix(norm: &MinkowskiNorm, xi: &Covector) -> Result<f64> {
    let n = norm.dim();
    let count = if n <= 4 { 10_000 } else { 40_000 };
    let ratio =
        |y: &DVector<f64>| -> Result<f64> { Ok(xi.as_dvector().dot(y) / norm.eval(&Vector::from_dvector(y.clone()))?) };
    let mut best_y = DVector::zeros(n);
    let mut best = f64::NEG_INFINITY;
    for d in sphere::directions(n, count, 0)? {
        let v = ratio(d.as_dvector())?;
        if v > best {
            best = v;
            best_y = d.into_dvector();
        }
    }
    let mut step = 1e-2;
    while step > 1e-12 {
        let mut improved = false;
        for i in 0..n {
            for sign in [1.0, -1.0] {
                let mut trial = best_y.clone();
                trial[i] += sign * step;
                trial /= trial.norm();
                let v = ratio(&trial)?;
                if v > best {
                    best = v;
                    best_y = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(best)
}

/// The norm on the coordinate subspace spanned by the first `m` axes that is
/// dual to the restriction of `F*` to the matching covectors.
#[derive(Clone, Debug)]
pub struct SubspaceDual {
    base: MinkowskiNorm,
    m: usize,
    randers: Option<RandersForm>,
}

/// `F~` evaluated together with its Legendre covector and metric.
#[derive(Clone, Debug)]
pub struct SubspaceDualLocal {
    pub value: f64,
    pub legendre: DVector<f64>,
    pub g: DMatrix<f64>,
}

impl SubspaceDual {
    pub fn new(base: &MinkowskiNorm, m: usize) -> Result<Self> {
        if m == 0 || m >= base.dim() {
            return Err(Error::BadDimension(format!("subspace dimension {m} not in 1..{}", base.dim())));
        }
        let randers = match (base.family(), base.strategy()) {
            (NormFamily::Randers { b }, DerivativeStrategy::Analytic) => {
                let lambda = 1.0 - b.norm_squared();
                let bbar = b.rows(0, m).into_owned();
                let c = lambda + bbar.norm_squared();
                Some(RandersForm { a: DMatrix::identity(m, m) * c, b: bbar })
            }
            _ => None,
        };
        Ok(Self { base: base.clone(), m, randers })
    }

    /// The same construction forced through Newton iteration (test oracle).
    pub fn generic(base: &MinkowskiNorm, m: usize) -> Result<Self> {
        let mut s = Self::new(base, m)?;
        s.randers = None;
        Ok(s)
    }

    pub fn base(&self) -> &MinkowskiNorm {
        &self.base
    }

    pub fn subspace_dim(&self) -> usize {
        self.m
    }

    pub fn is_closed_form(&self) -> bool {
        self.randers.is_some()
    }

    pub fn eval(&self, ybar: &Vector) -> Result<f64> {
        Ok(self.local(ybar)?.value)
    }

    pub fn fundamental_tensor(&self, ybar: &Vector) -> Result<DMatrix<f64>> {
        Ok(self.local(ybar)?.g)
    }

    pub fn legendre(&self, ybar: &Vector) -> Result<Covector> {
        Ok(Covector::from_dvector(self.local(ybar)?.legendre))
    }

    /// Value, Legendre covector and fundamental tensor of `F~` at `ybar`.
    pub fn local(&self, ybar: &Vector) -> Result<SubspaceDualLocal> {
        let m = self.m;
        if ybar.dim() != m {
            return Err(Error::BadDimension(format!("expected {m} components, got {}", ybar.dim())));
        }
        let len = ybar.euclidean_norm();
        if len < ZERO_THRESHOLD {
            return Err(Error::ZeroVector { norm: len });
        }
        if let Some(form) = &self.randers {
            let j = form.local(ybar.as_dvector(), 2)?;
            return Ok(SubspaceDualLocal { value: j.value, legendre: j.legendre, g: j.g });
        }
        self.newton_local(ybar, len)
    }

    /// Solve `P L^{-1}(xi) = ybar` for `xi` in the subspace covectors.
    fn newton_local(&self, ybar: &Vector, len: f64) -> Result<SubspaceDualLocal> {
        let n = self.base.dim();
        let m = self.m;
        let target = ybar.as_dvector() / len;
        let embed = |v: &DVector<f64>| {
            let mut out = DVector::zeros(n);
            out.rows_mut(0, m).copy_from(v);
            out
        };
        let eval_at = |xibar: &DVector<f64>| -> Result<(DVector<f64>, DVector<f64>)> {
            let y = legendre_inverse(&self.base, &Covector::from_dvector(embed(xibar)))?;
            let r = y.as_dvector().rows(0, m) - &target;
            Ok((r, y.into_dvector()))
        };
        let mut xi =
            legendre(&self.base, &Vector::from_dvector(embed(&target)))?.into_dvector().rows(0, m).into_owned();
        let (mut r, mut y) = eval_at(&xi)?;
        let mut res = r.amax();
        let mut iterations = 0;
        while iterations < MAX_NEWTON && res > 1e-15 {
            iterations += 1;
            let ginv = spd_inverse(&self.base.local(&Vector::from_dvector(y.clone()), 2)?.g)?;
            let jac = ginv.view((0, 0), (m, m)).into_owned();
            let step = spd_solve(&jac, &(-&r))?;
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let trial = &xi + &step * t;
                if trial.norm() >= ZERO_THRESHOLD {
                    if let Ok((tr, ty)) = eval_at(&trial) {
                        let tres = tr.amax();
                        if tres < res {
                            xi = trial;
                            r = tr;
                            y = ty;
                            res = tres;
                            accepted = true;
                            break;
                        }
                    }
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if res > accept_tolerance(&self.base) {
            return Err(Error::NoConvergence { iterations, residual: res });
        }
        let y = Vector::from_dvector(y);
        let value = self.base.eval(&y)? * len;
        let ginv = spd_inverse(&self.base.local(&y, 2)?.g)?;
        let g = spd_inverse(&ginv.view((0, 0), (m, m)).into_owned())?;
        Ok(SubspaceDualLocal { value, legendre: xi * len, g })
    }
}
