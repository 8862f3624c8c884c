//! Extrinsic geometry of regular level sets: normal, shape operator,
//! principal and mean curvatures, Cartan curvature.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::calculus::{field_point, FieldPoint, ScalarField, Volume};
use crate::error::{Error, Result};
use crate::linalg::generalized_symmetric_eigen;
use crate::norms::{DerivativeStrategy, MinkowskiNorm};
use crate::vector::Vector;

/// A distinct principal curvature and its multiplicity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureGroup {
    pub value: f64,
    pub multiplicity: usize,
}

/// Frame data of a level set at one point.
#[derive(Clone, Debug)]
pub struct HypersurfacePointFrame {
    pub point: FieldPoint,
    /// `grad f / F(grad f)`.
    pub normal: Vector,
    /// Principal directions, orthonormal for `g_normal`.
    pub tangent_basis: Vec<Vector>,
    /// `g_normal` on the tangent basis.
    pub ghat: DMatrix<f64>,
    /// Second fundamental form on the tangent basis.
    pub hhat: DMatrix<f64>,
    /// Sorted ascending.
    pub principal_curvatures: Vec<f64>,
    pub groups: Vec<CurvatureGroup>,
    pub grouping_tolerance: f64,
    /// Tangent directions in the kernel of a semidefinite `g_normal`.
    pub null_directions: usize,
}

impl HypersurfacePointFrame {
    pub fn x(&self) -> &Vector {
        &self.point.x
    }

    pub fn fstar(&self) -> f64 {
        self.point.fstar
    }
}

/// Frame at `x` from projected coordinate axes.
pub fn frame_at(norm: &MinkowskiNorm, field: &dyn ScalarField, x: &Vector) -> Result<HypersurfacePointFrame> {
    let point = field_point(norm, field, x)?;
    frame_from_point(norm, field, point, None)
}

/// Frame at `x` from `n - 1` caller-chosen vectors spanning a complement of the normal.
pub fn frame_from_spanning(
    norm: &MinkowskiNorm,
    field: &dyn ScalarField,
    x: &Vector,
    spanning: &DMatrix<f64>,
) -> Result<HypersurfacePointFrame> {
    let point = field_point(norm, field, x)?;
    frame_from_point(norm, field, point, Some(spanning))
}

pub fn grouping_tolerance(finite_differences: bool, curvatures: &[f64]) -> f64 {
    let top = curvatures.iter().fold(0.0_f64, |m, k| m.max(k.abs()));
    if finite_differences {
        1e-4 * top.max(1.0)
    } else {
        1e-9_f64.max(1e-6 * top)
    }
}

/// Merge sorted values closer than `tol` to the first member of their group.
pub fn group_curvatures(sorted: &[f64], tol: f64) -> Vec<CurvatureGroup> {
    let mut groups: Vec<(f64, f64, usize)> = Vec::new();
    for &k in sorted {
        match groups.last_mut() {
            Some((first, sum, count)) if (k - *first).abs() <= tol => {
                *sum += k;
                *count += 1;
            }
            _ => groups.push((k, k, 1)),
        }
    }
    groups
        .into_iter()
        .map(|(_, sum, count)| CurvatureGroup { value: sum / count as f64, multiplicity: count })
        .collect()
}

pub(crate) fn frame_from_point(
    norm: &MinkowskiNorm,
    field: &dyn ScalarField,
    point: FieldPoint,
    spanning: Option<&DMatrix<f64>>,
) -> Result<HypersurfacePointFrame> {
    let n = norm.dim();
    let normal = point.gradient.scaled(1.0 / point.fstar);
    let nvec = normal.as_dvector();
    let df = point.df.as_dvector();
    let dfn = df.dot(nvec);
    let raw: DMatrix<f64> = match spanning {
        Some(s) => {
            if s.nrows() != n || s.ncols() != n - 1 {
                return Err(Error::BadDimension(format!("spanning set must be {n} x {}", n - 1)));
            }
            s.clone()
        }
        None => {
            let drop = (0..n).max_by(|&a, &b| df[a].abs().total_cmp(&df[b].abs())).expect("n >= 2");
            let mut cols = Vec::with_capacity(n - 1);
            for i in (0..n).filter(|&i| i != drop) {
                cols.push(DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 }));
            }
            DMatrix::from_columns(&cols)
        }
    };
    // Project along the normal onto ker(df), the tangent space.
    let mut b = raw;
    for c in 0..n - 1 {
        let coef = df.dot(&b.column(c)) / dfn;
        let col = b.column(c) - nvec * coef;
        b.set_column(c, &col);
    }
    let ghat_full = &point.g_gradient;
    let hhat_full = &point.hessian * (-1.0 / point.fstar);
    let gb = b.transpose() * ghat_full * &b;
    let hb = b.transpose() * &hhat_full * &b;
    let eig = generalized_symmetric_eigen(&hb, &gb)?;
    let e = &b * &eig.vectors;
    let tangent_basis = (0..n - 1).map(|c| Vector::from_dvector(e.column(c).into_owned())).collect();
    let ghat = e.transpose() * ghat_full * &e;
    let hhat = e.transpose() * &hhat_full * &e;
    let principal_curvatures: Vec<f64> = eig.values.iter().copied().collect();
    let fd = field.uses_finite_differences() || norm.strategy() == DerivativeStrategy::FiniteDifference;
    let tol = grouping_tolerance(fd, &principal_curvatures);
    let groups = group_curvatures(&principal_curvatures, tol);
    Ok(HypersurfacePointFrame {
        point,
        normal,
        tangent_basis,
        ghat,
        hhat,
        principal_curvatures,
        groups,
        grouping_tolerance: tol,
        null_directions: eig.null_directions,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanCurvatures {
    /// Sum of principal curvatures.
    pub hhat: f64,
    /// Mean curvature for the chosen volume; equal to `hhat` on a Minkowski space.
    pub h: f64,
    /// `|F(grad f) * hhat + sum_a D^2 f(e_a, e_a)|`.
    pub trace_residual: f64,
}

pub fn mean_curvatures(frame: &HypersurfacePointFrame, _volume: Volume) -> MeanCurvatures {
    let hhat: f64 = frame.principal_curvatures.iter().sum();
    let trace: f64 = frame.tangent_basis.iter().map(|e| frame.point.hessian_form(e.as_dvector(), e.as_dvector())).sum();
    MeanCurvatures { hhat, h: hhat, trace_residual: (frame.fstar() * hhat + trace).abs() }
}

/// Cartan curvature `Q_y(X, Y)` for mutually `g_y`-orthogonal `y, X, Y`.
pub fn cartan_curvature_q(norm: &MinkowskiNorm, y: &Vector, u: &Vector, v: &Vector) -> Result<f64> {
    let jet = norm.local(y, 4)?;
    let g = &jet.g;
    let (yd, ud, vd) = (y.as_dvector(), u.as_dvector(), v.as_dvector());
    let gq = |a: &DVector<f64>, b: &DVector<f64>| a.dot(&(g * b));
    let guu = gq(ud, ud);
    let gvv = gq(vd, vd);
    if !(guu > 0.0) || !(gvv > 0.0) {
        return Err(Error::InvalidParameter("X and Y must be nonzero".into()));
    }
    let gyy = gq(yd, yd);
    for (a, b, aa, bb) in [(yd, ud, gyy, guu), (yd, vd, gyy, gvv), (ud, vd, guu, gvv)] {
        let value = gq(a, b) / (aa * bb).sqrt();
        if value.abs() > 1e-8 {
            return Err(Error::NotOrthogonal { value });
        }
    }
    let c = jet.c.as_ref().expect("order 4");
    let ccal = jet.ccal.as_ref().expect("order 4");
    let cu = c.contract_last(ud) * ud; // C(X, ., X) = C(X, X, .)
    let cv = c.contract_last(vd) * vd;
    let ginv = crate::linalg::spd_inverse(g)?;
    let cc = cu.dot(&(&ginv * &cv));
    let f2 = jet.value * jet.value;
    Ok(2.0 * f2 / (guu * gvv) * (2.0 * cc - ccal.contract4(ud, ud, vd, vd)))
}

/// `K(e_a ^ e_b) = k_a k_b` off the diagonal, zero on it.
pub fn sectional_products(frame: &HypersurfacePointFrame) -> DMatrix<f64> {
    let k = &frame.principal_curvatures;
    DMatrix::from_fn(k.len(), k.len(), |a, b| if a == b { 0.0 } else { k[a] * k[b] })
}

/// Largest `|sum_{r != s} m_r k_s k_r / (k_s - k_r)|` over groups `s`.
pub fn cartan_formula_residual(groups: &[CurvatureGroup]) -> f64 {
    let mut worst: f64 = 0.0;
    for (s, gs) in groups.iter().enumerate() {
        let sum: f64 = groups
            .iter()
            .enumerate()
            .filter(|(r, _)| *r != s)
            .map(|(_, gr)| gr.multiplicity as f64 * gs.value * gr.value / (gs.value - gr.value))
            .sum();
        worst = worst.max(sum.abs());
    }
    worst
}

/// Largest `|k_a k_b (1 - Q_n(e_a, e_b))|` over principal directions in
/// different curvature groups.
pub fn two_curvature_residual(norm: &MinkowskiNorm, frame: &HypersurfacePointFrame) -> Result<f64> {
    let k = &frame.principal_curvatures;
    let group_of = |v: f64| {
        frame.groups.iter().position(|g| (g.value - v).abs() <= frame.grouping_tolerance).unwrap_or(usize::MAX)
    };
    let mut worst: f64 = 0.0;
    for a in 0..k.len() {
        for b in a + 1..k.len() {
            if group_of(k[a]) == group_of(k[b]) {
                continue;
            }
            let q = cartan_curvature_q(norm, &frame.normal, &frame.tangent_basis[a], &frame.tangent_basis[b])?;
            worst = worst.max((k[a] * k[b] * (1.0 - q)).abs());
        }
    }
    Ok(worst)
}
