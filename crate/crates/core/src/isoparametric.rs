//! Level-set sampling and verification of the transnormal and isoparametric
//! conditions, with the identities that isoparametric families must satisfy.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{field_point, ComposedField, Sampling, ScalarField};
use crate::error::{Error, Result};
use crate::hypersurface::{frame_at, frame_from_point, group_curvatures, grouping_tolerance, CurvatureGroup};
use crate::norms::{DerivativeStrategy, MinkowskiNorm};
use crate::profile::Profile;
use crate::sphere::{self, gauss_legendre};
use crate::vector::{Covector, Vector};

pub const REPORT_SCHEMA: u32 = 1;
/// Spread tolerance with analytic or jet derivatives.
pub const ANALYTIC_TOLERANCE: f64 = 1e-6;
/// Spread tolerance when any derivative is finite-differenced.
pub const FD_TOLERANCE: f64 = 1e-4;
/// Spreads in `(tol, INCONCLUSIVE_FACTOR * tol]` give an inconclusive verdict.
pub const INCONCLUSIVE_FACTOR: f64 = 10.0;
pub const MIN_SAMPLES: usize = 8;

/// One solved point of a level set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SamplePoint {
    pub direction_index: usize,
    pub x: Vector,
    /// `|f(x) - t|`.
    pub residual: f64,
    pub fstar: f64,
    pub laplacian: f64,
    pub principal_curvatures: Vec<f64>,
    pub groups: Vec<CurvatureGroup>,
    /// `d F*(df) / dt` measured along the normal.
    pub a_slope: f64,
    /// `d (Laplacian) / dt` measured along the normal.
    pub b_slope: f64,
    /// `|df|^2` (Euclidean), `<df, b>` and the Euclidean Laplacian, for Randers witnesses.
    pub euclidean: EuclideanData,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct EuclideanData {
    pub df_norm_sq: f64,
    pub drift_pairing: f64,
    pub laplacian: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelSample {
    pub level: f64,
    pub requested: usize,
    pub skipped: usize,
    pub points: Vec<SamplePoint>,
}

fn finite_differences(norm: &MinkowskiNorm, field: &dyn ScalarField) -> bool {
    field.uses_finite_differences() || norm.strategy() == DerivativeStrategy::FiniteDifference
}

fn check_level(field: &dyn ScalarField, t: f64) -> Result<()> {
    let (lo, hi) = field.regular_range();
    if t > lo && t < hi && t.is_finite() {
        Ok(())
    } else {
        Err(Error::LevelOutOfRange { level: t, lo, hi })
    }
}

/// Solve `f(anchor + s d) = t` for `s > 0`.
fn locate_on_ray(field: &dyn ScalarField, t: f64, anchor: &Vector, d: &Vector) -> Option<Vector> {
    let at = |s: f64| anchor + &d.scaled(s);
    let h = |s: f64| field.value(&at(s)).ok().map(|v| v - t);
    let h0 = h(0.0)?;
    if h0 == 0.0 {
        return None;
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut found = false;
    for _ in 0..90 {
        match h(hi) {
            Some(v) if v.signum() != h0.signum() => {
                found = true;
                break;
            }
            Some(_) => {
                lo = hi;
                hi *= 2.0;
            }
            None => return None,
        }
    }
    if !found {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match h(mid) {
            Some(v) if v.signum() == h0.signum() => lo = mid,
            Some(_) => hi = mid,
            None => return None,
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let mut s = 0.5 * (lo + hi);
    let mut best = h(s)?.abs();
    for _ in 0..2 {
        let x = at(s);
        let slope = match field.differential(&x) {
            Ok(df) => df.pair(d),
            Err(_) => break,
        };
        if slope == 0.0 {
            break;
        }
        let trial = s - h(s)? / slope;
        match h(trial) {
            Some(v) if v.abs() < best => {
                best = v.abs();
                s = trial;
            }
            _ => break,
        }
    }
    Some(at(s))
}

/// Point of `f = t` on the line through the part of `d` orthogonal to `normal`.
///
/// Tries `<normal, x> = t` first, then solves along the normal, which covers
/// reparametrized linear fields.
fn locate_on_plane(field: &dyn ScalarField, t: f64, normal: &Covector, d: &Vector) -> Option<Vector> {
    let c = normal.as_dvector();
    let c2 = c.norm_squared();
    let w = Vector::from_dvector(d.as_dvector() - c * (c.dot(d.as_dvector()) / c2));
    let guess = &w + &Vector::from_dvector(c * (t / c2));
    let close = |x: &Vector| field.value(x).is_ok_and(|v| (v - t).abs() <= 1e-12 * t.abs().max(1.0));
    if close(&guess) {
        return Some(guess);
    }
    if close(&w) {
        return Some(w);
    }
    let up = Vector::from_dvector(c / c2.sqrt());
    locate_on_ray(field, t, &w, &up).or_else(|| locate_on_ray(field, t, &w, &up.scaled(-1.0)))
}

/// Sample `count` points of the level set `f = t`.
pub fn sample_level(
    norm: &MinkowskiNorm,
    field: &dyn ScalarField,
    t: f64,
    count: usize,
    seed: u64,
) -> Result<LevelSample> {
    if count < MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!("need at least {MIN_SAMPLES} samples per level, got {count}")));
    }
    check_level(field, t)?;
    let n = field.dim();
    let dirs = sphere::directions(n, count, seed)?;
    let sampling = field.sampling();
    let results: Vec<Result<Option<SamplePoint>>> = dirs
        .par_iter()
        .enumerate()
        .map(|(i, d)| {
            let x = match &sampling {
                Sampling::Radial { anchor } => match locate_on_ray(field, t, anchor, d) {
                    Some(x) => x,
                    None => return Ok(None),
                },
                Sampling::Hyperplane { normal } => match locate_on_plane(field, t, normal, d) {
                    Some(x) => x,
                    None => return Ok(None),
                },
            };
            measure_point(norm, field, t, i, x).map(Some).map_err(|e| match e {
                Error::CriticalPoint { .. } => Error::CriticalPointOnLevel { level: t },
                other => other,
            })
        })
        .collect();
    let mut points = Vec::with_capacity(count);
    let mut skipped = 0;
    for r in results {
        match r? {
            Some(p) => points.push(p),
            None => skipped += 1,
        }
    }
    if 2 * skipped > count {
        return Err(Error::LevelNotReached { level: t, skipped, total: count });
    }
    Ok(LevelSample { level: t, requested: count, skipped, points })
}

fn measure_point(
    norm: &MinkowskiNorm,
    field: &dyn ScalarField,
    t: f64,
    index: usize,
    x: Vector,
) -> Result<SamplePoint> {
    let point = field_point(norm, field, &x)?;
    let residual = (point.value - t).abs();
    let laplacian = point.laplacian();
    let fstar = point.fstar;
    let euclidean = EuclideanData {
        df_norm_sq: point.df.as_dvector().norm_squared(),
        drift_pairing: norm.randers_drift().map(|b| b.dot(point.df.as_dvector())).unwrap_or(0.0),
        laplacian: point.hessian.trace(),
    };
    let frame = frame_from_point(norm, field, point, None)?;
    let normal = frame.normal.clone();
    // Along the unit normal f grows at rate F*(df).
    let h = 1e-4 * x.euclidean_norm().max(1.0);
    let plus = field_point(norm, field, &(&x + &normal.scaled(h)))?;
    let minus = field_point(norm, field, &(&x - &normal.scaled(h)))?;
    let a_slope = (plus.fstar - minus.fstar) / (2.0 * h) / fstar;
    let b_slope = (plus.laplacian() - minus.laplacian()) / (2.0 * h) / fstar;
    Ok(SamplePoint {
        direction_index: index,
        x,
        residual,
        fstar,
        laplacian,
        principal_curvatures: frame.principal_curvatures,
        groups: frame.groups,
        a_slope,
        b_slope,
        euclidean,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub spread: f64,
    /// Standard deviation over `|mean|` (infinite when the mean vanishes).
    pub cv: f64,
    /// `spread / (1 + |mean|)`, the quantity compared with the tolerance.
    pub normalized_spread: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Stats {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let spread = max - min;
        let cv = if mean != 0.0 {
            var.sqrt() / mean.abs()
        } else if var == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        Stats { mean, min, max, spread, cv, normalized_spread: spread / (1.0 + mean.abs()) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Yes,
    No,
    Inconclusive,
}

impl Verdict {
    pub fn classify(normalized_spread: f64, tol: f64) -> Verdict {
        if normalized_spread <= tol {
            Verdict::Yes
        } else if normalized_spread <= INCONCLUSIVE_FACTOR * tol {
            Verdict::Inconclusive
        } else {
            Verdict::No
        }
    }

    /// Both conditions: `No` dominates, then `Inconclusive`.
    pub fn and(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::No, _) | (_, Verdict::No) => Verdict::No,
            (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
            _ => Verdict::Yes,
        }
    }

    pub fn is_yes(self) -> bool {
        self == Verdict::Yes
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: f64,
    pub points: usize,
    pub skipped: usize,
    pub max_level_residual: f64,
    pub fstar: Stats,
    pub laplacian: Stats,
    /// Statistics of the `i`-th smallest principal curvature.
    pub curvatures: Vec<Stats>,
    /// Distinct values among the mean principal curvatures.
    pub groups: Vec<CurvatureGroup>,
    pub a_slope: f64,
    pub b_slope: f64,
    pub transnormal: Verdict,
    pub laplacian_constant: Verdict,
    pub curvatures_constant: Verdict,
}

/// A function tabulated at sorted nodes with slopes, evaluated by cubic Hermite interpolation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabulatedProfile {
    pub nodes: Vec<ProfileNode>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileNode {
    pub t: f64,
    pub value: f64,
    pub slope: f64,
}

impl TabulatedProfile {
    pub fn new(mut nodes: Vec<ProfileNode>) -> Self {
        nodes.sort_by(|a, b| a.t.total_cmp(&b.t));
        Self { nodes }
    }

    fn segment(&self, t: f64) -> Option<(usize, f64, f64)> {
        let n = self.nodes.len();
        if n == 0 {
            return None;
        }
        if n == 1 {
            return Some((0, 0.0, 0.0));
        }
        let i = match self.nodes.iter().position(|p| p.t > t) {
            Some(0) => 0,
            Some(i) => i - 1,
            None => n - 2,
        };
        let h = self.nodes[i + 1].t - self.nodes[i].t;
        Some((i, h, (t - self.nodes[i].t) / h))
    }

    /// Hermite interpolant (extrapolated by the end segments).
    pub fn eval(&self, t: f64) -> f64 {
        match self.segment(t) {
            None => f64::NAN,
            Some((i, 0.0, _)) => self.nodes[i].value,
            Some((i, h, s)) => {
                let (a, b) = (self.nodes[i], self.nodes[i + 1]);
                let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
                let h10 = s * (1.0 - s) * (1.0 - s);
                let h01 = s * s * (3.0 - 2.0 * s);
                let h11 = s * s * (s - 1.0);
                h00 * a.value + h10 * h * a.slope + h01 * b.value + h11 * h * b.slope
            }
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self.segment(t) {
            None => f64::NAN,
            Some((i, 0.0, _)) => self.nodes[i].slope,
            Some((i, h, s)) => {
                let (a, b) = (self.nodes[i], self.nodes[i + 1]);
                let d00 = 6.0 * s * s - 6.0 * s;
                let d10 = 3.0 * s * s - 4.0 * s + 1.0;
                let d01 = -d00;
                let d11 = 3.0 * s * s - 2.0 * s;
                (d00 * a.value + d01 * b.value) / h + d10 * a.slope + d11 * b.slope
            }
        }
    }
}

/// Second opinion for Randers norms from the Euclidean reformulation of the
/// transnormal and isoparametric equations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandersWitness {
    /// Largest `|r1| / (1 + |df|^2)`.
    pub max_r1: f64,
    /// Largest `|r2| / (1 + |Laplacian_euclid f|)`.
    pub max_r2: f64,
    pub transnormal: bool,
    pub isoparametric: bool,
    /// Witness and primal verdicts coincide wherever the primal verdict is conclusive.
    pub agrees: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema: u32,
    pub norm_family: String,
    pub dim: usize,
    pub strategy: DerivativeStrategy,
    pub field: String,
    pub finite_differences: bool,
    pub tolerance: f64,
    pub inconclusive_factor: f64,
    pub seed: u64,
    pub levels: Vec<LevelSummary>,
    pub transnormal: Verdict,
    pub isoparametric: Verdict,
    pub constant_principal_curvatures: Verdict,
    /// `F*(df)` as a function of the level.
    pub a_profile: TabulatedProfile,
    /// The Laplacian as a function of the level.
    pub b_profile: TabulatedProfile,
    pub randers_witness: Option<RandersWitness>,
    #[serde(skip)]
    pub samples: Vec<LevelSample>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Overrides the strategy-dependent default.
    pub tolerance: Option<f64>,
}

/// Randers residuals of the Euclidean reformulation at one point.
///
/// `r1 = |df|^2 - lambda a^2 - 2 a zeta`,
/// `r2 = Lap f - lambda b - (b / a + a') zeta`, with `zeta = <df, b>`.
pub fn randers_residuals(lambda: f64, e: &EuclideanData, a: f64, a_prime: f64, b: f64) -> (f64, f64) {
    let zeta = e.drift_pairing;
    let r1 = e.df_norm_sq - lambda * a * a - 2.0 * a * zeta;
    let r2 = e.laplacian - lambda * b - (b / a + a_prime) * zeta;
    (r1, r2)
}

/// Verify the transnormal and isoparametric conditions on the given levels.
pub fn verify(
    norm: &MinkowskiNorm,
    field: &dyn ScalarField,
    levels: &[f64],
    count: usize,
    options: VerifyOptions,
) -> Result<VerificationReport> {
    if levels.len() < 3 {
        return Err(Error::InsufficientLevels { needed: 3, got: levels.len() });
    }
    let fd = finite_differences(norm, field);
    let tol = options.tolerance.unwrap_or(if fd { FD_TOLERANCE } else { ANALYTIC_TOLERANCE });
    let samples: Vec<LevelSample> =
        levels.iter().map(|&t| sample_level(norm, field, t, count, options.seed)).collect::<Result<_>>()?;

    let mut summaries = Vec::with_capacity(samples.len());
    for s in &samples {
        let fstar: Vec<f64> = s.points.iter().map(|p| p.fstar).collect();
        let lap: Vec<f64> = s.points.iter().map(|p| p.laplacian).collect();
        let kcount = s.points.first().map(|p| p.principal_curvatures.len()).unwrap_or(0);
        let curvatures: Vec<Stats> = (0..kcount)
            .map(|i| Stats::of(&s.points.iter().map(|p| p.principal_curvatures[i]).collect::<Vec<_>>()))
            .collect();
        let means: Vec<f64> = curvatures.iter().map(|c| c.mean).collect();
        let groups = group_curvatures(&means, grouping_tolerance(fd, &means));
        let fstar = Stats::of(&fstar);
        let laplacian = Stats::of(&lap);
        let worst_k = curvatures.iter().map(|c| c.normalized_spread).fold(0.0, f64::max);
        let np = s.points.len().max(1) as f64;
        log::debug!(
            "level {}: {} points ({} skipped), F* spread {:.3e}, Laplacian spread {:.3e}, curvature spread {:.3e}",
            s.level,
            s.points.len(),
            s.skipped,
            fstar.normalized_spread,
            laplacian.normalized_spread,
            worst_k
        );
        summaries.push(LevelSummary {
            level: s.level,
            points: s.points.len(),
            skipped: s.skipped,
            max_level_residual: s.points.iter().map(|p| p.residual).fold(0.0, f64::max),
            transnormal: Verdict::classify(fstar.normalized_spread, tol),
            laplacian_constant: Verdict::classify(laplacian.normalized_spread, tol),
            curvatures_constant: Verdict::classify(worst_k, tol),
            fstar,
            laplacian,
            curvatures,
            groups,
            a_slope: s.points.iter().map(|p| p.a_slope).sum::<f64>() / np,
            b_slope: s.points.iter().map(|p| p.b_slope).sum::<f64>() / np,
        });
    }
    let fold = |f: &dyn Fn(&LevelSummary) -> Verdict| summaries.iter().map(f).fold(Verdict::Yes, Verdict::and);
    let transnormal = fold(&|l| l.transnormal);
    let isoparametric = transnormal.and(fold(&|l| l.laplacian_constant));
    let constant_principal_curvatures = fold(&|l| l.curvatures_constant);

    let a_profile = TabulatedProfile::new(
        summaries.iter().map(|l| ProfileNode { t: l.level, value: l.fstar.mean, slope: l.a_slope }).collect(),
    );
    let b_profile = TabulatedProfile::new(
        summaries.iter().map(|l| ProfileNode { t: l.level, value: l.laplacian.mean, slope: l.b_slope }).collect(),
    );

    let randers_witness = norm.randers_drift().map(|b| {
        let lambda = 1.0 - b.norm_squared();
        let mut max_r1: f64 = 0.0;
        let mut max_r2: f64 = 0.0;
        for (s, l) in samples.iter().zip(&summaries) {
            for p in &s.points {
                let (r1, r2) = randers_residuals(lambda, &p.euclidean, l.fstar.mean, l.a_slope, l.laplacian.mean);
                max_r1 = max_r1.max(r1.abs() / (1.0 + p.euclidean.df_norm_sq));
                max_r2 = max_r2.max(r2.abs() / (1.0 + p.euclidean.laplacian.abs()));
            }
        }
        let w_trans = max_r1 <= INCONCLUSIVE_FACTOR * tol;
        let w_iso = w_trans && max_r2 <= INCONCLUSIVE_FACTOR * tol;
        let agree = |primal: Verdict, witness: bool| match primal {
            Verdict::Yes => witness,
            Verdict::No => !witness,
            Verdict::Inconclusive => true,
        };
        RandersWitness {
            max_r1,
            max_r2,
            transnormal: w_trans,
            isoparametric: w_iso,
            agrees: agree(transnormal, w_trans) && agree(isoparametric, w_iso),
        }
    });

    Ok(VerificationReport {
        schema: REPORT_SCHEMA,
        norm_family: norm.family().name().into(),
        dim: norm.dim(),
        strategy: norm.strategy(),
        field: field.describe(),
        finite_differences: fd,
        tolerance: tol,
        inconclusive_factor: INCONCLUSIVE_FACTOR,
        seed: options.seed,
        levels: summaries,
        transnormal,
        isoparametric,
        constant_principal_curvatures,
        a_profile,
        b_profile,
        randers_witness,
        samples,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentityRow {
    pub level: f64,
    /// Mean over samples of the sum of principal curvatures.
    pub curvature_sum: f64,
    /// `a'(t) - b(t) / a(t)` from the fitted profiles.
    pub predicted_sum: f64,
    pub sum_residual: f64,
    /// Largest `|dk/drho - k^2|` along normal segments.
    pub riccati_residual: f64,
    /// `|sum k^2 - c / a^2|` when the count `c` of curved directions is known.
    pub square_residual: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentityResiduals {
    pub rows: Vec<IdentityRow>,
    pub max_sum_residual: f64,
    pub max_riccati_residual: f64,
    pub max_square_residual: Option<f64>,
}

/// Check the mean-curvature, Riccati and curvature-square identities of an
/// isoparametric family on every verified level.
pub fn consistency_identities(
    norm: &MinkowskiNorm,
    field: &dyn ScalarField,
    report: &VerificationReport,
) -> Result<IdentityResiduals> {
    if report.levels.len() < 5 {
        return Err(Error::InsufficientLevels { needed: 5, got: report.levels.len() });
    }
    if !report.isoparametric.is_yes() {
        return Err(Error::NotIsoparametric(format!("verdict is {:?}", report.isoparametric)));
    }
    let probes = 8;
    let mut rows = Vec::with_capacity(report.levels.len());
    for (summary, sample) in report.levels.iter().zip(&report.samples) {
        let t = summary.level;
        let a = report.a_profile.eval(t);
        let predicted_sum = report.a_profile.derivative(t) - report.b_profile.eval(t) / a;
        let curvature_sum = sample.points.iter().map(|p| p.principal_curvatures.iter().sum::<f64>()).sum::<f64>()
            / sample.points.len() as f64;
        let riccati: Vec<f64> = sample
            .points
            .par_iter()
            .take(probes)
            .map(|p| -> Result<f64> {
                let frame = frame_at(norm, field, &p.x)?;
                let h = 1e-4 * p.x.euclidean_norm().max(1e-3);
                let fp = frame_at(norm, field, &(&p.x + &frame.normal.scaled(h)))?;
                let fm = frame_at(norm, field, &(&p.x - &frame.normal.scaled(h)))?;
                let mut worst: f64 = 0.0;
                for (i, k) in frame.principal_curvatures.iter().enumerate() {
                    let dk = (fp.principal_curvatures[i] - fm.principal_curvatures[i]) / (2.0 * h);
                    worst = worst.max((dk - k * k).abs());
                }
                Ok(worst)
            })
            .collect::<Result<_>>()?;
        let square_residual = field.curved_directions().map(|c| {
            sample
                .points
                .iter()
                .map(|p| {
                    let sq: f64 = p.principal_curvatures.iter().map(|k| k * k).sum();
                    (sq - c as f64 / (a * a)).abs()
                })
                .fold(0.0, f64::max)
        });
        rows.push(IdentityRow {
            level: t,
            curvature_sum,
            predicted_sum,
            sum_residual: (curvature_sum - predicted_sum).abs(),
            riccati_residual: riccati.into_iter().fold(0.0, f64::max),
            square_residual,
        });
    }
    let max_sum_residual = rows.iter().map(|r| r.sum_residual).fold(0.0, f64::max);
    let max_riccati_residual = rows.iter().map(|r| r.riccati_residual).fold(0.0, f64::max);
    let max_square_residual = rows.iter().map(|r| r.square_residual).try_fold(0.0_f64, |m, v| v.map(|v| m.max(v)));
    Ok(IdentityResiduals { rows, max_sum_residual, max_riccati_residual, max_square_residual })
}

/// Integral curve of `grad f / F(grad f)` between two levels.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowResult {
    pub endpoint: Vector,
    /// `F`-length of the computed polygon.
    pub arclength: f64,
    /// `int_{t1}^{t2} dt / a(t)` with `a` measured on sampled level sets.
    pub expected_arclength: f64,
    /// Largest Euclidean distance of a trajectory point from the chord,
    /// relative to the chord length.
    pub straightness: f64,
    pub steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowOptions {
    pub steps: usize,
    pub quadrature_nodes: usize,
    pub samples_per_node: usize,
    pub seed: u64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { steps: 64, quadrature_nodes: 16, samples_per_node: MIN_SAMPLES, seed: 0 }
    }
}

/// Follow the unit normal field from `x0` on level `t1` to level `t2 > t1`.
pub fn f_segment_flow(
    norm: &MinkowskiNorm,
    field: &dyn ScalarField,
    x0: &Vector,
    t1: f64,
    t2: f64,
    options: FlowOptions,
) -> Result<FlowResult> {
    if !(t1 < t2) {
        return Err(Error::InvalidParameter(format!("need t1 < t2, got {t1} and {t2}")));
    }
    check_level(field, t1)?;
    check_level(field, t2)?;
    let start = field.value(x0)?;
    if (start - t1).abs() > 1e-8 * t1.abs().max(1.0) {
        return Err(Error::InvalidParameter(format!("start point has f = {start}, expected {t1}")));
    }
    let left = |x: &Vector, e: Error| -> Error {
        match e {
            Error::CriticalPoint { .. } => Error::LeftRegularRegion { level: field.value(x).unwrap_or(f64::NAN) },
            other => other,
        }
    };
    // With f as the parameter: dx/dt = grad f / F*(df)^2.
    let velocity = |x: &Vector| -> Result<Vector> {
        let p = field_point(norm, field, x).map_err(|e| left(x, e))?;
        Ok(p.gradient.scaled(1.0 / (p.fstar * p.fstar)))
    };
    let steps = options.steps.max(1);
    let dt = (t2 - t1) / steps as f64;
    let mut path = vec![x0.clone()];
    let mut x = x0.clone();
    for _ in 0..steps {
        let k1 = velocity(&x)?;
        let k2 = velocity(&(&x + &k1.scaled(0.5 * dt)))?;
        let k3 = velocity(&(&x + &k2.scaled(0.5 * dt)))?;
        let k4 = velocity(&(&x + &k3.scaled(dt)))?;
        let incr = &(&(&k1 + &k2.scaled(2.0)) + &k3.scaled(2.0)) + &k4;
        x = &x + &incr.scaled(dt / 6.0);
        path.push(x.clone());
    }
    for _ in 0..2 {
        let p = field_point(norm, field, &x).map_err(|e| left(&x, e))?;
        let normal = p.gradient.scaled(1.0 / p.fstar);
        x = &x - &normal.scaled((p.value - t2) / p.fstar);
    }
    *path.last_mut().expect("nonempty") = x.clone();

    let mut arclength = 0.0;
    for w in path.windows(2) {
        let d = &w[1] - &w[0];
        if d.euclidean_norm() > 0.0 {
            arclength += norm.eval(&d)?;
        }
    }
    let chord = (&x - x0).into_dvector();
    let clen = chord.norm();
    let straightness = if clen > 0.0 {
        let u = &chord / clen;
        path.iter()
            .map(|p| {
                let v = (p - x0).into_dvector();
                (&v - &u * u.dot(&v)).norm() / clen
            })
            .fold(0.0, f64::max)
    } else {
        0.0
    };

    let (gx, gw) = gauss_legendre(options.quadrature_nodes);
    let half = 0.5 * (t2 - t1);
    let mid = 0.5 * (t1 + t2);
    let mut expected_arclength = 0.0;
    for (xi, wi) in gx.iter().zip(&gw) {
        let t = mid + half * xi;
        let s = sample_level(norm, field, t, options.samples_per_node.max(MIN_SAMPLES), options.seed)?;
        let a = s.points.iter().map(|p| p.fstar).sum::<f64>() / s.points.len() as f64;
        expected_arclength += wi * half / a;
    }
    Ok(FlowResult { endpoint: x, arclength, expected_arclength, straightness, steps })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Reparametrization {
    pub report: VerificationReport,
    /// Largest `|a_new - phi' a| / (1 + |phi' a|)` over levels.
    pub a_residual: f64,
    /// Largest `|b_new - (phi'' a^2 + phi' b)| / (1 + |...|)` over levels.
    pub b_residual: f64,
}

/// Verify `phi(f)` on the images of the verified levels and compare its
/// profiles with the transformation rule for reparametrizations.
pub fn reparametrize_isoparametric(
    norm: &MinkowskiNorm,
    field: Arc<dyn ScalarField>,
    report: &VerificationReport,
    phi: Arc<dyn Profile>,
    count: usize,
) -> Result<Reparametrization> {
    if !report.isoparametric.is_yes() {
        return Err(Error::NotIsoparametric(format!("verdict is {:?}", report.isoparametric)));
    }
    for l in &report.levels {
        let slope = phi.derivatives(l.level)[1];
        if !(slope > 0.0) {
            return Err(Error::NotMonotone { t: l.level, slope });
        }
    }
    let composed = ComposedField::new(field, phi.clone());
    let levels: Vec<f64> = report.levels.iter().map(|l| phi.value(l.level)).collect();
    let new = verify(
        norm,
        &composed,
        &levels,
        count,
        VerifyOptions { seed: report.seed, tolerance: Some(report.tolerance) },
    )?;
    let mut a_residual: f64 = 0.0;
    let mut b_residual: f64 = 0.0;
    for (old, fresh) in report.levels.iter().zip(&new.levels) {
        let d = phi.derivatives(old.level);
        let a = old.fstar.mean;
        let pa = d[1] * a;
        let pb = d[2] * a * a + d[1] * old.laplacian.mean;
        a_residual = a_residual.max((fresh.fstar.mean - pa).abs() / (1.0 + pa.abs()));
        b_residual = b_residual.max((fresh.laplacian.mean - pb).abs() / (1.0 + pb.abs()));
    }
    Ok(Reparametrization { report: new, a_residual, b_residual })
}
