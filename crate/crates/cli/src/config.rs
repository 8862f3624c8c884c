//! Scenario files.
//!
//! A scenario is a TOML document with a `[norm]` table, a `[field]` table and
//! the levels to examine. Unknown keys are rejected and errors carry the path
//! of the offending key.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use minkowski_core::calculus::{
    CylinderPotential, FiniteDifferenceField, LinearField, NormPlusLinear, QuadraticField, Sampling, ScalarField,
    SpherePotential,
};
use minkowski_core::{Covector, DerivativeStrategy, MinkowskiNorm, PolynomialProfile, Vector};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::expr::Expression;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Identifier written into every CSV row; defaults to the file stem.
    pub id: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub strategy: Option<Strategy>,
    pub norm: NormSpec,
    /// Required by `verify` and `curvatures`.
    pub field: Option<FieldSpec>,
    #[serde(default)]
    pub levels: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    pub tolerance: Option<f64>,
    pub expect: Option<Expectation>,
    #[serde(default)]
    pub dualcheck: DualcheckSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_samples() -> usize {
    32
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Analytic,
    Taylor,
    Fd,
}

impl From<Strategy> for DerivativeStrategy {
    fn from(s: Strategy) -> Self {
        match s {
            Strategy::Analytic => DerivativeStrategy::Analytic,
            Strategy::Taylor => DerivativeStrategy::TaylorArithmetic,
            Strategy::Fd => DerivativeStrategy::FiniteDifference,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Euclidean,
    Randers,
    KthRoot,
    /// `F = |y| phi(<b, y> / |y|)` with a polynomial `phi`.
    AlphaBeta,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSpec {
    pub family: Family,
    pub dim: Option<usize>,
    pub b: Option<Vec<f64>>,
    pub k: Option<u32>,
    /// Polynomial coefficients of `phi`, constant term first.
    pub phi: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Linear,
    Sphere,
    Cylinder,
    NormPlusLinear,
    Quadratic,
    /// Arithmetic expression in `x1..xn`, differentiated numerically.
    Expression,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub kind: FieldKind,
    pub c: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
    pub m: Option<usize>,
    #[serde(default)]
    pub reverse: bool,
    pub q: Option<Vec<Vec<f64>>>,
    pub expr: Option<String>,
    /// Open interval of regular values.
    pub range: Option<[f64; 2]>,
    pub anchor: Option<Vec<f64>>,
}

/// Check that exactly the keys in `needed` (plus `optional`) are present.
fn check_keys(
    table: &str,
    tag: &str,
    present: &[(&str, bool)],
    needed: &[&str],
    optional: &[&str],
) -> Result<(), String> {
    for (key, is_set) in present {
        if *is_set && !needed.contains(key) && !optional.contains(key) {
            return Err(format!("at `{table}.{key}`: not used by {tag}"));
        }
        if !*is_set && needed.contains(key) {
            return Err(format!("at `{table}.{key}`: required by {tag}"));
        }
    }
    Ok(())
}

impl NormSpec {
    fn validate(&self) -> Result<(), String> {
        let present = [
            ("dim", self.dim.is_some()),
            ("b", self.b.is_some()),
            ("k", self.k.is_some()),
            ("phi", self.phi.is_some()),
        ];
        let (tag, needed): (&str, &[&str]) = match self.family {
            Family::Euclidean => ("family `euclidean`", &["dim"]),
            Family::Randers => ("family `randers`", &["b"]),
            Family::KthRoot => ("family `kth_root`", &["dim", "k"]),
            Family::AlphaBeta => ("family `alpha_beta`", &["b", "phi"]),
        };
        check_keys("norm", tag, &present, needed, &[])
    }
}

impl FieldSpec {
    fn validate(&self) -> Result<(), String> {
        let present = [
            ("c", self.c.is_some()),
            ("b", self.b.is_some()),
            ("m", self.m.is_some()),
            ("reverse", self.reverse),
            ("q", self.q.is_some()),
            ("expr", self.expr.is_some()),
            ("range", self.range.is_some()),
            ("anchor", self.anchor.is_some()),
        ];
        let (tag, needed, optional): (&str, &[&str], &[&str]) = match self.kind {
            FieldKind::Linear => ("kind `linear`", &["c"], &[]),
            FieldKind::Sphere => ("kind `sphere`", &[], &["reverse"]),
            FieldKind::Cylinder => ("kind `cylinder`", &["m"], &["reverse"]),
            FieldKind::NormPlusLinear => ("kind `norm_plus_linear`", &["b", "m"], &[]),
            FieldKind::Quadratic => ("kind `quadratic`", &["q", "c"], &[]),
            FieldKind::Expression => ("kind `expression`", &["expr"], &["range", "anchor"]),
        };
        check_keys("field", tag, &present, needed, optional)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    Isoparametric,
    TransnormalOnly,
    NotTransnormal,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualcheckSpec {
    #[serde(default = "default_directions")]
    pub directions: usize,
    #[serde(default = "default_round_trip")]
    pub round_trip_tolerance: f64,
    #[serde(default = "default_agreement")]
    pub agreement_tolerance: f64,
    #[serde(default = "default_cartan")]
    pub cartan_tolerance: f64,
}

fn default_directions() -> usize {
    200
}
fn default_round_trip() -> f64 {
    1e-9
}
fn default_agreement() -> f64 {
    1e-8
}
fn default_cartan() -> f64 {
    1e-7
}

impl Default for DualcheckSpec {
    fn default() -> Self {
        Self {
            directions: default_directions(),
            round_trip_tolerance: default_round_trip(),
            agreement_tolerance: default_agreement(),
            cartan_tolerance: default_cartan(),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
        let mut scenario =
            Self::parse(&text).map_err(|message| CliError::Config { path: path.to_path_buf(), message })?;
        if scenario.id.is_none() {
            scenario.id = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(scenario)
    }

    /// Parse and validate; the error names the key path and position.
    pub fn parse(text: &str) -> Result<Self, String> {
        let de = toml::Deserializer::parse(text).map_err(|e| e.to_string())?;
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            format!("at `{path}`: {}", e.into_inner())
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    fn validate(&self) -> Result<(), String> {
        self.norm.validate()?;
        if let Some(f) = &self.field {
            f.validate()?;
        }
        if self.field.is_some() && self.levels.is_empty() {
            return Err("at `levels`: at least one level is required with a field".into());
        }
        if let Some(t) = self.levels.iter().find(|t| !t.is_finite()) {
            return Err(format!("at `levels`: level {t} is not finite"));
        }
        if let Some(tol) = self.tolerance {
            if !(tol > 0.0) {
                return Err(format!("at `tolerance`: must be positive, got {tol}"));
            }
        }
        Ok(())
    }

    pub fn id(&self) -> &str {
        self.id.as_deref().unwrap_or("scenario")
    }

    /// The norm with the command-line strategy taking precedence over the file.
    pub fn build_norm(&self, strategy: Option<Strategy>) -> Result<MinkowskiNorm, CliError> {
        let spec = &self.norm;
        let vec = |v: &Option<Vec<f64>>| v.clone().unwrap_or_default();
        let norm = match spec.family {
            Family::Euclidean => MinkowskiNorm::euclidean(spec.dim.unwrap_or(0))?,
            Family::Randers => MinkowskiNorm::randers(vec(&spec.b))?,
            Family::KthRoot => MinkowskiNorm::kth_root(spec.dim.unwrap_or(0), spec.k.unwrap_or(0))?,
            Family::AlphaBeta => {
                MinkowskiNorm::alpha_beta(vec(&spec.b), Arc::new(PolynomialProfile::new(vec(&spec.phi))))?
            }
        };
        match strategy.or(self.strategy) {
            Some(s) => Ok(norm.with_strategy(s.into())?),
            None => Ok(norm),
        }
    }

    pub fn build_field(&self, norm: &MinkowskiNorm) -> Result<Arc<dyn ScalarField>, CliError> {
        let n = norm.dim();
        let dim_check = |what: &str, len: usize| {
            if len == n {
                Ok(())
            } else {
                Err(CliError::Config {
                    path: PathBuf::from(self.id()),
                    message: format!("at `field.{what}`: expected {n} entries, got {len}"),
                })
            }
        };
        let Some(spec) = &self.field else {
            return Err(CliError::Config {
                path: PathBuf::from(self.id()),
                message: "at `field`: this command needs a [field] table".into(),
            });
        };
        let vec = |v: &Option<Vec<f64>>| v.clone().unwrap_or_default();
        let m = spec.m.unwrap_or(0);
        Ok(match spec.kind {
            FieldKind::Linear => {
                let c = vec(&spec.c);
                dim_check("c", c.len())?;
                Arc::new(LinearField::new(Covector::new(c))?)
            }
            FieldKind::Sphere => Arc::new(SpherePotential::new(norm, spec.reverse)),
            FieldKind::Cylinder => Arc::new(CylinderPotential::new(norm, m, spec.reverse)?),
            FieldKind::NormPlusLinear => {
                let b = vec(&spec.b);
                dim_check("b", b.len())?;
                Arc::new(NormPlusLinear::new(b, m)?)
            }
            FieldKind::Quadratic => {
                let c = vec(&spec.c);
                let q = spec.q.clone().unwrap_or_default();
                dim_check("c", c.len())?;
                dim_check("q", q.len())?;
                for row in &q {
                    dim_check("q", row.len())?;
                }
                Arc::new(QuadraticField::new(DMatrix::from_fn(n, n, |i, j| q[i][j]), c)?)
            }
            FieldKind::Expression => {
                let source = spec.expr.as_deref().unwrap_or_default();
                let e = Expression::compile(source, n).map_err(|message| CliError::Config {
                    path: PathBuf::from(self.id()),
                    message: format!("at `field.expr`: {message}"),
                })?;
                let range = spec.range.map(|[lo, hi]| (lo, hi)).unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
                let mut field = FiniteDifferenceField::new(n, Arc::new(move |x: &Vector| e.eval(x.as_slice())), range);
                if let Some(a) = &spec.anchor {
                    dim_check("anchor", a.len())?;
                    field = field.with_sampling(Sampling::Radial { anchor: Vector::new(a.clone()) });
                }
                Arc::new(field)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPHERE: &str = r#"
levels = [0.5, 1.0, 2.0]
[norm]
family = "randers"
b = [0.5, 0.0]
[field]
kind = "sphere"
"#;

    #[test]
    fn parses_minimal_scenario() {
        let s = Scenario::parse(SPHERE).unwrap();
        assert_eq!(s.samples, 32);
        assert_eq!(s.seed, 0);
        let field = s.field.as_ref().unwrap();
        assert_eq!(field.kind, FieldKind::Sphere);
        assert!(!field.reverse);
        let norm = s.build_norm(Some(Strategy::Taylor)).unwrap();
        assert_eq!(norm.strategy(), DerivativeStrategy::TaylorArithmetic);
    }

    #[test]
    fn rejects_unknown_keys_with_path() {
        let err = Scenario::parse(&SPHERE.replace("kind = \"sphere\"", "kind = \"sphere\"\nradius = 2")).unwrap_err();
        assert!(err.contains("field"), "{err}");
        assert!(err.contains("radius"), "{err}");
        let err = Scenario::parse(&format!("colour = 1\n{SPHERE}")).unwrap_err();
        assert!(err.contains("colour"), "{err}");
        let err = Scenario::parse(&SPHERE.replace("kind = \"sphere\"", "kind = \"sphere\"\nm = 2")).unwrap_err();
        assert!(err.contains("field.m"), "{err}");
        let err = Scenario::parse(&SPHERE.replace("family = \"randers\"", "family = \"kth_root\"")).unwrap_err();
        assert!(err.contains("norm.dim"), "{err}");
    }

    #[test]
    fn type_errors_name_the_field() {
        let err = Scenario::parse(&SPHERE.replace("[0.5, 0.0]", "[\"half\", 0.0]")).unwrap_err();
        assert!(err.contains("norm.b"), "{err}");
        let err = Scenario::parse(
            &SPHERE.replace("levels = [0.5, 1.0, 2.0]", "levels = [0.5, 1.0, 2.0]\nsamples = \"many\""),
        )
        .unwrap_err();
        assert!(err.contains("samples"), "{err}");
    }
}
