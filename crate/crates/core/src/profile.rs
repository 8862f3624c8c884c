//! Smooth one-variable functions with derivatives up to order four.
//!
//! Used as the `phi` of (alpha, beta)-norms and as reparametrizations of
//! scalar fields.

use std::fmt::Debug;

/// A smooth real function of one variable.
pub trait Profile: Send + Sync + Debug {
    /// Value and derivatives `[phi, phi', phi'', phi''', phi'''']` at `s`.
    fn derivatives(&self, s: f64) -> [f64; 5];

    fn value(&self, s: f64) -> f64 {
        self.derivatives(s)[0]
    }

    /// Short human-readable description for reports.
    fn describe(&self) -> String;
}

/// `sum_j coeffs[j] * s^j`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialProfile {
    coeffs: Vec<f64>,
}

impl PolynomialProfile {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
}

impl Profile for PolynomialProfile {
    fn derivatives(&self, s: f64) -> [f64; 5] {
        let mut out = [0.0; 5];
        for (d, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in (d..self.coeffs.len()).rev() {
                let falling: f64 = (0..d).map(|i| (j - i) as f64).product();
                acc = acc * s + self.coeffs[j] * falling;
            }
            *slot = acc;
        }
        out
    }

    fn describe(&self) -> String {
        format!("polynomial{:?}", self.coeffs)
    }
}

/// `scale * s^exponent`, defined for `s > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerProfile {
    pub scale: f64,
    pub exponent: f64,
}

impl Profile for PowerProfile {
    fn derivatives(&self, s: f64) -> [f64; 5] {
        let mut out = [0.0; 5];
        let mut c = self.scale;
        for (d, slot) in out.iter_mut().enumerate() {
            *slot = c * s.powf(self.exponent - d as f64);
            c *= self.exponent - d as f64;
        }
        out
    }

    fn describe(&self) -> String {
        format!("{}*s^{}", self.scale, self.exponent)
    }
}
