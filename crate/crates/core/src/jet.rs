//! Dense multivariate truncated Taylor polynomials ("jets").
//!
//! A [`Jet`] stores the Taylor coefficients of a function of `nvars` variables
//! up to total degree `order`. Arithmetic propagates all mixed partial
//! derivatives exactly (up to rounding), which gives derivatives of order up
//! to four of any norm built from `+`, `*`, `sqrt`, `powf` and profiles.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

pub const MAX_VARS: usize = 8;
pub const MAX_ORDER: usize = 4;

/// Monomial tables shared by all jets with the same shape.
#[derive(Debug)]
pub struct JetSpace {
    nvars: usize,
    order: usize,
    exponents: Vec<Vec<u8>>,
    degree: Vec<usize>,
    lookup: HashMap<Vec<u8>, usize>,
    products: Vec<(u32, u32, u32)>,
}

impl JetSpace {
    /// Shared space for `nvars` variables truncated at total degree `order`.
    pub fn get(nvars: usize, order: usize) -> Result<Arc<JetSpace>> {
        if nvars == 0 || nvars > MAX_VARS {
            return Err(Error::DimensionTooLarge { dim: nvars, max: MAX_VARS });
        }
        if order > MAX_ORDER {
            return Err(Error::InvalidParameter(format!("jet order {order} > {MAX_ORDER}")));
        }
        type Cache = Mutex<HashMap<(usize, usize), Arc<JetSpace>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|p| p.into_inner());
        Ok(guard.entry((nvars, order)).or_insert_with(|| Arc::new(JetSpace::build(nvars, order))).clone())
    }

    fn build(nvars: usize, order: usize) -> Self {
        let mut exponents: Vec<Vec<u8>> = Vec::new();
        for d in 0..=order {
            let mut current = vec![0u8; nvars];
            push_degree(&mut exponents, &mut current, 0, d);
        }
        let degree: Vec<usize> = exponents.iter().map(|e| e.iter().map(|&v| v as usize).sum()).collect();
        let lookup: HashMap<Vec<u8>, usize> = exponents.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        let mut products = Vec::new();
        for (i, a) in exponents.iter().enumerate() {
            for (j, b) in exponents.iter().enumerate() {
                if degree[i] + degree[j] > order {
                    continue;
                }
                let sum: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                products.push((i as u32, j as u32, lookup[&sum] as u32));
            }
        }
        JetSpace { nvars, order, exponents, degree, lookup, products }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    /// Index of the monomial whose exponents count the entries of `vars`.
    fn index_of(&self, vars: &[usize]) -> Option<usize> {
        let mut e = vec![0u8; self.nvars];
        for &v in vars {
            e[v] += 1;
        }
        self.lookup.get(&e).copied()
    }
}

fn push_degree(out: &mut Vec<Vec<u8>>, current: &mut Vec<u8>, var: usize, remaining: usize) {
    if var + 1 == current.len() {
        current[var] = remaining as u8;
        out.push(current.clone());
        current[var] = 0;
        return;
    }
    for take in (0..=remaining).rev() {
        current[var] = take as u8;
        push_degree(out, current, var + 1, remaining - take);
    }
    current[var] = 0;
}

/// Truncated multivariate Taylor polynomial.
#[derive(Clone, Debug)]
pub struct Jet {
    space: Arc<JetSpace>,
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, value: f64) -> Self {
        let mut coeffs = vec![0.0; space.len()];
        coeffs[0] = value;
        Self { space: space.clone(), coeffs }
    }

    /// The coordinate function `var` expanded around `value`.
    pub fn variable(space: &Arc<JetSpace>, var: usize, value: f64) -> Self {
        let mut j = Self::constant(space, value);
        if space.order >= 1 {
            let idx = space.index_of(&[var]).expect("first-order monomial");
            j.coeffs[idx] = 1.0;
        }
        j
    }

    /// All coordinate functions expanded around `point`.
    pub fn variables(space: &Arc<JetSpace>, point: &[f64]) -> Vec<Jet> {
        point.iter().enumerate().map(|(i, &v)| Self::variable(space, i, v)).collect()
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Mixed partial derivative with respect to the listed variables.
    pub fn derivative(&self, vars: &[usize]) -> f64 {
        if vars.len() > self.space.order {
            return 0.0;
        }
        let idx = self.space.index_of(vars).expect("monomial within order");
        let factor: f64 = self.space.exponents[idx].iter().map(|&e| (1..=e as u64).product::<u64>() as f64).product();
        self.coeffs[idx] * factor
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet { space: self.space.clone(), coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn add_constant(&self, s: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    /// `phi(self)` given `phi^(j)` at the constant term for `j = 0..=order`.
    pub fn compose(&self, derivs: &[f64]) -> Jet {
        let order = self.space.order;
        let mut delta = self.clone();
        delta.coeffs[0] = 0.0;
        let mut factorial = (1..=order as u64).product::<u64>() as f64;
        let coef = |j: usize| derivs.get(j).copied().unwrap_or(0.0);
        let mut acc = Jet::constant(&self.space, coef(order) / factorial);
        for j in (0..order).rev() {
            factorial /= (j + 1) as f64;
            acc = (&acc * &delta).add_constant(coef(j) / factorial);
        }
        acc
    }

    /// `self^p` for a positive constant term.
    pub fn powf(&self, p: f64) -> Jet {
        let u = self.value();
        let order = self.space.order;
        let mut derivs = Vec::with_capacity(order + 1);
        let mut c = 1.0;
        for j in 0..=order {
            derivs.push(c * u.powf(p - j as f64));
            c *= p - j as f64;
        }
        self.compose(&derivs)
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn recip(&self) -> Jet {
        self.powf(-1.0)
    }

    /// Integer power by repeated multiplication (valid for any sign).
    pub fn powi(&self, k: u32) -> Jet {
        let mut out = Jet::constant(&self.space, 1.0);
        for _ in 0..k {
            out = &out * self;
        }
        out
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        Jet { space: self.space.clone(), coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        Jet { space: self.space.clone(), coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect() }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for &(i, j, k) in &self.space.products {
            let a = self.coeffs[i as usize];
            if a != 0.0 {
                coeffs[k as usize] += a * rhs.coeffs[j as usize];
            }
        }
        Jet { space: self.space.clone(), coeffs }
    }
}

/// Total degree of monomial `idx`; exposed for tests of the tables.
pub fn monomial_degree(space: &JetSpace, idx: usize) -> usize {
    space.degree[idx]
}
