//! Tangent vectors and covectors of a finite-dimensional vector space.
//!
//! Both wrap a [`DVector`], but are distinct types so that index raising and
//! lowering only ever happen through an explicit metric or the Legendre map.

use std::fmt;
use std::ops::{Add, Index, Mul, Neg, Sub};

use nalgebra::DVector;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

macro_rules! tuple_type {
    ($name:ident, $doc:literal) => {
        #[doc = $doc]
        #[derive(Clone, PartialEq)]
        pub struct $name(DVector<f64>);

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                self.0.as_slice().serialize(s)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                Ok(Self::new(Vec::<f64>::deserialize(d)?))
            }
        }

        impl $name {
            pub fn new(components: Vec<f64>) -> Self {
                Self(DVector::from_vec(components))
            }

            pub fn from_slice(components: &[f64]) -> Self {
                Self(DVector::from_column_slice(components))
            }

            pub fn zeros(dim: usize) -> Self {
                Self(DVector::zeros(dim))
            }

            /// The `i`-th coordinate basis element.
            pub fn basis(dim: usize, i: usize) -> Self {
                let mut v = DVector::zeros(dim);
                v[i] = 1.0;
                Self(v)
            }

            pub fn from_dvector(v: DVector<f64>) -> Self {
                Self(v)
            }

            pub fn dim(&self) -> usize {
                self.0.len()
            }

            pub fn as_dvector(&self) -> &DVector<f64> {
                &self.0
            }

            pub fn into_dvector(self) -> DVector<f64> {
                self.0
            }

            pub fn as_slice(&self) -> &[f64] {
                self.0.as_slice()
            }

            /// Euclidean length of the coordinate tuple.
            pub fn euclidean_norm(&self) -> f64 {
                self.0.norm()
            }

            pub fn max_abs(&self) -> f64 {
                self.0.amax()
            }

            pub fn scaled(&self, s: f64) -> Self {
                Self(&self.0 * s)
            }

            pub fn iter(&self) -> impl Iterator<Item = &f64> {
                self.0.iter()
            }
        }

        impl Index<usize> for $name {
            type Output = f64;
            fn index(&self, i: usize) -> &f64 {
                &self.0[i]
            }
        }

        impl Add for &$name {
            type Output = $name;
            fn add(self, rhs: &$name) -> $name {
                $name(&self.0 + &rhs.0)
            }
        }

        impl Sub for &$name {
            type Output = $name;
            fn sub(self, rhs: &$name) -> $name {
                $name(&self.0 - &rhs.0)
            }
        }

        impl Neg for &$name {
            type Output = $name;
            fn neg(self) -> $name {
                $name(-&self.0)
            }
        }

        impl Mul<f64> for &$name {
            type Output = $name;
            fn mul(self, s: f64) -> $name {
                $name(&self.0 * s)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}{:?}", stringify!($name), self.0.as_slice())
            }
        }
    };
}

tuple_type!(Vector, "A tangent vector (or point) of the Minkowski space `V`.");
tuple_type!(Covector, "An element of the dual space `V*`.");

impl Covector {
    /// The natural pairing `xi(y)`.
    pub fn pair(&self, y: &Vector) -> f64 {
        self.0.dot(&y.0)
    }

    /// Reinterpret the components as a vector through the Euclidean
    /// identification. Only meaningful for Euclidean-based formulas.
    pub fn euclidean_sharp(&self) -> Vector {
        Vector(self.0.clone())
    }
}

impl Vector {
    /// Euclidean index lowering; counterpart of [`Covector::euclidean_sharp`].
    pub fn euclidean_flat(&self) -> Covector {
        Covector(self.0.clone())
    }
}
