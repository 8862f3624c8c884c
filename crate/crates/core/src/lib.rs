//! Numerical kernel for Minkowski (flat Finsler) geometry.

pub mod calculus;
pub mod duality;
pub mod error;
pub mod hypersurface;
pub mod isoparametric;
pub mod jet;
pub mod linalg;
pub mod norms;
pub mod profile;
pub mod randers;
pub mod report;
pub mod sphere;
pub mod vector;

pub use error::{Error, Result};
pub use norms::{CartanData, DerivativeStrategy, MinkowskiNorm, NormFamily};
pub use profile::{PolynomialProfile, PowerProfile, Profile};
pub use vector::{Covector, Vector};
