//! Deterministic point sets on the Euclidean unit sphere and product
//! Gauss-Legendre quadrature over it.

use std::f64::consts::{FRAC_1_PI, PI};

use crate::error::{Error, Result};
use crate::vector::Vector;

const GOLDEN: f64 = 0.618_033_988_749_894_8;
const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn frac(x: f64) -> f64 {
    x - x.floor()
}

/// Seed-dependent shift in `[0, 1)`; seed 0 still avoids lattice points that
/// sit exactly on coordinate hyperplanes.
fn shift(seed: u64, salt: f64) -> f64 {
    frac(FRAC_1_PI * salt + seed as f64 * GOLDEN)
}

/// `count` unit directions in `R^dim`.
///
/// Circle: equally spaced angles. 2-sphere: Fibonacci lattice. Higher
/// dimensions: a shifted Halton sequence pushed through Box-Muller.
pub fn directions(dim: usize, count: usize, seed: u64) -> Result<Vec<Vector>> {
    if dim == 0 {
        return Err(Error::BadDimension("sphere directions need dim >= 1".into()));
    }
    Ok(match dim {
        1 => (0..count).map(|i| Vector::new(vec![if i % 2 == 0 { 1.0 } else { -1.0 }])).collect(),
        2 => {
            let s = shift(seed, 1.0);
            (0..count)
                .map(|i| {
                    let th = 2.0 * PI * (i as f64 + 0.5 + 0.3 * s + 0.1234) / count as f64;
                    Vector::new(vec![th.cos(), th.sin()])
                })
                .collect()
        }
        3 => {
            let s = shift(seed, 2.0);
            (0..count)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.6) / count as f64;
                    let rho = (1.0 - z * z).max(0.0).sqrt();
                    let ph = 2.0 * PI * frac(i as f64 * GOLDEN + s + 0.0731);
                    Vector::new(vec![rho * ph.cos(), rho * ph.sin(), z])
                })
                .collect()
        }
        _ => {
            let pairs = dim.div_ceil(2);
            if 2 * pairs > PRIMES.len() {
                return Err(Error::DimensionTooLarge { dim, max: PRIMES.len() });
            }
            let offsets: Vec<f64> = (0..2 * pairs).map(|j| shift(seed, 3.0 + j as f64)).collect();
            (0..count)
                .map(|i| {
                    let mut comps = Vec::with_capacity(2 * pairs);
                    for p in 0..pairs {
                        let u1 = frac(halton(i as u64 + 1, PRIMES[2 * p]) + offsets[2 * p]);
                        let u2 = frac(halton(i as u64 + 1, PRIMES[2 * p + 1]) + offsets[2 * p + 1]);
                        let r = (-2.0 * (1.0 - u1).max(1e-300).ln()).sqrt();
                        comps.push(r * (2.0 * PI * u2).cos());
                        comps.push(r * (2.0 * PI * u2).sin());
                    }
                    comps.truncate(dim);
                    let v = Vector::new(comps);
                    let len = v.euclidean_norm();
                    v.scaled(1.0 / len)
                })
                .collect()
        }
    })
}

/// Radical inverse of `i` in base `b`.
fn halton(mut i: u64, b: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= b as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integral of `h` over the unit sphere `S^{dim-1}` using hyperspherical
/// coordinates: Gauss-Legendre in the polar angles, trapezoid in the azimuth.
pub fn integrate<H>(dim: usize, nodes: usize, mut h: H) -> Result<f64>
where
    H: FnMut(&Vector) -> Result<f64>,
{
    if dim < 2 {
        return Err(Error::BadDimension("sphere quadrature needs dim >= 2".into()));
    }
    let az = 2 * nodes;
    let polar = dim - 2;
    let (gx, gw) = gauss_legendre(nodes);
    let mut idx = vec![0usize; polar];
    let mut total = 0.0;
    loop {
        // Polar angles theta_j in (0, pi) carry the weight sin^{dim-2-j}.
        let mut weight = 1.0;
        let mut prefix = vec![0.0; dim];
        let mut radius = 1.0;
        for (j, &ix) in idx.iter().enumerate() {
            let th = 0.5 * PI * (gx[ix] + 1.0);
            let (s, c) = th.sin_cos();
            weight *= 0.5 * PI * gw[ix] * s.powi((dim - 2 - j) as i32);
            prefix[j] = radius * c;
            radius *= s;
        }
        for a in 0..az {
            let ph = 2.0 * PI * (a as f64 + 0.5) / az as f64;
            let mut p = prefix.clone();
            p[dim - 2] = radius * ph.cos();
            p[dim - 1] = radius * ph.sin();
            total += weight * (2.0 * PI / az as f64) * h(&Vector::new(p))?;
        }
        let mut k = 0;
        loop {
            if k == polar {
                return Ok(total);
            }
            idx[k] += 1;
            if idx[k] < nodes {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Volume of the Euclidean unit ball in `R^dim`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    // omega_n = 2 pi / n * omega_{n-2}
    match dim {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / dim as f64 * unit_ball_volume(dim - 2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn directions_are_unit_and_deterministic() {
        for dim in 2..=6 {
            let a = directions(dim, 40, 7).unwrap();
            let b = directions(dim, 40, 7).unwrap();
            assert_eq!(a, b);
            for v in &a {
                assert_relative_eq!(v.euclidean_norm(), 1.0, epsilon = 1e-14);
                assert!(v.iter().all(|c| c.abs() > 0.0));
            }
        }
        assert_ne!(directions(3, 10, 0).unwrap(), directions(3, 10, 1).unwrap());
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert_relative_eq!(s, 2.0 / 15.0, epsilon = 1e-14);
    }

    #[test]
    fn sphere_area_matches_ball_volume() {
        for dim in 2..=6 {
            let area = integrate(dim, 16, |_| Ok(1.0)).unwrap();
            assert_relative_eq!(area, dim as f64 * unit_ball_volume(dim), max_relative = 1e-12);
        }
        let second = integrate(3, 16, |v| Ok(v[0] * v[0])).unwrap();
        assert_relative_eq!(second, 4.0 * PI / 3.0, max_relative = 1e-12);
    }
}
