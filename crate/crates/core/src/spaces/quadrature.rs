//! Quadrature on the reference triangle and the unit interval.
//!
//! The reference triangle has vertices (0,0), (1,0), (0,1). Rules beyond
//! degree 2 are collapsed Gauss-Legendre products (Duffy transform), which
//! are exact to any requested degree at the cost of a few extra points.

use std::f64::consts::PI;

use crate::mesh::Point;

#[derive(Clone, Debug)]
pub struct Quadrature {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// Polynomial degree integrated exactly.
    pub degree: usize,
}

impl Quadrature {
    /// A rule on the reference triangle exact for polynomials of total
    /// degree `degree`. Weights sum to 1/2.
    pub fn triangle(degree: usize) -> Quadrature {
        match degree {
            0 | 1 => Quadrature { points: vec![[1.0 / 3.0, 1.0 / 3.0]], weights: vec![0.5], degree: 1 },
            2 => Quadrature {
                points: vec![[1.0 / 6.0, 1.0 / 6.0], [2.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0]],
                weights: vec![1.0 / 6.0; 3],
                degree: 2,
            },
            _ => {
                // x = u, y = v (1 - u), dx dy = (1 - u) du dv; the extra factor
                // raises the degree in u by one
                let n = (degree + 2).div_ceil(2);
                let (gx, gw) = gauss_legendre(n);
                let mut points = Vec::with_capacity(n * n);
                let mut weights = Vec::with_capacity(n * n);
                for (&u, &wu) in gx.iter().zip(&gw) {
                    for (&v, &wv) in gx.iter().zip(&gw) {
                        points.push([u, v * (1.0 - u)]);
                        weights.push(wu * wv * (1.0 - u));
                    }
                }
                Quadrature { points, weights, degree }
            }
        }
    }

    /// Gauss-Legendre rule on [0, 1] exact for polynomials of `degree`.
    pub fn interval(degree: usize) -> Quadrature {
        let n = (degree + 2) / 2;
        let (x, w) = gauss_legendre(n.max(1));
        Quadrature { points: x.into_iter().map(|s| [s, 0.0]).collect(), weights: w, degree: 2 * n - 1 }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule mapped to [0, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        // Newton iteration on P_n from the Chebyshev-like initial guess
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d.is_finite() {
            dp = d;
        }
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}
