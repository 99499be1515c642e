//! Problem data: sources, boundary values and initial pressure, plus known
//! exact solutions used for verification.

use std::f64::consts::PI;

use crate::forms::MaterialParams;
use crate::mesh::Point;

/// Data of a multiple-network poroelasticity problem with Dirichlet
/// conditions on the whole boundary.
pub trait MpetProblem: Sync {
    fn params(&self) -> &MaterialParams;

    /// Body force `f(x, t)`.
    fn body_force(&self, x: Point, t: f64) -> [f64; 2];

    /// Fluid sources `g_j(x, t)`, one per network.
    fn fluid_source(&self, x: Point, t: f64, out: &mut [f64]);

    fn displacement_boundary(&self, x: Point, t: f64) -> [f64; 2];

    fn pressure_boundary(&self, x: Point, t: f64, out: &mut [f64]);

    /// Initial pressure `p(x, t0)`; defaults to the boundary data extended
    /// inside the domain.
    fn initial_pressure(&self, x: Point, t0: f64, out: &mut [f64]) {
        self.pressure_boundary(x, t0, out)
    }
}

/// A known solution of an [`MpetProblem`].
pub trait ExactSolution: Sync {
    fn displacement(&self, x: Point, t: f64) -> [f64; 2];

    /// `g[i][k] = ∂_k u_i`.
    fn displacement_gradient(&self, x: Point, t: f64) -> [[f64; 2]; 2];

    fn pressure(&self, x: Point, t: f64, out: &mut [f64]);

    fn pressure_gradient(&self, x: Point, t: f64, out: &mut [Point]);
}

/// Smooth three-network solution on the unit square:
///
/// * `u = 0.1 sin(πt) (cos πx sin πy, sin πx cos πy)`,
/// * `p_1 = sin πx cos πy sin 2πt`,
/// * `p_2 = cos πx sin πy sin πt`,
/// * `p_3 = sin πx sin πy t`,
///
/// with sources computed from the strong equations and Dirichlet data taken
/// from the solution itself.
#[derive(Clone, Debug)]
pub struct Manufactured {
    params: MaterialParams,
}

impl Manufactured {
    /// Requires exactly three networks.
    pub fn new(params: MaterialParams) -> Manufactured {
        assert_eq!(params.num_networks(), 3, "the manufactured solution has three networks");
        Manufactured { params }
    }

    /// μ = 1, λ = 10, α_j = 0.5, s_j = 1, κ_j = 1, γ_ij = 1.
    pub fn default_params() -> MaterialParams {
        MaterialParams::uniform(1.0, 10.0, 3, 0.5, 1.0, 1.0, 1.0).expect("default parameters are valid")
    }

    /// `div u` and its time derivative.
    fn divergence(x: Point, t: f64) -> (f64, f64) {
        let phi = (PI * x[0]).sin() * (PI * x[1]).sin();
        (-0.2 * PI * (PI * t).sin() * phi, -0.2 * PI * PI * (PI * t).cos() * phi)
    }

    /// Pressures and their time derivatives.
    fn pressures(x: Point, t: f64) -> ([f64; 3], [f64; 3]) {
        let (sx, cx) = (PI * x[0]).sin_cos();
        let (sy, cy) = (PI * x[1]).sin_cos();
        let p = [sx * cy * (2.0 * PI * t).sin(), cx * sy * (PI * t).sin(), sx * sy * t];
        let dp = [2.0 * PI * sx * cy * (2.0 * PI * t).cos(), PI * cx * sy * (PI * t).cos(), sx * sy];
        (p, dp)
    }
}

impl MpetProblem for Manufactured {
    fn params(&self) -> &MaterialParams {
        &self.params
    }

    fn body_force(&self, x: Point, t: f64) -> [f64; 2] {
        let p = &self.params;
        // u = (0.1/π) sin(πt) ∇φ, so div σ(u) = (2μ + λ) ∇ div u with
        // ∇ div u = -0.2 π² sin(πt) (cos πx sin πy, sin πx cos πy)
        let (sx, cx) = (PI * x[0]).sin_cos();
        let (sy, cy) = (PI * x[1]).sin_cos();
        let st = (PI * t).sin();
        let grad_div = [-0.2 * PI * PI * st * cx * sy, -0.2 * PI * PI * st * sx * cy];
        let mut grad_p = [[0.0; 2]; 3];
        self.pressure_gradient(x, t, &mut grad_p);
        let mut f = [0.0; 2];
        for c in 0..2 {
            f[c] = -(2.0 * p.mu + p.lambda) * grad_div[c];
            for j in 0..3 {
                f[c] += p.alpha[j] * grad_p[j][c];
            }
        }
        f
    }

    fn fluid_source(&self, x: Point, t: f64, out: &mut [f64]) {
        let prm = &self.params;
        let (_, ddiv) = Manufactured::divergence(x, t);
        let (p, dp) = Manufactured::pressures(x, t);
        for j in 0..3 {
            // every pressure has Δp_j = -2π² p_j
            let mut g = prm.s[j] * dp[j] + prm.alpha[j] * ddiv + prm.kappa[j] * 2.0 * PI * PI * p[j];
            for i in 0..3 {
                g += prm.gamma[j][i] * (p[j] - p[i]);
            }
            out[j] = g;
        }
    }

    fn displacement_boundary(&self, x: Point, t: f64) -> [f64; 2] {
        self.displacement(x, t)
    }

    fn pressure_boundary(&self, x: Point, t: f64, out: &mut [f64]) {
        self.pressure(x, t, out)
    }
}

impl ExactSolution for Manufactured {
    fn displacement(&self, x: Point, t: f64) -> [f64; 2] {
        let (sx, cx) = (PI * x[0]).sin_cos();
        let (sy, cy) = (PI * x[1]).sin_cos();
        let a = 0.1 * (PI * t).sin();
        [a * cx * sy, a * sx * cy]
    }

    fn displacement_gradient(&self, x: Point, t: f64) -> [[f64; 2]; 2] {
        let (sx, cx) = (PI * x[0]).sin_cos();
        let (sy, cy) = (PI * x[1]).sin_cos();
        let a = 0.1 * PI * (PI * t).sin();
        [[-a * sx * sy, a * cx * cy], [a * cx * cy, -a * sx * sy]]
    }

    fn pressure(&self, x: Point, t: f64, out: &mut [f64]) {
        out.copy_from_slice(&Manufactured::pressures(x, t).0);
    }

    fn pressure_gradient(&self, x: Point, t: f64, out: &mut [Point]) {
        let (sx, cx) = (PI * x[0]).sin_cos();
        let (sy, cy) = (PI * x[1]).sin_cos();
        let (s2t, st) = ((2.0 * PI * t).sin(), (PI * t).sin());
        out[0] = [PI * cx * cy * s2t, -PI * sx * sy * s2t];
        out[1] = [-PI * sx * sy * st, PI * cx * cy * st];
        out[2] = [PI * cx * sy * t, PI * sx * cy * t];
    }
}

/// A problem given by closures, for examples and tests.
pub struct FnProblem<F, G, U, P> {
    pub params: MaterialParams,
    pub body_force: F,
    pub fluid_source: G,
    pub displacement_boundary: U,
    pub pressure_boundary: P,
}

impl<F, G, U, P> MpetProblem for FnProblem<F, G, U, P>
where
    F: Fn(Point, f64) -> [f64; 2] + Sync,
    G: Fn(Point, f64, &mut [f64]) + Sync,
    U: Fn(Point, f64) -> [f64; 2] + Sync,
    P: Fn(Point, f64, &mut [f64]) + Sync,
{
    fn params(&self) -> &MaterialParams {
        &self.params
    }

    fn body_force(&self, x: Point, t: f64) -> [f64; 2] {
        (self.body_force)(x, t)
    }

    fn fluid_source(&self, x: Point, t: f64, out: &mut [f64]) {
        (self.fluid_source)(x, t, out)
    }

    fn displacement_boundary(&self, x: Point, t: f64) -> [f64; 2] {
        (self.displacement_boundary)(x, t)
    }

    fn pressure_boundary(&self, x: Point, t: f64, out: &mut [f64]) {
        (self.pressure_boundary)(x, t, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central differences of the exact solution plugged into the strong
    /// equations must reproduce the analytic sources.
    #[test]
    fn sources_match_finite_differences() {
        let mut params = Manufactured::default_params();
        params.alpha = vec![0.2, 0.3, 0.9];
        params.s = vec![0.5, 1.0, 2.0];
        params.kappa = vec![1.0, 0.1, 3.0];
        params.gamma = vec![vec![0.0, 1.0, 0.2], vec![1.0, 0.0, 0.5], vec![0.2, 0.5, 0.0]];
        params.lambda = 7.0;
        params.mu = 2.0;
        let m = Manufactured::new(params.clone());
        let h = 1e-4;
        for &(x, t) in &[([0.3, 0.7], 0.13), ([0.81, 0.22], 0.37)] {
            let sigma = |y: Point| params.stress(m.displacement_gradient(y, t));
            let mut div_sigma = [0.0; 2];
            for k in 0..2 {
                let mut yp = x;
                let mut ym = x;
                yp[k] += h;
                ym[k] -= h;
                let (sp, sm) = (sigma(yp), sigma(ym));
                for i in 0..2 {
                    div_sigma[i] += (sp[i][k] - sm[i][k]) / (2.0 * h);
                }
            }
            let mut gp = [[0.0; 2]; 3];
            m.pressure_gradient(x, t, &mut gp);
            let f = m.body_force(x, t);
            for i in 0..2 {
                let strong = -div_sigma[i] + (0..3).map(|j| params.alpha[j] * gp[j][i]).sum::<f64>();
                assert!((strong - f[i]).abs() < 1e-6, "f_{i}: {strong} vs {}", f[i]);
            }

            let p = |y: Point, s: f64| {
                let mut o = [0.0; 3];
                m.pressure(y, s, &mut o);
                o
            };
            let div = |y: Point, s: f64| {
                let g = m.displacement_gradient(y, s);
                g[0][0] + g[1][1]
            };
            let mut g = [0.0; 3];
            m.fluid_source(x, t, &mut g);
            let (pp, pm) = (p(x, t + h), p(x, t - h));
            let p0 = p(x, t);
            let ddiv = (div(x, t + h) - div(x, t - h)) / (2.0 * h);
            for j in 0..3 {
                let mut lap = 0.0;
                for k in 0..2 {
                    let mut yp = x;
                    let mut ym = x;
                    yp[k] += h;
                    ym[k] -= h;
                    lap += (p(yp, t)[j] - 2.0 * p0[j] + p(ym, t)[j]) / (h * h);
                }
                let mut strong =
                    params.s[j] * (pp[j] - pm[j]) / (2.0 * h) + params.alpha[j] * ddiv - params.kappa[j] * lap;
                for i in 0..3 {
                    strong += params.gamma[j][i] * (p0[j] - p0[i]);
                }
                assert!((strong - g[j]).abs() < 1e-5 * (1.0 + g[j].abs()), "g_{j}: {strong} vs {}", g[j]);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let m = Manufactured::new(Manufactured::default_params());
        let (x, t, h) = ([0.41, 0.63], 0.29, 1e-6);
        let g = m.displacement_gradient(x, t);
        let mut gp = [[0.0; 2]; 3];
        m.pressure_gradient(x, t, &mut gp);
        for k in 0..2 {
            let mut yp = x;
            let mut ym = x;
            yp[k] += h;
            ym[k] -= h;
            let (up, um) = (m.displacement(yp, t), m.displacement(ym, t));
            let (mut pp, mut pm) = ([0.0; 3], [0.0; 3]);
            m.pressure(yp, t, &mut pp);
            m.pressure(ym, t, &mut pm);
            for i in 0..2 {
                assert!(((up[i] - um[i]) / (2.0 * h) - g[i][k]).abs() < 1e-8);
            }
            for j in 0..3 {
                assert!(((pp[j] - pm[j]) / (2.0 * h) - gp[j][k]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn solution_vanishes_initially() {
        let m = Manufactured::new(Manufactured::default_params());
        let mut p = [1.0; 3];
        m.initial_pressure([0.3, 0.4], 0.0, &mut p);
        assert_eq!(p, [0.0; 3]);
        assert_eq!(m.displacement([0.3, 0.4], 0.0), [0.0, 0.0]);
    }
}
