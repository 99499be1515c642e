//! Discrete counterpart of the a priori energy estimate.
//!
//! The left side at `t_n` is
//! `‖u_h^n‖_a² + Σ_j s_j ‖p_j^n‖² + Σ_{m ≤ n} τ_m (Σ_j κ_j ‖∇p_j^m‖² + Σ_ij γ_ij ‖p_j^m − p_i^m‖²)`
//! and the data side is
//! `(sup_t ‖f‖ + ∫ ‖∂_t f‖)² + ∫ ‖g‖² + ‖u_h^0‖_a² + Σ_j s_j ‖p_j^0‖²`.

use rayon::prelude::*;

use crate::error::Result;
use crate::forms::{self, assemble_a, assemble_c, assemble_d};
use crate::problem::MpetProblem;
use crate::solver::Trajectory;
use crate::spaces::Quadrature;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct EnergyBalance {
    /// Largest left side over the time levels.
    pub energy: f64,
    pub data: f64,
}

impl EnergyBalance {
    pub fn ratio(&self) -> f64 {
        if self.data > 0.0 {
            self.energy / self.data
        } else if self.energy == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// `(‖f(t)‖², Σ_j ‖g_j(t)‖²)` by quadrature on the trajectory's mesh.
fn data_norms(traj: &Trajectory, problem: &dyn MpetProblem, t: f64, dt: Option<f64>) -> (f64, f64) {
    let mesh = traj.space_u.mesh();
    let quad = Quadrature::triangle(forms::data_quadrature_degree(traj.space_u.degree()));
    let nj = problem.params().num_networks();
    let parts: Vec<(f64, f64)> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|k| {
            let geom = mesh.cell_geometry(k).expect("valid cell");
            let mut g = vec![0.0; nj];
            let (mut ff, mut gg) = (0.0, 0.0);
            for (p, w) in quad.points.iter().zip(&quad.weights) {
                let x = geom.map(*p);
                let w = 2.0 * geom.area * w;
                let f = match dt {
                    // central difference of f in time
                    Some(h) => {
                        let (a, b) = (problem.body_force(x, t + h), problem.body_force(x, t - h));
                        [(a[0] - b[0]) / (2.0 * h), (a[1] - b[1]) / (2.0 * h)]
                    }
                    None => problem.body_force(x, t),
                };
                ff += w * (f[0] * f[0] + f[1] * f[1]);
                problem.fluid_source(x, t, &mut g);
                gg += w * g.iter().map(|v| v * v).sum::<f64>();
            }
            (ff, gg)
        })
        .collect();
    parts.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1))
}

/// Energy and data sides of the estimate for a computed trajectory. Time
/// integrals of data use the midpoint rule on each interval, and the
/// transfer sum counts every ordered pair, i.e. twice the symmetrized
/// transfer part of `d`.
pub fn energy_balance(traj: &Trajectory, problem: &dyn MpetProblem) -> Result<EnergyBalance> {
    let params = problem.params();
    let a = assemble_a(&traj.space_u, params)?;
    let c = assemble_c(&traj.space_p, params)?;
    // d counts the transfer once; kappa-only and full versions separate it
    let d = assemble_d(&traj.space_p, params)?;
    let mut no_transfer = params.clone();
    for row in &mut no_transfer.gamma {
        row.iter_mut().for_each(|g| *g = 0.0);
    }
    let dk = assemble_d(&traj.space_p, &no_transfer)?;

    let states = &traj.states;
    let mut integral = 0.0;
    let mut energy: f64 = 0.0;
    let (mut sup_f, mut dtf, mut g_int): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for (n, s) in states.iter().enumerate() {
        if n > 0 {
            let tau = s.t - states[n - 1].t;
            let kap = dk.bilinear(&s.p, &s.p);
            let transfer = d.bilinear(&s.p, &s.p) - kap;
            integral += tau * (kap + 2.0 * transfer);
            let tm = 0.5 * (s.t + states[n - 1].t);
            let (fd, gm) =
                (data_norms(traj, problem, tm, Some(1e-5 * tau.max(1e-3))).0, data_norms(traj, problem, tm, None).1);
            dtf += tau * fd.sqrt();
            g_int += tau * gm;
        }
        sup_f = sup_f.max(data_norms(traj, problem, s.t, None).0.sqrt());
        energy = energy.max(a.bilinear(&s.u, &s.u) + c.bilinear(&s.p, &s.p) + integral);
    }
    let s0 = &states[0];
    let data = (sup_f + dtf).powi(2) + g_int + a.bilinear(&s0.u, &s0.u) + c.bilinear(&s0.p, &s0.p);
    Ok(EnergyBalance { energy, data })
}
