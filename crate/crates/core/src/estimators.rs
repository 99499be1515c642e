//! Residual-based error indicators and the four space-time estimators.
//!
//! For a step `n` the momentum residual on a cell is
//! `R_u = f + div σ(u_h^n) − Σ_j α_j ∇p_j^n` with edge jump
//! `J_u = −[σ(u_h^n)] n_e`, and the mass residual of network `j` is
//! `R_j = g_j − s_j δp_j − α_j div δu + κ_j Δp_j − Σ_i γ_ji (p_j − p_i)` with
//! jump `J_j = −[κ_j ∇p_j] · n_e`, where `δ` is the backward difference
//! quotient. The normal `n_e` points out of the adjacent cell with the
//! smaller index. Only interior edges carry jumps.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forms::{self, MaterialParams};
use crate::mesh::{CellGeometry, Mesh, Point};
use crate::problem::MpetProblem;
use crate::solver::{State, Trajectory};
use crate::spaces::{CellTabulation, Field, Quadrature, Space};
use crate::sparse::SparseMatrix;

/// How an interior edge's jump is shared between its two cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeShare {
    /// Each adjacent cell receives the full `h_K ‖J‖²_e`.
    Full,
    /// Each adjacent cell receives half of it, so every interior edge is
    /// counted once in the global sum.
    Half,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EstimatorOptions {
    /// Weight of the transfer term in the mass residual: 1 for the strong
    /// form, ½ for the symmetrized weak form.
    pub transfer_weight: f64,
    pub edge_share: EdgeShare,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions { transfer_weight: 1.0, edge_share: EdgeShare::Half }
    }
}

struct CellData {
    geom: CellGeometry,
    points: Vec<Point>,
    weights: Vec<f64>,
    tab_u: CellTabulation,
    tab_p: CellTabulation,
}

struct EdgeSide {
    cell: usize,
    tab_u: CellTabulation,
    tab_p: CellTabulation,
}

struct EdgeData {
    normal: Point,
    weights: Vec<f64>,
    plus: EdgeSide,
    minus: EdgeSide,
}

/// Residual samples of the momentum equation at one time level, kept to
/// form the time-shifted indicators of the next step.
#[derive(Clone, Debug)]
pub struct MomentumSamples {
    /// Cell residual at cell quadrature points, cell-major.
    pub cell: Vec<[f64; 2]>,
    /// Jump at edge quadrature points, one block per interior edge.
    pub edge: Vec<[f64; 2]>,
}

/// Per-cell indicators of one step and their sums.
#[derive(Clone, Debug)]
pub struct StepIndicators {
    pub eta_u: Vec<f64>,
    pub eta_p: Vec<f64>,
    pub eta_u_dt: Vec<f64>,
    /// `‖p_h^n − p_h^{n−1}‖_d²`.
    pub d_increment: f64,
}

impl StepIndicators {
    pub fn eta_u_sum(&self) -> f64 {
        self.eta_u.iter().sum()
    }

    pub fn eta_p_sum(&self) -> f64 {
        self.eta_p.iter().sum()
    }

    pub fn eta_u_dt_sum(&self) -> f64 {
        self.eta_u_dt.iter().sum()
    }
}

/// Indicator evaluation on a fixed pair of spaces.
pub struct Estimator<'a> {
    problem: &'a dyn MpetProblem,
    space_u: Arc<Space>,
    space_p: Arc<Space>,
    options: EstimatorOptions,
    d: SparseMatrix,
    cells: Vec<CellData>,
    edges: Vec<EdgeData>,
    /// Interior edge indices, aligned with `edges`.
    edge_ids: Vec<usize>,
    cell_points: usize,
    edge_points: usize,
}

fn mesh_of(space: &Space) -> &Arc<Mesh> {
    space.mesh()
}

impl<'a> Estimator<'a> {
    pub fn new(
        problem: &'a dyn MpetProblem,
        space_u: &Arc<Space>,
        space_p: &Arc<Space>,
        options: EstimatorOptions,
    ) -> Result<Estimator<'a>> {
        let params = problem.params();
        let d = forms::assemble_d(space_p, params)?;
        let mesh = mesh_of(space_u).clone();
        let quad = Quadrature::triangle(forms::data_quadrature_degree(space_u.degree()));
        let cells: Vec<CellData> = (0..mesh.num_cells())
            .into_par_iter()
            .map(|k| {
                let geom = mesh.cell_geometry(k).expect("valid cell");
                CellData {
                    points: quad.points.iter().map(|p| geom.map(*p)).collect(),
                    weights: quad.weights.iter().map(|w| 2.0 * geom.area * w).collect(),
                    tab_u: space_u.tabulate(k, &geom, &quad.points, true),
                    tab_p: space_p.tabulate(k, &geom, &quad.points, true),
                    geom,
                }
            })
            .collect();
        let line = Quadrature::interval(2 * space_u.degree());
        let edge_ids: Vec<usize> = mesh.interior_edges().collect();
        let edges = edge_ids
            .par_iter()
            .map(|&e| {
                let [a, b] = mesh.edges()[e];
                let (xa, xb) = (mesh.vertices()[a], mesh.vertices()[b]);
                let len = (xb[0] - xa[0]).hypot(xb[1] - xa[1]);
                let pts: Vec<Point> = line
                    .points
                    .iter()
                    .map(|s| [xa[0] + s[0] * (xb[0] - xa[0]), xa[1] + s[0] * (xb[1] - xa[1])])
                    .collect();
                let ec = mesh.edge_cells(e);
                let side = |cell: usize| {
                    let g = &cells[cell].geom;
                    let refs: Vec<Point> = pts.iter().map(|x| g.pull_back(*x)).collect();
                    EdgeSide {
                        cell,
                        tab_u: space_u.tabulate(cell, g, &refs, false),
                        tab_p: space_p.tabulate(cell, g, &refs, false),
                    }
                };
                let plus = ec.plus;
                let minus = ec.minus.expect("interior edge has two cells");
                let li = mesh.local_edge_index(plus, e).expect("edge belongs to its cell");
                EdgeData {
                    normal: cells[plus].geom.normals[li],
                    weights: line.weights.iter().map(|w| w * len).collect(),
                    plus: side(plus),
                    minus: side(minus),
                }
            })
            .collect();
        Ok(Estimator {
            problem,
            space_u: space_u.clone(),
            space_p: space_p.clone(),
            options,
            d,
            cells,
            edges,
            edge_ids,
            cell_points: quad.len(),
            edge_points: line.len(),
        })
    }

    pub fn options(&self) -> EstimatorOptions {
        self.options
    }

    fn params(&self) -> &MaterialParams {
        self.problem.params()
    }

    fn stress(&self, tab: &CellTabulation, q: usize, local: &[f64]) -> [[f64; 2]; 2] {
        let mut g = [[0.0; 2]; 2];
        for a in 0..tab.nodes {
            let d = tab.grad(q, a);
            for c in 0..2 {
                g[c][0] += local[2 * a + c] * d[0];
                g[c][1] += local[2 * a + c] * d[1];
            }
        }
        self.params().stress(g)
    }

    /// `R_u` on cell `k` at the cell quadrature points.
    fn cell_momentum(&self, k: usize, state: &State, out: &mut Vec<[f64; 2]>) {
        self.momentum_kernel(k, &self.cells[k], state, out)
    }

    fn momentum_kernel(&self, k: usize, c: &CellData, state: &State, out: &mut Vec<[f64; 2]>) {
        let prm = self.params();
        let nj = prm.num_networks();
        let (mut ul, mut pl) = (Vec::new(), Vec::new());
        self.space_u.gather(k, &state.u, &mut ul);
        self.space_p.gather(k, &state.p, &mut pl);
        for q in 0..c.points.len() {
            // Hessians of both displacement components
            let mut h = [[[0.0; 2]; 2]; 2];
            for a in 0..c.tab_u.nodes {
                let ha = c.tab_u.hessian(q, a);
                for comp in 0..2 {
                    for r in 0..2 {
                        for s in 0..2 {
                            h[comp][r][s] += ul[2 * a + comp] * ha[r][s];
                        }
                    }
                }
            }
            let f = self.problem.body_force(c.points[q], state.t);
            let mut r = [0.0; 2];
            for i in 0..2 {
                let lap = h[i][0][0] + h[i][1][1];
                let grad_div = h[0][i][0] + h[1][i][1];
                r[i] = f[i] + prm.mu * lap + (prm.mu + prm.lambda) * grad_div;
            }
            for a in 0..c.tab_p.nodes {
                let g = c.tab_p.grad(q, a);
                for j in 0..nj {
                    let v = prm.alpha[j] * pl[a * nj + j];
                    r[0] -= v * g[0];
                    r[1] -= v * g[1];
                }
            }
            out.push(r);
        }
    }

    /// `J_u` on interior edge number `i` (position in the interior list).
    fn edge_momentum(&self, i: usize, state: &State, out: &mut Vec<[f64; 2]>) {
        let e = &self.edges[i];
        let (mut lp, mut lm) = (Vec::new(), Vec::new());
        self.space_u.gather(e.plus.cell, &state.u, &mut lp);
        self.space_u.gather(e.minus.cell, &state.u, &mut lm);
        let n = e.normal;
        for q in 0..e.weights.len() {
            let sp = self.stress(&e.plus.tab_u, q, &lp);
            let sm = self.stress(&e.minus.tab_u, q, &lm);
            out.push([
                -((sp[0][0] - sm[0][0]) * n[0] + (sp[0][1] - sm[0][1]) * n[1]),
                -((sp[1][0] - sm[1][0]) * n[0] + (sp[1][1] - sm[1][1]) * n[1]),
            ]);
        }
    }

    /// Momentum residuals and jumps of `state` at all sample points.
    pub fn momentum_samples(&self, state: &State) -> MomentumSamples {
        let cell: Vec<Vec<[f64; 2]>> = (0..self.cells.len())
            .into_par_iter()
            .map(|k| {
                let mut v = Vec::with_capacity(self.cell_points);
                self.cell_momentum(k, state, &mut v);
                v
            })
            .collect();
        let edge: Vec<Vec<[f64; 2]>> = (0..self.edges.len())
            .into_par_iter()
            .map(|i| {
                let mut v = Vec::with_capacity(self.edge_points);
                self.edge_momentum(i, state, &mut v);
                v
            })
            .collect();
        MomentumSamples { cell: cell.concat(), edge: edge.concat() }
    }

    fn edge_weight(&self) -> f64 {
        match self.options.edge_share {
            EdgeShare::Full => 1.0,
            EdgeShare::Half => 0.5,
        }
    }

    /// Combines squared cell and edge norms into `h_K² ‖R‖²_K + h_K Σ_e w ‖J‖²_e`.
    fn combine(&self, cell_sq: &[f64], edge_sq: &[f64]) -> Vec<f64> {
        let w = self.edge_weight();
        let mut eta: Vec<f64> = self.cells.iter().zip(cell_sq).map(|(c, r)| c.geom.diameter.powi(2) * r).collect();
        for (e, j) in self.edges.iter().zip(edge_sq) {
            for k in [e.plus.cell, e.minus.cell] {
                eta[k] += w * self.cells[k].geom.diameter * j;
            }
        }
        eta
    }

    /// `η_{u,K}` from momentum samples, scaled by `scale²` (used for
    /// difference quotients).
    fn momentum_indicator(&self, now: &MomentumSamples, prev: Option<&MomentumSamples>, scale: f64) -> Vec<f64> {
        let nq = self.cell_points;
        let ne = self.edge_points;
        let diff = |a: &[f64; 2], i: usize, v: &[[f64; 2]]| -> [f64; 2] {
            match prev {
                Some(_) => [a[0] - v[i][0], a[1] - v[i][1]],
                None => *a,
            }
        };
        let empty: Vec<[f64; 2]> = Vec::new();
        let (pc, pe) = prev.map(|p| (&p.cell, &p.edge)).unwrap_or((&empty, &empty));
        let cell_sq: Vec<f64> = self
            .cells
            .iter()
            .enumerate()
            .map(|(k, c)| {
                (0..nq)
                    .map(|q| {
                        let r = diff(&now.cell[k * nq + q], k * nq + q, pc);
                        c.weights[q] * (r[0] * r[0] + r[1] * r[1])
                    })
                    .sum::<f64>()
                    * scale
                    * scale
            })
            .collect();
        let edge_sq: Vec<f64> = self
            .edges
            .iter()
            .enumerate()
            .map(|(i, e)| {
                (0..ne)
                    .map(|q| {
                        let j = diff(&now.edge[i * ne + q], i * ne + q, pe);
                        e.weights[q] * (j[0] * j[0] + j[1] * j[1])
                    })
                    .sum::<f64>()
                    * scale
                    * scale
            })
            .collect();
        self.combine(&cell_sq, &edge_sq)
    }

    /// `η_{u,K}^n` for every cell.
    pub fn momentum_indicators(&self, samples: &MomentumSamples) -> Vec<f64> {
        self.momentum_indicator(samples, None, 1.0)
    }

    /// `η_{u,K}^n(δ_t)` for every cell.
    pub fn momentum_dt_indicators(&self, now: &MomentumSamples, prev: &MomentumSamples, tau: f64) -> Vec<f64> {
        self.momentum_indicator(now, Some(prev), 1.0 / tau)
    }

    /// Mass residual on cell `k` at its quadrature points, network-major
    /// per point.
    fn cell_mass(&self, k: usize, prev: &State, next: &State, out: &mut Vec<f64>) {
        self.mass_kernel(k, &self.cells[k], prev, next, out)
    }

    fn mass_kernel(&self, k: usize, c: &CellData, prev: &State, next: &State, out: &mut Vec<f64>) {
        let prm = self.params();
        let nj = prm.num_networks();
        let tau = next.t - prev.t;
        let tw = self.options.transfer_weight;
        let (mut un, mut uo, mut pn, mut po) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        self.space_u.gather(k, &next.u, &mut un);
        self.space_u.gather(k, &prev.u, &mut uo);
        self.space_p.gather(k, &next.p, &mut pn);
        self.space_p.gather(k, &prev.p, &mut po);
        let mut g = vec![0.0; nj];
        let mut p = vec![0.0; nj];
        let mut dp = vec![0.0; nj];
        let mut lap = vec![0.0; nj];
        for q in 0..c.points.len() {
            self.problem.fluid_source(c.points[q], next.t, &mut g);
            let mut div_du = 0.0;
            for a in 0..c.tab_u.nodes {
                let d = c.tab_u.grad(q, a);
                div_du += (un[2 * a] - uo[2 * a]) * d[0] + (un[2 * a + 1] - uo[2 * a + 1]) * d[1];
            }
            div_du /= tau;
            p.fill(0.0);
            dp.fill(0.0);
            lap.fill(0.0);
            for a in 0..c.tab_p.nodes {
                let v = c.tab_p.value(q, a);
                let h = c.tab_p.hessian(q, a);
                for j in 0..nj {
                    p[j] += pn[a * nj + j] * v;
                    dp[j] += (pn[a * nj + j] - po[a * nj + j]) * v;
                    lap[j] += pn[a * nj + j] * (h[0][0] + h[1][1]);
                }
            }
            for j in 0..nj {
                let mut r = g[j] - prm.s[j] * dp[j] / tau - prm.alpha[j] * div_du + prm.kappa[j] * lap[j];
                for i in 0..nj {
                    r -= tw * prm.gamma[j][i] * (p[j] - p[i]);
                }
                out.push(r);
            }
        }
    }

    fn edge_mass(&self, i: usize, state: &State, out: &mut Vec<f64>) {
        let e = &self.edges[i];
        let prm = self.params();
        let nj = prm.num_networks();
        let (mut lp, mut lm) = (Vec::new(), Vec::new());
        self.space_p.gather(e.plus.cell, &state.p, &mut lp);
        self.space_p.gather(e.minus.cell, &state.p, &mut lm);
        for q in 0..e.weights.len() {
            for j in 0..nj {
                let mut jump = 0.0;
                for a in 0..e.plus.tab_p.nodes {
                    let g = e.plus.tab_p.grad(q, a);
                    jump += lp[a * nj + j] * (g[0] * e.normal[0] + g[1] * e.normal[1]);
                }
                for a in 0..e.minus.tab_p.nodes {
                    let g = e.minus.tab_p.grad(q, a);
                    jump -= lm[a * nj + j] * (g[0] * e.normal[0] + g[1] * e.normal[1]);
                }
                out.push(-prm.kappa[j] * jump);
            }
        }
    }

    /// `η_{p,K}^n` for the step `prev -> next`.
    pub fn mass_indicators(&self, prev: &State, next: &State) -> Vec<f64> {
        let cell_sq: Vec<f64> = (0..self.cells.len())
            .into_par_iter()
            .map(|k| {
                let mut r = Vec::new();
                self.cell_mass(k, prev, next, &mut r);
                let nj = r.len() / self.cell_points;
                let w = &self.cells[k].weights;
                r.chunks(nj).zip(w).map(|(v, w)| w * v.iter().map(|x| x * x).sum::<f64>()).sum()
            })
            .collect();
        let edge_sq: Vec<f64> = (0..self.edges.len())
            .into_par_iter()
            .map(|i| {
                let mut r = Vec::new();
                self.edge_mass(i, next, &mut r);
                let nj = r.len() / self.edge_points;
                r.chunks(nj).zip(&self.edges[i].weights).map(|(v, w)| w * v.iter().map(|x| x * x).sum::<f64>()).sum()
            })
            .collect();
        self.combine(&cell_sq, &edge_sq)
    }

    /// `‖p_h^n − p_h^{n−1}‖_d²`.
    pub fn d_increment(&self, prev: &State, next: &State) -> f64 {
        let dp: Vec<f64> = next.p.iter().zip(&prev.p).map(|(a, b)| a - b).collect();
        self.d.bilinear(&dp, &dp)
    }

    /// Indicators of the step `prev -> next`; `prev_samples` are the
    /// momentum samples of `prev`. Returns the samples of `next` as well.
    pub fn step(
        &self,
        prev: &State,
        prev_samples: &MomentumSamples,
        next: &State,
    ) -> (StepIndicators, MomentumSamples) {
        let tau = next.t - prev.t;
        let now = self.momentum_samples(next);
        let ind = StepIndicators {
            eta_u: self.momentum_indicators(&now),
            eta_p: self.mass_indicators(prev, next),
            eta_u_dt: self.momentum_dt_indicators(&now, prev_samples, tau),
            d_increment: self.d_increment(prev, next),
        };
        (ind, now)
    }

    /// Global interior edge index of the `i`-th sampled edge.
    pub fn interior_edge(&self, i: usize) -> usize {
        self.edge_ids[i]
    }

    /// `R_u` of `state` on cell `k` at the cell quadrature points.
    pub fn momentum_residual(&self, k: usize, state: &State) -> Result<Vec<[f64; 2]>> {
        if k >= self.cells.len() {
            return Err(Error::InvalidArgument(format!("cell {k} out of range")));
        }
        let mut v = Vec::new();
        self.cell_momentum(k, state, &mut v);
        Ok(v)
    }

    fn interior_position(&self, e: usize) -> Result<usize> {
        self.edge_ids.binary_search(&e).map_err(|_| Error::InvalidArgument(format!("edge {e} is not an interior edge")))
    }

    /// `J_u` of `state` on global edge `e` at the edge quadrature points.
    pub fn momentum_jump(&self, e: usize, state: &State) -> Result<Vec<[f64; 2]>> {
        let i = self.interior_position(e)?;
        let mut v = Vec::new();
        self.edge_momentum(i, state, &mut v);
        Ok(v)
    }

    /// Mass residual of the step on cell `k`: one `J`-vector per quadrature
    /// point.
    pub fn mass_residual(&self, k: usize, prev: &State, next: &State) -> Result<Vec<Vec<f64>>> {
        if k >= self.cells.len() {
            return Err(Error::InvalidArgument(format!("cell {k} out of range")));
        }
        let mut v = Vec::new();
        self.cell_mass(k, prev, next, &mut v);
        let nj = self.params().num_networks();
        Ok(v.chunks(nj).map(|c| c.to_vec()).collect())
    }

    /// `J_j` of `state` on global edge `e`, one `J`-vector per point.
    pub fn mass_jump(&self, e: usize, state: &State) -> Result<Vec<Vec<f64>>> {
        let i = self.interior_position(e)?;
        let mut v = Vec::new();
        self.edge_mass(i, state, &mut v);
        let nj = self.params().num_networks();
        Ok(v.chunks(nj).map(|c| c.to_vec()).collect())
    }

    /// Physical quadrature points of cell `k` used for residuals.
    pub fn cell_points(&self, k: usize) -> &[Point] {
        &self.cells[k].points
    }

    /// `⟨G_a, v⟩ = (f, v) − a(u_h, v) + b(v, p_h)` by direct quadrature.
    pub fn momentum_pairing_forms(&self, state: &State, v: &Field) -> Result<f64> {
        self.check_test_field(v, 2)?;
        let prm = self.params();
        let nj = prm.num_networks();
        let quad = self.pairing_quadrature(v);
        let mesh = mesh_of(&self.space_u);
        let per_cell: Vec<f64> = (0..mesh.num_cells())
            .into_par_iter()
            .map(|k| {
                let c = &self.cells[k];
                let tu = self.space_u.tabulate(k, &c.geom, &quad.points, false);
                let tp = self.space_p.tabulate(k, &c.geom, &quad.points, false);
                let tv = v.space().tabulate(k, &c.geom, &quad.points, false);
                let (mut ul, mut pl, mut vl) = (Vec::new(), Vec::new(), Vec::new());
                self.space_u.gather(k, &state.u, &mut ul);
                self.space_p.gather(k, &state.p, &mut pl);
                v.space().gather(k, v.values(), &mut vl);
                let mut sum = 0.0;
                for (q, w) in quad.weights.iter().enumerate() {
                    let w = 2.0 * c.geom.area * w;
                    let x = c.geom.map(quad.points[q]);
                    let sigma = self.stress(&tu, q, &ul);
                    let (mut vv, mut gv) = ([0.0; 2], [[0.0; 2]; 2]);
                    for a in 0..tv.nodes {
                        let (phi, g) = (tv.value(q, a), tv.grad(q, a));
                        for comp in 0..2 {
                            vv[comp] += vl[2 * a + comp] * phi;
                            gv[comp][0] += vl[2 * a + comp] * g[0];
                            gv[comp][1] += vl[2 * a + comp] * g[1];
                        }
                    }
                    let mut ptot = 0.0;
                    for a in 0..tp.nodes {
                        for j in 0..nj {
                            ptot += prm.alpha[j] * pl[a * nj + j] * tp.value(q, a);
                        }
                    }
                    let f = self.problem.body_force(x, state.t);
                    let mut sig_eps = 0.0;
                    for r in 0..2 {
                        for s in 0..2 {
                            sig_eps += sigma[r][s] * 0.5 * (gv[r][s] + gv[s][r]);
                        }
                    }
                    sum += w * (f[0] * vv[0] + f[1] * vv[1] - sig_eps + ptot * (gv[0][0] + gv[1][1]));
                }
                sum
            })
            .collect();
        Ok(per_cell.iter().sum())
    }

    /// `⟨G_a, v⟩ = Σ_K (R_u, v)_K + Σ_e (J_u, v)_e` from strong residuals.
    pub fn momentum_pairing_residuals(&self, state: &State, v: &Field) -> Result<f64> {
        self.check_test_field(v, 2)?;
        let quad = self.pairing_quadrature(v);
        let cell: Vec<f64> = (0..self.cells.len())
            .into_par_iter()
            .map(|k| {
                let c = self.cell_data(k, &quad);
                let mut r = Vec::new();
                self.momentum_kernel(k, &c, state, &mut r);
                let vals = v.evaluate(k, &quad.points).expect("valid cell");
                r.iter()
                    .zip(&vals)
                    .zip(&c.weights)
                    .map(|((r, pv), w)| w * (r[0] * pv.value[0] + r[1] * pv.value[1]))
                    .sum()
            })
            .collect();
        let edge: Vec<f64> = (0..self.edges.len())
            .into_par_iter()
            .map(|i| {
                let e = &self.edges[i];
                let mut j = Vec::new();
                self.edge_momentum(i, state, &mut j);
                let pts = self.edge_reference_points(i);
                let vals = v.evaluate(e.plus.cell, &pts).expect("valid cell");
                j.iter()
                    .zip(&vals)
                    .zip(&e.weights)
                    .map(|((j, pv), w)| w * (j[0] * pv.value[0] + j[1] * pv.value[1]))
                    .sum()
            })
            .collect();
        Ok(cell.iter().sum::<f64>() + edge.iter().sum::<f64>())
    }

    /// `⟨G_d, q⟩ = (g, q) − c(δp, q) − b(δu, q) − d(p_h, q)` by direct
    /// quadrature, for the step `prev -> next`.
    pub fn mass_pairing_forms(&self, prev: &State, next: &State, qf: &Field) -> Result<f64> {
        let prm = self.params();
        let nj = prm.num_networks();
        self.check_test_field(qf, nj)?;
        let tau = next.t - prev.t;
        let quad = self.pairing_quadrature(qf);
        let lmat = prm.transfer_matrix();
        let mesh = mesh_of(&self.space_u);
        let per_cell: Vec<f64> = (0..mesh.num_cells())
            .into_par_iter()
            .map(|k| {
                let c = &self.cells[k];
                let tu = self.space_u.tabulate(k, &c.geom, &quad.points, false);
                let tp = self.space_p.tabulate(k, &c.geom, &quad.points, false);
                let tq = qf.space().tabulate(k, &c.geom, &quad.points, false);
                let (mut un, mut uo, mut pn, mut po, mut ql) =
                    (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
                self.space_u.gather(k, &next.u, &mut un);
                self.space_u.gather(k, &prev.u, &mut uo);
                self.space_p.gather(k, &next.p, &mut pn);
                self.space_p.gather(k, &prev.p, &mut po);
                qf.space().gather(k, qf.values(), &mut ql);
                let mut g = vec![0.0; nj];
                let mut sum = 0.0;
                for (q, w) in quad.weights.iter().enumerate() {
                    let w = 2.0 * c.geom.area * w;
                    let x = c.geom.map(quad.points[q]);
                    self.problem.fluid_source(x, next.t, &mut g);
                    let mut div_du = 0.0;
                    for a in 0..tu.nodes {
                        let d = tu.grad(q, a);
                        div_du += (un[2 * a] - uo[2 * a]) * d[0] + (un[2 * a + 1] - uo[2 * a + 1]) * d[1];
                    }
                    div_du /= tau;
                    let (mut p, mut dp, mut gp) = (vec![0.0; nj], vec![0.0; nj], vec![[0.0; 2]; nj]);
                    for a in 0..tp.nodes {
                        let (v, d) = (tp.value(q, a), tp.grad(q, a));
                        for j in 0..nj {
                            p[j] += pn[a * nj + j] * v;
                            dp[j] += (pn[a * nj + j] - po[a * nj + j]) * v / tau;
                            gp[j][0] += pn[a * nj + j] * d[0];
                            gp[j][1] += pn[a * nj + j] * d[1];
                        }
                    }
                    let (mut qv, mut gq) = (vec![0.0; nj], vec![[0.0; 2]; nj]);
                    for a in 0..tq.nodes {
                        let (v, d) = (tq.value(q, a), tq.grad(q, a));
                        for j in 0..nj {
                            qv[j] += ql[a * nj + j] * v;
                            gq[j][0] += ql[a * nj + j] * d[0];
                            gq[j][1] += ql[a * nj + j] * d[1];
                        }
                    }
                    for j in 0..nj {
                        let transfer: f64 = (0..nj).map(|i| lmat[j][i] * p[i]).sum();
                        sum += w
                            * ((g[j] - prm.s[j] * dp[j] - prm.alpha[j] * div_du - transfer) * qv[j]
                                - prm.kappa[j] * (gp[j][0] * gq[j][0] + gp[j][1] * gq[j][1]));
                    }
                }
                sum
            })
            .collect();
        Ok(per_cell.iter().sum())
    }

    /// `⟨G_d, q⟩` from strong residuals and jumps.
    pub fn mass_pairing_residuals(&self, prev: &State, next: &State, qf: &Field) -> Result<f64> {
        let nj = self.params().num_networks();
        self.check_test_field(qf, nj)?;
        let quad = self.pairing_quadrature(qf);
        let cell: Vec<f64> = (0..self.cells.len())
            .into_par_iter()
            .map(|k| {
                let c = self.cell_data(k, &quad);
                let mut r = Vec::new();
                self.mass_kernel(k, &c, prev, next, &mut r);
                let vals = qf.evaluate(k, &quad.points).expect("valid cell");
                r.chunks(nj)
                    .zip(&vals)
                    .zip(&c.weights)
                    .map(|((r, pv), w)| w * r.iter().zip(&pv.value).map(|(a, b)| a * b).sum::<f64>())
                    .sum()
            })
            .collect();
        let edge: Vec<f64> = (0..self.edges.len())
            .into_par_iter()
            .map(|i| {
                let e = &self.edges[i];
                let mut j = Vec::new();
                self.edge_mass(i, next, &mut j);
                let vals = qf.evaluate(e.plus.cell, &self.edge_reference_points(i)).expect("valid cell");
                j.chunks(nj)
                    .zip(&vals)
                    .zip(&e.weights)
                    .map(|((j, pv), w)| w * j.iter().zip(&pv.value).map(|(a, b)| a * b).sum::<f64>())
                    .sum()
            })
            .collect();
        Ok(cell.iter().sum::<f64>() + edge.iter().sum::<f64>())
    }

    /// Cell rule shared by both pairing routes so they see identical data
    /// quadrature.
    fn pairing_quadrature(&self, test: &Field) -> Quadrature {
        Quadrature::triangle(forms::data_quadrature_degree(test.space().degree()).max(2 * self.space_u.degree()))
    }

    fn cell_data(&self, k: usize, quad: &Quadrature) -> CellData {
        let geom = self.cells[k].geom;
        CellData {
            points: quad.points.iter().map(|p| geom.map(*p)).collect(),
            weights: quad.weights.iter().map(|w| 2.0 * geom.area * w).collect(),
            tab_u: self.space_u.tabulate(k, &geom, &quad.points, true),
            tab_p: self.space_p.tabulate(k, &geom, &quad.points, true),
            geom,
        }
    }

    fn edge_reference_points(&self, i: usize) -> Vec<Point> {
        let mesh = mesh_of(&self.space_u);
        let e = self.edge_ids[i];
        let [a, b] = mesh.edges()[e];
        let (xa, xb) = (mesh.vertices()[a], mesh.vertices()[b]);
        let line = Quadrature::interval(2 * self.space_u.degree());
        let g = &self.cells[self.edges[i].plus.cell].geom;
        line.points
            .iter()
            .map(|s| g.pull_back([xa[0] + s[0] * (xb[0] - xa[0]), xa[1] + s[0] * (xb[1] - xa[1])]))
            .collect()
    }

    fn check_test_field(&self, v: &Field, components: usize) -> Result<()> {
        let m = v.space().mesh();
        let ours = mesh_of(&self.space_u);
        if v.space().components() != components || !(Arc::ptr_eq(m, ours) || m.cells() == ours.cells()) {
            return Err(Error::InvalidArgument("test function must live on the estimator's mesh".into()));
        }
        Ok(())
    }
}

/// Accumulated estimators of a trajectory.
#[derive(Clone, Debug, serde::Serialize)]
pub struct EstimatorReport {
    pub eta1: f64,
    pub eta2: f64,
    pub eta3: f64,
    pub eta4: f64,
    pub eta: f64,
    /// `η / E` when an error is supplied.
    #[serde(rename = "I_eff")]
    pub efficiency: Option<f64>,
    /// `η_K = η_{1,K} + η_{2,K} + η_{3,K}` per cell.
    pub per_cell: Vec<f64>,
    #[serde(skip)]
    pub eta1_cells: Vec<f64>,
    #[serde(skip)]
    pub eta2_cells: Vec<f64>,
    #[serde(skip)]
    pub eta3_cells: Vec<f64>,
}

impl EstimatorReport {
    /// Attaches the efficiency index `η / E`; undefined when `E = 0`.
    pub fn with_error(mut self, total_error: f64) -> Self {
        self.efficiency = efficiency_index(self.eta, total_error);
        self
    }
}

/// `η / E`, or `None` when `E` is not positive.
pub fn efficiency_index(eta: f64, total_error: f64) -> Option<f64> {
    (total_error > 0.0).then(|| eta / total_error)
}

/// Running accumulation of the estimators along a trajectory.
#[derive(Clone, Debug)]
pub struct Accumulator {
    sum_p: f64,
    sup_u: f64,
    sum_dt: f64,
    sum_d: f64,
    cells_p: Vec<f64>,
    cells_sup_u: Vec<f64>,
    cells_dt: Vec<f64>,
}

impl Accumulator {
    /// Starts from the momentum indicators of the initial state.
    pub fn new(eta_u0: &[f64]) -> Accumulator {
        Accumulator {
            sum_p: 0.0,
            sup_u: eta_u0.iter().sum(),
            sum_dt: 0.0,
            sum_d: 0.0,
            cells_p: vec![0.0; eta_u0.len()],
            cells_sup_u: eta_u0.to_vec(),
            cells_dt: vec![0.0; eta_u0.len()],
        }
    }

    pub fn push(&mut self, tau: f64, s: &StepIndicators) {
        self.sum_p += tau * s.eta_p_sum();
        self.sup_u = self.sup_u.max(s.eta_u_sum());
        self.sum_dt += tau * s.eta_u_dt_sum().sqrt();
        self.sum_d += tau * s.d_increment;
        for k in 0..self.cells_p.len() {
            self.cells_p[k] += tau * s.eta_p[k];
            self.cells_sup_u[k] = self.cells_sup_u[k].max(s.eta_u[k]);
            self.cells_dt[k] += tau * s.eta_u_dt[k].sqrt();
        }
    }

    /// Running maximum of `η_u` over the accepted levels so far.
    pub fn sup_eta_u(&self) -> f64 {
        self.sup_u
    }

    pub fn report(&self) -> EstimatorReport {
        let (eta1, eta2, eta3, eta4) = (self.sum_p.sqrt(), self.sup_u.sqrt(), self.sum_dt, self.sum_d.sqrt());
        let eta1_cells: Vec<f64> = self.cells_p.iter().map(|v| v.sqrt()).collect();
        let eta2_cells: Vec<f64> = self.cells_sup_u.iter().map(|v| v.sqrt()).collect();
        let eta3_cells = self.cells_dt.clone();
        let per_cell = (0..eta1_cells.len()).map(|k| eta1_cells[k] + eta2_cells[k] + eta3_cells[k]).collect();
        EstimatorReport {
            eta1,
            eta2,
            eta3,
            eta4,
            eta: eta1 + eta2 + eta3 + eta4,
            efficiency: None,
            per_cell,
            eta1_cells,
            eta2_cells,
            eta3_cells,
        }
    }
}

/// Estimators of a complete trajectory.
pub fn estimate(traj: &Trajectory, problem: &dyn MpetProblem, options: EstimatorOptions) -> Result<EstimatorReport> {
    if traj.states.len() < 2 {
        return Err(Error::InvalidArgument("estimators need a trajectory with at least one step".into()));
    }
    let est = Estimator::new(problem, &traj.space_u, &traj.space_p, options)?;
    let mut samples = est.momentum_samples(&traj.states[0]);
    let mut acc = Accumulator::new(&est.momentum_indicators(&samples));
    for n in 1..traj.states.len() {
        let (prev, next) = (&traj.states[n - 1], &traj.states[n]);
        let (ind, now) = est.step(prev, &samples, next);
        acc.push(next.t - prev.t, &ind);
        samples = now;
    }
    Ok(acc.report())
}
