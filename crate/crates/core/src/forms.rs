//! Material parameters and assembly of the bilinear forms of the
//! multiple-network poroelasticity system:
//!
//! * `a(u, v) = (σ(u), ε(v))` with `σ(u) = 2μ ε(u) + λ div u I`,
//! * `b(u, p) = Σ_j (α_j p_j, div u)`,
//! * `c(p, q) = Σ_j (s_j p_j, q_j)`,
//! * `d(p, q) = Σ_j (κ_j ∇p_j, ∇q_j) + ½ Σ_j Σ_i (γ_ji (p_j − p_i), q_j − q_i)`.
//!
//! Pressure spaces carry one component per network, interleaved per node.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, ParamError, Result};
use crate::mesh::{CellGeometry, Point};
use crate::spaces::{Quadrature, Space};
use crate::sparse::SparseMatrix;

/// Constant material parameters for `J` fluid networks.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MaterialParams {
    pub mu: f64,
    pub lambda: f64,
    pub alpha: Vec<f64>,
    pub s: Vec<f64>,
    pub kappa: Vec<f64>,
    /// Symmetric transfer coefficients, `gamma[j][i]` couples `p_j` to `p_i`.
    pub gamma: Vec<Vec<f64>>,
}

impl MaterialParams {
    pub fn new(
        mu: f64,
        lambda: f64,
        alpha: Vec<f64>,
        s: Vec<f64>,
        kappa: Vec<f64>,
        gamma: Vec<Vec<f64>>,
    ) -> Result<MaterialParams, ParamError> {
        let p = MaterialParams { mu, lambda, alpha, s, kappa, gamma };
        p.validate()?;
        Ok(p)
    }

    /// Same coefficients for all `j` networks and transfer `gamma` between
    /// every pair.
    pub fn uniform(
        mu: f64,
        lambda: f64,
        j: usize,
        alpha: f64,
        s: f64,
        kappa: f64,
        gamma: f64,
    ) -> Result<MaterialParams, ParamError> {
        let g = (0..j).map(|a| (0..j).map(|b| if a == b { 0.0 } else { gamma }).collect()).collect();
        MaterialParams::new(mu, lambda, vec![alpha; j], vec![s; j], vec![kappa; j], g)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let j = self.alpha.len();
        if j == 0 {
            return Err(ParamError::NoNetworks);
        }
        for (name, len) in [("s", self.s.len()), ("kappa", self.kappa.len()), ("gamma", self.gamma.len())] {
            if len != j {
                return Err(ParamError::Length { name, expected: j, got: len });
            }
        }
        if !(self.mu > 0.0) {
            return Err(ParamError::Shear(self.mu));
        }
        if !(2.0 * self.mu + self.lambda > 0.0) {
            return Err(ParamError::Dilatation(2.0 * self.mu + self.lambda));
        }
        for i in 0..j {
            let a = self.alpha[i];
            if !(a > 0.0 && a <= 1.0) {
                return Err(ParamError::BiotWillis { index: i + 1, value: a });
            }
            if !(self.s[i] > 0.0) {
                return Err(ParamError::Storage { index: i + 1, value: self.s[i] });
            }
            if !(self.kappa[i] > 0.0) {
                return Err(ParamError::Conductance { index: i + 1, value: self.kappa[i] });
            }
            if self.gamma[i].len() != j {
                return Err(ParamError::Length { name: "gamma row", expected: j, got: self.gamma[i].len() });
            }
        }
        for a in 0..j {
            for b in 0..j {
                let g = self.gamma[a][b];
                let bad = if a == b { g != 0.0 } else { !(g >= 0.0) || g != self.gamma[b][a] };
                if bad {
                    return Err(ParamError::Transfer { i: a + 1, j: b + 1, value: g });
                }
            }
        }
        Ok(())
    }

    pub fn num_networks(&self) -> usize {
        self.alpha.len()
    }

    pub fn kappa_min(&self) -> f64 {
        self.kappa.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn alpha_max(&self) -> f64 {
        self.alpha.iter().cloned().fold(0.0, f64::max)
    }

    /// Poisson ratio `λ / (2 (λ + μ))`.
    pub fn poisson_ratio(&self) -> f64 {
        self.lambda / (2.0 * (self.lambda + self.mu))
    }

    /// Young's modulus `μ (3λ + 2μ) / (λ + μ)`.
    pub fn youngs_modulus(&self) -> f64 {
        self.mu * (3.0 * self.lambda + 2.0 * self.mu) / (self.lambda + self.mu)
    }

    /// `σ = 2μ ε + λ tr(ε) I` for a displacement gradient `g[i][k] = ∂_k u_i`.
    pub fn stress(&self, g: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
        let div = g[0][0] + g[1][1];
        let off = self.mu * (g[0][1] + g[1][0]);
        [[2.0 * self.mu * g[0][0] + self.lambda * div, off], [off, 2.0 * self.mu * g[1][1] + self.lambda * div]]
    }

    /// The exchange operator `L` with `(L p)_j = Σ_i γ_ji (p_j − p_i)`.
    pub fn transfer_matrix(&self) -> Vec<Vec<f64>> {
        let j = self.num_networks();
        let mut l = vec![vec![0.0; j]; j];
        for a in 0..j {
            for b in 0..j {
                l[a][a] += self.gamma[a][b];
                l[a][b] -= self.gamma[a][b];
            }
        }
        l
    }
}

fn check_params(params: &MaterialParams) -> Result<()> {
    params.validate().map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn check_components(space: &Space, expected: usize, what: &str) -> Result<()> {
    if space.components() != expected {
        return Err(Error::InvalidArgument(format!(
            "{what} space has {} components, expected {expected}",
            space.components()
        )));
    }
    Ok(())
}

fn check_same_mesh(a: &Space, b: &Space) -> Result<()> {
    let (ma, mb) = (a.mesh(), b.mesh());
    if Arc::ptr_eq(ma, mb) || (ma.cells() == mb.cells() && ma.vertices() == mb.vertices()) {
        Ok(())
    } else {
        Err(Error::InvalidArgument("displacement and pressure spaces live on different meshes".into()))
    }
}

type Triplets = Vec<(usize, usize, f64)>;

/// Runs `local` on every cell in parallel and gathers the triplets in cell
/// order, so results do not depend on the thread count.
fn assemble_cells<F>(space: &Space, nrows: usize, ncols: usize, local: F) -> SparseMatrix
where
    F: Fn(usize, &CellGeometry, &mut Triplets) + Sync,
{
    let mesh = space.mesh();
    let per_cell: Vec<Triplets> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|k| {
            let geom = mesh.cell_geometry(k).expect("mesh cells are validated on construction");
            let mut t = Vec::new();
            local(k, &geom, &mut t);
            t
        })
        .collect();
    SparseMatrix::from_triplets(nrows, ncols, per_cell.into_iter().flatten().collect())
}

/// Elasticity stiffness `A[r, c] = a(φ_c, φ_r)`.
pub fn assemble_a(space_u: &Space, params: &MaterialParams) -> Result<SparseMatrix> {
    check_params(params)?;
    check_components(space_u, 2, "displacement")?;
    let quad = Quadrature::triangle(2 * (space_u.degree() - 1));
    let n = space_u.num_dofs();
    let (mu, lambda) = (params.mu, params.lambda);
    Ok(assemble_cells(space_u, n, n, |k, geom, out| {
        let tab = space_u.tabulate(k, geom, &quad.points, false);
        let m = tab.nodes;
        let mut local = vec![0.0; 4 * m * m];
        for (q, w) in quad.weights.iter().enumerate() {
            let w = w * 2.0 * geom.area;
            for a in 0..m {
                let ga = tab.grad(q, a);
                for b in 0..m {
                    let gb = tab.grad(q, b);
                    let dot = ga[0] * gb[0] + ga[1] * gb[1];
                    for c in 0..2 {
                        for d in 0..2 {
                            // test (a, c), trial (b, d)
                            let mut v = mu * ga[d] * gb[c] + lambda * ga[c] * gb[d];
                            if c == d {
                                v += mu * dot;
                            }
                            local[(2 * a + c) * 2 * m + 2 * b + d] += w * v;
                        }
                    }
                }
            }
        }
        for a in 0..m {
            for c in 0..2 {
                for b in 0..m {
                    for d in 0..2 {
                        out.push((space_u.dof(k, a, c), space_u.dof(k, b, d), local[(2 * a + c) * 2 * m + 2 * b + d]));
                    }
                }
            }
        }
    }))
}

/// Coupling matrix `B[r, c] = b(φ_r, ψ_c)`, rows indexed by displacement
/// dofs and columns by pressure dofs.
pub fn assemble_b(space_u: &Space, space_p: &Space, params: &MaterialParams) -> Result<SparseMatrix> {
    check_params(params)?;
    check_components(space_u, 2, "displacement")?;
    check_components(space_p, params.num_networks(), "pressure")?;
    check_same_mesh(space_u, space_p)?;
    let quad = Quadrature::triangle(space_u.degree() - 1 + space_p.degree());
    let nj = params.num_networks();
    Ok(assemble_cells(space_u, space_u.num_dofs(), space_p.num_dofs(), |k, geom, out| {
        let tu = space_u.tabulate(k, geom, &quad.points, false);
        let tp = space_p.tabulate(k, geom, &quad.points, false);
        let (mu_, mp) = (tu.nodes, tp.nodes);
        let mut local = vec![0.0; 2 * mu_ * mp];
        for (q, w) in quad.weights.iter().enumerate() {
            let w = w * 2.0 * geom.area;
            for a in 0..mu_ {
                let g = tu.grad(q, a);
                for b in 0..mp {
                    let psi = tp.value(q, b);
                    local[(2 * a) * mp + b] += w * g[0] * psi;
                    local[(2 * a + 1) * mp + b] += w * g[1] * psi;
                }
            }
        }
        for a in 0..mu_ {
            for c in 0..2 {
                for b in 0..mp {
                    let v = local[(2 * a + c) * mp + b];
                    for j in 0..nj {
                        out.push((space_u.dof(k, a, c), space_p.dof(k, b, j), params.alpha[j] * v));
                    }
                }
            }
        }
    }))
}

/// Scalar mass and stiffness matrices of one cell, `nodes × nodes` row-major.
fn scalar_mass_stiffness(
    space: &Space,
    k: usize,
    geom: &CellGeometry,
    quad: &Quadrature,
) -> (usize, Vec<f64>, Vec<f64>) {
    let tab = space.tabulate(k, geom, &quad.points, false);
    let m = tab.nodes;
    let mut mass = vec![0.0; m * m];
    let mut stiff = vec![0.0; m * m];
    for (q, w) in quad.weights.iter().enumerate() {
        let w = w * 2.0 * geom.area;
        for a in 0..m {
            let (va, ga) = (tab.value(q, a), tab.grad(q, a));
            for b in 0..m {
                let (vb, gb) = (tab.value(q, b), tab.grad(q, b));
                mass[a * m + b] += w * va * vb;
                stiff[a * m + b] += w * (ga[0] * gb[0] + ga[1] * gb[1]);
            }
        }
    }
    (m, mass, stiff)
}

/// Storage mass matrix `C[r, c] = c(ψ_c, ψ_r)`.
pub fn assemble_c(space_p: &Space, params: &MaterialParams) -> Result<SparseMatrix> {
    check_params(params)?;
    check_components(space_p, params.num_networks(), "pressure")?;
    let quad = Quadrature::triangle(2 * space_p.degree());
    let n = space_p.num_dofs();
    let nj = params.num_networks();
    Ok(assemble_cells(space_p, n, n, |k, geom, out| {
        let (m, mass, _) = scalar_mass_stiffness(space_p, k, geom, &quad);
        for a in 0..m {
            for b in 0..m {
                for j in 0..nj {
                    out.push((space_p.dof(k, a, j), space_p.dof(k, b, j), params.s[j] * mass[a * m + b]));
                }
            }
        }
    }))
}

/// Which expression of the transfer term [`assemble_d_with`] integrates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransferForm {
    /// `½ Σ_j Σ_i (γ_ji (p_j − p_i), q_j − q_i)`.
    Symmetrized,
    /// `Σ_j (Σ_i γ_ji (p_j − p_i), q_j)`.
    Direct,
}

/// Diffusion-plus-transfer matrix `D[r, c] = d(ψ_c, ψ_r)`.
pub fn assemble_d(space_p: &Space, params: &MaterialParams) -> Result<SparseMatrix> {
    assemble_d_with(space_p, params, TransferForm::Symmetrized)
}

pub fn assemble_d_with(space_p: &Space, params: &MaterialParams, form: TransferForm) -> Result<SparseMatrix> {
    check_params(params)?;
    check_components(space_p, params.num_networks(), "pressure")?;
    let quad = Quadrature::triangle(2 * space_p.degree());
    let n = space_p.num_dofs();
    let nj = params.num_networks();
    // coupling[j][i]: coefficient of (ψ_b component i) against (ψ_a component j)
    let mut coupling = vec![vec![0.0; nj]; nj];
    for j in 0..nj {
        for i in 0..nj {
            let g = params.gamma[j][i];
            match form {
                TransferForm::Symmetrized => {
                    // ½ γ_ji (e_j − e_i)(e_j − e_i)ᵀ
                    coupling[j][j] += 0.5 * g;
                    coupling[i][i] += 0.5 * g;
                    coupling[j][i] -= 0.5 * g;
                    coupling[i][j] -= 0.5 * g;
                }
                TransferForm::Direct => {
                    // γ_ji (p_j − p_i) tested with q_j
                    coupling[j][j] += g;
                    coupling[j][i] -= g;
                }
            }
        }
    }
    Ok(assemble_cells(space_p, n, n, |k, geom, out| {
        let (m, mass, stiff) = scalar_mass_stiffness(space_p, k, geom, &quad);
        for a in 0..m {
            for b in 0..m {
                for j in 0..nj {
                    out.push((space_p.dof(k, a, j), space_p.dof(k, b, j), params.kappa[j] * stiff[a * m + b]));
                    for i in 0..nj {
                        if coupling[j][i] != 0.0 {
                            out.push((space_p.dof(k, a, j), space_p.dof(k, b, i), coupling[j][i] * mass[a * m + b]));
                        }
                    }
                }
            }
        }
    }))
}

/// Quadrature degree used for analytic data against a degree-`k` space.
pub fn data_quadrature_degree(k: usize) -> usize {
    2 * k + 4
}

/// Load vector `∫ f(·, t) · φ_r dx` with the default data quadrature.
pub fn assemble_load<F>(space: &Space, f: F, t: f64) -> Vec<f64>
where
    F: Fn(Point, f64, &mut [f64]) + Sync,
{
    assemble_load_with(space, f, t, &Quadrature::triangle(data_quadrature_degree(space.degree())))
}

pub fn assemble_load_with<F>(space: &Space, f: F, t: f64, quad: &Quadrature) -> Vec<f64>
where
    F: Fn(Point, f64, &mut [f64]) + Sync,
{
    let mesh = space.mesh();
    let mc = space.components();
    let per_cell: Vec<Vec<(usize, f64)>> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|k| {
            let geom = mesh.cell_geometry(k).expect("mesh cells are validated on construction");
            let tab = space.tabulate(k, &geom, &quad.points, false);
            let mut local = vec![0.0; tab.nodes * mc];
            let mut val = vec![0.0; mc];
            for (q, (p, w)) in quad.points.iter().zip(&quad.weights).enumerate() {
                f(geom.map(*p), t, &mut val);
                let w = w * 2.0 * geom.area;
                for a in 0..tab.nodes {
                    let phi = tab.value(q, a);
                    for c in 0..mc {
                        local[a * mc + c] += w * phi * val[c];
                    }
                }
            }
            (0..tab.nodes)
                .flat_map(|a| (0..mc).map(move |c| (a, c)))
                .map(|(a, c)| (space.dof(k, a, c), local[a * mc + c]))
                .collect()
        })
        .collect();
    let mut out = vec![0.0; space.num_dofs()];
    for (dof, v) in per_cell.into_iter().flatten() {
        out[dof] += v;
    }
    out
}

/// Interpolated boundary values: `g` at boundary dofs, zero elsewhere.
pub fn boundary_values<G>(space: &Space, g: G, t: f64) -> Vec<f64>
where
    G: Fn(Point, f64, &mut [f64]),
{
    let mc = space.components();
    let mut out = vec![0.0; space.num_dofs()];
    for &node in space.boundary_nodes() {
        g(space.node_coords()[node], t, &mut out[node * mc..node * mc + mc]);
    }
    out
}

/// Boundary dofs of `space` as a mask.
pub fn boundary_mask(space: &Space) -> Vec<bool> {
    (0..space.num_dofs()).map(|d| space.is_boundary_dof(d)).collect()
}

/// Symmetric elimination of Dirichlet data `g` on the boundary of `space`.
///
/// Returns the constrained matrix (boundary rows and columns replaced by the
/// identity) and the matching right-hand side.
pub fn apply_dirichlet<G>(matrix: &SparseMatrix, rhs: &[f64], space: &Space, g: G, t: f64) -> (SparseMatrix, Vec<f64>)
where
    G: Fn(Point, f64, &mut [f64]),
{
    let fixed = boundary_mask(space);
    let values = boundary_values(space, g, t);
    let mut b = rhs.to_vec();
    matrix.lift(&mut b, &fixed, &values);
    (matrix.eliminate(&fixed), b)
}
