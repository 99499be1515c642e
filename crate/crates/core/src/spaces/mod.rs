//! Continuous Lagrange spaces on a [`Mesh`].
//!
//! Global nodes are numbered vertices first, then edge nodes (edge by edge,
//! ordered from the lower to the higher global vertex), then cell interiors.
//! Vector-valued spaces interleave components per node, so degree of freedom
//! `node * m + c` holds component `c` of node `node`.

pub mod lagrange;
pub mod quadrature;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{CellGeometry, Mesh, Point};

pub use lagrange::NodeKind;
pub use quadrature::Quadrature;

#[derive(Debug)]
pub struct Space {
    mesh: Arc<Mesh>,
    degree: usize,
    components: usize,
    num_nodes: usize,
    nodes_per_cell: usize,
    cell_nodes: Vec<usize>,
    cell_kinds: Vec<NodeKind>,
    node_coords: Vec<Point>,
    boundary_nodes: Vec<usize>,
    boundary_dofs: Vec<usize>,
    boundary_mask: Vec<bool>,
}

/// Builds the degree-`degree` continuous Lagrange space with `components`
/// value components.
pub fn make_space(mesh: Arc<Mesh>, degree: usize, components: usize) -> Result<Arc<Space>> {
    if !(1..=3).contains(&degree) {
        return Err(Error::InvalidArgument(format!("unsupported Lagrange degree {degree}, expected 1, 2 or 3")));
    }
    if components == 0 {
        return Err(Error::InvalidArgument("a space needs at least one component".into()));
    }
    let nv = mesh.num_vertices();
    let ne = mesh.num_edges();
    let nc = mesh.num_cells();
    let per_edge = degree - 1;
    let per_cell = if degree == 3 { 1 } else { 0 };
    let num_nodes = nv + per_edge * ne + per_cell * nc;
    let nodes_per_cell = (degree + 1) * (degree + 2) / 2;

    let mut node_coords = vec![[0.0; 2]; num_nodes];
    node_coords[..nv].copy_from_slice(mesh.vertices());
    let mut cell_nodes = Vec::with_capacity(nc * nodes_per_cell);
    let mut cell_kinds = Vec::with_capacity(nc * nodes_per_cell);
    for k in 0..nc {
        let cell = mesh.cells()[k];
        let ce = mesh.cell_edges(k);
        let forward = [0, 1, 2].map(|i| cell[(i + 1) % 3] < cell[(i + 2) % 3]);
        let geom = mesh.cell_geometry(k)?;
        for kind in lagrange::local_nodes(degree, forward) {
            let node = match kind {
                NodeKind::Vertex(i) => cell[i as usize],
                NodeKind::EdgeMid(a, b) => nv + ce[3 - a as usize - b as usize],
                NodeKind::EdgeThird { near, far } => {
                    let e = ce[3 - near as usize - far as usize];
                    let slot = if cell[near as usize] == mesh.edges()[e][0] { 0 } else { 1 };
                    nv + 2 * e + slot
                }
                NodeKind::Interior => nv + per_edge * ne + k,
            };
            let l = kind.barycentric();
            node_coords[node] = geom.map([l[1], l[2]]);
            cell_nodes.push(node);
            cell_kinds.push(kind);
        }
    }

    let mut on_boundary = vec![false; num_nodes];
    for e in 0..ne {
        if mesh.is_boundary_edge(e) {
            let [a, b] = mesh.edges()[e];
            on_boundary[a] = true;
            on_boundary[b] = true;
            for s in 0..per_edge {
                on_boundary[nv + per_edge * e + s] = true;
            }
        }
    }
    let boundary_nodes: Vec<usize> = (0..num_nodes).filter(|&n| on_boundary[n]).collect();
    let boundary_dofs: Vec<usize> =
        boundary_nodes.iter().flat_map(|&n| (0..components).map(move |c| n * components + c)).collect();
    let mut boundary_mask = vec![false; num_nodes * components];
    for &d in &boundary_dofs {
        boundary_mask[d] = true;
    }
    Ok(Arc::new(Space {
        mesh,
        degree,
        components,
        num_nodes,
        nodes_per_cell,
        cell_nodes,
        cell_kinds,
        node_coords,
        boundary_nodes,
        boundary_dofs,
        boundary_mask,
    }))
}

/// Shape function data of one cell at a set of reference points.
///
/// Entries are stored point-major: index `q * nodes + i`.
#[derive(Clone, Debug)]
pub struct CellTabulation {
    pub nodes: usize,
    pub values: Vec<f64>,
    pub grads: Vec<Point>,
    pub hessians: Vec<[[f64; 2]; 2]>,
}

impl CellTabulation {
    #[inline]
    pub fn value(&self, q: usize, i: usize) -> f64 {
        self.values[q * self.nodes + i]
    }

    #[inline]
    pub fn grad(&self, q: usize, i: usize) -> Point {
        self.grads[q * self.nodes + i]
    }

    #[inline]
    pub fn hessian(&self, q: usize, i: usize) -> [[f64; 2]; 2] {
        self.hessians[q * self.nodes + i]
    }
}

impl Space {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_dofs(&self) -> usize {
        self.num_nodes * self.components
    }

    pub fn nodes_per_cell(&self) -> usize {
        self.nodes_per_cell
    }

    /// Global node indices of cell `k`, in local order.
    pub fn cell_nodes(&self, k: usize) -> &[usize] {
        &self.cell_nodes[k * self.nodes_per_cell..(k + 1) * self.nodes_per_cell]
    }

    pub fn cell_kinds(&self, k: usize) -> &[NodeKind] {
        &self.cell_kinds[k * self.nodes_per_cell..(k + 1) * self.nodes_per_cell]
    }

    /// Global dof of local node `i`, component `c` on cell `k`.
    #[inline]
    pub fn dof(&self, k: usize, i: usize, c: usize) -> usize {
        self.cell_nodes[k * self.nodes_per_cell + i] * self.components + c
    }

    pub fn node_coords(&self) -> &[Point] {
        &self.node_coords
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    /// All dofs whose node lies on the boundary, sorted.
    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary_dofs
    }

    pub fn is_boundary_dof(&self, dof: usize) -> bool {
        self.boundary_mask[dof]
    }

    /// Whether two spaces live on the same mesh object.
    pub fn same_mesh(&self, other: &Space) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
    }

    /// Tabulates the shape functions of cell `k` at reference points.
    pub fn tabulate(&self, k: usize, geom: &CellGeometry, points: &[Point], hessians: bool) -> CellTabulation {
        let n = self.nodes_per_cell;
        let kinds = self.cell_kinds(k);
        let bg = &geom.barycentric_gradients;
        let mut t = CellTabulation {
            nodes: n,
            values: Vec::with_capacity(points.len() * n),
            grads: Vec::with_capacity(points.len() * n),
            hessians: if hessians { Vec::with_capacity(points.len() * n) } else { Vec::new() },
        };
        for p in points {
            let l = [1.0 - p[0] - p[1], p[0], p[1]];
            for &kind in kinds {
                let d = lagrange::shape(self.degree, kind, l);
                t.values.push(d.value);
                t.grads.push(lagrange::physical_gradient(&d, bg));
                if hessians {
                    t.hessians.push(lagrange::physical_hessian(&d, bg));
                }
            }
        }
        t
    }

    /// Coefficients of cell `k` gathered from a global vector, node-major.
    pub fn gather(&self, k: usize, values: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let m = self.components;
        for &node in self.cell_nodes(k) {
            out.extend_from_slice(&values[node * m..node * m + m]);
        }
    }
}

/// Values and gradients of a field at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct PointValue {
    pub value: Vec<f64>,
    pub gradient: Vec<Point>,
}

/// A finite element function at one time level.
#[derive(Clone, Debug)]
pub struct Field {
    space: Arc<Space>,
    values: Vec<f64>,
    time: f64,
}

impl Field {
    pub fn new(space: Arc<Space>, values: Vec<f64>, time: f64) -> Result<Field> {
        if values.len() != space.num_dofs() {
            return Err(Error::InvalidArgument(format!(
                "coefficient vector has length {}, space has {} dofs",
                values.len(),
                space.num_dofs()
            )));
        }
        Ok(Field { space, values, time })
    }

    pub fn zeros(space: Arc<Space>, time: f64) -> Field {
        let n = space.num_dofs();
        Field { space, values: vec![0.0; n], time }
    }

    pub fn space(&self) -> &Arc<Space> {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Values and physical gradients on cell `cell` at reference points.
    pub fn evaluate(&self, cell: usize, points: &[Point]) -> Result<Vec<PointValue>> {
        let mesh = self.space.mesh();
        if cell >= mesh.num_cells() {
            return Err(Error::InvalidArgument(format!("cell {cell} out of range ({} cells)", mesh.num_cells())));
        }
        let geom = mesh.cell_geometry(cell)?;
        let tab = self.space.tabulate(cell, &geom, points, false);
        let m = self.space.components();
        let mut local = Vec::new();
        self.space.gather(cell, &self.values, &mut local);
        Ok((0..points.len())
            .map(|q| {
                let mut value = vec![0.0; m];
                let mut gradient = vec![[0.0; 2]; m];
                for i in 0..tab.nodes {
                    let phi = tab.value(q, i);
                    let g = tab.grad(q, i);
                    for c in 0..m {
                        let a = local[i * m + c];
                        value[c] += a * phi;
                        gradient[c][0] += a * g[0];
                        gradient[c][1] += a * g[1];
                    }
                }
                PointValue { value, gradient }
            })
            .collect())
    }
}

/// Nodal interpolation of `f(x, t, out)` into `space` at time `t`.
pub fn interpolate<F>(f: F, space: &Arc<Space>, t: f64) -> Field
where
    F: Fn(Point, f64, &mut [f64]),
{
    let m = space.components();
    let mut values = vec![0.0; space.num_dofs()];
    for (node, &x) in space.node_coords().iter().enumerate() {
        f(x, t, &mut values[node * m..node * m + m]);
    }
    Field { space: space.clone(), values, time: t }
}
