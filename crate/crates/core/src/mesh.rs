//! Conforming triangle meshes of polygonal 2D domains.
//!
//! Cells are stored counter-clockwise. Local edge `i` of a cell is the edge
//! opposite local vertex `i`, so it joins local vertices `(i + 1) % 3` and
//! `(i + 2) % 3`. Every cell carries the local index of its refinement edge,
//! which newest-vertex bisection splits first.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::MeshError;

/// A point in the plane.
pub type Point = [f64; 2];

/// The cells adjacent to an edge.
///
/// `plus` is always the adjacent cell with the smaller index; the edge normal
/// used by jump operators points out of `plus` and into `minus`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeCells {
    pub plus: usize,
    pub minus: Option<usize>,
}

/// A conforming simplicial mesh with full vertex/edge/cell connectivity.
#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    cell_edges: Vec<[usize; 3]>,
    edge_cells: Vec<EdgeCells>,
    boundary: Vec<bool>,
    refinement_edge: Vec<u8>,
    parent: Vec<Option<usize>>,
}

/// Geometric data of a single affine triangle.
#[derive(Clone, Copy, Debug)]
pub struct CellGeometry {
    /// Diameter of the cell (its longest edge).
    pub diameter: f64,
    pub area: f64,
    /// Length of local edge `i`.
    pub edge_lengths: [f64; 3],
    /// Outward unit normal of local edge `i`.
    pub normals: [Point; 3],
    /// Image of the reference vertex `(0, 0)`.
    pub origin: Point,
    /// Columns are the images of the reference axes: `x = origin + J ξ`.
    pub jacobian: [[f64; 2]; 2],
    /// Physical gradients of the three barycentric coordinates.
    pub barycentric_gradients: [Point; 3],
}

impl CellGeometry {
    /// Builds the geometry of the triangle `(a, b, c)`, which must be
    /// counter-clockwise.
    pub fn from_vertices(a: Point, b: Point, c: Point) -> Result<Self, MeshError> {
        let j = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let scale = (j[0][0].abs() + j[0][1].abs() + j[1][0].abs() + j[1][1].abs()).max(f64::MIN_POSITIVE);
        if det <= 1e-14 * scale * scale {
            return Err(MeshError::DegenerateCell { area: 0.5 * det });
        }
        // rows of J^{-1}
        let g1 = [j[1][1] / det, -j[0][1] / det];
        let g2 = [-j[1][0] / det, j[0][0] / det];
        let g0 = [-g1[0] - g2[0], -g1[1] - g2[1]];
        let verts = [a, b, c];
        let mut edge_lengths = [0.0; 3];
        let mut normals = [[0.0; 2]; 3];
        for i in 0..3 {
            let p = verts[(i + 1) % 3];
            let q = verts[(i + 2) % 3];
            let t = [q[0] - p[0], q[1] - p[1]];
            let len = t[0].hypot(t[1]);
            edge_lengths[i] = len;
            normals[i] = [t[1] / len, -t[0] / len];
        }
        let diameter = edge_lengths.iter().cloned().fold(0.0, f64::max);
        Ok(CellGeometry {
            diameter,
            area: 0.5 * det,
            edge_lengths,
            normals,
            origin: a,
            jacobian: j,
            barycentric_gradients: [g0, g1, g2],
        })
    }

    /// Maps reference coordinates to physical coordinates.
    pub fn map(&self, xi: Point) -> Point {
        let j = &self.jacobian;
        [self.origin[0] + j[0][0] * xi[0] + j[0][1] * xi[1], self.origin[1] + j[1][0] * xi[0] + j[1][1] * xi[1]]
    }

    /// Inverse of [`CellGeometry::map`].
    pub fn pull_back(&self, x: Point) -> Point {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        let g = &self.barycentric_gradients;
        [g[1][0] * d[0] + g[1][1] * d[1], g[2][0] * d[0] + g[2][1] * d[1]]
    }
}

impl Mesh {
    /// Builds a mesh from raw vertices and cells.
    ///
    /// Clockwise cells are reoriented. When `refinement_edge` is `None` each
    /// cell bisects its longest edge first, ties going to the smallest global
    /// edge index.
    pub fn from_cells(
        vertices: Vec<Point>,
        mut cells: Vec<[usize; 3]>,
        refinement_edge: Option<Vec<u8>>,
    ) -> Result<Self, MeshError> {
        let nv = vertices.len();
        let mut flipped = vec![false; cells.len()];
        for (k, cell) in cells.iter_mut().enumerate() {
            for &v in cell.iter() {
                if v >= nv {
                    return Err(MeshError::VertexOutOfRange { cell: k, vertex: v });
                }
            }
            let [a, b, c] = cell.map(|v| vertices[v]);
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            if det < 0.0 {
                cell.swap(1, 2);
                flipped[k] = true;
            }
        }
        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut edge_adjacent: Vec<Vec<usize>> = Vec::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        for (k, cell) in cells.iter().enumerate() {
            let mut ce = [0usize; 3];
            for (i, slot) in ce.iter_mut().enumerate() {
                let a = cell[(i + 1) % 3];
                let b = cell[(i + 2) % 3];
                let key = [a.min(b), a.max(b)];
                let e = *edge_index.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_adjacent.push(Vec::new());
                    edges.len() - 1
                });
                edge_adjacent[e].push(k);
                *slot = e;
            }
            cell_edges.push(ce);
        }
        let mut edge_cells = Vec::with_capacity(edges.len());
        let mut boundary = Vec::with_capacity(edges.len());
        for (e, adj) in edge_adjacent.iter().enumerate() {
            match adj.as_slice() {
                [p] => {
                    edge_cells.push(EdgeCells { plus: *p, minus: None });
                    boundary.push(true);
                }
                [p, q] => {
                    edge_cells.push(EdgeCells { plus: (*p).min(*q), minus: Some((*p).max(*q)) });
                    boundary.push(false);
                }
                _ => return Err(MeshError::NonManifoldEdge { edge: edges[e], cells: adj.len() }),
            }
        }
        let refinement_edge = match refinement_edge {
            Some(r) => {
                if r.len() != cells.len() || r.iter().any(|&i| i > 2) {
                    return Err(MeshError::InvalidRefinementEdges);
                }
                // a reoriented cell swapped local vertices 1 and 2, which also
                // swaps local edges 1 and 2
                r.iter().zip(&flipped).map(|(&i, &f)| if f && i > 0 { 3 - i } else { i }).collect()
            }
            None => cells.iter().zip(&cell_edges).map(|(cell, ce)| longest_edge(&vertices, cell, ce)).collect(),
        };
        let parent = vec![None; cells.len()];
        let mesh = Mesh { vertices, cells, edges, cell_edges, edge_cells, boundary, refinement_edge, parent };
        for k in 0..mesh.num_cells() {
            mesh.cell_geometry(k)?;
        }
        Ok(mesh)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn cell_edges(&self, k: usize) -> [usize; 3] {
        self.cell_edges[k]
    }

    pub fn edge_cells(&self, e: usize) -> EdgeCells {
        self.edge_cells[e]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.boundary[e]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    /// Local index of the refinement edge of cell `k`.
    pub fn refinement_edge(&self, k: usize) -> usize {
        self.refinement_edge[k] as usize
    }

    /// The cell of the previous mesh this cell was cut from, if the mesh was
    /// produced by [`Mesh::bisect`].
    pub fn parent(&self, k: usize) -> Option<usize> {
        self.parent[k]
    }

    pub fn interior_edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(move |&e| !self.boundary[e])
    }

    /// Local index of global edge `e` within cell `k`.
    pub fn local_edge_index(&self, k: usize, e: usize) -> Option<usize> {
        self.cell_edges[k].iter().position(|&x| x == e)
    }

    pub fn cell_geometry(&self, k: usize) -> Result<CellGeometry, MeshError> {
        let cell = self.cells.get(k).ok_or(MeshError::CellOutOfRange { cell: k, len: self.cells.len() })?;
        let [a, b, c] = cell.map(|v| self.vertices[v]);
        CellGeometry::from_vertices(a, b, c)
    }

    /// Geometry of every cell, in cell order.
    pub fn geometries(&self) -> Vec<CellGeometry> {
        (0..self.num_cells())
            .map(|k| self.cell_geometry(k).expect("mesh cells are validated on construction"))
            .collect()
    }

    /// Largest cell diameter.
    pub fn max_diameter(&self) -> f64 {
        self.geometries().iter().map(|g| g.diameter).fold(0.0, f64::max)
    }

    /// Checks every structural invariant and returns the first violation.
    pub fn check_invariants(&self) -> Result<(), MeshError> {
        for k in 0..self.num_cells() {
            self.cell_geometry(k)?;
        }
        let v = self.num_vertices() as i64;
        let e = self.num_edges() as i64;
        let c = self.num_cells() as i64;
        if v - e + c != 1 {
            return Err(MeshError::EulerCharacteristic { value: v - e + c });
        }
        let mut count = vec![0usize; self.num_edges()];
        for (k, ce) in self.cell_edges.iter().enumerate() {
            for (i, &edge) in ce.iter().enumerate() {
                let a = self.cells[k][(i + 1) % 3];
                let b = self.cells[k][(i + 2) % 3];
                if self.edges[edge] != [a.min(b), a.max(b)] {
                    return Err(MeshError::Inconsistent("cell-edge table does not match cell vertices"));
                }
                count[edge] += 1;
            }
        }
        for (edge, &n) in count.iter().enumerate() {
            let ec = self.edge_cells[edge];
            let listed = 1 + ec.minus.is_some() as usize;
            if n != listed || self.boundary[edge] != (listed == 1) {
                return Err(MeshError::Inconsistent("edge adjacency does not match boundary flags"));
            }
            if let Some(m) = ec.minus {
                if m <= ec.plus {
                    return Err(MeshError::Inconsistent("edge plus cell must have the smaller index"));
                }
            }
        }
        // hanging nodes: a vertex lying strictly inside an edge it does not bound
        let mut by_vertex: HashMap<(i64, i64), usize> = HashMap::new();
        let key = |p: Point| ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64);
        for (i, &p) in self.vertices.iter().enumerate() {
            if by_vertex.insert(key(p), i).is_some() {
                return Err(MeshError::Inconsistent("duplicate vertex coordinates"));
            }
        }
        for &[a, b] in &self.edges {
            let pa = self.vertices[a];
            let pb = self.vertices[b];
            let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
            if let Some(&m) = by_vertex.get(&key(mid)) {
                if m != a && m != b {
                    return Err(MeshError::HangingNode { vertex: m, edge: [a, b] });
                }
            }
        }
        Ok(())
    }

    /// Newest-vertex bisection of the marked cells with conforming closure.
    ///
    /// Every marked cell is split at least once through its refinement edge;
    /// neighbours are split as needed so that no hanging nodes remain. The
    /// returned mesh records the parent of every new cell.
    pub fn bisect(&self, marked: &[usize]) -> Mesh {
        let ne = self.num_edges();
        let mut split = vec![false; ne];
        let mut stack: Vec<usize> = Vec::new();
        for &k in marked {
            assert!(k < self.num_cells(), "marked cell {k} out of range");
            let e = self.cell_edges[k][self.refinement_edge(k)];
            if !split[e] {
                split[e] = true;
                stack.push(e);
            }
        }
        // closure: a cell with any split edge must split its refinement edge
        while let Some(e) = stack.pop() {
            let ec = self.edge_cells[e];
            for k in std::iter::once(ec.plus).chain(ec.minus) {
                let r = self.cell_edges[k][self.refinement_edge(k)];
                if !split[r] {
                    split[r] = true;
                    stack.push(r);
                }
            }
        }
        if !split.iter().any(|&s| s) {
            return self.clone();
        }

        let mut vertices = self.vertices.clone();
        let mut midpoint = vec![usize::MAX; ne];
        for (e, &s) in split.iter().enumerate() {
            if s {
                let [a, b] = self.edges[e];
                let (pa, pb) = (self.vertices[a], self.vertices[b]);
                midpoint[e] = vertices.len();
                vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
            }
        }

        let mut cells = Vec::new();
        let mut refinement = Vec::new();
        let mut parent = Vec::new();
        let edge_of: HashMap<[usize; 2], usize> = self.edges.iter().enumerate().map(|(e, &key)| (key, e)).collect();
        let mid_of = |a: usize, b: usize| -> Option<usize> {
            let e = edge_of[&[a.min(b), a.max(b)]];
            split[e].then_some(midpoint[e])
        };
        for k in 0..self.num_cells() {
            let r = self.refinement_edge(k);
            let e = self.cell_edges[k][r];
            if !split[e] {
                cells.push(self.cells[k]);
                refinement.push(r as u8);
                parent.push(Some(k));
                continue;
            }
            // rotate so that the refinement edge joins v1 and v2
            let c = self.cells[k];
            let v0 = c[r];
            let v1 = c[(r + 1) % 3];
            let v2 = c[(r + 2) % 3];
            let m = midpoint[e];
            // children (v0, v1, m) and (v0, m, v2); newest vertex m sits at
            // local index 2 and 1 respectively and the refinement edge is
            // opposite to it
            let children = [([v0, v1, m], 2usize, [v0, v1]), ([v0, m, v2], 1usize, [v2, v0])];
            for (child, child_ref, [a, b]) in children {
                match mid_of(a, b) {
                    None => {
                        cells.push(child);
                        refinement.push(child_ref as u8);
                        parent.push(Some(k));
                    }
                    Some(m2) => {
                        // split the child through its refinement edge (a, b)
                        let apex = child[child_ref];
                        let (p, q) = (child[(child_ref + 1) % 3], child[(child_ref + 2) % 3]);
                        cells.push([apex, p, m2]);
                        refinement.push(2);
                        parent.push(Some(k));
                        cells.push([apex, m2, q]);
                        refinement.push(1);
                        parent.push(Some(k));
                    }
                }
            }
        }
        let mut mesh =
            Mesh::from_cells(vertices, cells, Some(refinement)).expect("bisection of a valid mesh yields a valid mesh");
        mesh.parent = parent;
        mesh
    }

    /// Writes the mesh as plain text: a `V C` header, `V` lines `x y` and
    /// `C` lines `i j k` with 0-based vertex indices.
    pub fn write_ascii<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.num_vertices(), self.num_cells())?;
        for p in &self.vertices {
            writeln!(w, "{:.17e} {:.17e}", p[0], p[1])?;
        }
        for c in &self.cells {
            writeln!(w, "{} {} {}", c[0], c[1], c[2])?;
        }
        Ok(())
    }

    /// Reads the format produced by [`Mesh::write_ascii`].
    pub fn read_ascii<R: BufRead>(r: R) -> Result<Mesh, MeshError> {
        let mut lines = r.lines().enumerate().filter_map(|(i, l)| match l {
            Ok(l) if l.trim().is_empty() || l.trim_start().starts_with('#') => None,
            other => Some((i + 1, other)),
        });
        let mut next = |what: &'static str| -> Result<(usize, Vec<String>), MeshError> {
            let (n, line) = lines.next().ok_or(MeshError::Parse { line: 0, message: format!("missing {what}") })?;
            let line = line.map_err(|e| MeshError::Parse { line: n, message: e.to_string() })?;
            Ok((n, line.split_whitespace().map(str::to_owned).collect()))
        };
        fn parse<T: std::str::FromStr>(line: usize, s: &str) -> Result<T, MeshError> {
            s.parse().map_err(|_| MeshError::Parse { line, message: format!("cannot parse `{s}`") })
        }
        let (n, header) = next("header")?;
        if header.len() != 2 {
            return Err(MeshError::Parse { line: n, message: "header must be `V C`".into() });
        }
        let nv: usize = parse(n, &header[0])?;
        let nc: usize = parse(n, &header[1])?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (n, f) = next("vertex")?;
            if f.len() != 2 {
                return Err(MeshError::Parse { line: n, message: "vertex lines hold `x y`".into() });
            }
            vertices.push([parse(n, &f[0])?, parse(n, &f[1])?]);
        }
        let mut cells = Vec::with_capacity(nc);
        for _ in 0..nc {
            let (n, f) = next("cell")?;
            if f.len() != 3 {
                return Err(MeshError::Parse { line: n, message: "cell lines hold `i j k`".into() });
            }
            cells.push([parse(n, &f[0])?, parse(n, &f[1])?, parse(n, &f[2])?]);
        }
        Mesh::from_cells(vertices, cells, None)
    }
}

fn longest_edge(vertices: &[Point], cell: &[usize; 3], ce: &[usize; 3]) -> u8 {
    let mut best = 0usize;
    let mut best_len = -1.0;
    for i in 0..3 {
        let p = vertices[cell[(i + 1) % 3]];
        let q = vertices[cell[(i + 2) % 3]];
        let len = (q[0] - p[0]).hypot(q[1] - p[1]);
        let better = len > best_len * (1.0 + 1e-12) || ((len - best_len).abs() <= 1e-12 * len && ce[i] < ce[best]);
        if better {
            best = i;
            best_len = len;
        }
    }
    best as u8
}

/// Uniform mesh of the unit square with `n × n` subsquares, each split by
/// the diagonal from its lower-left to its upper-right corner.
pub fn unit_square_mesh(n: usize) -> Result<Mesh, MeshError> {
    if n == 0 {
        return Err(MeshError::InvalidArgument("unit_square_mesh needs N >= 1".into()));
    }
    let h = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 * h, j as f64 * h]);
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (ll, lr, ul, ur) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            cells.push([ll, lr, ur]);
            cells.push([ll, ur, ul]);
        }
    }
    Mesh::from_cells(vertices, cells, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + b.abs())
    }

    #[test]
    fn unit_square_counts() {
        for (n, v, c, e) in [(1, 4, 2, 5), (4, 25, 32, 56), (8, 81, 128, 208)] {
            let m = unit_square_mesh(n).unwrap();
            assert_eq!((m.num_vertices(), m.num_cells(), m.num_edges()), (v, c, e));
            m.check_invariants().unwrap();
        }
        assert!(unit_square_mesh(0).is_err());
    }

    #[test]
    fn refinement_edge_is_the_diagonal() {
        let m = unit_square_mesh(2).unwrap();
        for k in 0..m.num_cells() {
            let g = m.cell_geometry(k).unwrap();
            let r = m.refinement_edge(k);
            assert!(close(g.edge_lengths[r], g.diameter));
        }
    }

    #[test]
    fn reference_and_uniform_geometry() {
        let g = CellGeometry::from_vertices([0.0, 0.0], [1.0, 0.0], [0.0, 1.0]).unwrap();
        assert!(close(g.area, 0.5));
        assert!(close(g.diameter, 2f64.sqrt()));
        let m = unit_square_mesh(4).unwrap();
        for k in 0..m.num_cells() {
            let g = m.cell_geometry(k).unwrap();
            assert!(close(g.diameter, 2f64.sqrt() / 4.0));
            assert!(close(g.area, 1.0 / 32.0));
        }
    }

    #[test]
    fn normals_of_right_triangle() {
        let verts = [[0.0, 0.0], [2.0, 0.0], [0.0, 1.0]];
        let g = CellGeometry::from_vertices(verts[0], verts[1], verts[2]).unwrap();
        for i in 0..3 {
            let p = verts[(i + 1) % 3];
            let q = verts[(i + 2) % 3];
            let t = [q[0] - p[0], q[1] - p[1]];
            let n = g.normals[i];
            assert!((n[0] * t[0] + n[1] * t[1]).abs() < 1e-14);
            assert!(close(n[0].hypot(n[1]), 1.0));
            // outward: points away from the opposite vertex
            let o = verts[i];
            assert!(n[0] * (p[0] - o[0]) + n[1] * (p[1] - o[1]) > 0.0);
        }
        let s = 1.0 / 5f64.sqrt();
        assert!(close(g.normals[0][0], s) && close(g.normals[0][1], 2.0 * s));
        assert!(close(g.normals[1][0], -1.0) && close(g.normals[1][1], 0.0));
        assert!(close(g.normals[2][0], 0.0) && close(g.normals[2][1], -1.0));
    }

    #[test]
    fn degenerate_cell_is_rejected() {
        assert!(matches!(
            CellGeometry::from_vertices([0.0, 0.0], [1.0, 1.0], [2.0, 2.0]),
            Err(MeshError::DegenerateCell { .. })
        ));
        let m = unit_square_mesh(1).unwrap();
        assert!(m.cell_geometry(2).is_err());
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let m = Mesh::from_cells(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 2, 1]], None).unwrap();
        assert!(m.cell_geometry(0).unwrap().area > 0.0);
    }

    #[test]
    fn pull_back_inverts_map() {
        let g = CellGeometry::from_vertices([0.3, 0.1], [1.2, 0.4], [0.5, 0.9]).unwrap();
        let xi = [0.2, 0.35];
        let back = g.pull_back(g.map(xi));
        assert!(close(back[0], xi[0]) && close(back[1], xi[1]));
    }

    #[test]
    fn empty_marking_is_identity() {
        let m = unit_square_mesh(3).unwrap();
        let r = m.bisect(&[]);
        assert_eq!(r.cells(), m.cells());
        assert_eq!(r.vertices(), m.vertices());
    }

    #[test]
    fn bisect_both_cells_of_single_square() {
        let m = unit_square_mesh(1).unwrap().bisect(&[0, 1]);
        assert_eq!(m.num_cells(), 4);
        assert_eq!(m.num_vertices(), 5);
        m.check_invariants().unwrap();
    }

    #[test]
    fn bisect_one_cell_triggers_closure() {
        let m = unit_square_mesh(2).unwrap();
        let r = m.bisect(&[0]);
        assert!(r.num_cells() > 9 && r.num_cells() < 16, "{}", r.num_cells());
        r.check_invariants().unwrap();
        let before = m.cell_geometry(0).unwrap().diameter;
        let children: Vec<_> = (0..r.num_cells()).filter(|&k| r.parent(k) == Some(0)).collect();
        assert!(children.len() >= 2);
        for k in children {
            assert!(r.cell_geometry(k).unwrap().diameter < before);
        }
    }

    #[test]
    fn two_uniform_sweeps_halve_the_mesh_size() {
        let mut m = unit_square_mesh(2).unwrap();
        let mut sizes = vec![m.max_diameter()];
        for _ in 0..4 {
            let all: Vec<usize> = (0..m.num_cells()).collect();
            m = m.bisect(&all);
            m.check_invariants().unwrap();
            sizes.push(m.max_diameter());
        }
        assert!(close(sizes[2], 0.5 * sizes[0]));
        assert!(close(sizes[4], 0.5 * sizes[2]));
        assert_eq!(m.num_cells(), 8 * 16);
    }

    #[test]
    fn ascii_roundtrip() {
        let m = unit_square_mesh(2).unwrap().bisect(&[3]);
        let mut buf = Vec::new();
        m.write_ascii(&mut buf).unwrap();
        let back = Mesh::read_ascii(buf.as_slice()).unwrap();
        assert_eq!(back.cells(), m.cells());
        assert_eq!(back.vertices(), m.vertices());
        assert!(Mesh::read_ascii("3 1\n0 0\n1 0\n".as_bytes()).is_err());
    }
}
