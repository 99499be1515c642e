//! Lagrange shape functions of degree 1–3 written in barycentric coordinates.
//!
//! Each local node knows which barycentric coordinates it depends on, so the
//! same formulas serve any cell orientation. Physical derivatives follow from
//! the (constant) gradients of the barycentric coordinates on affine cells.

use crate::mesh::Point;

/// Position of a local node within the cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    /// Vertex `i`.
    Vertex(u8),
    /// Midpoint of the edge between local vertices `a` and `b` (degree 2).
    EdgeMid(u8, u8),
    /// Edge node at 2/3 of the way from `far` towards `near` (degree 3).
    EdgeThird { near: u8, far: u8 },
    /// Cell barycentre (degree 3).
    Interior,
}

impl NodeKind {
    /// Barycentric coordinates of the node.
    pub fn barycentric(self) -> [f64; 3] {
        let mut l = [0.0; 3];
        match self {
            NodeKind::Vertex(i) => l[i as usize] = 1.0,
            NodeKind::EdgeMid(a, b) => {
                l[a as usize] = 0.5;
                l[b as usize] = 0.5;
            }
            NodeKind::EdgeThird { near, far } => {
                l[near as usize] = 2.0 / 3.0;
                l[far as usize] = 1.0 / 3.0;
            }
            NodeKind::Interior => l = [1.0 / 3.0; 3],
        }
        l
    }
}

/// Value, barycentric gradient and barycentric Hessian of one shape function.
#[derive(Clone, Copy, Debug, Default)]
pub struct ShapeDerivatives {
    pub value: f64,
    pub grad: [f64; 3],
    pub hess: [[f64; 3]; 3],
}

/// Evaluates the shape function attached to `kind` for an element of the
/// given `degree` at barycentric point `l`.
pub fn shape(degree: usize, kind: NodeKind, l: [f64; 3]) -> ShapeDerivatives {
    let mut s = ShapeDerivatives::default();
    match (degree, kind) {
        (1, NodeKind::Vertex(i)) => {
            let i = i as usize;
            s.value = l[i];
            s.grad[i] = 1.0;
        }
        (2, NodeKind::Vertex(i)) => {
            let i = i as usize;
            s.value = l[i] * (2.0 * l[i] - 1.0);
            s.grad[i] = 4.0 * l[i] - 1.0;
            s.hess[i][i] = 4.0;
        }
        (2, NodeKind::EdgeMid(a, b)) => {
            let (a, b) = (a as usize, b as usize);
            s.value = 4.0 * l[a] * l[b];
            s.grad[a] = 4.0 * l[b];
            s.grad[b] = 4.0 * l[a];
            s.hess[a][b] = 4.0;
            s.hess[b][a] = 4.0;
        }
        (3, NodeKind::Vertex(i)) => {
            let i = i as usize;
            let x = l[i];
            s.value = 0.5 * x * (3.0 * x - 1.0) * (3.0 * x - 2.0);
            s.grad[i] = 0.5 * (27.0 * x * x - 18.0 * x + 2.0);
            s.hess[i][i] = 27.0 * x - 9.0;
        }
        (3, NodeKind::EdgeThird { near, far }) => {
            let (i, j) = (near as usize, far as usize);
            let (a, b) = (l[i], l[j]);
            s.value = 4.5 * a * b * (3.0 * a - 1.0);
            s.grad[i] = 4.5 * (6.0 * a * b - b);
            s.grad[j] = 4.5 * (3.0 * a * a - a);
            s.hess[i][i] = 27.0 * b;
            s.hess[i][j] = 4.5 * (6.0 * a - 1.0);
            s.hess[j][i] = s.hess[i][j];
        }
        (3, NodeKind::Interior) => {
            s.value = 27.0 * l[0] * l[1] * l[2];
            s.grad = [27.0 * l[1] * l[2], 27.0 * l[0] * l[2], 27.0 * l[0] * l[1]];
            s.hess[0][1] = 27.0 * l[2];
            s.hess[1][0] = 27.0 * l[2];
            s.hess[0][2] = 27.0 * l[1];
            s.hess[2][0] = 27.0 * l[1];
            s.hess[1][2] = 27.0 * l[0];
            s.hess[2][1] = 27.0 * l[0];
        }
        _ => panic!("no degree-{degree} shape function for {kind:?}"),
    }
    s
}

/// Physical gradient from barycentric derivatives.
#[inline]
pub fn physical_gradient(d: &ShapeDerivatives, bary_grads: &[Point; 3]) -> Point {
    let mut g = [0.0; 2];
    for a in 0..3 {
        g[0] += d.grad[a] * bary_grads[a][0];
        g[1] += d.grad[a] * bary_grads[a][1];
    }
    g
}

/// Physical Hessian from barycentric derivatives.
#[inline]
pub fn physical_hessian(d: &ShapeDerivatives, bary_grads: &[Point; 3]) -> [[f64; 2]; 2] {
    let mut h = [[0.0; 2]; 2];
    for a in 0..3 {
        for b in 0..3 {
            let c = d.hess[a][b];
            if c != 0.0 {
                for r in 0..2 {
                    for s in 0..2 {
                        h[r][s] += c * bary_grads[a][r] * bary_grads[b][s];
                    }
                }
            }
        }
    }
    h
}

/// Local nodes of a degree-`degree` element on a cell whose local edge `i`
/// has global orientation `edge_forward[i]` (true when the global edge runs
/// from local vertex `(i + 1) % 3` to `(i + 2) % 3`).
pub fn local_nodes(degree: usize, edge_forward: [bool; 3]) -> Vec<NodeKind> {
    let mut nodes: Vec<NodeKind> = (0..3).map(NodeKind::Vertex).collect();
    match degree {
        1 => {}
        2 => {
            for i in 0..3u8 {
                nodes.push(NodeKind::EdgeMid((i + 1) % 3, (i + 2) % 3));
            }
        }
        3 => {
            for i in 0..3u8 {
                let (a, b) = ((i + 1) % 3, (i + 2) % 3);
                let (first, second) = if edge_forward[i as usize] { (a, b) } else { (b, a) };
                nodes.push(NodeKind::EdgeThird { near: first, far: second });
                nodes.push(NodeKind::EdgeThird { near: second, far: first });
            }
            nodes.push(NodeKind::Interior);
        }
        _ => panic!("unsupported degree {degree}"),
    }
    nodes
}
