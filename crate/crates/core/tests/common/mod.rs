//! Helpers shared by the integration tests: an independent dense Biot
//! solver, a finite-difference check of manufactured sources, random test
//! functions and spectra of assembled forms.

#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::Arc;

use faer::prelude::Solve;
use faer::{Col, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mpet_adapt::forms::MaterialParams;
use mpet_adapt::mesh::{Mesh, Point};
use mpet_adapt::problem::{ExactSolution, Manufactured, MpetProblem};
use mpet_adapt::solver::State;
use mpet_adapt::spaces::{Field, Space};
use mpet_adapt::sparse::SparseMatrix;

/// Degree-5 seven-point rule on the triangle, barycentric points and
/// weights summing to one.
fn quadrature() -> Vec<([f64; 3], f64)> {
    let s15 = 15f64.sqrt();
    let (a1, a2) = ((6.0 - s15) / 21.0, (6.0 + s15) / 21.0);
    let (w1, w2) = ((155.0 - s15) / 1200.0, (155.0 + s15) / 1200.0);
    let mut q = vec![([1.0 / 3.0; 3], 9.0 / 40.0)];
    for (a, w) in [(a1, w1), (a2, w2)] {
        let b = 1.0 - 2.0 * a;
        q.push(([b, a, a], w));
        q.push(([a, b, a], w));
        q.push(([a, a, b], w));
    }
    q
}

/// Coordinates rounded for use as a map key.
pub fn key(x: Point) -> (i64, i64) {
    ((x[0] * 1e9).round() as i64, (x[1] * 1e9).round() as i64)
}

fn on_boundary(x: Point) -> bool {
    x.iter().any(|c| c.abs() < 1e-12 || (c - 1.0).abs() < 1e-12)
}

/// Nodal values of one time level keyed by position: P2 displacement at
/// vertices and edge midpoints, P1 pressure at vertices.
pub struct NodalState {
    pub u: HashMap<(i64, i64), [f64; 2]>,
    pub p: HashMap<(i64, i64), f64>,
}

/// Implicit Euler for single-network Biot on the unit square with P2/P1
/// elements, written from scratch: dense assembly with a degree-5 rule,
/// Dirichlet rows replaced by identity rows, dense LU.
pub fn biot_oracle(mesh: &Mesh, problem: &dyn MpetProblem, times: &[f64]) -> Vec<NodalState> {
    let prm = problem.params();
    assert_eq!(prm.num_networks(), 1);
    let (mu, lambda, alpha, s, kappa) = (prm.mu, prm.lambda, prm.alpha[0], prm.s[0], prm.kappa[0]);
    let verts = mesh.vertices();
    let nv = verts.len();
    // global P2 nodes: vertices, then one per edge
    let mut edge_id: HashMap<(usize, usize), usize> = HashMap::new();
    let mut coords: Vec<Point> = verts.to_vec();
    let mut cell_nodes = Vec::new();
    for c in mesh.cells() {
        let mut nodes = [c[0], c[1], c[2], 0, 0, 0];
        for (slot, (i, j)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
            let e = (c[i].min(c[j]), c[i].max(c[j]));
            let id = *edge_id.entry(e).or_insert_with(|| {
                let (a, b) = (verts[e.0], verts[e.1]);
                coords.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
                coords.len() - 1
            });
            nodes[3 + slot] = id;
        }
        cell_nodes.push(nodes);
    }
    let nn = coords.len();
    let (nu, n) = (2 * nn, 2 * nn + nv);
    let quad = quadrature();

    // values and gradients of the six P2 and three P1 basis functions
    struct Tab {
        phi: [f64; 6],
        dphi: [Point; 6],
        psi: [f64; 3],
        dpsi: [Point; 3],
        x: Point,
        w: f64,
    }
    let tabulate = |c: &[usize; 3]| -> Vec<Tab> {
        let (p0, p1, p2) = (verts[c[0]], verts[c[1]], verts[c[2]]);
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let dl = [
            [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det],
            [(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det],
            [(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det],
        ];
        quad.iter()
            .map(|(l, w)| {
                let mut phi = [0.0; 6];
                let mut dphi = [[0.0; 2]; 6];
                for i in 0..3 {
                    phi[i] = l[i] * (2.0 * l[i] - 1.0);
                    for k in 0..2 {
                        dphi[i][k] = (4.0 * l[i] - 1.0) * dl[i][k];
                    }
                }
                for (slot, (i, j)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
                    phi[3 + slot] = 4.0 * l[i] * l[j];
                    for k in 0..2 {
                        dphi[3 + slot][k] = 4.0 * (l[i] * dl[j][k] + l[j] * dl[i][k]);
                    }
                }
                let x = [l[0] * p0[0] + l[1] * p1[0] + l[2] * p2[0], l[0] * p0[1] + l[1] * p1[1] + l[2] * p2[1]];
                Tab { phi, dphi, psi: *l, dpsi: dl, x, w: w * 0.5 * det.abs() }
            })
            .collect()
    };

    // block matrices, unscaled by the step
    let mut a = vec![vec![0.0; nu]; nu];
    let mut b = vec![vec![0.0; nv]; nu]; // (div v, q) α
    let mut cm = vec![vec![0.0; nv]; nv];
    let mut dm = vec![vec![0.0; nv]; nv];
    for (k, c) in mesh.cells().iter().enumerate() {
        let nodes = cell_nodes[k];
        for t in tabulate(c) {
            for i in 0..6 {
                for ci in 0..2 {
                    let row = 2 * nodes[i] + ci;
                    for j in 0..6 {
                        for cj in 0..2 {
                            let col = 2 * nodes[j] + cj;
                            let (gi, gj) = (t.dphi[i], t.dphi[j]);
                            let mut v = mu * gi[cj] * gj[ci] + lambda * gi[ci] * gj[cj];
                            if ci == cj {
                                v += mu * (gi[0] * gj[0] + gi[1] * gj[1]);
                            }
                            a[row][col] += t.w * v;
                        }
                    }
                    for m in 0..3 {
                        b[row][c[m]] += t.w * alpha * t.dphi[i][ci] * t.psi[m];
                    }
                }
            }
            for i in 0..3 {
                for j in 0..3 {
                    cm[c[i]][c[j]] += t.w * s * t.psi[i] * t.psi[j];
                    dm[c[i]][c[j]] += t.w * kappa * (t.dpsi[i][0] * t.dpsi[j][0] + t.dpsi[i][1] * t.dpsi[j][1]);
                }
            }
        }
    }
    let loads = |t: f64| -> (Vec<f64>, Vec<f64>) {
        let (mut fu, mut fp) = (vec![0.0; nu], vec![0.0; nv]);
        let mut g = [0.0];
        for (k, c) in mesh.cells().iter().enumerate() {
            for q in tabulate(c) {
                let f = problem.body_force(q.x, t);
                problem.fluid_source(q.x, t, &mut g);
                for i in 0..6 {
                    for ci in 0..2 {
                        fu[2 * cell_nodes[k][i] + ci] += q.w * f[ci] * q.phi[i];
                    }
                }
                for m in 0..3 {
                    fp[c[m]] += q.w * g[0] * q.psi[m];
                }
            }
        }
        (fu, fp)
    };
    let ub = |t: f64, i: usize| problem.displacement_boundary(coords[i], t);
    let pb = |t: f64, v: usize| {
        let mut o = [0.0];
        problem.pressure_boundary(verts[v], t, &mut o);
        o[0]
    };
    let dense_solve = |m: &Vec<Vec<f64>>, rhs: &[f64]| -> Vec<f64> {
        let mat = Mat::from_fn(rhs.len(), rhs.len(), |i, j| m[i][j]);
        let x = mat.partial_piv_lu().solve(&Col::from_fn(rhs.len(), |i| rhs[i]));
        (0..rhs.len()).map(|i| x[i]).collect()
    };
    let nodal = |x: &[f64]| NodalState {
        u: (0..nn).map(|i| (key(coords[i]), [x[2 * i], x[2 * i + 1]])).collect(),
        p: (0..nv).map(|v| (key(verts[v]), x[nu + v])).collect(),
    };

    // initial state: interpolated pressure, then elasticity with its load
    let t0 = times[0];
    let p0: Vec<f64> = (0..nv)
        .map(|v| {
            let mut o = [0.0];
            problem.initial_pressure(verts[v], t0, &mut o);
            o[0]
        })
        .collect();
    let (fu, _) = loads(t0);
    let mut m0 = a.clone();
    let mut r0: Vec<f64> = (0..nu).map(|r| fu[r] + (0..nv).map(|v| b[r][v] * p0[v]).sum::<f64>()).collect();
    for i in 0..nn {
        if on_boundary(coords[i]) {
            let g = ub(t0, i);
            for ci in 0..2 {
                let r = 2 * i + ci;
                m0[r].iter_mut().for_each(|e| *e = 0.0);
                m0[r][r] = 1.0;
                r0[r] = g[ci];
            }
        }
    }
    let mut x = dense_solve(&m0, &r0);
    x.extend(&p0);
    let mut out = vec![nodal(&x)];

    for w in times.windows(2) {
        let (t, tau) = (w[1], w[1] - w[0]);
        let mut m = vec![vec![0.0; n]; n];
        for r in 0..nu {
            m[r][..nu].copy_from_slice(&a[r]);
            for v in 0..nv {
                m[r][nu + v] = -b[r][v];
                m[nu + v][r] = b[r][v];
            }
        }
        for i in 0..nv {
            for j in 0..nv {
                m[nu + i][nu + j] = cm[i][j] + tau * dm[i][j];
            }
        }
        let (fu, fp) = loads(t);
        let mut rhs = fu;
        for v in 0..nv {
            let btu: f64 = (0..nu).map(|r| b[r][v] * x[r]).sum();
            let cp: f64 = (0..nv).map(|j| cm[v][j] * x[nu + j]).sum();
            rhs.push(tau * fp[v] + btu + cp);
        }
        for i in 0..nn {
            if on_boundary(coords[i]) {
                let g = ub(t, i);
                for ci in 0..2 {
                    let r = 2 * i + ci;
                    m[r].iter_mut().for_each(|e| *e = 0.0);
                    m[r][r] = 1.0;
                    rhs[r] = g[ci];
                }
            }
        }
        for v in 0..nv {
            if on_boundary(verts[v]) {
                let r = nu + v;
                m[r].iter_mut().for_each(|e| *e = 0.0);
                m[r][r] = 1.0;
                rhs[r] = pb(t, v);
            }
        }
        x = dense_solve(&m, &rhs);
        out.push(nodal(&x));
    }
    out
}

/// Largest nodal difference between a library state and an oracle state,
/// relative to the largest oracle value.
pub fn nodal_difference(state: &State, space_u: &Space, space_p: &Space, oracle: &NodalState) -> f64 {
    let (mut diff, mut scale): (f64, f64) = (0.0, 0.0);
    let mesh = space_u.mesh();
    for k in 0..mesh.num_cells() {
        for (i, &node) in space_u.cell_nodes(k).iter().enumerate() {
            let o = oracle.u[&key(space_u.node_coords()[node])];
            for c in 0..2 {
                diff = diff.max((state.u[space_u.dof(k, i, c)] - o[c]).abs());
                scale = scale.max(o[c].abs());
            }
        }
        for (i, &node) in space_p.cell_nodes(k).iter().enumerate() {
            let o = oracle.p[&key(space_p.node_coords()[node])];
            diff = diff.max((state.p[space_p.dof(k, i, 0)] - o).abs());
            scale = scale.max(o.abs());
        }
    }
    diff / scale.max(1e-300)
}

/// Largest deviation of the analytic sources from central differences of
/// the exact solution plugged into the strong equations, relative to
/// `1 + |source|`, over the given points.
pub fn source_fd_defect(m: &Manufactured, points: &[(Point, f64)]) -> f64 {
    let prm = m.params().clone();
    let j = prm.num_networks();
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for &(x, t) in points {
        let sigma = |y: Point| prm.stress(m.displacement_gradient(y, t));
        let shift = |y: Point, k: usize, d: f64| {
            let mut z = y;
            z[k] += d;
            z
        };
        let mut div_sigma = [0.0; 2];
        for k in 0..2 {
            let (sp, sm) = (sigma(shift(x, k, h)), sigma(shift(x, k, -h)));
            for i in 0..2 {
                div_sigma[i] += (sp[i][k] - sm[i][k]) / (2.0 * h);
            }
        }
        let p = |y: Point, s: f64| {
            let mut o = vec![0.0; j];
            m.pressure(y, s, &mut o);
            o
        };
        // pressure gradient by differences, independent of the analytic one
        let f = m.body_force(x, t);
        for i in 0..2 {
            let (pp, pm) = (p(shift(x, i, h), t), p(shift(x, i, -h), t));
            let grad: f64 = (0..j).map(|n| prm.alpha[n] * (pp[n] - pm[n]) / (2.0 * h)).sum();
            let strong = -div_sigma[i] + grad;
            worst = worst.max((strong - f[i]).abs() / (1.0 + f[i].abs()));
        }
        let div = |y: Point, s: f64| {
            let g = m.displacement_gradient(y, s);
            g[0][0] + g[1][1]
        };
        let mut g = vec![0.0; j];
        m.fluid_source(x, t, &mut g);
        let (pt_p, pt_m, p0) = (p(x, t + h), p(x, t - h), p(x, t));
        let ddiv = (div(x, t + h) - div(x, t - h)) / (2.0 * h);
        for a in 0..j {
            let mut lap = 0.0;
            for k in 0..2 {
                lap += (p(shift(x, k, h), t)[a] - 2.0 * p0[a] + p(shift(x, k, -h), t)[a]) / (h * h);
            }
            let mut strong = prm.s[a] * (pt_p[a] - pt_m[a]) / (2.0 * h) + prm.alpha[a] * ddiv - prm.kappa[a] * lap;
            for b in 0..j {
                strong += prm.gamma[a][b] * (p0[a] - p0[b]);
            }
            worst = worst.max((strong - g[a]).abs() / (1.0 + g[a].abs()));
        }
    }
    worst
}

/// A field with uniform random interior coefficients and zero boundary
/// values.
pub fn random_field(space: &Arc<Space>, rng: &mut ChaCha8Rng) -> Field {
    let mut v: Vec<f64> = (0..space.num_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
    for &d in space.boundary_dofs() {
        v[d] = 0.0;
    }
    Field::new(space.clone(), v, 0.0).expect("length matches")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Eigenvalues of a matrix restricted to the unconstrained rows and
/// columns, ascending.
pub fn interior_eigenvalues(m: &SparseMatrix, fixed: &[bool]) -> Vec<f64> {
    let free: Vec<usize> = (0..m.nrows()).filter(|&i| !fixed[i]).collect();
    let dense = m.to_dense();
    let mat = Mat::from_fn(free.len(), free.len(), |i, j| dense[free[i]][free[j]]);
    let ev = mat.self_adjoint_eigenvalues(faer::Side::Lower).expect("eigen solver converged");
    let mut v: Vec<f64> = ev.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn boundary_mask(space: &Space) -> Vec<bool> {
    let mut mask = vec![false; space.num_dofs()];
    space.boundary_dofs().iter().for_each(|&d| mask[d] = true);
    mask
}

/// Parameters for single-network checks.
pub fn biot_params() -> MaterialParams {
    MaterialParams::new(1.3, 4.2, vec![0.7], vec![0.3], vec![1.7], vec![vec![0.0]]).expect("valid")
}
