//! The stepper with one network against an independently written dense
//! Biot solver.

mod common;

use std::sync::Arc;

use mpet_adapt::mesh::unit_square_mesh;
use mpet_adapt::problem::FnProblem;
use mpet_adapt::solver::{Degrees, MpetSolver, TimeGrid};

#[test]
fn single_network_matches_dense_oracle() {
    // loads low enough in degree that both quadratures are exact
    let problem = FnProblem {
        params: common::biot_params(),
        body_force: |x: [f64; 2], t: f64| [x[0] + t, x[1] * t - 1.0],
        fluid_source: |_, t: f64, o: &mut [f64]| o[0] = 1.0 + t,
        displacement_boundary: |x: [f64; 2], t: f64| [x[0] * x[1] * t, x[0] * x[0]],
        pressure_boundary: |x: [f64; 2], t: f64, o: &mut [f64]| o[0] = x[0] - x[1] * t + 0.5,
    };
    let mesh = Arc::new(unit_square_mesh(4).unwrap());
    let grid = TimeGrid::new(vec![0.0, 0.1, 0.2, 0.25, 0.45]).unwrap();
    let traj = MpetSolver::new(&problem, mesh.clone(), Degrees::default()).unwrap().run(&grid).unwrap();
    let oracle = common::biot_oracle(&mesh, &problem, grid.times());
    for (n, (s, o)) in traj.states.iter().zip(&oracle).enumerate() {
        let d = common::nodal_difference(s, &traj.space_u, &traj.space_p, o);
        assert!(d < 1e-12, "level {n}: relative nodal difference {d:e}");
    }
}
