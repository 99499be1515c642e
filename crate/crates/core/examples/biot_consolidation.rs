//! Single-network (Biot) consolidation of a loaded box with clamped,
//! drained walls: displacement energy, pressure and Darcy flux over time.

use std::sync::Arc;

use mpet_adapt::forms::MaterialParams;
use mpet_adapt::mesh::unit_square_mesh;
use mpet_adapt::problem::MpetProblem;
use mpet_adapt::solver::{darcy_velocity, Degrees, MpetSolver, TimeGrid};
use mpet_adapt::verify::{energy_balance, loaded_box};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = MaterialParams::uniform(1.0, 10.0, 1, 1.0, 0.1, 1.0, 0.0)?;
    let problem = loaded_box(params);
    let mut solver = MpetSolver::new(&problem, Arc::new(unit_square_mesh(16)?), Degrees::default())?;
    let traj = solver.run(&TimeGrid::uniform(0.0, 1.0, 0.05)?)?;

    println!("{:>6} {:>12} {:>12}", "t", "max |p|", "|v|_L2");
    for n in (0..traj.len()).step_by(4) {
        let p = traj.pressure(n);
        let pmax = p.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let v = darcy_velocity(&p, problem.params(), 0)?;
        println!("{:6.2} {:12.4e} {:12.4e}", traj.states[n].t, pmax, v.l2_norm());
    }
    let b = energy_balance(&traj, &problem)?;
    println!("energy {:.4e} <= data {:.4e} (ratio {:.3})", b.energy, b.data, b.ratio());
    Ok(())
}
