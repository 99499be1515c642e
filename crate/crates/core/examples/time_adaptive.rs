//! Error-balancing time step control on a fixed mesh: starts at τ = 0.2
//! and lets the estimators decide when to coarsen or refine.

use std::sync::Arc;

use mpet_adapt::adaptivity::{time_adaptive_run, TimeAdaptParams};
use mpet_adapt::estimators::EstimatorOptions;
use mpet_adapt::mesh::unit_square_mesh;
use mpet_adapt::solver::Degrees;
use mpet_adapt::verify::{bochner_errors, manufactured_3net};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = manufactured_3net();
    let mesh = Arc::new(unit_square_mesh(8)?);
    let params = TimeAdaptParams { alpha: 0.0, beta: 2.0, tau_max: 1.0, tau_min: 0.2 / 16.0, tau0: 0.2 };
    let run = time_adaptive_run(&problem, mesh, Degrees::default(), &params, 0.0, 1.0, EstimatorOptions::default())?;

    println!("{:>8} {:>8} {:>12} {:>12}  action", "t", "tau", "eta_space", "eta_time");
    for d in &run.decisions {
        println!("{:8.4} {:8.4} {:12.4e} {:12.4e}  {}", d.t, d.tau, d.eta_h, d.eta_tau, d.action.as_str());
    }
    let e = bochner_errors(&run.trajectory, &problem);
    println!("accepted steps: {:?}", run.steps());
    println!(
        "u error (Linf H1) {:.3e}, p error (Linf L2) {:.3e}, p error (L2 H1) {:.3e}",
        e.u_linf_h1, e.p_linf_l2, e.p_l2_h1
    );
    println!("eta = {:.4}", run.report.eta);
    Ok(())
}
