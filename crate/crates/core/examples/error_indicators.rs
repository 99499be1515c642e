//! Per-cell error indicators of one uniform run and the cells a Dörfler
//! and a maximal marking would pick.

use std::sync::Arc;

use mpet_adapt::adaptivity::{dorfler_mark, maximal_mark};
use mpet_adapt::estimators::{estimate, EstimatorOptions};
use mpet_adapt::mesh::unit_square_mesh;
use mpet_adapt::solver::{Degrees, MpetSolver, TimeGrid};
use mpet_adapt::verify::{bochner_errors, manufactured_3net};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = manufactured_3net();
    let mesh = Arc::new(unit_square_mesh(8)?);
    let traj = MpetSolver::new(&problem, mesh, Degrees::default())?.run(&TimeGrid::uniform(0.0, 0.4, 0.1)?)?;
    let report = estimate(&traj, &problem, EstimatorOptions::default())?;
    let e = bochner_errors(&traj, &problem);
    let report = report.with_error(e.total());
    println!("eta1 {:.4e} eta2 {:.4e} eta3 {:.4e} eta4 {:.4e}", report.eta1, report.eta2, report.eta3, report.eta4);
    println!("eta {:.4e}, E {:.4e}, I_eff {:.3}", report.eta, e.total(), report.efficiency.unwrap_or(f64::NAN));

    let mut order: Vec<usize> = (0..report.per_cell.len()).collect();
    order.sort_by(|&a, &b| report.per_cell[b].total_cmp(&report.per_cell[a]));
    println!("largest indicators:");
    for &k in order.iter().take(5) {
        println!("  cell {k:3}: {:.4e}", report.per_cell[k]);
    }
    println!("Dörfler 0.3 marks {} cells", dorfler_mark(&report.per_cell, 0.3)?.len());
    println!("maximal 0.1 marks {} cells", maximal_mark(&report.per_cell, 0.1)?.len());
    Ok(())
}
