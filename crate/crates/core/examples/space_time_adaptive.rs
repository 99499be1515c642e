//! Space-time adaptive loop with Dörfler marking. Prints error and
//! estimate per level; the estimate should stay above the error.
//!
//! Usage: `space_time_adaptive [fraction] [steps per unit time]`.

use std::sync::Arc;

use mpet_adapt::adaptivity::{space_time_adaptive, Marking, SpaceAdaptParams, TimeAdaptParams};
use mpet_adapt::estimators::EstimatorOptions;
use mpet_adapt::mesh::unit_square_mesh;
use mpet_adapt::solver::Degrees;
use mpet_adapt::verify::manufactured_3net;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let fraction: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0.3);
    let steps: u32 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(16);
    let problem = manufactured_3net();
    let space = SpaceAdaptParams { tolerance: 0.0, max_cells: 600, fraction, marking: Marking::Dorfler };
    let time = TimeAdaptParams::fixed(1.0 / steps as f64);
    let levels = space_time_adaptive(
        &problem,
        Some(&problem),
        Arc::new(unit_square_mesh(4)?),
        Degrees::default(),
        &space,
        &time,
        1.0,
        EstimatorOptions::default(),
    )?;
    println!("{:>5} {:>6} {:>12} {:>12} {:>7}", "level", "cells", "E", "eta", "marked");
    for (l, lv) in levels.iter().enumerate() {
        let e = lv.errors.map(|e| e.total()).unwrap_or(f64::NAN);
        println!("{l:5} {:6} {e:12.4e} {:12.4e} {:7}", lv.mesh.num_cells(), lv.report().eta, lv.marked.len());
    }
    Ok(())
}
