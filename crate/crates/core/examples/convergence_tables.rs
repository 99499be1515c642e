//! Uniform refinement study on the smooth three-network solution.
//!
//! ```text
//! cargo run --release --example convergence_tables [max N]
//! ```

use mpet_adapt::estimators::EstimatorOptions;
use mpet_adapt::verify::{convergence_study, manufactured_3net, TimeSampling, SMOOTH_END, SMOOTH_TAU0};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let max_n: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(16);
    let ns: Vec<usize> = std::iter::successors(Some(4), |n| Some(n * 2)).take_while(|n| *n <= max_n).collect();
    let taus: Vec<f64> = (0..ns.len()).map(|k| SMOOTH_TAU0 / 2f64.powi(k as i32)).collect();

    let problem = manufactured_3net();
    let study =
        convergence_study(&problem, &ns, &taus, SMOOTH_END, EstimatorOptions::default(), TimeSampling::default())?;
    for table in study.error_tables().iter().chain(&study.estimator_tables()) {
        println!("{}", table.name);
        print!("{}", table.to_csv(""));
        println!();
    }
    print!("{}", study.efficiency_table().to_csv("efficiency index eta / E"));
    Ok(())
}
