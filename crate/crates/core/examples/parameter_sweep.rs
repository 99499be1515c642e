//! Efficiency index across material parameters on a whole-ladder
//! subsample of the filtered sweep.

use mpet_adapt::estimators::EstimatorOptions;
use mpet_adapt::verify::{
    ladder_correlations, parameter_sweep, sweep_points, sweep_subsample, SweepResolution, TimeSampling,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let target: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(50);
    let all = sweep_points();
    let points = sweep_subsample(&all, target);
    println!("running {} of {} filtered permutations", points.len(), all.len());
    let records =
        parameter_sweep(&points, SweepResolution::default(), EstimatorOptions::default(), TimeSampling::default())?;
    println!(
        "{:>7} {:>8} {:>6} {:>5} {:>5} {:>5} {:>7} {:>8}",
        "mu", "lambda", "alpha1", "s", "kappa", "gamma", "nu", "I_eff"
    );
    for r in &records {
        let p = r.point;
        println!(
            "{:7} {:8} {:6} {:5} {:5} {:5} {:7.4} {:8.3}",
            p.mu, p.lambda, p.alpha1, p.s, p.kappa, p.gamma, r.poisson_ratio, r.efficiency
        );
    }
    let corr = ladder_correlations(&records);
    let min = records.iter().map(|r| r.efficiency).fold(f64::INFINITY, f64::min);
    println!("min I_eff {min:.3}; rank correlation with nu per ladder: {corr:.2?}");
    Ok(())
}
