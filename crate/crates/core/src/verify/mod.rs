//! Verification harness: error norms, convergence tables and parameter
//! sweeps for problems with known solutions.

pub mod convergence;
pub mod energy;
pub mod norms;
pub mod sweep;

use std::f64::consts::PI;

pub use convergence::{convergence_study, ConvergenceStudy, ConvergenceTable, StudyRun};
pub use energy::{energy_balance, EnergyBalance};
pub use norms::{bochner_errors, bochner_errors_with, BochnerErrors, ErrorSampler, PressureTimeRule, TimeSampling};
pub use sweep::{
    ladder_correlations, parameter_sweep, spearman, sweep_points, sweep_subsample, SweepPoint, SweepRecord,
    SweepResolution,
};

use crate::forms::MaterialParams;
use crate::mesh::Point;
use crate::problem::{FnProblem, Manufactured, MpetProblem};

/// End time of the smooth three-network case.
pub const SMOOTH_END: f64 = 0.4;
/// Coarsest step of the smooth three-network tables.
pub const SMOOTH_TAU0: f64 = 0.2;

/// The smooth three-network manufactured problem with default parameters.
pub fn manufactured_3net() -> Manufactured {
    Manufactured::new(Manufactured::default_params())
}

/// Homogeneous Dirichlet data, zero initial pressure, and smooth
/// nonvanishing loads; used for energy checks.
pub fn loaded_box(params: MaterialParams) -> impl MpetProblem {
    let bump = |x: Point| (PI * x[0]).sin() * (PI * x[1]).sin();
    FnProblem {
        params,
        body_force: move |x: Point, t: f64| [(1.0 + t) * bump(x), 4.0 * x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1])],
        fluid_source: move |x: Point, t: f64, o: &mut [f64]| {
            for (j, v) in o.iter_mut().enumerate() {
                *v = (j + 1) as f64 * bump(x) * t.cos();
            }
        },
        displacement_boundary: |_, _| [0.0, 0.0],
        pressure_boundary: |_, _, o: &mut [f64]| o.fill(0.0),
    }
}
