//! Time-step control by error balancing and the space-time adaptive loop.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::estimators::{Accumulator, Estimator, EstimatorOptions, EstimatorReport};
use crate::mesh::Mesh;
use crate::problem::{ExactSolution, MpetProblem};
use crate::solver::{Degrees, MpetSolver, Trajectory};
use crate::verify::{bochner_errors_with, BochnerErrors, TimeSampling};

/// Refinement retries allowed within one step before giving up.
pub const MAX_RETRIES: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeAdaptParams {
    /// Width of the balance band; 0 reacts to any imbalance.
    pub alpha: f64,
    /// Coarsening and refinement factor.
    pub beta: f64,
    pub tau_max: f64,
    pub tau_min: f64,
    pub tau0: f64,
}

impl TimeAdaptParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(0.0..1.0).contains(&self.alpha) {
            return bad(format!("adapt.alpha = {} must lie in [0, 1)", self.alpha));
        }
        if !(self.beta >= 1.0) {
            return bad(format!("adapt.beta = {} must be at least 1", self.beta));
        }
        if !(self.tau_max > 0.0) || !(self.tau_min >= 0.0) {
            return bad(format!("need tau_max > 0 and tau_min >= 0 (got {}, {})", self.tau_max, self.tau_min));
        }
        if !(self.tau_min <= self.tau0 && self.tau0 <= self.tau_max) {
            return bad(format!(
                "need tau_min <= tau0 <= tau_max (got {} <= {} <= {})",
                self.tau_min, self.tau0, self.tau_max
            ));
        }
        Ok(())
    }

    /// Parameters under which no coarsening or refinement ever fires: both
    /// `βτ` and `τ/β` leave the pinned range. (With `β = 1` a refinement
    /// would retry the same step until the retry limit.)
    pub fn fixed(tau: f64) -> TimeAdaptParams {
        TimeAdaptParams { alpha: 0.0, beta: 2.0, tau_max: tau, tau_min: tau, tau0: tau }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    /// Accepted, next step unchanged.
    Accept,
    /// Accepted, next step enlarged by β.
    Coarsen,
    /// Discarded, retried with the step divided by β.
    RefineRetry,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Accept => "accept",
            Action::Coarsen => "coarsen",
            Action::RefineRetry => "refine-retry",
        }
    }
}

/// One attempted step of the time-adaptive loop.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Decision {
    pub attempt: usize,
    /// Time the attempt would reach.
    pub t: f64,
    pub tau: f64,
    pub eta_h: f64,
    pub eta_tau: f64,
    pub action: Action,
}

/// The choice Algorithm 1 makes for one attempt.
pub fn decide(params: &TimeAdaptParams, tau: f64, eta_h: f64, eta_tau: f64) -> Action {
    if eta_tau <= (1.0 - params.alpha) * eta_h && params.beta * tau <= params.tau_max {
        Action::Coarsen
    } else if eta_tau >= (1.0 + params.alpha) * eta_h && tau / params.beta >= params.tau_min {
        Action::RefineRetry
    } else {
        Action::Accept
    }
}

#[derive(Clone, Debug)]
pub struct TimeAdaptiveRun {
    pub trajectory: Trajectory,
    pub decisions: Vec<Decision>,
    pub report: EstimatorReport,
}

impl TimeAdaptiveRun {
    /// Accepted step sizes in order.
    pub fn steps(&self) -> Vec<f64> {
        self.trajectory.states.windows(2).map(|w| w[1].t - w[0].t).collect()
    }
}

/// Runs the time-adaptive loop on a fixed mesh up to `end`.
pub fn time_adaptive_run(
    problem: &dyn MpetProblem,
    mesh: Arc<Mesh>,
    degrees: Degrees,
    params: &TimeAdaptParams,
    t0: f64,
    end: f64,
    options: EstimatorOptions,
) -> Result<TimeAdaptiveRun> {
    params.validate()?;
    if !(end > t0) {
        return Err(Error::InvalidArgument(format!("end time {end} must exceed start time {t0}")));
    }
    let mut solver = MpetSolver::new(problem, mesh, degrees)?;
    let est = Estimator::new(problem, solver.space_u(), solver.space_p(), options)?;
    let mut states = vec![solver.initial_state(t0)?];
    let mut samples = est.momentum_samples(&states[0]);
    let mut acc = Accumulator::new(&est.momentum_indicators(&samples));
    let mut decisions = Vec::new();
    let mut tau = params.tau0;
    // slack for deciding that a step lands on the end time
    let snap = 1e-12 * end.abs().max(1.0);
    while states.last().expect("initial state").t < end {
        let prev = states.last().expect("initial state").clone();
        let mut retries = 0;
        loop {
            let (tau_n, t_star) = if prev.t + tau >= end - snap { (end - prev.t, end) } else { (tau, prev.t + tau) };
            let next = solver.step_to(&prev, tau_n, t_star)?;
            let (ind, now) = est.step(&prev, &samples, &next);
            let eta1 = (tau_n * ind.eta_p_sum()).sqrt();
            let eta2 = acc.sup_eta_u().max(ind.eta_u_sum()).sqrt();
            let eta3 = tau_n * ind.eta_u_dt_sum().sqrt();
            let eta4 = (tau_n * ind.d_increment).sqrt();
            let (eta_h, eta_tau) = (eta1 + eta2 + eta3, eta4);
            let action = decide(params, tau_n, eta_h, eta_tau);
            decisions.push(Decision { attempt: decisions.len(), t: t_star, tau: tau_n, eta_h, eta_tau, action });
            match action {
                Action::RefineRetry => {
                    retries += 1;
                    if retries > MAX_RETRIES {
                        return Err(Error::StepControl { time: prev.t, attempts: retries });
                    }
                    tau = tau_n / params.beta;
                }
                Action::Coarsen | Action::Accept => {
                    acc.push(tau_n, &ind);
                    samples = now;
                    states.push(next);
                    tau = if action == Action::Coarsen { params.beta * tau_n } else { tau_n };
                    break;
                }
            }
        }
    }
    Ok(TimeAdaptiveRun { trajectory: solver.trajectory(states), decisions, report: acc.report() })
}

/// Cells of the smallest set, taken by descending indicator with ties by
/// index, whose indicators sum to at least `fraction` of the total.
pub fn dorfler_mark(eta: &[f64], fraction: f64) -> Result<Vec<usize>> {
    check_fraction(fraction)?;
    let order = descending(eta);
    let total: f64 = order.iter().map(|&k| eta[k]).sum();
    if total <= 0.0 {
        return Ok(Vec::new());
    }
    let target = fraction * total;
    let mut sum = 0.0;
    let mut marked = Vec::new();
    for k in order {
        if sum >= target {
            break;
        }
        sum += eta[k];
        marked.push(k);
    }
    marked.sort_unstable();
    Ok(marked)
}

/// The `⌈fraction · C⌉` cells with the largest indicators, ties by index.
pub fn maximal_mark(eta: &[f64], fraction: f64) -> Result<Vec<usize>> {
    check_fraction(fraction)?;
    // guard against products like 0.07 * 100 landing just above an integer
    let count = ((fraction * eta.len() as f64) - 1e-9).ceil().max(0.0) as usize;
    let mut marked: Vec<usize> = descending(eta).into_iter().take(count.min(eta.len())).collect();
    marked.sort_unstable();
    Ok(marked)
}

fn check_fraction(fraction: f64) -> Result<()> {
    if fraction > 0.0 && fraction <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("marking fraction {fraction} must lie in (0, 1]")))
    }
}

fn descending(eta: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..eta.len()).collect();
    order.sort_by(|&a, &b| eta[b].total_cmp(&eta[a]).then(a.cmp(&b)));
    order
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Marking {
    Dorfler,
    Maximal,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceAdaptParams {
    /// Stop once `η` drops below this.
    pub tolerance: f64,
    /// Stop once the mesh has more cells than this.
    pub max_cells: usize,
    pub fraction: f64,
    pub marking: Marking,
}

impl SpaceAdaptParams {
    pub fn validate(&self) -> Result<()> {
        check_fraction(self.fraction)?;
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance {} must be nonnegative", self.tolerance)));
        }
        Ok(())
    }
}

/// One iteration of the space-time adaptive loop.
#[derive(Clone, Debug)]
pub struct AdaptLevel {
    pub mesh: Arc<Mesh>,
    pub run: TimeAdaptiveRun,
    /// Present when an exact solution was supplied.
    pub errors: Option<BochnerErrors>,
    /// Cells marked for refinement; empty on the last level.
    pub marked: Vec<usize>,
}

impl AdaptLevel {
    pub fn report(&self) -> &EstimatorReport {
        &self.run.report
    }
}

/// Alternates time-adaptive solves with marking and bisection until the
/// estimate drops below the tolerance or the mesh exceeds the cell limit.
#[allow(clippy::too_many_arguments)]
pub fn space_time_adaptive(
    problem: &dyn MpetProblem,
    exact: Option<&dyn ExactSolution>,
    initial: Arc<Mesh>,
    degrees: Degrees,
    sparams: &SpaceAdaptParams,
    tparams: &TimeAdaptParams,
    end: f64,
    options: EstimatorOptions,
) -> Result<Vec<AdaptLevel>> {
    sparams.validate()?;
    tparams.validate()?;
    let mut mesh = initial;
    let mut levels = Vec::new();
    loop {
        let mut run = time_adaptive_run(problem, mesh.clone(), degrees, tparams, 0.0, end, options)?;
        let errors = exact.map(|e| bochner_errors_with(&run.trajectory, e, TimeSampling::default()));
        if let Some(e) = errors {
            run.report = run.report.clone().with_error(e.total());
        }
        if run.report.eta < sparams.tolerance {
            levels.push(AdaptLevel { mesh, run, errors, marked: Vec::new() });
            break;
        }
        let marked = match sparams.marking {
            Marking::Dorfler => dorfler_mark(&run.report.per_cell, sparams.fraction)?,
            Marking::Maximal => maximal_mark(&run.report.per_cell, sparams.fraction)?,
        };
        let refined = Arc::new(mesh.bisect(&marked));
        let stop = marked.is_empty() || refined.num_cells() > sparams.max_cells;
        levels.push(AdaptLevel { mesh, run, errors, marked });
        if stop {
            break;
        }
        mesh = refined;
    }
    Ok(levels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_square_mesh;
    use crate::problem::Manufactured;
    use crate::solver::TimeGrid;
    use proptest::prelude::*;

    #[test]
    fn dorfler_examples() {
        assert_eq!(dorfler_mark(&[4.0, 3.0, 2.0, 1.0], 0.5).unwrap(), vec![0, 1]);
        assert_eq!(dorfler_mark(&[0.0, 5.0, 0.0], 0.1).unwrap(), vec![1]);
        assert_eq!(dorfler_mark(&[0.0, 5.0, 0.0], 1.0).unwrap(), vec![1]);
        assert_eq!(dorfler_mark(&[0.3, 0.1, 0.0, 0.2], 1.0).unwrap(), vec![0, 1, 3]);
        assert!(dorfler_mark(&[0.0; 4], 0.5).unwrap().is_empty());
        assert!(dorfler_mark(&[1.0], 0.0).is_err());
        assert!(dorfler_mark(&[1.0], 1.5).is_err());
        // ties go to the lower index
        assert_eq!(dorfler_mark(&[1.0, 1.0, 1.0], 0.3).unwrap(), vec![0]);
    }

    #[test]
    fn maximal_examples() {
        let eta: Vec<f64> = (0..100).map(|i| ((i * 37) % 100) as f64).collect();
        assert_eq!(maximal_mark(&eta, 0.03).unwrap().len(), 3);
        assert_eq!(maximal_mark(&eta, 1.0).unwrap().len(), 100);
        assert_eq!(maximal_mark(&[1.0, 2.0, 2.0, 0.5], 0.5).unwrap(), vec![1, 2]);
    }

    proptest! {
        #[test]
        fn dorfler_is_minimal(eta in prop::collection::vec(0.0f64..10.0, 1..12), frac in 0.05f64..1.0) {
            let marked = dorfler_mark(&eta, frac).unwrap();
            let total: f64 = eta.iter().sum();
            let sum: f64 = marked.iter().map(|&k| eta[k]).sum();
            prop_assert!(sum >= frac * total * (1.0 - 1e-12));
            // brute force: no smaller subset reaches the target
            let n = eta.len();
            for mask in 0u32..(1 << n) {
                if (mask.count_ones() as usize) < marked.len() {
                    let s: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| eta[i]).sum();
                    prop_assert!(s < frac * total * (1.0 + 1e-12) || total == 0.0);
                }
            }
        }

        #[test]
        fn maximal_matches_sort(eta in prop::collection::vec(0.0f64..10.0, 1..40), frac in 0.01f64..1.0) {
            let marked = maximal_mark(&eta, frac).unwrap();
            let mut pairs: Vec<(f64, usize)> = eta.iter().copied().zip(0..).collect();
            pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            let count = ((frac * eta.len() as f64) - 1e-9).ceil() as usize;
            let mut want: Vec<usize> = pairs.iter().take(count).map(|p| p.1).collect();
            want.sort_unstable();
            prop_assert_eq!(marked, want);
        }
    }

    #[test]
    fn decisions_follow_the_balance_rule() {
        let p = TimeAdaptParams { alpha: 0.2, beta: 2.0, tau_max: 1.0, tau_min: 0.01, tau0: 0.1 };
        assert_eq!(decide(&p, 0.1, 1.0, 0.8), Action::Coarsen);
        assert_eq!(decide(&p, 0.1, 1.0, 0.81), Action::Accept);
        assert_eq!(decide(&p, 0.1, 1.0, 1.2), Action::RefineRetry);
        assert_eq!(decide(&p, 0.6, 1.0, 0.1), Action::Accept);
        assert_eq!(decide(&p, 0.015, 1.0, 5.0), Action::Accept);
        assert!(TimeAdaptParams { alpha: 1.0, ..p }.validate().is_err());
        assert!(TimeAdaptParams { beta: 0.5, ..p }.validate().is_err());
        assert!(TimeAdaptParams { tau0: 2.0, ..p }.validate().is_err());
    }

    #[test]
    fn wide_band_reproduces_uniform_stepping() {
        let pr = Manufactured::new(Manufactured::default_params());
        let mesh = Arc::new(unit_square_mesh(4).unwrap());
        let params = TimeAdaptParams { alpha: 0.999_999, beta: 2.0, tau_max: 0.1, tau_min: 0.1, tau0: 0.1 };
        let run =
            time_adaptive_run(&pr, mesh.clone(), Degrees::default(), &params, 0.0, 0.4, EstimatorOptions::default())
                .unwrap();
        assert!(run.decisions.iter().all(|d| d.action == Action::Accept));
        let mut s = MpetSolver::new(&pr, mesh, Degrees::default()).unwrap();
        let uni = s.run(&TimeGrid::uniform(0.0, 0.4, 0.1).unwrap()).unwrap();
        assert_eq!(run.trajectory.states.len(), uni.states.len());
        // times accumulate by addition here, so agreement is to rounding
        let close = |x: &[f64], y: &[f64]| x.iter().zip(y).all(|(a, b)| (a - b).abs() < 1e-12);
        for (a, b) in run.trajectory.states.iter().zip(&uni.states) {
            assert!((a.t - b.t).abs() < 1e-15);
            assert!(close(&a.u, &b.u) && close(&a.p, &b.p));
        }
        let est = crate::estimators::estimate(&uni, &pr, EstimatorOptions::default()).unwrap();
        assert!((est.eta - run.report.eta).abs() < 1e-10 * est.eta);
    }

    /// Pressures affine in space and fast in time: the discrete solution
    /// has no spatial error, so the time estimator dominates.
    fn time_dominated() -> impl MpetProblem {
        crate::problem::FnProblem {
            params: Manufactured::default_params(),
            body_force: |_, t: f64| [1.5 * (10.0 * t).sin(), 0.0],
            fluid_source: |x: crate::mesh::Point, t: f64, o: &mut [f64]| o.fill(10.0 * x[0] * (10.0 * t).cos()),
            displacement_boundary: |_, _| [0.0, 0.0],
            pressure_boundary: |x: crate::mesh::Point, t: f64, o: &mut [f64]| o.fill(x[0] * (10.0 * t).sin()),
        }
    }

    #[test]
    fn runaway_refinement_aborts() {
        let pr = time_dominated();
        let mesh = Arc::new(unit_square_mesh(4).unwrap());
        // β = 1 retries with the same step forever
        let params = TimeAdaptParams { alpha: 0.0, beta: 1.0, tau_max: 0.2, tau_min: 0.0, tau0: 0.1 };
        match time_adaptive_run(&pr, mesh.clone(), Degrees::default(), &params, 0.0, 0.4, EstimatorOptions::default()) {
            Err(Error::StepControl { attempts, .. }) => assert_eq!(attempts, MAX_RETRIES + 1),
            other => panic!("expected a step control failure, got {:?}", other.map(|r| r.decisions.len())),
        }
        // with β = 2 the step shrinks until balance, then the end time is hit exactly
        let params = TimeAdaptParams { beta: 2.0, tau_min: 0.1 / 16.0, ..params };
        let run =
            time_adaptive_run(&pr, mesh, Degrees::default(), &params, 0.0, 0.4, EstimatorOptions::default()).unwrap();
        assert!(run.decisions[0].action == Action::RefineRetry);
        assert_eq!(run.trajectory.states.last().unwrap().t, 0.4);
        let accepted = run.decisions.iter().filter(|d| d.action != Action::RefineRetry).count();
        assert_eq!(accepted + 1, run.trajectory.states.len());
        for d in &run.decisions {
            assert_eq!(decide(&params, d.tau, d.eta_h, d.eta_tau), d.action);
        }
    }

    #[test]
    fn fixed_params_only_accept() {
        let pr = Manufactured::new(Manufactured::default_params());
        let mesh = Arc::new(unit_square_mesh(2).unwrap());
        let run = time_adaptive_run(
            &pr,
            mesh,
            Degrees::default(),
            &TimeAdaptParams::fixed(0.1),
            0.0,
            0.4,
            EstimatorOptions::default(),
        )
        .unwrap();
        assert!(run.decisions.iter().all(|d| d.action == Action::Accept));
        assert_eq!(run.steps().len(), 4);
        for eta in [0.0, 1.0, 1e9] {
            assert_eq!(decide(&TimeAdaptParams::fixed(0.1), 0.1, 1.0, eta), Action::Accept);
        }
    }

    #[test]
    fn infinite_tolerance_stops_after_one_level() {
        let pr = Manufactured::new(Manufactured::default_params());
        let mesh = Arc::new(unit_square_mesh(2).unwrap());
        let sp =
            SpaceAdaptParams { tolerance: f64::INFINITY, max_cells: 1000, fraction: 0.5, marking: Marking::Dorfler };
        let tp = TimeAdaptParams::fixed(0.2);
        let levels =
            space_time_adaptive(&pr, Some(&pr), mesh, Degrees::default(), &sp, &tp, 0.4, EstimatorOptions::default())
                .unwrap();
        assert_eq!(levels.len(), 1);
        assert!(levels[0].marked.is_empty());
        assert!(levels[0].errors.is_some() && levels[0].report().efficiency.is_some());
    }
}
