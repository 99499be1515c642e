//! Error and estimator tables under uniform refinement in space and time.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::Result;
use crate::estimators::{estimate, EstimatorOptions, EstimatorReport};
use crate::mesh::unit_square_mesh;
use crate::problem::{ExactSolution, MpetProblem};
use crate::solver::{Degrees, MpetSolver, TimeGrid};

use super::norms::{bochner_errors_with, BochnerErrors, TimeSampling};

/// Values on an `(N, τ)` grid: rows follow the mesh list, columns the
/// step list.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ConvergenceTable {
    pub name: String,
    pub ns: Vec<usize>,
    pub taus: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

fn rate(e0: f64, e1: f64, s0: f64, s1: f64) -> Option<f64> {
    (e0 > 0.0 && e1 > 0.0 && s0 != s1).then(|| (e0 / e1).ln() / (s0 / s1).ln())
}

impl ConvergenceTable {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    /// Rate under mesh refinement in the finest-step column, one entry per
    /// row; the first row has none.
    pub fn h_rates(&self) -> Vec<Option<f64>> {
        let j = self.taus.len() - 1;
        (0..self.ns.len())
            .map(|i| {
                if i == 0 {
                    return None;
                }
                let h = |n: usize| 1.0 / self.ns[n] as f64;
                rate(self.values[i - 1][j], self.values[i][j], h(i - 1), h(i))
            })
            .collect()
    }

    /// Rate under step refinement on the finest mesh, one entry per column.
    pub fn tau_rates(&self) -> Vec<Option<f64>> {
        let i = self.ns.len() - 1;
        (0..self.taus.len())
            .map(|j| {
                if j == 0 {
                    return None;
                }
                rate(self.values[i][j - 1], self.values[i][j], self.taus[j - 1], self.taus[j])
            })
            .collect()
    }

    /// Rate between the two last diagonal entries, measured against the
    /// mesh size.
    pub fn diagonal_rate(&self) -> Option<f64> {
        let (i, j) = (self.ns.len(), self.taus.len());
        if i < 2 || j < 2 {
            return None;
        }
        let h = |n: usize| 1.0 / self.ns[n] as f64;
        rate(self.values[i - 2][j - 2], self.values[i - 1][j - 1], h(i - 2), h(i - 1))
    }

    /// Rows per mesh with a trailing h-rate column, then a τ-rate row whose
    /// last cell holds the diagonal rate. Missing rates are left empty.
    pub fn to_csv(&self, header: &str) -> String {
        let mut out = String::new();
        for line in header.lines() {
            let _ = writeln!(out, "# {line}");
        }
        let _ = write!(out, "N");
        for t in &self.taus {
            let _ = write!(out, ",tau={t:.6e}");
        }
        let _ = writeln!(out, ",rate_h");
        let fmt = |r: Option<f64>| r.map(|v| format!("{v:.6e}")).unwrap_or_default();
        let hr = self.h_rates();
        for (i, n) in self.ns.iter().enumerate() {
            let _ = write!(out, "{n}");
            for v in &self.values[i] {
                let _ = write!(out, ",{v:.6e}");
            }
            let _ = writeln!(out, ",{}", fmt(hr[i]));
        }
        let _ = write!(out, "rate_tau");
        for r in self.tau_rates() {
            let _ = write!(out, ",{}", fmt(r));
        }
        let _ = writeln!(out, ",{}", fmt(self.diagonal_rate()));
        out
    }
}

/// One `(N, τ)` cell of a study.
#[derive(Clone, Debug, serde::Serialize)]
pub struct StudyRun {
    pub n: usize,
    pub tau: f64,
    pub errors: BochnerErrors,
    pub eta: [f64; 4],
    pub efficiency: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ConvergenceStudy {
    pub ns: Vec<usize>,
    pub taus: Vec<f64>,
    /// Row-major over `(N, τ)`.
    pub runs: Vec<StudyRun>,
}

pub const ERROR_NAMES: [&str; 4] = ["u_linf_h1", "p_linf_l2", "p_l2_h1", "p_pi0_l2_h1"];
pub const ESTIMATOR_NAMES: [&str; 4] = ["eta1", "eta2", "eta3", "eta4"];

impl ConvergenceStudy {
    fn table(&self, name: &str, f: impl Fn(&StudyRun) -> f64) -> ConvergenceTable {
        let m = self.taus.len();
        ConvergenceTable {
            name: name.to_string(),
            ns: self.ns.clone(),
            taus: self.taus.clone(),
            values: self.runs.chunks(m).map(|row| row.iter().map(&f).collect()).collect(),
        }
    }

    /// Tables of the four error norms.
    pub fn error_tables(&self) -> Vec<ConvergenceTable> {
        (0..4).map(|k| self.table(ERROR_NAMES[k], |r| r.errors.as_array()[k])).collect()
    }

    /// Tables of the four estimators.
    pub fn estimator_tables(&self) -> Vec<ConvergenceTable> {
        (0..4).map(|k| self.table(ESTIMATOR_NAMES[k], |r| r.eta[k])).collect()
    }

    /// Efficiency indices; `NaN` where the error vanished.
    pub fn efficiency_table(&self) -> ConvergenceTable {
        self.table("efficiency", |r| r.efficiency.unwrap_or(f64::NAN))
    }
}

/// Solves on `unit_square_mesh(N)` for every `N` and uniform step `τ` up to
/// `end`, and evaluates errors and estimators. Meshes run concurrently;
/// the steps of one mesh share its factorizations.
pub fn convergence_study<P>(
    problem: &P,
    ns: &[usize],
    taus: &[f64],
    end: f64,
    options: EstimatorOptions,
    sampling: TimeSampling,
) -> Result<ConvergenceStudy>
where
    P: MpetProblem + ExactSolution,
{
    if ns.is_empty() || taus.is_empty() {
        return Err(crate::error::Error::InvalidArgument("mesh and step lists must be nonempty".into()));
    }
    let grids = taus.iter().map(|&t| TimeGrid::uniform(0.0, end, t)).collect::<Result<Vec<_>>>()?;
    let rows: Vec<Result<Vec<StudyRun>>> = ns
        .par_iter()
        .map(|&n| {
            let mesh = Arc::new(unit_square_mesh(n)?);
            let mut solver = MpetSolver::new(problem, mesh, Degrees::default())?;
            let mut row = Vec::new();
            for (grid, &tau) in grids.iter().zip(taus) {
                let tag = |e: crate::error::Error| e.in_run(format!("N = {n}, tau = {tau}"));
                let traj = solver.run(grid).map_err(tag)?;
                let errors = bochner_errors_with(&traj, problem, sampling);
                let rep: EstimatorReport = estimate(&traj, problem, options).map_err(tag)?.with_error(errors.total());
                row.push(StudyRun {
                    n,
                    tau,
                    errors,
                    eta: [rep.eta1, rep.eta2, rep.eta3, rep.eta4],
                    efficiency: rep.efficiency,
                });
            }
            Ok(row)
        })
        .collect();
    let mut runs = Vec::new();
    for r in rows {
        runs.extend(r?);
    }
    Ok(ConvergenceStudy { ns: ns.to_vec(), taus: taus.to_vec(), runs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(values: Vec<Vec<f64>>) -> ConvergenceTable {
        ConvergenceTable { name: "t".into(), ns: vec![4, 8, 16], taus: vec![0.2, 0.1], values }
    }

    #[test]
    fn rates_of_exact_power_laws() {
        // e = h², independent of τ
        let ns = [4.0, 8.0, 16.0];
        let taus = [0.2, 0.1];
        let v: Vec<Vec<f64>> = ns.iter().map(|n| taus.iter().map(|_| 1.0 / (n * n)).collect()).collect();
        let t = table(v);
        for r in t.h_rates().into_iter().skip(1) {
            assert!((r.unwrap() - 2.0).abs() < 1e-12);
        }
        assert!(t.tau_rates()[0].is_none());
        assert!(t.tau_rates()[1].unwrap().abs() < 1e-12);
        assert!((t.diagonal_rate().unwrap() - 2.0).abs() < 1e-12);
        let w: Vec<Vec<f64>> = ns.iter().map(|_| taus.to_vec()).collect();
        assert!((table(w).tau_rates()[1].unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_row_has_no_rates() {
        let t = ConvergenceTable { name: "t".into(), ns: vec![4], taus: vec![0.2], values: vec![vec![1.0]] };
        assert_eq!(t.h_rates(), vec![None]);
        assert_eq!(t.diagonal_rate(), None);
        let csv = t.to_csv("a = 1");
        assert!(csv.starts_with("# a = 1\nN,tau=2.000000e-1,rate_h\n4,1.000000e0,\n"));
    }

    #[test]
    fn diagonal_rate_of_published_displacement_table() {
        // last diagonal pair of the displacement error table, bold rate 1.77
        let t = ConvergenceTable {
            name: "u".into(),
            ns: vec![32, 64],
            taus: vec![0.025, 0.0125],
            values: vec![vec![3.10e-4, 2.96e-4], vec![1.36e-4, 9.07e-5]],
        };
        assert!((t.diagonal_rate().unwrap() - 1.77).abs() < 0.005);
        // h-rate in the finest column: 2.96e-4 -> 9.07e-5 printed as 1.70
        assert!((t.h_rates()[1].unwrap() - 1.70).abs() < 0.01);
    }
}
