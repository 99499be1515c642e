//! Efficiency of the estimators across material parameter permutations.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::Result;
use crate::estimators::{estimate, EstimatorOptions};
use crate::forms::MaterialParams;
use crate::mesh::unit_square_mesh;
use crate::problem::Manufactured;
use crate::solver::{Degrees, MpetSolver, TimeGrid};

use super::norms::{bochner_errors_with, TimeSampling};

pub const MU_VALUES: [f64; 4] = [1.0, 10.0, 100.0, 1000.0];
pub const LAMBDA_VALUES: [f64; 5] = [1.0, 10.0, 100.0, 1000.0, 10000.0];
pub const ALPHA1_VALUES: [f64; 3] = [0.01, 0.1, 0.25];
pub const COEFFICIENT_VALUES: [f64; 3] = [0.01, 0.1, 1.0];
pub const MAX_POISSON_RATIO: f64 = 0.499;
pub const MAX_YOUNGS_MODULUS: f64 = 200.0;

/// One material permutation of the three-network case. Storage,
/// conductance and transfer are shared by all networks; α₂ = 0.5 − α₁ and
/// α₃ = 0.5.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct SweepPoint {
    pub mu: f64,
    pub lambda: f64,
    pub alpha1: f64,
    pub s: f64,
    pub kappa: f64,
    pub gamma: f64,
}

impl SweepPoint {
    pub fn params(&self) -> Result<MaterialParams> {
        let g = self.gamma;
        Ok(MaterialParams::new(
            self.mu,
            self.lambda,
            vec![self.alpha1, 0.5 - self.alpha1, 0.5],
            vec![self.s; 3],
            vec![self.kappa; 3],
            vec![vec![0.0, g, g], vec![g, 0.0, g], vec![g, g, 0.0]],
        )?)
    }

    /// Everything but λ; points sharing a key form one λ ladder.
    pub fn ladder_key(&self) -> [u64; 5] {
        [self.mu, self.alpha1, self.s, self.kappa, self.gamma].map(f64::to_bits)
    }
}

/// The full cross product with `ν > 0.499` or `E > 200` removed, in a fixed
/// order with λ varying fastest.
pub fn sweep_points() -> Vec<SweepPoint> {
    let mut out = Vec::new();
    for &mu in &MU_VALUES {
        for &alpha1 in &ALPHA1_VALUES {
            for &s in &COEFFICIENT_VALUES {
                for &kappa in &COEFFICIENT_VALUES {
                    for &gamma in &COEFFICIENT_VALUES {
                        for &lambda in &LAMBDA_VALUES {
                            let nu = lambda / (2.0 * (lambda + mu));
                            let young = mu * (3.0 * lambda + 2.0 * mu) / (lambda + mu);
                            if nu <= MAX_POISSON_RATIO && young <= MAX_YOUNGS_MODULUS {
                                out.push(SweepPoint { mu, lambda, alpha1, s, kappa, gamma });
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// At least `target` points made of whole λ ladders spread evenly over the
/// sweep, so rank trends along λ stay testable.
pub fn sweep_subsample(points: &[SweepPoint], target: usize) -> Vec<SweepPoint> {
    let mut ladders: Vec<Vec<SweepPoint>> = Vec::new();
    for p in points {
        match ladders.last_mut() {
            Some(l) if l[0].ladder_key() == p.ladder_key() => l.push(*p),
            _ => ladders.push(vec![*p]),
        }
    }
    let total = points.len().max(1);
    let want = target.min(total);
    // stride over ladders so that roughly `want` points are kept
    let stride = (total as f64 / want.max(1) as f64).max(1.0);
    let mut out = Vec::new();
    let mut next = 0.0;
    for (i, l) in ladders.iter().enumerate() {
        if out.len() >= want {
            break;
        }
        if i as f64 >= next {
            out.extend_from_slice(l);
            next += stride;
        }
    }
    out
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct SweepRecord {
    pub point: SweepPoint,
    pub poisson_ratio: f64,
    pub youngs_modulus: f64,
    /// Total error `E`.
    pub error: f64,
    pub eta: f64,
    pub efficiency: f64,
}

/// Resolution of a sweep run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepResolution {
    pub n: usize,
    pub tau: f64,
    pub end: f64,
}

impl Default for SweepResolution {
    fn default() -> Self {
        SweepResolution { n: 8, tau: 0.1, end: 0.4 }
    }
}

/// Runs the manufactured three-network case for every point concurrently.
pub fn parameter_sweep(
    points: &[SweepPoint],
    res: SweepResolution,
    options: EstimatorOptions,
    sampling: TimeSampling,
) -> Result<Vec<SweepRecord>> {
    let mesh = Arc::new(unit_square_mesh(res.n)?);
    let grid = TimeGrid::uniform(0.0, res.end, res.tau)?;
    points
        .par_iter()
        .map(|pt| run_point(pt, &mesh, &grid, options, sampling).map_err(|e| e.in_run(format!("sweep point {pt:?}"))))
        .collect()
}

fn run_point(
    pt: &SweepPoint,
    mesh: &Arc<crate::mesh::Mesh>,
    grid: &TimeGrid,
    options: EstimatorOptions,
    sampling: TimeSampling,
) -> Result<SweepRecord> {
    let params = pt.params()?;
    let (nu, young) = (params.poisson_ratio(), params.youngs_modulus());
    let problem = Manufactured::new(params);
    let mut solver = MpetSolver::new(&problem, mesh.clone(), Degrees::default())?;
    let traj = solver.run(grid)?;
    let errors = bochner_errors_with(&traj, &problem, sampling);
    let rep = estimate(&traj, &problem, options)?.with_error(errors.total());
    Ok(SweepRecord {
        point: *pt,
        poisson_ratio: nu,
        youngs_modulus: young,
        error: errors.total(),
        eta: rep.eta,
        efficiency: rep.efficiency.unwrap_or(f64::NAN),
    })
}

/// Ranks starting at 1, ties sharing their mean rank.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = mean;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation; `None` for fewer than two points or a
/// constant input.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Spearman correlation of `I_eff` with `ν` along each λ ladder of at
/// least three points.
pub fn ladder_correlations(records: &[SweepRecord]) -> Vec<f64> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < records.len() {
        let key = records[i].point.ladder_key();
        let mut j = i;
        while j < records.len() && records[j].point.ladder_key() == key {
            j += 1;
        }
        if j - i >= 3 {
            let nu: Vec<f64> = records[i..j].iter().map(|r| r.poisson_ratio).collect();
            let ie: Vec<f64> = records[i..j].iter().map(|r| r.efficiency).collect();
            if let Some(c) = spearman(&nu, &ie) {
                out.push(c);
            }
        }
        i = j;
    }
    out
}

/// CSV with one row per record.
pub fn sweep_csv(records: &[SweepRecord], header: &str) -> String {
    let mut out = String::new();
    for line in header.lines() {
        out.push_str(&format!("# {line}\n"));
    }
    out.push_str("mu,lambda,alpha1,s,kappa,gamma,nu,youngs_modulus,E,eta,I_eff\n");
    for r in records {
        let p = r.point;
        out.push_str(&format!(
            "{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e}\n",
            p.mu,
            p.lambda,
            p.alpha1,
            p.s,
            p.kappa,
            p.gamma,
            r.poisson_ratio,
            r.youngs_modulus,
            r.error,
            r.eta,
            r.efficiency
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn filtered_cross_product() {
        let pts = sweep_points();
        // (μ, λ) pairs passing the filter: three for μ = 1, four for μ = 10
        assert_eq!(pts.len(), 7 * 3 * 27);
        for p in &pts {
            let prm = p.params().unwrap();
            assert!(prm.poisson_ratio() <= 0.499 && prm.youngs_modulus() <= 200.0);
        }
        let default = SweepPoint { mu: 1.0, lambda: 10.0, alpha1: 0.25, s: 1.0, kappa: 1.0, gamma: 1.0 };
        assert!(pts.contains(&default));
    }

    #[test]
    fn subsample_keeps_whole_ladders() {
        let pts = sweep_points();
        let sub = sweep_subsample(&pts, 50);
        assert!(sub.len() >= 50 && sub.len() < 60, "{}", sub.len());
        for p in &sub {
            let ladder = pts.iter().filter(|q| q.ladder_key() == p.ladder_key()).count();
            assert_eq!(sub.iter().filter(|q| q.ladder_key() == p.ladder_key()).count(), ladder);
        }
        assert_eq!(sweep_subsample(&pts, 10_000).len(), pts.len());
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), None);
        // classic tied example: ranks (1.5, 1.5, 3) vs (1, 2, 3)
        let r = spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((r - 0.866_025_403_784_438_6).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn spearman_is_invariant_under_monotone_maps(v in prop::collection::vec(-100.0f64..100.0, 3..20)) {
            let w: Vec<f64> = v.iter().map(|x| x.powi(3) + 2.0 * x).collect();
            let idx: Vec<f64> = (0..v.len()).map(|i| i as f64).collect();
            prop_assert_eq!(spearman(&idx, &v), spearman(&idx, &w));
        }
    }
}
