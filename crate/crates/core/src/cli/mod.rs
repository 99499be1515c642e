//! The `mpet-adapt` command line: configuration, experiment drivers and
//! artifact writers.
//!
//! Every artifact starts with a line `# config: {...}` holding the resolved
//! configuration as JSON (`<!-- ... -->` in SVG files; JSON artifacts carry
//! it under the `config` key instead).
//!
//! Trajectory checkpoints (`trajectory.txt`) hold, after the header, one
//! record per time level: `step <n> <t> <len u> <len p>`, then a line of
//! displacement and a line of pressure coefficients in the solver's dof
//! order.

pub mod config;
pub mod plot;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Parser;

use crate::adaptivity::{space_time_adaptive, time_adaptive_run, AdaptLevel, TimeAdaptiveRun};
use crate::estimators::estimate;
use crate::mesh::{unit_square_mesh, Mesh};
use crate::problem::{ExactSolution, Manufactured, MpetProblem};
use crate::solver::{Degrees, MpetSolver, TimeGrid, Trajectory};
use crate::verify::convergence::{ERROR_NAMES, ESTIMATOR_NAMES};
use crate::verify::sweep::sweep_csv;
use crate::verify::{
    bochner_errors_with, convergence_study, ladder_correlations, loaded_box, parameter_sweep, sweep_points,
    sweep_subsample, ConvergenceTable,
};

pub use config::{parse_config, Format, ProblemKind, RunConfig, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Run(#[from] crate::error::Error),
    #[error("writing {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(crate::error::Error::InvalidArgument(_) | crate::error::Error::Param(_)) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mpet-adapt", version, about = "Adaptive multiple-network poroelasticity solver")]
pub struct Args {
    #[arg(value_enum)]
    pub subcommand: Subcommand,
    /// TOML file with dotted keys, e.g. `material.mu = 1.0`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Single-threaded execution for byte-reproducible artifacts.
    #[arg(long)]
    pub serial: bool,
    /// `key=value` pairs applied on top of the config file.
    pub overrides: Vec<String>,
}

/// Parses, validates and runs; returns the artifacts written.
pub fn main_with(args: &Args) -> Result<Vec<PathBuf>, CliError> {
    let cfg = parse_config(args.subcommand, args.config.as_deref(), &args.overrides)?;
    if args.serial {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
        pool.install(|| run(&cfg, &args.out))
    } else {
        run(&cfg, &args.out)
    }
}

struct Writer<'a> {
    dir: &'a Path,
    header: String,
    written: Vec<PathBuf>,
}

impl Writer<'_> {
    fn put(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, body).map_err(|source| CliError::Write { path: path.clone(), source })?;
        self.written.push(path);
        Ok(())
    }

    /// CSV or plain-text artifact with the config comment line prepended.
    fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let full = format!("# {}\n{body}", self.header);
        self.put(name, &full)
    }

    fn json(&mut self, name: &str, cfg: &RunConfig, value: serde_json::Value) -> Result<(), CliError> {
        let mut obj = serde_json::Map::new();
        obj.insert("config".into(), serde_json::to_value(cfg).expect("config serializes"));
        if let serde_json::Value::Object(m) = value {
            obj.extend(m);
        }
        let body = serde_json::to_string_pretty(&serde_json::Value::Object(obj)).expect("json") + "\n";
        self.put(name, &body)
    }
}

/// Runs the configured experiment and writes its artifacts under `out`.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(out).map_err(|source| CliError::Write { path: out.to_path_buf(), source })?;
    let mut w = Writer { dir: out, header: cfg.header(), written: Vec::new() };
    match cfg.subcommand {
        Subcommand::Converge => converge(cfg, &mut w)?,
        Subcommand::AdaptTime => adapt_time(cfg, &mut w)?,
        Subcommand::AdaptSpace => adapt_space(cfg, &mut w)?,
        Subcommand::Sweep => sweep(cfg, &mut w)?,
        Subcommand::Solve => solve(cfg, &mut w)?,
    }
    Ok(w.written)
}

/// The selected problem and its exact solution, when known.
enum Selected {
    Smooth(Manufactured),
    Other(Box<dyn MpetProblem>),
}

impl Selected {
    fn new(cfg: &RunConfig) -> Selected {
        match cfg.problem {
            ProblemKind::Smooth3 => Selected::Smooth(Manufactured::new(cfg.material.clone())),
            ProblemKind::LoadedBox => Selected::Other(Box::new(loaded_box(cfg.material.clone()))),
        }
    }

    fn problem(&self) -> &dyn MpetProblem {
        match self {
            Selected::Smooth(m) => m,
            Selected::Other(p) => p.as_ref(),
        }
    }

    fn exact(&self) -> Option<&dyn ExactSolution> {
        match self {
            Selected::Smooth(m) => Some(m),
            Selected::Other(_) => None,
        }
    }
}

fn sci(v: f64) -> String {
    format!("{v:.6e}")
}

fn opt_sci(v: Option<f64>) -> String {
    v.map(sci).unwrap_or_default()
}

fn table_plot(cfg: &RunConfig, t: &ConvergenceTable) -> String {
    let series: Vec<plot::Series> = t
        .taus
        .iter()
        .enumerate()
        .map(|(j, tau)| plot::Series {
            label: format!("tau = {tau}"),
            points: t.ns.iter().zip(&t.values).map(|(n, row)| (1.0 / *n as f64, row[j])).collect(),
        })
        .collect();
    plot::loglog_svg(&cfg.header(), &t.name, "h = 1/N", &t.name, &series)
}

fn converge(cfg: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    let problem = Manufactured::new(cfg.material.clone());
    let study =
        convergence_study(&problem, &cfg.converge_n, &cfg.converge_tau, cfg.end, cfg.estimator, cfg.sampling())?;
    let mut tables = study.error_tables();
    tables.extend(study.estimator_tables());
    let eff = study.efficiency_table();
    if cfg.wants(Format::Csv) {
        for t in &tables {
            w.put(&format!("table_{}.csv", t.name), &t.to_csv(&w.header.clone()))?;
        }
        let mut est = String::from("N,tau,eta1,eta2,eta3,eta4,eta,E,I_eff\n");
        for r in &study.runs {
            let e = r.errors.total();
            let _ = writeln!(
                est,
                "{},{},{},{},{},{},{},{},{}",
                r.n,
                sci(r.tau),
                sci(r.eta[0]),
                sci(r.eta[1]),
                sci(r.eta[2]),
                sci(r.eta[3]),
                sci(r.eta.iter().sum()),
                sci(e),
                opt_sci(r.efficiency)
            );
        }
        w.text("estimators.csv", &est)?;
        w.put("efficiency.csv", &eff.to_csv(&w.header.clone()))?;
    }
    if cfg.wants(Format::Svg) {
        for t in &tables {
            w.put(&format!("plot_{}.svg", t.name), &table_plot(cfg, t))?;
        }
    }
    if cfg.wants(Format::Json) {
        let names: Vec<&str> = ERROR_NAMES.iter().chain(ESTIMATOR_NAMES.iter()).copied().collect();
        let rates: serde_json::Map<String, serde_json::Value> = tables
            .iter()
            .zip(names)
            .map(|(t, n)| {
                (
                    n.to_string(),
                    serde_json::json!({ "h": t.h_rates(), "tau": t.tau_rates(), "diagonal": t.diagonal_rate() }),
                )
            })
            .collect();
        w.json("study.json", cfg, serde_json::json!({ "runs": study.runs, "rates": rates }))?;
    }
    Ok(())
}

fn decisions_csv(run: &TimeAdaptiveRun) -> String {
    let mut s = String::from("attempt,t,tau,eta_h,eta_tau,action\n");
    for d in &run.decisions {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            d.attempt,
            sci(d.t),
            sci(d.tau),
            sci(d.eta_h),
            sci(d.eta_tau),
            d.action.as_str()
        );
    }
    s
}

fn checkpoint(w: &mut Writer, name: &str, traj: &Trajectory) -> Result<(), CliError> {
    let mut buf = Vec::new();
    traj.write_ascii(&mut buf).expect("writing to memory");
    w.text(name, &String::from_utf8(buf).expect("ascii"))
}

fn adapt_time(cfg: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    let sel = Selected::new(cfg);
    let mesh = Arc::new(unit_square_mesh(cfg.n).map_err(crate::error::Error::from)?);
    let mut run = time_adaptive_run(sel.problem(), mesh, Degrees::default(), &cfg.adapt, 0.0, cfg.end, cfg.estimator)?;
    let errors = sel.exact().map(|e| bochner_errors_with(&run.trajectory, e, cfg.sampling()));
    if let Some(e) = errors {
        run.report = run.report.clone().with_error(e.total());
    }
    if cfg.wants(Format::Csv) {
        w.text("decisions.csv", &decisions_csv(&run))?;
    }
    w.json(
        "trajectory_meta.json",
        cfg,
        serde_json::json!({
            "times": run.trajectory.times(),
            "steps": run.steps(),
            "attempts": run.decisions.len(),
            "estimators": run.report,
            "errors": errors,
        }),
    )?;
    if cfg.checkpoint {
        checkpoint(w, "trajectory.txt", &run.trajectory)?;
    }
    Ok(())
}

fn levels_csv(levels: &[AdaptLevel]) -> String {
    let mut s = String::from(
        "level,cells,steps,resolution,eta1,eta2,eta3,eta4,eta,E,I_eff,u_linf_h1,p_linf_l2,p_l2_h1,marked\n",
    );
    for (l, lv) in levels.iter().enumerate() {
        let r = lv.report();
        let cells = lv.mesh.num_cells();
        let steps = lv.run.trajectory.len() - 1;
        let e = lv.errors.map(|e| e.as_array());
        let _ = writeln!(
            s,
            "{l},{cells},{steps},{},{},{},{},{},{},{},{},{},{},{},{}",
            cells * steps,
            sci(r.eta1),
            sci(r.eta2),
            sci(r.eta3),
            sci(r.eta4),
            sci(r.eta),
            opt_sci(lv.errors.map(|e| e.total())),
            opt_sci(r.efficiency),
            opt_sci(e.map(|a| a[0])),
            opt_sci(e.map(|a| a[1])),
            opt_sci(e.map(|a| a[2])),
            lv.marked.len()
        );
    }
    s
}

fn mesh_text(mesh: &Mesh) -> String {
    let mut buf = Vec::new();
    mesh.write_ascii(&mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii")
}

fn adapt_space(cfg: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    let sel = Selected::new(cfg);
    let mesh = Arc::new(unit_square_mesh(cfg.n).map_err(crate::error::Error::from)?);
    let levels = space_time_adaptive(
        sel.problem(),
        sel.exact(),
        mesh,
        Degrees::default(),
        &cfg.space,
        &cfg.adapt,
        cfg.end,
        cfg.estimator,
    )?;
    if cfg.wants(Format::Csv) {
        w.text("levels.csv", &levels_csv(&levels))?;
    }
    for (l, lv) in levels.iter().enumerate() {
        w.text(&format!("mesh_{l}.txt"), &mesh_text(&lv.mesh))?;
        if cfg.wants(Format::Csv) {
            let r = lv.report();
            let mut s = String::from("cell,eta_K,eta1_K,eta2_K,eta3_K,marked\n");
            let mut marked = vec![false; r.per_cell.len()];
            lv.marked.iter().for_each(|&k| marked[k] = true);
            for k in 0..r.per_cell.len() {
                let _ = writeln!(
                    s,
                    "{k},{},{},{},{},{}",
                    sci(r.per_cell[k]),
                    sci(r.eta1_cells[k]),
                    sci(r.eta2_cells[k]),
                    sci(r.eta3_cells[k]),
                    marked[k] as u8
                );
            }
            w.text(&format!("indicators_{l}.csv"), &s)?;
            w.text(&format!("decisions_{l}.csv"), &decisions_csv(&lv.run))?;
        }
    }
    if cfg.wants(Format::Svg) {
        let pts = |f: &dyn Fn(&AdaptLevel) -> Option<f64>| -> Vec<(f64, f64)> {
            levels
                .iter()
                .filter_map(|lv| f(lv).map(|v| ((lv.mesh.num_cells() * (lv.run.trajectory.len() - 1)) as f64, v)))
                .collect()
        };
        let series = vec![
            plot::Series { label: "E".into(), points: pts(&|lv| lv.errors.map(|e| e.total())) },
            plot::Series { label: "eta".into(), points: pts(&|lv| Some(lv.report().eta)) },
        ];
        w.put(
            "plot_levels.svg",
            &plot::loglog_svg(&cfg.header(), "adaptive levels", "cells x steps", "E, eta", &series),
        )?;
    }
    if cfg.wants(Format::Json) {
        let lv: Vec<serde_json::Value> = levels
            .iter()
            .map(|lv| {
                serde_json::json!({
                    "cells": lv.mesh.num_cells(),
                    "times": lv.run.trajectory.times(),
                    "estimators": lv.report(),
                    "errors": lv.errors,
                    "marked": lv.marked.len(),
                })
            })
            .collect();
        w.json("levels.json", cfg, serde_json::json!({ "levels": lv }))?;
    }
    Ok(())
}

fn sweep(cfg: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    let all = sweep_points();
    let points = if cfg.sweep_target == 0 { all.clone() } else { sweep_subsample(&all, cfg.sweep_target) };
    let records = parameter_sweep(&points, cfg.sweep_resolution(), cfg.estimator, cfg.sampling())?;
    if cfg.wants(Format::Csv) {
        w.put("sweep.csv", &sweep_csv(&records, &w.header.clone()))?;
    }
    if cfg.wants(Format::Json) {
        let corr = ladder_correlations(&records);
        let min_eff = records.iter().map(|r| r.efficiency).fold(f64::INFINITY, f64::min);
        w.json(
            "sweep_summary.json",
            cfg,
            serde_json::json!({
                "points": records.len(),
                "filtered_total": all.len(),
                "min_efficiency": min_eff,
                "ladder_correlations": corr,
                "positive_ladders": corr.iter().filter(|c| **c > 0.0).count(),
            }),
        )?;
    }
    Ok(())
}

fn solve(cfg: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    let sel = Selected::new(cfg);
    let mesh = Arc::new(unit_square_mesh(cfg.n).map_err(crate::error::Error::from)?);
    let grid = TimeGrid::uniform(0.0, cfg.end, cfg.tau)?;
    let traj = MpetSolver::new(sel.problem(), mesh, Degrees::default())?.run(&grid)?;
    let mut report = estimate(&traj, sel.problem(), cfg.estimator)?;
    let errors = sel.exact().map(|e| bochner_errors_with(&traj, e, cfg.sampling()));
    if let Some(e) = errors {
        report = report.with_error(e.total());
    }
    w.json(
        "trajectory_meta.json",
        cfg,
        serde_json::json!({ "times": traj.times(), "estimators": report, "errors": errors }),
    )?;
    if cfg.wants(Format::Csv) {
        let mut s = String::from("cell,eta_K\n");
        for (k, v) in report.per_cell.iter().enumerate() {
            let _ = writeln!(s, "{k},{}", sci(*v));
        }
        w.text("indicators.csv", &s)?;
    }
    if cfg.checkpoint {
        checkpoint(w, "trajectory.txt", &traj)?;
    }
    Ok(())
}
