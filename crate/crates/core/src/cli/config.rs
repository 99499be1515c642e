//! Run configuration: a TOML file of dotted keys, patched by `key=value`
//! overrides, then resolved against per-subcommand defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adaptivity::{Marking, SpaceAdaptParams, TimeAdaptParams};
use crate::estimators::{EdgeShare, EstimatorOptions};
use crate::forms::MaterialParams;
use crate::problem::Manufactured;
use crate::verify::{PressureTimeRule, SweepResolution, TimeSampling};

use super::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    /// Uniform (N, τ) grid: error and estimator tables.
    Converge,
    /// Time-adaptive run on a fixed mesh.
    AdaptTime,
    /// Space-time adaptive loop.
    AdaptSpace,
    /// Material parameter sweep of the efficiency index.
    Sweep,
    /// One uniform run with estimators and a trajectory dump.
    Solve,
}

impl Subcommand {
    pub fn as_str(self) -> &'static str {
        match self {
            Subcommand::Converge => "converge",
            Subcommand::AdaptTime => "adapt-time",
            Subcommand::AdaptSpace => "adapt-space",
            Subcommand::Sweep => "sweep",
            Subcommand::Solve => "solve",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    /// Smooth manufactured solution with three networks.
    #[default]
    Smooth3,
    /// Homogeneous boundary data with smooth loads; no exact solution.
    LoadedBox,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

/// A scalar shared by every network, or one value per network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerNetwork {
    Shared(f64),
    Each(Vec<f64>),
}

impl PerNetwork {
    fn expand(&self, j: usize) -> Vec<f64> {
        match self {
            PerNetwork::Shared(v) => vec![*v; j],
            PerNetwork::Each(v) => v.clone(),
        }
    }
}

/// Transfer coefficients: one value for every pair, or the full matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Transfer {
    Shared(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct MaterialSection {
    mu: Option<f64>,
    lambda: Option<f64>,
    alpha: Option<PerNetwork>,
    s: Option<PerNetwork>,
    kappa: Option<PerNetwork>,
    gamma: Option<Transfer>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct MeshSection {
    n: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct TimeSection {
    tau: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ConvergeSection {
    n: Option<Vec<usize>>,
    tau: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct AdaptSection {
    alpha: Option<f64>,
    beta: Option<f64>,
    tau0: Option<f64>,
    tau_max: Option<f64>,
    tau_min: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SpaceSection {
    tolerance: Option<f64>,
    max_cells: Option<usize>,
    fraction: Option<f64>,
    marking: Option<Marking>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct EstimatorSection {
    transfer_weight: Option<f64>,
    edge_share: Option<EdgeShare>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct NormsSection {
    gauss_points: Option<usize>,
    midpoints: Option<bool>,
    pressure_rule: Option<PressureTimeRule>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SweepSection {
    /// Approximate number of points to run; 0 runs the full sweep.
    target: Option<usize>,
    n: Option<usize>,
    tau: Option<f64>,
    end: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct OutputSection {
    formats: Option<Vec<Format>>,
    checkpoint: Option<bool>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FileConfig {
    problem: Option<ProblemKind>,
    end: Option<f64>,
    material: MaterialSection,
    mesh: MeshSection,
    time: TimeSection,
    converge: ConvergeSection,
    adapt: AdaptSection,
    space: SpaceSection,
    estimator: EstimatorSection,
    norms: NormsSection,
    sweep: SweepSection,
    output: OutputSection,
}

/// A fully resolved and validated configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub problem: ProblemKind,
    pub end: f64,
    pub material: MaterialParams,
    /// Mesh resolution `N` of single-mesh runs.
    pub n: usize,
    /// Uniform step of `solve`.
    pub tau: f64,
    pub converge_n: Vec<usize>,
    pub converge_tau: Vec<f64>,
    pub adapt: TimeAdaptParams,
    pub space: SpaceAdaptParams,
    pub estimator: EstimatorOptions,
    pub gauss_points: usize,
    pub midpoints: bool,
    pub pressure_rule: PressureTimeRule,
    pub sweep_target: usize,
    pub sweep_n: usize,
    pub sweep_tau: f64,
    pub sweep_end: f64,
    pub formats: Vec<Format>,
    pub checkpoint: bool,
}

impl RunConfig {
    pub fn sampling(&self) -> TimeSampling {
        TimeSampling { gauss_points: self.gauss_points, midpoints: self.midpoints, pressure_rule: self.pressure_rule }
    }

    pub fn sweep_resolution(&self) -> SweepResolution {
        SweepResolution { n: self.sweep_n, tau: self.sweep_tau, end: self.sweep_end }
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    /// One-line JSON record of the whole configuration.
    pub fn header(&self) -> String {
        format!("config: {}", serde_json::to_string(self).expect("config serializes"))
    }
}

/// Parses the right side of an override as a TOML value, falling back to
/// a bare string so that `problem=loaded-box` works without quotes.
fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Sets `a.b.c = value`, creating intermediate tables.
fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').map(str::trim).collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("malformed key `{key}`")));
    }
    let mut t = table;
    for p in &parts[..parts.len() - 1] {
        let entry = t.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("`{key}`: `{p}` is a value, not a section")))?;
    }
    t.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Applies `key=value` overrides on top of the parsed file.
pub fn apply_overrides(table: &mut toml::Table, overrides: &[String]) -> Result<(), CliError> {
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{o}` is not of the form key=value")))?;
        set_dotted(table, k.trim(), parse_value(v.trim()))?;
    }
    Ok(())
}

/// Reads the config file, if any, and applies the overrides.
pub fn load_table(path: Option<&Path>, overrides: &[String]) -> Result<toml::Table, CliError> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
            text.parse::<toml::Table>().map_err(|e| {
                let msg = e.to_string().split_whitespace().collect::<Vec<_>>().join(" ");
                CliError::Config(format!("{}: {msg}", p.display()))
            })?
        }
        None => toml::Table::new(),
    };
    apply_overrides(&mut table, overrides)?;
    Ok(table)
}

fn material(sec: &MaterialSection, problem: ProblemKind) -> Result<MaterialParams, CliError> {
    let base = Manufactured::default_params();
    let j = match (&sec.alpha, &sec.s, &sec.kappa, &sec.gamma) {
        _ if problem == ProblemKind::Smooth3 => 3,
        (Some(PerNetwork::Each(v)), ..) | (_, Some(PerNetwork::Each(v)), ..) | (_, _, Some(PerNetwork::Each(v)), _) => {
            v.len()
        }
        (.., Some(Transfer::Matrix(m))) => m.len(),
        _ => base.num_networks(),
    };
    let pick = |v: &Option<PerNetwork>, dflt: &[f64]| match v {
        Some(v) => v.expand(j),
        None if dflt.len() == j => dflt.to_vec(),
        None => vec![dflt[0]; j],
    };
    let gamma = match &sec.gamma {
        Some(Transfer::Matrix(m)) => m.clone(),
        Some(Transfer::Shared(g)) => (0..j).map(|a| (0..j).map(|b| if a == b { 0.0 } else { *g }).collect()).collect(),
        None => {
            let g = base.gamma[0][1];
            (0..j).map(|a| (0..j).map(|b| if a == b { 0.0 } else { g }).collect()).collect()
        }
    };
    let params = MaterialParams::new(
        sec.mu.unwrap_or(base.mu),
        sec.lambda.unwrap_or(base.lambda),
        pick(&sec.alpha, &base.alpha),
        pick(&sec.s, &base.s),
        pick(&sec.kappa, &base.kappa),
        gamma,
    )
    .map_err(|e| CliError::Config(format!("material: {e}")))?;
    if problem == ProblemKind::Smooth3 && params.num_networks() != 3 {
        return Err(CliError::Config("problem smooth3 has exactly three networks".into()));
    }
    Ok(params)
}

/// Resolves defaults for `sub` and validates every parameter before any
/// run starts.
pub fn resolve(sub: Subcommand, table: toml::Table) -> Result<RunConfig, CliError> {
    let fc: FileConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string().trim().replace('\n', " ")))?;
    let problem = fc.problem.unwrap_or_default();
    let bad = |m: String| Err(CliError::Config(m));
    if problem != ProblemKind::Smooth3 && matches!(sub, Subcommand::Converge | Subcommand::Sweep) {
        return bad(format!("{} needs an exact solution; set problem = \"smooth3\"", sub.as_str()));
    }
    let material = material(&fc.material, problem)?;
    let end = fc.end.unwrap_or(match sub {
        Subcommand::Converge | Subcommand::Solve | Subcommand::Sweep => 0.4,
        Subcommand::AdaptTime | Subcommand::AdaptSpace => 1.0,
    });
    if !(end > 0.0 && end.is_finite()) {
        return bad(format!("end = {end} must be positive"));
    }
    let n = fc.mesh.n.unwrap_or(match sub {
        Subcommand::AdaptSpace => 4,
        _ => 8,
    });
    if n == 0 {
        return bad("mesh.n must be at least 1".into());
    }
    let tau = fc.time.tau.unwrap_or(0.1);
    if !(tau > 0.0) {
        return bad(format!("time.tau = {tau} must be positive"));
    }
    let converge_n = fc.converge.n.unwrap_or_else(|| vec![4, 8, 16, 32, 64]);
    let converge_tau = fc.converge.tau.unwrap_or_else(|| vec![0.2, 0.1, 0.05, 0.025, 0.0125]);
    if converge_n.is_empty() || converge_tau.is_empty() {
        return bad("converge.n and converge.tau must be nonempty".into());
    }
    if let Some(t) = converge_tau.iter().find(|t| !(**t > 0.0)) {
        return bad(format!("converge.tau entry {t} must be positive"));
    }
    if converge_n.contains(&0) {
        return bad("converge.n entries must be at least 1".into());
    }

    let tau0 = fc.adapt.tau0.unwrap_or(match sub {
        Subcommand::AdaptSpace => end / 64.0,
        _ => 0.2,
    });
    let adapt = match sub {
        Subcommand::AdaptSpace => TimeAdaptParams {
            alpha: fc.adapt.alpha.unwrap_or(0.3),
            beta: fc.adapt.beta.unwrap_or(2.0),
            tau0,
            tau_max: fc.adapt.tau_max.unwrap_or(tau0),
            tau_min: fc.adapt.tau_min.unwrap_or(tau0 / 16.0),
        },
        _ => TimeAdaptParams {
            alpha: fc.adapt.alpha.unwrap_or(0.0),
            beta: fc.adapt.beta.unwrap_or(2.0),
            tau0,
            tau_max: fc.adapt.tau_max.unwrap_or(end),
            tau_min: fc.adapt.tau_min.unwrap_or(tau0 / 16.0),
        },
    };
    adapt.validate()?;
    let space = SpaceAdaptParams {
        tolerance: fc.space.tolerance.unwrap_or(0.0),
        max_cells: fc.space.max_cells.unwrap_or(8000),
        fraction: fc.space.fraction.unwrap_or(0.3),
        marking: fc.space.marking.unwrap_or(Marking::Dorfler),
    };
    space.validate()?;
    let dflt = EstimatorOptions::default();
    let estimator = EstimatorOptions {
        transfer_weight: fc.estimator.transfer_weight.unwrap_or(dflt.transfer_weight),
        edge_share: fc.estimator.edge_share.unwrap_or(dflt.edge_share),
    };
    if !(estimator.transfer_weight >= 0.0) {
        return bad(format!("estimator.transfer_weight = {} must be nonnegative", estimator.transfer_weight));
    }
    let ts = TimeSampling::default();
    let gauss_points = fc.norms.gauss_points.unwrap_or(ts.gauss_points);
    if !(1..=5).contains(&gauss_points) {
        return bad(format!("norms.gauss_points = {gauss_points} must be between 1 and 5"));
    }
    let sr = SweepResolution::default();
    let (sweep_n, sweep_tau, sweep_end) =
        (fc.sweep.n.unwrap_or(sr.n), fc.sweep.tau.unwrap_or(sr.tau), fc.sweep.end.unwrap_or(sr.end));
    if sweep_n == 0 || !(sweep_tau > 0.0) || !(sweep_end > 0.0) {
        return bad("sweep.n, sweep.tau and sweep.end must be positive".into());
    }
    Ok(RunConfig {
        subcommand: sub,
        problem,
        end,
        material,
        n,
        tau,
        converge_n,
        converge_tau,
        adapt,
        space,
        estimator,
        gauss_points,
        midpoints: fc.norms.midpoints.unwrap_or(ts.midpoints),
        pressure_rule: fc.norms.pressure_rule.unwrap_or(ts.pressure_rule),
        sweep_target: fc.sweep.target.unwrap_or(0),
        sweep_n,
        sweep_tau,
        sweep_end,
        formats: fc.output.formats.unwrap_or_else(|| vec![Format::Csv, Format::Json, Format::Svg]),
        checkpoint: fc.output.checkpoint.unwrap_or(sub == Subcommand::Solve),
    })
}

/// File plus overrides to a validated configuration.
pub fn parse_config(sub: Subcommand, path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, CliError> {
    resolve(sub, load_table(path, overrides)?)
}
