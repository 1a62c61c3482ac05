//! `pdsflow` command line: cone queries, certification, simulation and oracle comparison.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    forward_lipschitz_profile, CertifyOptions, LipschitzProfile, PointSampler, Verdict,
    DEFAULT_DELTA_GRID,
};
use crate::cones::{temporal_tangent_union, PolyhedronJson};
use crate::domain::{DomainSpec, PiecewiseDomain, Tolerances};
use crate::error::Error;
use crate::integrator::{simulate, FieldSpec, Scheme, SimulationConfig, StepOptions};
use crate::linalg;
use crate::projection::{
    project_polyhedron, random_polyhedron_instance, refined_grid_argmin, GridBox,
    SetProjectionOptions,
};
use crate::scenarios::{Scenario, TwoBusParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_INFEASIBLE_POINT: i32 = 2;
pub const EXIT_DIVERGENT: i32 = 3;
pub const EXIT_SIMULATION_ABORTED: i32 = 4;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const JUNCTION_TIE_RULE: &str =
    "points in several pieces, and equidistant projections, resolve to the lowest piece index";

#[derive(Debug, Parser)]
#[command(
    name = "pdsflow",
    version,
    about = "Projected dynamics on time-varying piecewise-smooth domains"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Built-in scenario name.
    #[arg(long, global = true)]
    pub scenario: Option<String>,
    /// JSON run config or a manifest written by a previous run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for the parallel loops; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Temporal tangent polyhedra at a point.
    Cone(ConeArgs),
    /// Sampled forward Lipschitz profile at one time.
    Certify(CertifyArgs),
    /// Time-stepped trajectory.
    Simulate(SimulateArgs),
    /// Polyhedral projection against the grid oracle on random instances.
    OracleCompare(OracleArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Cone(_) => "cone",
            Self::Certify(_) => "certify",
            Self::Simulate(_) => "simulate",
            Self::OracleCompare(_) => "oracle-compare",
        }
    }
}

#[derive(Debug, Args)]
pub struct ConeArgs {
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    pub t: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub t: Option<f64>,
    /// Sampling center; defaults to the scenario start.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub center: Option<Vec<f64>>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    pub t0: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Option<Scheme>,
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| format!("unknown scheme `{s}` (expected catching-up or tangent-euler)"))
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub instances: Option<usize>,
    #[arg(long)]
    pub resolution: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
}

/// Everything a run depends on. Missing fields fall back to the scenario.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Option<String>,
    /// Parameters for the two-bus scenario.
    pub two_bus: Option<TwoBusParams>,
    /// Inline domain, replacing the scenario's.
    pub domain: Option<DomainSpec>,
    pub field: Option<FieldSpec>,
    /// Deep-merged into the resolved scenario.
    pub overrides: Option<serde_json::Value>,
    pub tolerances: Option<Tolerances>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub projection: SetProjectionOptions,
    pub cone: ConeConfig,
    pub certify: CertifyConfig,
    pub simulate: SimulateConfig,
    pub oracle: OracleConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConeConfig {
    pub x: Option<Vec<f64>>,
    pub t: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyConfig {
    pub t: Option<f64>,
    pub center: Option<Vec<f64>>,
    pub radius: f64,
    pub samples: usize,
    pub boundary_bias: f64,
    pub deltas: Vec<f64>,
    pub oracle_points: usize,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        let s = PointSampler::default();
        Self {
            t: None,
            center: None,
            radius: s.radius,
            samples: s.count,
            boundary_bias: s.boundary_bias,
            deltas: DEFAULT_DELTA_GRID.to_vec(),
            oracle_points: CertifyOptions::default().oracle_points,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub x0: Option<Vec<f64>>,
    pub t0: Option<f64>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub scheme: Option<Scheme>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub instances: usize,
    pub resolution: f64,
    pub dims: Vec<usize>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            instances: 50,
            resolution: 1e-3,
            dims: vec![2, 3],
        }
    }
}

/// Written next to every output; loadable again through `--config`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub scenario: Option<Scenario>,
    pub tie_rule: String,
    pub outputs: Vec<String>,
    pub summary: serde_json::Value,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::config(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::config(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Self::config(format!("csv: {e}"))
    }
}

fn parse_with_path<T: serde::de::DeserializeOwned>(
    text: &str,
    origin: &Path,
) -> Result<T, Failure> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        Failure::config(format!(
            "{}: at `{}`: {}",
            origin.display(),
            e.path(),
            e.inner()
        ))
    })
}

/// Reads a run config, or the config embedded in a manifest.
pub fn load_config(path: &Path) -> Result<RunConfig, String> {
    load_config_inner(path).map_err(|f| f.message)
}

fn load_config_inner(path: &Path) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let is_manifest = serde_json::from_str::<serde_json::Value>(&text)
        .ok()
        .and_then(|v| {
            v.as_object()
                .map(|o| o.contains_key("tool") && o.contains_key("config"))
        })
        .unwrap_or(false);
    if is_manifest {
        Ok(parse_with_path::<Manifest>(&text, path)?.config)
    } else {
        parse_with_path(&text, path)
    }
}

impl RunConfig {
    /// The scenario after applying name, inline parts, overrides and tolerances.
    pub fn resolve_scenario(&self) -> Result<Scenario, Error> {
        let mut s = match (&self.scenario, &self.two_bus) {
            (Some(name), Some(p)) if name == "two-bus" => {
                p.validate()?;
                Scenario::two_bus(p)
            }
            (_, Some(_)) => {
                return Err(Error::InvalidArgument(
                    "two_bus parameters need scenario \"two-bus\"".into(),
                ))
            }
            (Some(name), None) => Scenario::by_name(name)?,
            (None, None) => {
                let domain = self.domain.clone().ok_or_else(|| {
                    Error::InvalidArgument("no scenario name and no inline domain".into())
                })?;
                let n = domain.dimension;
                Scenario {
                    name: "custom".into(),
                    field: FieldSpec::Zero { dimension: n },
                    domain,
                    x0: vec![0.0; n],
                    t0: 0.0,
                    t_end: 1.0,
                    dt: 1e-3,
                    scheme: Scheme::CatchingUp,
                }
            }
        };
        if let Some(d) = &self.domain {
            s.domain = d.clone();
        }
        if let Some(f) = &self.field {
            s.field = f.clone();
        }
        if let Some(o) = &self.overrides {
            s = s.with_overrides(o)?;
        }
        if let Some(t) = self.tolerances {
            s.domain.tolerances = t;
        }
        Ok(s)
    }

    fn apply(&mut self, common: &CommonArgs, command: &Command) {
        if let Some(s) = &common.scenario {
            self.scenario = Some(s.clone());
        }
        if let Some(seed) = common.seed {
            self.seed = seed;
        }
        if common.threads.is_some() {
            self.threads = common.threads;
        }
        match command {
            Command::Cone(a) => {
                set(&mut self.cone.x, &a.x);
                set(&mut self.cone.t, &a.t);
            }
            Command::Certify(a) => {
                set(&mut self.certify.t, &a.t);
                set(&mut self.certify.center, &a.center);
                if let Some(r) = a.radius {
                    self.certify.radius = r;
                }
                if let Some(n) = a.samples {
                    self.certify.samples = n;
                }
                if let Some(d) = &a.deltas {
                    self.certify.deltas = d.clone();
                }
            }
            Command::Simulate(a) => {
                set(&mut self.simulate.x0, &a.x0);
                set(&mut self.simulate.t0, &a.t0);
                set(&mut self.simulate.t_end, &a.t_end);
                set(&mut self.simulate.dt, &a.dt);
                set(&mut self.simulate.scheme, &a.scheme);
            }
            Command::OracleCompare(a) => {
                if let Some(n) = a.instances {
                    self.oracle.instances = n;
                }
                if let Some(r) = a.resolution {
                    self.oracle.resolution = r;
                }
                if let Some(d) = &a.dims {
                    self.oracle.dims = d.clone();
                }
            }
        }
    }
}

fn set<T: Clone>(slot: &mut Option<T>, value: &Option<T>) {
    if value.is_some() {
        *slot = value.clone();
    }
}

/// Parses `args` (including the program name) and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn execute(cli: &Cli) -> Result<i32, Failure> {
    let mut config = match &cli.common.config {
        Some(path) => load_config_inner(path)?,
        None => RunConfig::default(),
    };
    config.apply(&cli.common, &cli.command);
    let scenario = match cli.command {
        Command::OracleCompare(_) => None,
        _ => Some(config.resolve_scenario()?),
    };
    let out = cli
        .common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out)?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Failure::config(format!("thread pool: {e}")))?;
    let outcome = pool.install(|| match (&cli.command, &scenario) {
        (Command::Cone(_), Some(s)) => cmd_cone(&config, s, &out),
        (Command::Certify(_), Some(s)) => cmd_certify(&config, s, &out),
        (Command::Simulate(_), Some(s)) => cmd_simulate(&config, s, &out),
        (_, _) => cmd_oracle_compare(&config, &out),
    })?;

    let manifest = Manifest {
        tool: "pdsflow".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cli.command.name().into(),
        config,
        scenario,
        tie_rule: JUNCTION_TIE_RULE.into(),
        outputs: outcome.outputs,
        summary: outcome.summary,
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    if let Some(msg) = outcome.message {
        eprintln!("{msg}");
    }
    Ok(outcome.code)
}

struct Outcome {
    code: i32,
    outputs: Vec<String>,
    summary: serde_json::Value,
    message: Option<String>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Failure::config(format!("json: {e}")))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn build_domain(scenario: &Scenario) -> Result<PiecewiseDomain, Failure> {
    Ok(scenario.build_domain()?)
}

#[derive(Serialize)]
struct ConeReport {
    x: Vec<f64>,
    t: f64,
    members: Vec<PolyhedronJson>,
    empty: bool,
    warnings: Vec<String>,
}

pub const CONE_FILE: &str = "cone.json";

fn cmd_cone(config: &RunConfig, scenario: &Scenario, out: &Path) -> Result<Outcome, Failure> {
    let domain = build_domain(scenario)?;
    let x = config.cone.x.clone().unwrap_or_else(|| scenario.x0.clone());
    let t = config.cone.t.unwrap_or(scenario.t0);
    let union = match temporal_tangent_union(&domain, &x, t) {
        Ok(u) => u,
        Err(e @ (Error::Infeasible { .. } | Error::DimensionMismatch { .. })) => {
            return Err(Failure {
                code: EXIT_INFEASIBLE_POINT,
                message: e.to_string(),
            })
        }
        Err(e) => return Err(e.into()),
    };
    let members: Vec<PolyhedronJson> = union
        .members
        .iter()
        .map(|(i, p)| PolyhedronJson::new(*i, p))
        .collect();
    let mut warnings = Vec::new();
    for m in &members {
        if m.degenerate {
            warnings.push(format!(
                "piece {}: active gradients are rank deficient",
                m.piece
            ));
        }
    }
    let empty = union.is_empty();
    if empty {
        warnings.push("temporal tangent set is empty at this point".into());
    }
    let report = ConeReport {
        x,
        t,
        members,
        empty,
        warnings,
    };
    write_json(&out.join(CONE_FILE), &report)?;
    Ok(Outcome {
        code: EXIT_OK,
        outputs: vec![CONE_FILE.into()],
        summary: serde_json::json!({ "members": report.members.len(), "empty": empty }),
        message: (!report.warnings.is_empty())
            .then(|| format!("warning: {}", report.warnings.join("; "))),
    })
}

pub const PROFILE_FILE: &str = "profile.json";
pub const RATIOS_FILE: &str = "ratios.csv";

fn cmd_certify(config: &RunConfig, scenario: &Scenario, out: &Path) -> Result<Outcome, Failure> {
    let domain = build_domain(scenario)?;
    let c = &config.certify;
    let t = c.t.unwrap_or(scenario.t0);
    let sampler = PointSampler {
        center: c.center.clone().unwrap_or_else(|| scenario.x0.clone()),
        radius: c.radius,
        count: c.samples,
        boundary_bias: c.boundary_bias,
        seed: config.seed,
    };
    let opts = CertifyOptions {
        projection: config.projection.clone(),
        oracle_points: c.oracle_points,
        ..Default::default()
    };
    let profile = forward_lipschitz_profile(&domain, t, &sampler, &c.deltas, &opts)?;
    write_json(&out.join(PROFILE_FILE), &profile)?;
    write_ratios(&out.join(RATIOS_FILE), &profile)?;
    let code = if profile.verdict == Verdict::Divergent {
        EXIT_DIVERGENT
    } else {
        EXIT_OK
    };
    Ok(Outcome {
        code,
        outputs: vec![PROFILE_FILE.into(), RATIOS_FILE.into()],
        summary: serde_json::json!({
            "verdict": profile.verdict,
            "l_hat": profile.l_hat,
            "slope": profile.slope,
            "failed_projections": profile.failed_projections(),
        }),
        message: Some(format!(
            "verdict {:?}, L_hat {}, slope {}",
            profile.verdict, profile.l_hat, profile.slope
        )),
    })
}

fn write_ratios(path: &Path, profile: &LipschitzProfile) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["point_id", "delta", "ratio"])?;
    for (i, row) in profile.ratios.iter().enumerate() {
        for (d, r) in profile.delta_grid.iter().zip(row) {
            w.write_record([i.to_string(), d.to_string(), r.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub const TRAJECTORY_FILE: &str = "trajectory.csv";

fn cmd_simulate(config: &RunConfig, scenario: &Scenario, out: &Path) -> Result<Outcome, Failure> {
    let domain = build_domain(scenario)?;
    let field = scenario.build_field()?;
    let s = &config.simulate;
    let x0 = s.x0.clone().unwrap_or_else(|| scenario.x0.clone());
    let sim = SimulationConfig {
        t0: s.t0.unwrap_or(scenario.t0),
        t_end: s.t_end.unwrap_or(scenario.t_end),
        dt: s.dt.unwrap_or(scenario.dt),
        step: StepOptions {
            scheme: s.scheme.unwrap_or(scenario.scheme),
            projection: config.projection.clone(),
        },
    };
    let (traj, failure) = match simulate(&domain, &field, &x0, &sim) {
        Ok(t) => (t, None),
        Err(f) => (*f.partial, Some(f.source)),
    };
    let file = fs::File::create(out.join(TRAJECTORY_FILE))?;
    traj.write_csv(std::io::BufWriter::new(file))?;
    let transitions: Vec<serde_json::Value> = traj
        .transitions()
        .iter()
        .map(|&(k, from, to)| serde_json::json!({ "t": traj.times[k], "from": from + 1, "to": to + 1 }))
        .collect();
    let mut summary = serde_json::json!({
        "nodes": traj.len(),
        "max_feas_residual": traj.max_feas_residual(),
        "max_speed": traj.max_speed(),
        "transitions": transitions,
    });
    let (code, message) = match failure {
        None => (EXIT_OK, None),
        Some(e) => {
            let hint = match &e {
                Error::Infeasible { .. } => "x0 must lie in X(t0)",
                _ => "run certify near this state; a DIVERGENT verdict means no solution continues from it",
            };
            summary["error"] = serde_json::Value::String(e.to_string());
            (
                EXIT_SIMULATION_ABORTED,
                Some(format!("simulation aborted: {e}\nhint: {hint}")),
            )
        }
    };
    Ok(Outcome {
        code,
        outputs: vec![TRAJECTORY_FILE.into()],
        summary,
        message,
    })
}

pub const ORACLE_FILE: &str = "oracle.csv";

/// One random instance of the oracle comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub instance_id: usize,
    pub dim: usize,
    pub solver_distance: f64,
    pub oracle_distance: f64,
    /// `oracle_distance − solver_distance`; negative only if the solver missed the minimum.
    pub gap: f64,
    /// Distance between the two returned points.
    pub point_gap: f64,
}

/// Random polyhedra projected by the solver and by the refined grid search.
pub fn oracle_comparison(
    seed: u64,
    instances: usize,
    dims: &[usize],
    resolution: f64,
) -> Result<Vec<OracleRow>, Error> {
    if dims.is_empty() {
        return Err(Error::InvalidArgument("no dimensions given".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases: Vec<_> = (0..instances)
        .map(|i| {
            let dim = dims[i % dims.len()];
            (i, dim, random_polyhedron_instance(&mut rng, dim))
        })
        .collect();
    use rayon::prelude::*;
    cases
        .into_par_iter()
        .map(|(instance_id, dim, (poly, f))| {
            let solver = project_polyhedron(&f, &poly)?;
            // the center of the instance is feasible, so the projection is no farther than 2√n
            let bounds = GridBox::centered(&f, 2.0 * (dim as f64).sqrt() + 0.5);
            let tol = 1e-12;
            let oracle =
                refined_grid_argmin(&f, &bounds, resolution, 64, |v| poly.contains(v, tol))?;
            let oracle_distance = linalg::dist(&oracle, &f);
            Ok(OracleRow {
                instance_id,
                dim,
                solver_distance: solver.distance,
                oracle_distance,
                gap: oracle_distance - solver.distance,
                point_gap: linalg::dist(&oracle, &solver.vector),
            })
        })
        .collect()
}

fn cmd_oracle_compare(config: &RunConfig, out: &Path) -> Result<Outcome, Failure> {
    let o = &config.oracle;
    let rows = oracle_comparison(config.seed, o.instances, &o.dims, o.resolution)?;
    let mut w = csv::Writer::from_path(out.join(ORACLE_FILE))?;
    w.write_record(["instance_id", "solver_distance", "oracle_distance", "gap"])?;
    for r in &rows {
        w.write_record([
            r.instance_id.to_string(),
            r.solver_distance.to_string(),
            r.oracle_distance.to_string(),
            r.gap.to_string(),
        ])?;
    }
    w.flush()?;
    let max_gap = rows.iter().map(|r| r.gap.abs()).fold(0.0, f64::max);
    Ok(Outcome {
        code: EXIT_OK,
        outputs: vec![ORACLE_FILE.into()],
        summary: serde_json::json!({ "instances": rows.len(), "max_gap": max_gap }),
        message: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let cli = Cli::try_parse_from([
            "pdsflow",
            "simulate",
            "--scenario",
            "wedge",
            "--dt",
            "0.01",
            "--x0=-1,0",
        ])
        .unwrap();
        let mut c = RunConfig {
            simulate: SimulateConfig {
                dt: Some(0.1),
                ..Default::default()
            },
            ..Default::default()
        };
        c.apply(&cli.common, &cli.command);
        assert_eq!(c.simulate.dt, Some(0.01));
        assert_eq!(c.simulate.x0, Some(vec![-1.0, 0.0]));
        assert_eq!(c.scenario.as_deref(), Some("wedge"));
    }

    #[test]
    fn scheme_flag_parses() {
        assert_eq!(parse_scheme("tangent-euler"), Ok(Scheme::TangentEuler));
        assert!(parse_scheme("rk4").is_err());
    }

    #[test]
    fn inline_domain_without_name() {
        let c = RunConfig {
            domain: Some(crate::scenarios::half_line_spec()),
            ..Default::default()
        };
        let s = c.resolve_scenario().unwrap();
        assert_eq!(s.name, "custom");
        assert_eq!(s.x0, vec![0.0]);
        assert!(RunConfig::default().resolve_scenario().is_err());
    }

    #[test]
    fn two_bus_params_apply() {
        let p = TwoBusParams {
            q_max: 0.2,
            ..Default::default()
        };
        let c = RunConfig {
            scenario: Some("two-bus".into()),
            two_bus: Some(p.clone()),
            ..Default::default()
        };
        assert_eq!(c.resolve_scenario().unwrap(), Scenario::two_bus(&p));
        let bad = RunConfig {
            scenario: Some("wedge".into()),
            two_bus: Some(p),
            ..Default::default()
        };
        assert!(bad.resolve_scenario().is_err());
    }

    #[test]
    fn config_errors_name_the_field() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(
            &path,
            "{\n  \"certify\": {\n    \"samples\": \"many\"\n  }\n}",
        )
        .unwrap();
        let msg = load_config(&path).unwrap_err();
        assert!(msg.contains("certify.samples"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn oracle_rows_are_deterministic() {
        let a = oracle_comparison(7, 4, &[2], 1e-2).unwrap();
        let b = oracle_comparison(7, 4, &[2], 1e-2).unwrap();
        assert_eq!(a, b);
    }
}
