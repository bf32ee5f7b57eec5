//! Config-driven runs, parameter sweeps and re-analysis of result
//! directories.
//!
//! A run directory holds `config.json` (canonical config), `graph.json` or
//! `grid.json`, `state.csv` or `field.csv` (final state), `result.json` (the
//! full trajectory), `report.json` and, unless disabled, an SVG drawing.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::{analyze, AnalysisReport};
use crate::config::{ContinuumSetup, Model, NetworkSetup, RunConfig};
use crate::continuum::{net_production, run_continuum, ContinuumTrajectory};
use crate::dynamics::MitchisonState;
use crate::error::{Error, Result};
use crate::grid::Graph;
use crate::io::{field_to_csv, read_json, states_to_csv, write_json};
use crate::render::{render_field_svg, render_svg};
use crate::solver::{simulate_hu_cai, simulate_mitchison, simulate_primary, SimulationResult};

/// Environment variable naming the directory that run outputs go under.
pub const OUTPUT_ROOT_VAR: &str = "VENATION_OUTPUT_ROOT";

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("results"))
}

/// Process exit status for an error: 2 for bad input, 3 for failures while
/// running.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::InvalidParameter(_)
        | Error::InvalidGeometry(_)
        | Error::DimensionMismatch { .. }
        | Error::ConservationViolation { .. } => 2,
        _ => 3,
    }
}

/// Checks on a continuum trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuumReport {
    pub steady: bool,
    pub steady_time: Option<f64>,
    pub steps: usize,
    pub shortened_steps: usize,
    pub min_x: f64,
    pub max_x: f64,
    pub max_a: f64,
    /// Largest `min(X0) e^{-tau t} - 1e-6 t - min X(t)` over the run;
    /// positive values break the lower barrier.
    pub barrier_excess: f64,
    /// `sum area (S - I a)` in the final state.
    pub net_production: f64,
    pub warnings: Vec<String>,
    pub invariant_violations: Vec<String>,
}

pub fn continuum_report(setup: &ContinuumSetup, traj: &ContinuumTrajectory) -> ContinuumReport {
    let p = &setup.params;
    let x0 = setup.field.min_x();
    let barrier_excess = traj
        .min_x
        .iter()
        .map(|&(t, m)| x0 * (-p.tau * t).exp() - 1e-6 * t - m)
        .fold(f64::NEG_INFINITY, f64::max);
    let last = traj.last();
    let mut violations = Vec::new();
    if barrier_excess > 0.0 {
        violations.push(format!("transport tensor fell below its lower barrier by {barrier_excess:.3e}"));
    }
    if last.a.iter().any(|&v| v < -1e-10) {
        violations.push("negative auxin density".into());
    }
    ContinuumReport {
        steady: traj.steady,
        steady_time: traj.steady_time,
        steps: traj.steps,
        shortened_steps: traj.shortened_steps,
        min_x: last.min_x(),
        max_x: last.max_x(),
        max_a: last.a.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        barrier_excess,
        net_production: net_production(&last.grid, p, &last.a),
        warnings: traj.warnings.clone(),
        invariant_violations: violations,
    }
}

pub enum Outcome {
    Network {
        setup: NetworkSetup,
        result: SimulationResult,
        report: AnalysisReport,
    },
    Continuum {
        setup: ContinuumSetup,
        trajectory: ContinuumTrajectory,
        report: ContinuumReport,
    },
}

impl Outcome {
    pub fn violations(&self) -> &[String] {
        match self {
            Outcome::Network { report, .. } => &report.invariant_violations,
            Outcome::Continuum { report, .. } => &report.invariant_violations,
        }
    }

    pub fn steady(&self) -> bool {
        match self {
            Outcome::Network { result, .. } => result.steady,
            Outcome::Continuum { trajectory, .. } => trajectory.steady,
        }
    }
}

fn integrate(cfg: &RunConfig, setup: &NetworkSetup) -> Result<SimulationResult> {
    let (g, p, init) = (&setup.graph, &setup.params, &setup.init);
    match cfg.model {
        Model::Primary => simulate_primary(g, p, init, &cfg.integrator, &cfg.run),
        Model::HuCai => simulate_hu_cai(g, p, &init.x, &cfg.integrator),
        Model::Mitchison => {
            let st = MitchisonState {
                s: init.a.clone(),
                d: init.x.clone(),
            };
            simulate_mitchison(g, p, &st, &cfg.integrator)
        }
        Model::Continuum => unreachable!("handled by execute"),
    }
}

/// Builds, integrates and analyzes the configured run without touching the
/// file system.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    if cfg.model == Model::Continuum {
        let setup = cfg.continuum_setup()?;
        let trajectory = run_continuum(&setup.field, &setup.params, &cfg.continuum)?;
        let report = continuum_report(&setup, &trajectory);
        return Ok(Outcome::Continuum {
            setup,
            trajectory,
            report,
        });
    }
    let setup = cfg.network_setup()?;
    let result = integrate(cfg, &setup)?;
    let report = analyze(&setup.graph, &setup.params, &result, &cfg.analysis)?;
    Ok(Outcome::Network { setup, result, report })
}

fn put_json<T: Serialize>(dir: &Path, name: &str, value: &T, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    write_json(&path, value)?;
    written.push(path);
    Ok(())
}

fn write_text(dir: &Path, name: &str, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text)?;
    written.push(path);
    Ok(())
}

/// Writes every artifact of `outcome` into `dir` and returns the paths.
pub fn write_artifacts(cfg: &RunConfig, outcome: &Outcome, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    write_text(dir, "config.json", &(cfg.to_json()? + "\n"), &mut written)?;
    match outcome {
        Outcome::Network { setup, result, report } => {
            put_json(dir, "graph.json", &setup.graph.to_document(), &mut written)?;
            write_text(dir, "result.json", &serde_json::to_string(result)?, &mut written)?;
            put_json(dir, "report.json", report, &mut written)?;
            write_text(dir, "state.csv", &states_to_csv([result.final_state()])?, &mut written)?;
            if cfg.outputs.trajectory {
                write_text(dir, "trajectory.csv", &states_to_csv(&result.snapshots)?, &mut written)?;
            }
            if !cfg.outputs.no_svg {
                let svg = render_svg(&setup.graph, result.final_state(), &cfg.outputs.render)?;
                write_text(dir, "network.svg", &svg, &mut written)?;
            }
        }
        Outcome::Continuum {
            trajectory, report, ..
        } => {
            put_json(dir, "grid.json", &trajectory.last().grid, &mut written)?;
            write_text(dir, "result.json", &serde_json::to_string(trajectory)?, &mut written)?;
            put_json(dir, "report.json", report, &mut written)?;
            write_text(dir, "field.csv", &field_to_csv(trajectory.last())?, &mut written)?;
            if !cfg.outputs.no_svg {
                let svg = render_field_svg(trajectory.last(), &cfg.outputs.render)?;
                write_text(dir, "field.svg", &svg, &mut written)?;
            }
        }
    }
    Ok(written)
}

/// Short description of a finished run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub dir: PathBuf,
    pub steady: bool,
    pub invariant_violations: Vec<String>,
}

/// Executes `cfg` and writes its artifacts below `root`.
pub fn run(cfg: &RunConfig, root: &Path) -> Result<RunSummary> {
    let dir = root.join(cfg.output_dir());
    info!("running {} ({:?}) into {}", cfg.name, cfg.model, dir.display());
    let outcome = execute(cfg)?;
    write_artifacts(cfg, &outcome, &dir)?;
    Ok(RunSummary {
        name: cfg.name.clone(),
        dir,
        steady: outcome.steady(),
        invariant_violations: outcome.violations().to_vec(),
    })
}

/// Reports produced by [`check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CheckReport {
    Network(AnalysisReport),
    Continuum(ContinuumReport),
}

impl CheckReport {
    pub fn violations(&self) -> &[String] {
        match self {
            CheckReport::Network(r) => &r.invariant_violations,
            CheckReport::Continuum(r) => &r.invariant_violations,
        }
    }
}

/// Re-runs the analysis on a result directory written by [`run`] and
/// stores the fresh report as `check.json`.
pub fn check(dir: &Path) -> Result<CheckReport> {
    let cfg = RunConfig::load(&dir.join("config.json"))?;
    let report = if cfg.model == Model::Continuum {
        let setup = cfg.continuum_setup()?;
        let traj: ContinuumTrajectory = read_json(&dir.join("result.json"))?;
        CheckReport::Continuum(continuum_report(&setup, &traj))
    } else {
        let setup = cfg.network_setup()?;
        let stored = Graph::from_document(&read_json(&dir.join("graph.json"))?)?;
        if stored != setup.graph {
            return Err(Error::Config(format!(
                "{}: graph.json does not match the configured grid",
                dir.display()
            )));
        }
        let result: SimulationResult = read_json(&dir.join("result.json"))?;
        CheckReport::Network(analyze(&setup.graph, &setup.params, &result, &cfg.analysis)?)
    };
    write_json(&dir.join("check.json"), &report)?;
    Ok(report)
}

/// One swept parameter: a dotted path into the config (array entries by
/// index, e.g. `sources.0.strength`) and its values.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<f64>,
}

impl Axis {
    /// Parses `key=v1,v2,...`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (key, vals) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("axis {spec:?} is not of the form key=v1,v2,...")))?;
        let values = vals
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::Config(format!("axis {key}: bad value {v:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if key.is_empty() || values.is_empty() {
            return Err(Error::Config(format!("axis {spec:?} is empty")));
        }
        Ok(Self {
            key: key.trim().to_string(),
            values,
        })
    }
}

/// Copy of `cfg` with the value at the dotted path `key` replaced.
pub fn with_value(cfg: &RunConfig, key: &str, value: f64) -> Result<RunConfig> {
    let mut doc = serde_json::to_value(cfg)?;
    let mut node = &mut doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (depth, part) in parts.iter().enumerate() {
        let last = depth + 1 == parts.len();
        node = match node {
            Value::Array(items) => {
                let k: usize = part
                    .parse()
                    .map_err(|_| Error::Config(format!("{key}: {part:?} is not an index")))?;
                let len = items.len();
                items
                    .get_mut(k)
                    .ok_or_else(|| Error::Config(format!("{key}: index {k} out of range ({len})")))?
            }
            Value::Object(map) => {
                if !last && !map.contains_key(*part) {
                    map.insert(part.to_string(), Value::Object(Default::default()));
                }
                map.entry(part.to_string()).or_insert(Value::Null)
            }
            _ => return Err(Error::Config(format!("{key}: cannot descend into {part:?}"))),
        };
    }
    *node = serde_json::Number::from_f64(value)
        .map(Value::Number)
        .ok_or_else(|| Error::Config(format!("{key}: value {value} is not finite")))?;
    // integer fields reject 5.0, so retry with an integer when exact
    let parsed = serde_json::from_value::<RunConfig>(doc.clone()).or_else(|e| {
        if value.fract() == 0.0 && value.abs() < 9e15 {
            *node_at(&mut doc, &parts) = Value::from(value as i64);
            serde_json::from_value::<RunConfig>(doc)
        } else {
            Err(e)
        }
    });
    let out = parsed.map_err(|e| Error::Config(format!("{key} = {value}: {e}")))?;
    out.validate()?;
    Ok(out)
}

fn node_at<'a>(doc: &'a mut Value, parts: &[&str]) -> &'a mut Value {
    parts.iter().fold(doc, |n, p| match n {
        Value::Array(items) => &mut items[p.parse::<usize>().expect("checked")],
        other => &mut other[*p],
    })
}

/// One row of a sweep summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    pub status: String,
    pub steady: Option<bool>,
    pub steady_time: Option<f64>,
    pub pattern_extent: Option<usize>,
    pub murray_max_relative_residual: Option<f64>,
    pub coexistence: Option<f64>,
    pub violations: usize,
    pub error: String,
}

fn row_label(axes: &[Axis], k: usize) -> String {
    axes.iter()
        .map(|a| format!("{}={}", a.key, a.values[k]))
        .collect::<Vec<_>>()
        .join("_")
}

fn sweep_row(cfg: &RunConfig, label: String, root: &Path) -> SweepRow {
    let failed = |error: Error| SweepRow {
        label: label.clone(),
        status: "error".into(),
        steady: None,
        steady_time: None,
        pattern_extent: None,
        murray_max_relative_residual: None,
        coexistence: None,
        violations: 0,
        error: error.to_string(),
    };
    let outcome = match execute(cfg) {
        Ok(o) => o,
        Err(e) => return failed(e),
    };
    if let Err(e) = write_artifacts(cfg, &outcome, &root.join(&label)) {
        return failed(e);
    }
    let violations = outcome.violations().len();
    let status = if violations == 0 { "ok" } else { "violation" }.to_string();
    match outcome {
        Outcome::Network { report, .. } => SweepRow {
            label,
            status,
            steady: Some(report.steady),
            steady_time: report.steady_time,
            pattern_extent: Some(report.pattern_extent),
            murray_max_relative_residual: report.murray.as_ref().map(|m| m.max_relative_residual),
            coexistence: Some(report.coexistence),
            violations,
            error: String::new(),
        },
        Outcome::Continuum { report, .. } => SweepRow {
            label,
            status,
            steady: Some(report.steady),
            steady_time: report.steady_time,
            pattern_extent: None,
            murray_max_relative_residual: None,
            coexistence: None,
            violations,
            error: String::new(),
        },
    }
}

/// Runs `cfg` once per axis value (several axes are zipped and must have
/// equal length) on a bounded worker pool, writes each run below
/// `root/<dir>_sweep/` and a `summary.csv` there. Failed runs become rows
/// with `status = error`.
pub fn sweep(cfg: &RunConfig, axes: &[Axis], root: &Path) -> Result<Vec<SweepRow>> {
    let n = axes
        .first()
        .ok_or_else(|| Error::Config("sweep needs at least one axis".into()))?
        .values
        .len();
    if axes.iter().any(|a| a.values.len() != n) {
        return Err(Error::Config("zipped sweep axes must have the same number of values".into()));
    }
    let configs = (0..n)
        .map(|k| {
            let mut c = cfg.clone();
            for a in axes {
                c = with_value(&c, &a.key, a.values[k])?;
            }
            Ok((row_label(axes, k), c))
        })
        .collect::<Result<Vec<_>>>()?;
    let dir = root.join(format!("{}_sweep", cfg.output_dir()));
    fs::create_dir_all(&dir)?;
    let workers = std::thread::available_parallelism().map_or(1, |p| p.get()).min(n);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        configs
            .par_iter()
            .map(|(label, c)| sweep_row(c, label.clone(), &dir))
            .collect()
    });
    let mut w = csv::Writer::from_path(dir.join("summary.csv")).map_err(|e| Error::Config(format!("csv: {e}")))?;
    for row in &rows {
        w.serialize(row).map_err(|e| Error::Config(format!("csv: {e}")))?;
    }
    w.flush()?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_CELL: &str = r#"
name = "two_cell"
[grid]
shape = "diamond"
rows = 2
cols = 2
"#;

    #[test]
    fn axis_parsing() {
        let a = Axis::parse("params.delta=0.1, 0.5,2").unwrap();
        assert_eq!(a.key, "params.delta");
        assert_eq!(a.values, vec![0.1, 0.5, 2.0]);
        assert!(Axis::parse("params.delta").is_err());
        assert!(Axis::parse("x=1,inf").is_err());
        assert!(Axis::parse("x=").is_err());
    }

    #[test]
    fn setting_paths() {
        let text = format!(
            "{TWO_CELL}\n[[sources]]\nstrength = 1.0\nregion = {{ kind = \"vertices\", ids = [0] }}\n"
        );
        let cfg = RunConfig::from_toml(&text).unwrap();
        let c = with_value(&cfg, "params.delta", 0.5).unwrap();
        assert_eq!(c.params.delta, Some(0.5));
        let c = with_value(&cfg, "sources.0.strength", 7.0).unwrap();
        assert_eq!(c.sources[0].strength, 7.0);
        let c = with_value(&cfg, "integrator.max_order", 2.0).unwrap();
        assert_eq!(c.integrator.max_order, 2);
        assert!(with_value(&cfg, "sources.3.strength", 1.0).is_err());
        assert!(with_value(&cfg, "params.nope", 1.0).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::ConservationViolation { sum: 1.0, tol: 0.0 }), 2);
        assert_eq!(exit_code(&Error::NumericalBlowup { t: 0.0 }), 3);
    }
}
