//! Run orchestration: simulate scenarios and lay their artifacts out on
//! disk (effective scenario, CSV log, metric reports, plots), compare
//! controller kinds side by side, and sweep a single scenario parameter.
//!
//! A single simulation is strictly sequential, but distinct runs share no
//! state, so a comparison executes its runs on scoped threads and joins
//! them all before reporting.

use crate::control::ControllerKind;
use crate::log::{LogError, TrajectoryLog};
use crate::metrics::{compare_runs, Comparison, MetricsError, MetricsReport};
use crate::plot::{emit_comparison_plot, emit_run_plots, PlotError};
use crate::presets;
use crate::scenario::{parse_scenario, parse_scenario_file, Scenario, ScenarioError};
use crate::simulation::{simulate, SimulationError};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Environment variable consulted for the default artifact directory.
pub const OUT_DIR_ENV: &str = "RAMPSIM_OUT_DIR";

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad parameter path \"{path}\": {msg}")]
    BadParam { path: String, msg: String },
    #[error("comparison needs at least one controller kind")]
    NoKinds,
    #[error("controller kind \"{0}\" listed twice")]
    DuplicateKind(ControllerKind),
}

fn write_text(path: &Path, content: &str) -> Result<(), RunnerError> {
    std::fs::write(path, content).map_err(|source| RunnerError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn make_dir(path: &Path) -> Result<(), RunnerError> {
    std::fs::create_dir_all(path).map_err(|source| RunnerError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads a scenario from a file path, falling back to the bundled
/// scenarios when the argument names one of them (with or without the
/// `.json` suffix).
pub fn load_scenario(arg: &str) -> Result<Scenario, RunnerError> {
    let path = Path::new(arg);
    if path.exists() {
        return Ok(parse_scenario_file(path)?);
    }
    let stem = arg.strip_suffix(".json").unwrap_or(arg);
    if let Some(s) = presets::builtin(stem) {
        return Ok(s);
    }
    Err(RunnerError::Scenario(ScenarioError::Io {
        path: arg.to_string(),
        source: std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!(
                "no such file, and not a bundled scenario (bundled: {})",
                presets::builtin_names().join(", ")
            ),
        ),
    }))
}

/// Artifact directory precedence: explicit flag, then the scenario's
/// `output_dir`, then `RAMPSIM_OUT_DIR`, then `runs/<scenario name>`.
pub fn resolve_output_dir(explicit: Option<&Path>, scenario: &Scenario) -> PathBuf {
    if let Some(dir) = explicit {
        return dir.to_path_buf();
    }
    if let Some(dir) = &scenario.output_dir {
        return PathBuf::from(dir);
    }
    if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
        if !dir.is_empty() {
            return PathBuf::from(dir).join(&scenario.name);
        }
    }
    PathBuf::from("runs").join(&scenario.name)
}

/// Critical-occupancy threshold per segment, used for the
/// time-above-critical report column.
pub fn critical_thresholds(scenario: &Scenario) -> Result<Vec<f64>, RunnerError> {
    let net = scenario.network()?;
    Ok((0..net.segments.len())
        .map(|i| net.segments[i].diagram.critical_occupancy_pct(net.rho_max(i)))
        .collect())
}

#[derive(Debug)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub log: TrajectoryLog,
    pub report: MetricsReport,
    /// Every file written, relative to nothing (absolute or as given).
    pub files: Vec<PathBuf>,
}

/// Simulates one scenario and writes `scenario.json`, `log.csv`,
/// `metrics.txt`, `metrics.csv` and a `plots/` directory under `dir`.
pub fn run_scenario(scenario: &Scenario, dir: &Path) -> Result<RunArtifacts, RunnerError> {
    scenario.validate()?;
    make_dir(dir)?;
    let log = simulate(scenario)?;
    let thresholds = critical_thresholds(scenario)?;
    let label = scenario.controller.kind.to_string();
    let report = MetricsReport::from_log(&label, &log, &thresholds)?;

    let mut files = Vec::new();
    let scenario_path = dir.join("scenario.json");
    write_text(&scenario_path, &scenario.to_json_pretty())?;
    files.push(scenario_path);

    let log_path = dir.join("log.csv");
    write_text(&log_path, &log.to_csv_string())?;
    files.push(log_path);

    let metrics_txt = dir.join("metrics.txt");
    write_text(&metrics_txt, &report.render_text())?;
    files.push(metrics_txt);

    let metrics_csv = dir.join("metrics.csv");
    write_text(&metrics_csv, &report.render_csv())?;
    files.push(metrics_csv);

    let plots_dir = dir.join("plots");
    make_dir(&plots_dir)?;
    files.extend(emit_run_plots(&log, &plots_dir)?);

    Ok(RunArtifacts {
        dir: dir.to_path_buf(),
        log,
        report,
        files,
    })
}

#[derive(Debug)]
pub struct CompareArtifacts {
    pub dir: PathBuf,
    pub runs: Vec<RunArtifacts>,
    pub comparison: Comparison,
    pub files: Vec<PathBuf>,
}

/// Runs the scenario once per controller kind (concurrently; each run is
/// independent) and emits a comparison table and bar panel. The first
/// kind is the baseline.
pub fn compare_scenarios(
    scenario: &Scenario,
    kinds: &[ControllerKind],
    dir: &Path,
) -> Result<CompareArtifacts, RunnerError> {
    if kinds.is_empty() {
        return Err(RunnerError::NoKinds);
    }
    for (i, k) in kinds.iter().enumerate() {
        if kinds[..i].contains(k) {
            return Err(RunnerError::DuplicateKind(*k));
        }
    }
    scenario.validate()?;
    make_dir(dir)?;

    let mut slots: Vec<Option<Result<RunArtifacts, RunnerError>>> =
        (0..kinds.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for kind in kinds {
            let sub = scenario.with_controller_kind(*kind);
            let sub_dir = dir.join(kind.to_string());
            handles.push(scope.spawn(move || run_scenario(&sub, &sub_dir)));
        }
        for (slot, handle) in slots.iter_mut().zip(handles) {
            *slot = Some(handle.join().expect("run thread must not panic"));
        }
    });
    let mut runs = Vec::with_capacity(kinds.len());
    for slot in slots {
        runs.push(slot.expect("every run was joined")?);
    }

    let reports: Vec<MetricsReport> = runs.iter().map(|r| r.report.clone()).collect();
    let comparison = compare_runs(&reports)?;

    let mut files = Vec::new();
    let txt = dir.join("comparison.txt");
    write_text(&txt, &comparison.render_text())?;
    files.push(txt);
    let csv = dir.join("comparison.csv");
    write_text(&csv, &comparison.render_csv())?;
    files.push(csv);
    files.push(emit_comparison_plot(&comparison, dir)?);

    Ok(CompareArtifacts {
        dir: dir.to_path_buf(),
        runs,
        comparison,
        files,
    })
}

/// Sets a dotted path (`controller.alpha`, `ramps.0.sat_rate_vpm`) inside
/// a scenario's JSON form. Integral values are written as JSON integers
/// so integer-typed fields accept them.
fn set_scenario_value(
    scenario: &Scenario,
    path: &str,
    value: f64,
) -> Result<Scenario, RunnerError> {
    let bad = |msg: String| RunnerError::BadParam {
        path: path.to_string(),
        msg,
    };
    let mut root: serde_json::Value =
        serde_json::to_value(scenario).expect("scenario serializes");
    let tokens: Vec<&str> = path.split('.').collect();
    if tokens.iter().any(|t| t.is_empty()) {
        return Err(bad("empty path component".into()));
    }
    let mut node = &mut root;
    for token in &tokens {
        node = match node {
            serde_json::Value::Object(map) => map
                .get_mut(*token)
                .ok_or_else(|| bad(format!("no field \"{token}\"")))?,
            serde_json::Value::Array(items) => {
                let idx: usize = token
                    .parse()
                    .map_err(|_| bad(format!("\"{token}\" is not an array index")))?;
                let len = items.len();
                items
                    .get_mut(idx)
                    .ok_or_else(|| bad(format!("index {idx} out of range (len {len})")))?
            }
            _ => return Err(bad(format!("\"{token}\" does not address into a scalar"))),
        };
    }
    let number = if value.fract() == 0.0 && value.abs() < 9.0e15 {
        serde_json::Number::from(value as i64)
    } else {
        serde_json::Number::from_f64(value)
            .ok_or_else(|| bad(format!("{value} is not a representable number")))?
    };
    *node = serde_json::Value::Number(number);
    let text = serde_json::to_string(&root).expect("patched scenario serializes");
    // Reparse through the strict schema so a sweep cannot smuggle in an
    // invalid configuration.
    Ok(parse_scenario(&text, Path::new("."))?)
}

#[derive(Debug)]
pub struct SweepArtifacts {
    pub dir: PathBuf,
    pub runs: Vec<RunArtifacts>,
    pub files: Vec<PathBuf>,
}

/// One full run per value of the swept parameter; `sweep.csv` collects
/// the headline metrics per value.
pub fn sweep_scenario(
    scenario: &Scenario,
    param: &str,
    values: &[f64],
    dir: &Path,
) -> Result<SweepArtifacts, RunnerError> {
    if values.is_empty() {
        return Err(RunnerError::BadParam {
            path: param.to_string(),
            msg: "no values to sweep".into(),
        });
    }
    make_dir(dir)?;
    let mut runs = Vec::with_capacity(values.len());
    let mut sweep_csv = String::from("value,tts_veh_h,ttd_veh_km,ms_kmh,max_queue_m\n");
    for (k, &v) in values.iter().enumerate() {
        let sub = set_scenario_value(scenario, param, v)?;
        let sub_dir = dir.join(format!("value-{k}"));
        let run = run_scenario(&sub, &sub_dir)?;
        let max_queue = run
            .report
            .ramp_queue_max_m
            .iter()
            .copied()
            .fold(0.0_f64, f64::max);
        sweep_csv.push_str(&format!(
            "{},{},{},{},{}\n",
            v, run.report.tts_veh_h, run.report.ttd_veh_km, run.report.ms_kmh, max_queue
        ));
        runs.push(run);
    }
    let csv_path = dir.join("sweep.csv");
    write_text(&csv_path, &sweep_csv)?;
    Ok(SweepArtifacts {
        dir: dir.to_path_buf(),
        runs,
        files: vec![csv_path],
    })
}
