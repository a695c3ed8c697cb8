//! Scenario files: the single JSON document that describes a run
//! (geometry, diagrams, demands, incidents, controller, numerics).
//!
//! Parsing is strict. Unknown keys are rejected, every value is validated,
//! and all semantic violations are reported together with their field
//! paths. Segment references in the file are 1-based, matching the usual
//! S1..S7 naming of the segments; they are converted when the network is
//! built.

use crate::control::ControllerConfig;
use crate::diagram::{DiagramError, FundamentalDiagram};
use crate::net::{Network, Ramp, Segment, VehicleGeometry};
use crate::simulation::{DemandProfile, Incident};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const DEFAULT_DT_S: f64 = 1.0;
pub const DEFAULT_VEH_SIZE_KM: f64 = 0.0055;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioIssue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ScenarioIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario syntax: {0}")]
    Syntax(String),
    #[error("invalid scenario:\n{}", .issues.iter().map(|i| format!("  - {i}")).collect::<Vec<_>>().join("\n"))]
    Invalid { issues: Vec<ScenarioIssue> },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error("diagram table \"{0}\" has not been resolved; load the scenario through parse_scenario")]
    Unresolved(String),
}

/// Speed-law specification as written in a scenario file. The `csv` form
/// references an external `To_percent,speed_kmh` table and is inlined into
/// a tabulated diagram while the scenario loads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiagramSpec {
    Greenshield { v_f: f64, rho_m: f64 },
    May { v_f: f64, a: f64, rho_c: f64 },
    Tabulated { knots: Vec<(f64, f64)> },
    Csv { path: String },
}

impl DiagramSpec {
    pub fn to_diagram(&self) -> Result<FundamentalDiagram, ScenarioError> {
        match self {
            DiagramSpec::Greenshield { v_f, rho_m } => Ok(FundamentalDiagram::Greenshield {
                v_f: *v_f,
                rho_m: *rho_m,
            }),
            DiagramSpec::May { v_f, a, rho_c } => Ok(FundamentalDiagram::May {
                v_f: *v_f,
                a: *a,
                rho_c: *rho_c,
            }),
            DiagramSpec::Tabulated { knots } => Ok(FundamentalDiagram::Tabulated {
                knots: knots.clone(),
            }),
            DiagramSpec::Csv { path } => Err(ScenarioError::Unresolved(path.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub length_km: f64,
    pub lanes: u32,
    pub diagram: DiagramSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RampSpec {
    /// Segment the ramp merges into, 1-based.
    pub merge_segment: usize,
    #[serde(default = "default_sat_rate")]
    pub sat_rate_vpm: f64,
    #[serde(default = "default_gd_min")]
    pub gd_min_s: f64,
    #[serde(default = "default_gd_max")]
    pub gd_max_s: f64,
    #[serde(default = "default_cycle")]
    pub cycle_s: f64,
    #[serde(default = "default_queue_override")]
    pub queue_override_m: f64,
    /// Piecewise-linear arrival demand, `(t_s, Veh/min)` points.
    #[serde(default)]
    pub demand_vpm: Vec<(f64, f64)>,
}

fn default_sat_rate() -> f64 {
    30.0
}
fn default_gd_min() -> f64 {
    15.0
}
fn default_gd_max() -> f64 {
    29.0
}
fn default_cycle() -> f64 {
    40.0
}
fn default_queue_override() -> f64 {
    200.0
}
fn default_dt() -> f64 {
    DEFAULT_DT_S
}
fn default_veh_size() -> f64 {
    DEFAULT_VEH_SIZE_KM
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncidentSpec {
    /// Affected segment, 1-based.
    pub segment: usize,
    /// Lanes remaining open while the incident is active.
    pub lanes: u32,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub horizon_s: f64,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_veh_size")]
    pub vehicle_size_km: f64,
    pub segments: Vec<SegmentSpec>,
    #[serde(default)]
    pub ramps: Vec<RampSpec>,
    /// Mainline inlet demand, `(t_s, Veh/min)` points.
    #[serde(default)]
    pub mainline_inflow_vpm: Vec<(f64, f64)>,
    /// Optional cap on the downstream boundary discharge, Veh/min.
    #[serde(default)]
    pub exit_capacity_vpm: Option<f64>,
    #[serde(default)]
    pub incidents: Vec<IncidentSpec>,
    #[serde(default)]
    pub controller: ControllerConfig,
    /// Default output directory for run artifacts.
    #[serde(default)]
    pub output_dir: Option<String>,
}

impl Scenario {
    /// Builds the static network, converting 1-based segment references.
    pub fn network(&self) -> Result<Network, ScenarioError> {
        let mut segments = Vec::with_capacity(self.segments.len());
        for spec in &self.segments {
            segments.push(Segment {
                length_km: spec.length_km,
                lanes: spec.lanes,
                diagram: spec.diagram.to_diagram()?,
            });
        }
        let mut ramps = Vec::with_capacity(self.ramps.len());
        for (j, spec) in self.ramps.iter().enumerate() {
            if spec.merge_segment == 0 {
                return Err(ScenarioError::Invalid {
                    issues: vec![ScenarioIssue {
                        path: format!("ramps[{j}].merge_segment"),
                        message: "segment references are 1-based; 0 is not a segment".into(),
                    }],
                });
            }
            ramps.push(Ramp {
                merge_segment: spec.merge_segment - 1,
                sat_rate_vpm: spec.sat_rate_vpm,
                gd_min_s: spec.gd_min_s,
                gd_max_s: spec.gd_max_s,
                cycle_s: spec.cycle_s,
                queue_override_m: spec.queue_override_m,
            });
        }
        Ok(Network {
            segments,
            ramps,
            vehicle: VehicleGeometry {
                veh_size_km: self.vehicle_size_km,
            },
        })
    }

    /// Incidents with 0-based segment indices for the engine.
    pub fn incidents_zero_based(&self) -> Result<Vec<Incident>, ScenarioError> {
        let mut out = Vec::with_capacity(self.incidents.len());
        for (i, inc) in self.incidents.iter().enumerate() {
            if inc.segment == 0 {
                return Err(ScenarioError::Invalid {
                    issues: vec![ScenarioIssue {
                        path: format!("incidents[{i}].segment"),
                        message: "segment references are 1-based; 0 is not a segment".into(),
                    }],
                });
            }
            out.push(Incident {
                segment: inc.segment - 1,
                lanes: inc.lanes,
                start_s: inc.start_s,
                end_s: inc.end_s,
            });
        }
        Ok(out)
    }

    /// Replaces every `csv` diagram reference by its inlined table, read
    /// relative to `base_dir`.
    pub fn resolve_diagrams(&mut self, base_dir: &Path) -> Result<(), ScenarioError> {
        for spec in &mut self.segments {
            if let DiagramSpec::Csv { path } = &spec.diagram {
                let full = if Path::new(path).is_absolute() {
                    PathBuf::from(path)
                } else {
                    base_dir.join(path)
                };
                let diagram = FundamentalDiagram::from_csv_path(&full)?;
                let FundamentalDiagram::Tabulated { knots } = diagram else {
                    unreachable!("csv tables load as tabulated diagrams");
                };
                spec.diagram = DiagramSpec::Tabulated { knots };
            }
        }
        Ok(())
    }

    /// Collects every semantic violation; `Ok` means runnable.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut issues = Vec::new();
        let mut push = |path: String, message: String| issues.push(ScenarioIssue { path, message });

        if self.name.trim().is_empty() {
            push("name".into(), "must not be empty".into());
        }
        if !(self.horizon_s >= 0.0) || !self.horizon_s.is_finite() {
            push(
                "horizon_s".into(),
                format!("must be finite and nonnegative, got {}", self.horizon_s),
            );
        }
        if !(self.dt_s > 0.0) || !self.dt_s.is_finite() {
            push("dt_s".into(), format!("must be positive, got {}", self.dt_s));
        }
        if !(self.vehicle_size_km > 0.0) {
            push(
                "vehicle_size_km".into(),
                format!("must be positive, got {}", self.vehicle_size_km),
            );
        }
        if let Some(cap) = self.exit_capacity_vpm {
            if !(cap > 0.0) {
                push(
                    "exit_capacity_vpm".into(),
                    format!("must be positive when present, got {cap}"),
                );
            }
        }
        if self.segments.is_empty() {
            push("segments".into(), "network needs at least one segment".into());
        }
        for (i, seg) in self.segments.iter().enumerate() {
            if !(seg.length_km > 0.0) {
                push(
                    format!("segments[{i}].length_km"),
                    format!("must be positive, got {}", seg.length_km),
                );
            }
            if seg.lanes == 0 {
                push(format!("segments[{i}].lanes"), "must be positive".into());
            }
            match seg.diagram.to_diagram() {
                Ok(d) => {
                    if let Err(e) = d.validate() {
                        push(format!("segments[{i}].diagram"), e.to_string());
                    }
                }
                Err(e) => push(format!("segments[{i}].diagram"), e.to_string()),
            }
        }
        for (j, ramp) in self.ramps.iter().enumerate() {
            if ramp.merge_segment == 0 || ramp.merge_segment > self.segments.len() {
                push(
                    format!("ramps[{j}].merge_segment"),
                    format!(
                        "must reference a segment in 1..={}, got {}",
                        self.segments.len(),
                        ramp.merge_segment
                    ),
                );
            }
            for (earlier, other) in self.ramps[..j].iter().enumerate() {
                if other.merge_segment == ramp.merge_segment {
                    push(
                        format!("ramps[{j}].merge_segment"),
                        format!("ramp {earlier} already merges into segment {}", ramp.merge_segment),
                    );
                }
            }
            if !(ramp.sat_rate_vpm > 0.0) {
                push(
                    format!("ramps[{j}].sat_rate_vpm"),
                    format!("must be positive, got {}", ramp.sat_rate_vpm),
                );
            }
            if !(ramp.cycle_s > 0.0) {
                push(
                    format!("ramps[{j}].cycle_s"),
                    format!("must be positive, got {}", ramp.cycle_s),
                );
            } else {
                if !(ramp.gd_min_s > 0.0
                    && ramp.gd_min_s <= ramp.gd_max_s
                    && ramp.gd_max_s <= ramp.cycle_s)
                {
                    push(
                        format!("ramps[{j}].gd_min_s"),
                        format!(
                            "green band must satisfy 0 < gd_min <= gd_max <= cycle, got [{}, {}] with cycle {}",
                            ramp.gd_min_s, ramp.gd_max_s, ramp.cycle_s
                        ),
                    );
                }
                if self.dt_s > 0.0 {
                    let ratio = ramp.cycle_s / self.dt_s;
                    if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
                        push(
                            format!("ramps[{j}].cycle_s"),
                            format!(
                                "cycle {} s must be a whole number of dt = {} s steps",
                                ramp.cycle_s, self.dt_s
                            ),
                        );
                    }
                }
            }
            if !(ramp.queue_override_m > 0.0) {
                push(
                    format!("ramps[{j}].queue_override_m"),
                    format!("must be positive, got {}", ramp.queue_override_m),
                );
            }
            if let Err(e) = DemandProfile::new(ramp.demand_vpm.clone()) {
                push(format!("ramps[{j}].demand_vpm"), e.to_string());
            }
        }
        if let Err(e) = DemandProfile::new(self.mainline_inflow_vpm.clone()) {
            push("mainline_inflow_vpm".into(), e.to_string());
        }
        for (i, inc) in self.incidents.iter().enumerate() {
            if inc.segment == 0 || inc.segment > self.segments.len() {
                push(
                    format!("incidents[{i}].segment"),
                    format!(
                        "must reference a segment in 1..={}, got {}",
                        self.segments.len(),
                        inc.segment
                    ),
                );
            } else {
                let nominal = self.segments[inc.segment - 1].lanes;
                if inc.lanes == 0 || inc.lanes > nominal {
                    push(
                        format!("incidents[{i}].lanes"),
                        format!("must be in 1..={nominal} (nominal lanes), got {}", inc.lanes),
                    );
                }
            }
            if !(inc.start_s >= 0.0 && inc.start_s < inc.end_s) {
                push(
                    format!("incidents[{i}].start_s"),
                    format!(
                        "window must satisfy 0 <= start < end, got [{}, {}]",
                        inc.start_s, inc.end_s
                    ),
                );
            }
        }
        if let Err(e) = self.controller.validate() {
            push("controller".into(), e.to_string());
        }

        if issues.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid { issues })
        }
    }

    pub fn to_json_pretty(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("scenario serializes");
        text.push('\n');
        text
    }

    /// Same scenario with a different controller kind; used by comparisons.
    pub fn with_controller_kind(&self, kind: crate::control::ControllerKind) -> Scenario {
        let mut s = self.clone();
        s.controller.kind = kind;
        s
    }
}

/// Parses, resolves external diagram tables against `base_dir`, and
/// validates. The returned scenario is runnable as-is.
pub fn parse_scenario(text: &str, base_dir: &Path) -> Result<Scenario, ScenarioError> {
    let mut scenario: Scenario =
        serde_json::from_str(text).map_err(|e| ScenarioError::Syntax(e.to_string()))?;
    scenario.resolve_diagrams(base_dir)?;
    scenario.validate()?;
    Ok(scenario)
}

/// Loads a scenario from disk; relative diagram tables resolve against the
/// file's directory.
pub fn parse_scenario_file(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_scenario(&text, base)
}
