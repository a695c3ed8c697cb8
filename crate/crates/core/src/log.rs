//! Per-step trajectory records and their CSV serialization.
//!
//! The CSV schema is fixed: `t_s, entity_kind, entity_id, Q_vpm, To_pct,
//! V_kmh, GD_s, queue_m, admitted_vpm, demand_vpm`, one row per segment,
//! ramp, and boundary endpoint per step. Records describe the state at the
//! start of the step plus the flows realized during it. Floats are written
//! with the shortest representation that parses back to the same value, so
//! identical runs serialize to identical bytes.

use std::io::{BufRead, Write};
use thiserror::Error;

pub const CSV_HEADER: &str = "t_s,entity_kind,entity_id,Q_vpm,To_pct,V_kmh,GD_s,queue_m,admitted_vpm,demand_vpm";

#[derive(Debug, Error)]
pub enum LogError {
    #[error("log I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("log line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("log does not match scenario: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentSample {
    /// Aggregate density at the start of the step, Veh/km.
    pub rho_vpkm: f64,
    /// Flow leaving the segment during the step, Veh/min.
    pub q_out_vpm: f64,
    pub to_pct: f64,
    pub v_kmh: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampSample {
    /// Green duration in force during the step, s.
    pub gd_s: f64,
    /// Queue length at the start of the step, m.
    pub queue_m: f64,
    /// Flow admitted onto the mainline during the step, Veh/min.
    pub admitted_vpm: f64,
    /// Demand arriving at the ramp during the step, Veh/min.
    pub demand_vpm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundarySample {
    pub inflow_demand_vpm: f64,
    pub inflow_accepted_vpm: f64,
    pub outflow_vpm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t_s: f64,
    pub segments: Vec<SegmentSample>,
    pub ramps: Vec<RampSample>,
    pub boundary: BoundarySample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub dt_s: f64,
    pub veh_size_km: f64,
    pub segment_lengths_km: Vec<f64>,
    pub steps: Vec<StepRecord>,
}

impl TrajectoryLog {
    pub fn n_segments(&self) -> usize {
        self.segment_lengths_km.len()
    }

    pub fn n_ramps(&self) -> usize {
        self.steps.first().map_or(0, |s| s.ramps.len())
    }

    pub fn horizon_s(&self) -> f64 {
        self.steps.len() as f64 * self.dt_s
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), LogError> {
        writeln!(out, "{CSV_HEADER}")?;
        for step in &self.steps {
            let t = step.t_s;
            for (i, seg) in step.segments.iter().enumerate() {
                writeln!(
                    out,
                    "{t},segment,{id},{q},{to},{v},,,,",
                    id = i + 1,
                    q = seg.q_out_vpm,
                    to = seg.to_pct,
                    v = seg.v_kmh
                )?;
            }
            for (j, ramp) in step.ramps.iter().enumerate() {
                writeln!(
                    out,
                    "{t},ramp,{id},,,,{gd},{queue},{adm},{dem}",
                    id = j + 1,
                    gd = ramp.gd_s,
                    queue = ramp.queue_m,
                    adm = ramp.admitted_vpm,
                    dem = ramp.demand_vpm
                )?;
            }
            writeln!(
                out,
                "{t},boundary,in,{q},,,,,,{dem}",
                q = step.boundary.inflow_accepted_vpm,
                dem = step.boundary.inflow_demand_vpm
            )?;
            writeln!(out, "{t},boundary,out,{q},,,,,,", q = step.boundary.outflow_vpm)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write cannot fail");
        String::from_utf8(buf).expect("csv output is ascii")
    }

    /// Reads a log back from its CSV form. Densities are reconstructed from
    /// occupancy, which needs the effective lane counts, so the scenario
    /// that produced the log must be supplied.
    pub fn read_csv<R: BufRead>(
        reader: R,
        scenario: &crate::scenario::Scenario,
    ) -> Result<Self, LogError> {
        let nominal_lanes: Vec<u32> = scenario.segments.iter().map(|s| s.lanes).collect();
        let segment_lengths_km: Vec<f64> = scenario.segments.iter().map(|s| s.length_km).collect();
        let incidents = scenario
            .incidents_zero_based()
            .map_err(|e| LogError::Mismatch(e.to_string()))?;
        let n_seg = nominal_lanes.len();
        let n_ramp = scenario.ramps.len();
        let veh_size_km = scenario.vehicle_size_km;

        let mut lines = reader.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| LogError::Parse { line: 1, msg: "empty file".into() })?;
        let header = header?;
        if header.trim() != CSV_HEADER {
            return Err(LogError::Parse {
                line: 1,
                msg: format!("unexpected header \"{header}\""),
            });
        }

        let parse_f = |field: &str, line: usize, what: &str| -> Result<f64, LogError> {
            field.parse().map_err(|e| LogError::Parse {
                line,
                msg: format!("bad {what} \"{field}\": {e}"),
            })
        };

        let mut steps: Vec<StepRecord> = Vec::new();
        let mut current: Option<StepRecord> = None;
        for (idx, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 10 {
                return Err(LogError::Parse {
                    line: lineno,
                    msg: format!("expected 10 fields, got {}", fields.len()),
                });
            }
            let t = parse_f(fields[0], lineno, "time")?;
            if current.as_ref().is_some_and(|c| c.t_s != t) {
                steps.push(current.take().unwrap());
            }
            let record = current.get_or_insert_with(|| StepRecord {
                t_s: t,
                segments: Vec::with_capacity(n_seg),
                ramps: Vec::with_capacity(n_ramp),
                boundary: BoundarySample::default(),
            });
            match fields[1] {
                "segment" => {
                    let to = parse_f(fields[4], lineno, "occupancy")?;
                    let lanes = effective_lanes_at(&nominal_lanes, &incidents, t);
                    let i = record.segments.len();
                    if i >= n_seg {
                        return Err(LogError::Mismatch(format!(
                            "more than {n_seg} segment rows at t = {t}"
                        )));
                    }
                    let rho_max = lanes[i] as f64 / veh_size_km;
                    record.segments.push(SegmentSample {
                        rho_vpkm: to / 100.0 * rho_max,
                        q_out_vpm: parse_f(fields[3], lineno, "flow")?,
                        to_pct: to,
                        v_kmh: parse_f(fields[5], lineno, "speed")?,
                    });
                }
                "ramp" => {
                    record.ramps.push(RampSample {
                        gd_s: parse_f(fields[6], lineno, "green duration")?,
                        queue_m: parse_f(fields[7], lineno, "queue")?,
                        admitted_vpm: parse_f(fields[8], lineno, "admitted flow")?,
                        demand_vpm: parse_f(fields[9], lineno, "demand")?,
                    });
                }
                "boundary" => match fields[2] {
                    "in" => {
                        record.boundary.inflow_accepted_vpm = parse_f(fields[3], lineno, "flow")?;
                        record.boundary.inflow_demand_vpm = parse_f(fields[9], lineno, "demand")?;
                    }
                    "out" => {
                        record.boundary.outflow_vpm = parse_f(fields[3], lineno, "flow")?;
                    }
                    other => {
                        return Err(LogError::Parse {
                            line: lineno,
                            msg: format!("unknown boundary id \"{other}\""),
                        })
                    }
                },
                other => {
                    return Err(LogError::Parse {
                        line: lineno,
                        msg: format!("unknown entity kind \"{other}\""),
                    })
                }
            }
        }
        if let Some(last) = current.take() {
            steps.push(last);
        }
        for step in &steps {
            if step.segments.len() != n_seg || step.ramps.len() != n_ramp {
                return Err(LogError::Mismatch(format!(
                    "step t = {} has {} segment and {} ramp rows, scenario has {n_seg}/{n_ramp}",
                    step.t_s,
                    step.segments.len(),
                    step.ramps.len()
                )));
            }
        }
        Ok(TrajectoryLog {
            dt_s: scenario.dt_s,
            veh_size_km,
            segment_lengths_km,
            steps,
        })
    }
}

fn effective_lanes_at(
    nominal: &[u32],
    incidents: &[crate::simulation::Incident],
    t: f64,
) -> Vec<u32> {
    crate::simulation::effective_lanes(nominal, incidents, t)
}
