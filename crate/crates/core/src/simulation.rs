//! Discretized conservation-law traffic dynamics with metered on-ramps.
//!
//! Per step, every segment emits `min(rho v / 60, rho L / dt)` Veh/min and
//! can receive `(rho_max - rho) L / dt`; mainline and ramp flows competing
//! for the same segment are served proportionally when supply is scarce.
//! Densities update as `rho' = rho + (Q_in - Q_out) dt / L`, so vehicles
//! are conserved exactly up to float rounding.

use crate::control::{ControllerKind, RampController};
use crate::log::{BoundarySample, RampSample, SegmentSample, StepRecord, TrajectoryLog};
use crate::scenario::Scenario;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("demand profile {which}: {msg}")]
    Profile { which: String, msg: String },
    #[error("simulation setup: {0}")]
    Setup(String),
    #[error("green duration {gd} s outside [0, {cycle}] s")]
    GreenOutOfRange { gd: f64, cycle: f64 },
    #[error("density {rho} Veh/km outside [0, {bound}]")]
    DensityOutOfBounds { rho: f64, bound: f64 },
    #[error("admitted {admitted} Veh/min exceeds available {available} Veh/min")]
    OverAdmitted { admitted: f64, available: f64 },
    #[error("step {step} segment {segment}: density {rho} Veh/km outside [0, {bound}]")]
    ConservationFault {
        step: usize,
        segment: usize,
        rho: f64,
        bound: f64,
    },
    #[error("step {step} ramp {ramp}: admitted {admitted} Veh/min exceeds available {available}")]
    QueueFault {
        step: usize,
        ramp: usize,
        admitted: f64,
        available: f64,
    },
}

const BOUND_TOL: f64 = 1e-9;

/// Piecewise-linear time series of a flow demand, Veh/min over seconds.
/// Evaluation clamps to the end values outside the covered range; an empty
/// profile is zero everywhere.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DemandProfile {
    points: Vec<(f64, f64)>,
}

impl DemandProfile {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, SimulationError> {
        for (i, (t, q)) in points.iter().enumerate() {
            if !t.is_finite() || !q.is_finite() || *q < 0.0 {
                return Err(SimulationError::Profile {
                    which: format!("point {i}"),
                    msg: format!("flows must be finite and nonnegative, got ({t}, {q})"),
                });
            }
            if i > 0 && *t <= points[i - 1].0 {
                return Err(SimulationError::Profile {
                    which: format!("point {i}"),
                    msg: format!(
                        "times must be strictly increasing, got {} after {}",
                        t,
                        points[i - 1].0
                    ),
                });
            }
        }
        Ok(DemandProfile { points })
    }

    pub fn eval(&self, t_s: f64) -> f64 {
        let pts = &self.points;
        if pts.is_empty() {
            return 0.0;
        }
        if t_s <= pts[0].0 {
            return pts[0].1;
        }
        if t_s >= pts[pts.len() - 1].0 {
            return pts[pts.len() - 1].1;
        }
        for pair in pts.windows(2) {
            let (t0, q0) = pair[0];
            let (t1, q1) = pair[1];
            if t_s <= t1 {
                return q0 + (q1 - q0) * (t_s - t0) / (t1 - t0);
            }
        }
        pts[pts.len() - 1].1
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }
}

/// A lane closure on one segment over a time window. Active while
/// `start_s <= t < end_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Incident {
    pub segment: usize,
    pub lanes: u32,
    pub start_s: f64,
    pub end_s: f64,
}

/// Lane counts in force at time `t`: the nominal counts, reduced to the
/// smallest active incident value per segment.
pub fn effective_lanes(nominal: &[u32], incidents: &[Incident], t_s: f64) -> Vec<u32> {
    let mut lanes = nominal.to_vec();
    for inc in incidents {
        if t_s >= inc.start_s && t_s < inc.end_s && inc.segment < lanes.len() {
            lanes[inc.segment] = lanes[inc.segment].min(inc.lanes);
        }
    }
    lanes
}

/// Flow a segment can emit during one step, Veh/min: the demand `rho v / 60`
/// capped by full evacuation `rho L / dt`.
pub fn sending_flow(rho: f64, v_kmh: f64, length_km: f64, dt_min: f64) -> f64 {
    (rho * v_kmh / 60.0).min(rho * length_km / dt_min).max(0.0)
}

/// Flow a segment can absorb during one step without exceeding its jam
/// density, Veh/min. Zero when the segment is already at or above jam.
pub fn receiving_flow(rho: f64, rho_max: f64, length_km: f64, dt_min: f64) -> f64 {
    ((rho_max - rho) * length_km / dt_min).max(0.0)
}

/// Meter discharge capacity for a green duration, Veh/min.
pub fn metered_ramp_capacity(
    gd_s: f64,
    cycle_s: f64,
    sat_rate_vpm: f64,
) -> Result<f64, SimulationError> {
    if !(gd_s >= 0.0 && gd_s <= cycle_s) {
        return Err(SimulationError::GreenOutOfRange {
            gd: gd_s,
            cycle: cycle_s,
        });
    }
    Ok(sat_rate_vpm * gd_s / cycle_s)
}

/// Splits scarce downstream supply between mainline and ramp demand
/// proportionally; under ample supply both pass unchanged.
pub fn merge_flows(main_demand: f64, ramp_demand: f64, supply: f64) -> (f64, f64) {
    let main = main_demand.max(0.0);
    let ramp = ramp_demand.max(0.0);
    let supply = supply.max(0.0);
    let total = main + ramp;
    if total <= supply || total == 0.0 {
        (main, ramp)
    } else {
        (supply * main / total, supply * ramp / total)
    }
}

/// Conservation update `rho' = rho + (q_in - q_out) dt / L`, with the
/// result required to stay inside `[0, rho_max]` up to a small tolerance.
pub fn segment_density_step(
    rho: f64,
    q_in_vpm: f64,
    q_out_vpm: f64,
    length_km: f64,
    dt_min: f64,
    rho_max: f64,
) -> Result<f64, SimulationError> {
    let next = rho + (q_in_vpm - q_out_vpm) * dt_min / length_km;
    if next < -BOUND_TOL || next > rho_max + BOUND_TOL {
        return Err(SimulationError::DensityOutOfBounds {
            rho: next,
            bound: rho_max,
        });
    }
    Ok(next.clamp(0.0, rho_max))
}

/// Queue update `q' = q + (demand - admitted) dt`, vehicles. Admitting more
/// than demand plus the stored queue is rejected.
pub fn ramp_queue_step(
    queue_veh: f64,
    demand_vpm: f64,
    admitted_vpm: f64,
    dt_min: f64,
) -> Result<f64, SimulationError> {
    let available = demand_vpm + queue_veh / dt_min;
    if admitted_vpm > available + BOUND_TOL {
        return Err(SimulationError::OverAdmitted {
            admitted: admitted_vpm,
            available,
        });
    }
    let next = queue_veh + (demand_vpm - admitted_vpm) * dt_min;
    Ok(next.max(0.0))
}

/// Queue length in meters for a single-lane stack of queued vehicles.
pub fn queue_meters(queue_veh: f64, veh_size_km: f64) -> f64 {
    queue_veh * veh_size_km * 1000.0
}

/// Runs a validated scenario to completion and returns the full log.
pub fn simulate(scenario: &Scenario) -> Result<TrajectoryLog, SimulationError> {
    let net = scenario
        .network()
        .map_err(|e| SimulationError::Setup(e.to_string()))?;
    net.validate()
        .map_err(|e| SimulationError::Setup(e.to_string()))?;
    scenario
        .controller
        .validate()
        .map_err(|e| SimulationError::Setup(e.to_string()))?;
    let incidents = scenario
        .incidents_zero_based()
        .map_err(|e| SimulationError::Setup(e.to_string()))?;
    let inflow = DemandProfile::new(scenario.mainline_inflow_vpm.clone())?;
    let ramp_demands: Vec<DemandProfile> = scenario
        .ramps
        .iter()
        .map(|r| DemandProfile::new(r.demand_vpm.clone()))
        .collect::<Result<_, _>>()?;

    let dt_s = scenario.dt_s;
    if !(dt_s > 0.0) {
        return Err(SimulationError::Setup(format!(
            "time step must be positive, got {dt_s}"
        )));
    }
    let dt_min = dt_s / 60.0;
    let n_steps = (scenario.horizon_s / dt_s).round();
    if (n_steps * dt_s - scenario.horizon_s).abs() > 1e-6 || n_steps < 0.0 {
        return Err(SimulationError::Setup(format!(
            "horizon {} s is not a whole number of {} s steps",
            scenario.horizon_s, dt_s
        )));
    }
    let n_steps = n_steps as usize;

    let n_seg = net.segments.len();
    let n_ramp = net.ramps.len();
    let nominal_lanes: Vec<u32> = net.segments.iter().map(|s| s.lanes).collect();
    let lengths: Vec<f64> = net.segments.iter().map(|s| s.length_km).collect();
    let veh_size = net.vehicle.veh_size_km;

    let mut steps_per_cycle = Vec::with_capacity(n_ramp);
    for (j, ramp) in net.ramps.iter().enumerate() {
        let ratio = ramp.cycle_s / dt_s;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return Err(SimulationError::Setup(format!(
                "ramp {j}: cycle {} s is not a whole number of {} s steps",
                ramp.cycle_s, dt_s
            )));
        }
        steps_per_cycle.push(ratio.round() as usize);
    }

    let mut controllers = Vec::with_capacity(n_ramp);
    for ramp in &net.ramps {
        let v_free = net.segments[ramp.merge_segment].diagram.free_speed();
        controllers.push(
            RampController::new(&scenario.controller, ramp, v_free, dt_s)
                .map_err(|e| SimulationError::Setup(e.to_string()))?,
        );
    }
    let with_noise = scenario.controller.kind != ControllerKind::None
        && (scenario.controller.noise_to_pct > 0.0 || scenario.controller.noise_v_kmh > 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);

    let mut rho = vec![0.0f64; n_seg];
    let mut queues = vec![0.0f64; n_ramp];
    let mut gd: Vec<f64> = net.ramps.iter().map(|r| r.cycle_s).collect();
    let mut steps = Vec::with_capacity(n_steps);

    // Scratch buffers reused across steps.
    let mut to = vec![0.0f64; n_seg];
    let mut v = vec![0.0f64; n_seg];
    let mut send = vec![0.0f64; n_seg];
    let mut recv = vec![0.0f64; n_seg];
    let mut q_in = vec![0.0f64; n_seg];
    let mut q_out = vec![0.0f64; n_seg];
    let mut ramp_in = vec![0.0f64; n_ramp];

    for k in 0..n_steps {
        let t = k as f64 * dt_s;
        let lanes = effective_lanes(&nominal_lanes, &incidents, t);
        let rho_max: Vec<f64> = lanes.iter().map(|l| *l as f64 / veh_size).collect();

        for i in 0..n_seg {
            to[i] = rho[i] / rho_max[i] * 100.0;
            v[i] = net.segments[i].diagram.speed_at_density(rho[i], rho_max[i]);
            send[i] = sending_flow(rho[i], v[i], lengths[i], dt_min);
            recv[i] = receiving_flow(rho[i], rho_max[i], lengths[i], dt_min);
        }

        for (j, ramp) in net.ramps.iter().enumerate() {
            let seg = ramp.merge_segment;
            let mut to_meas = to[seg];
            if with_noise {
                to_meas += rng.random_range(-1.0..=1.0) * scenario.controller.noise_to_pct;
            }
            // The detector is read every step so the estimator window is
            // sampled at physics resolution, not control resolution.
            controllers[j].observe(to_meas);
            if k % steps_per_cycle[j] == 0 {
                let mut v_meas = v[seg];
                if with_noise {
                    v_meas += rng.random_range(-1.0..=1.0) * scenario.controller.noise_v_kmh;
                }
                let queue_m = queue_meters(queues[j], veh_size);
                gd[j] = controllers[j].update(to_meas, v_meas, queue_m).gd_s;
            }
        }

        let inlet_demand = inflow.eval(t);
        let mut metered = vec![0.0f64; n_ramp];
        let mut ramp_demand_now = vec![0.0f64; n_ramp];
        for (j, ramp) in net.ramps.iter().enumerate() {
            ramp_demand_now[j] = ramp_demands[j].eval(t);
            let capacity = metered_ramp_capacity(gd[j], ramp.cycle_s, ramp.sat_rate_vpm)?;
            let available = ramp_demand_now[j] + queues[j] / dt_min;
            metered[j] = capacity.min(available);
        }

        let mut inflow_accepted = 0.0;
        for i in 0..n_seg {
            let main_demand = if i == 0 { inlet_demand } else { send[i - 1] };
            let (main_in, r_in) = match net.ramp_at(i) {
                Some(j) => {
                    let (m, r) = merge_flows(main_demand, metered[j], recv[i]);
                    ramp_in[j] = r;
                    (m, r)
                }
                None => {
                    let m = main_demand.min(recv[i]);
                    (m, 0.0)
                }
            };
            q_in[i] = main_in + r_in;
            if i == 0 {
                inflow_accepted = main_in;
            } else {
                q_out[i - 1] = main_in;
            }
        }
        q_out[n_seg - 1] = match scenario.exit_capacity_vpm {
            Some(cap) => send[n_seg - 1].min(cap),
            None => send[n_seg - 1],
        };

        let mut record = StepRecord {
            t_s: t,
            segments: Vec::with_capacity(n_seg),
            ramps: Vec::with_capacity(n_ramp),
            boundary: BoundarySample {
                inflow_demand_vpm: inlet_demand,
                inflow_accepted_vpm: inflow_accepted,
                outflow_vpm: q_out[n_seg - 1],
            },
        };
        for i in 0..n_seg {
            record.segments.push(SegmentSample {
                rho_vpkm: rho[i],
                q_out_vpm: q_out[i],
                to_pct: to[i],
                v_kmh: v[i],
            });
        }
        for j in 0..n_ramp {
            record.ramps.push(RampSample {
                gd_s: gd[j],
                queue_m: queue_meters(queues[j], veh_size),
                admitted_vpm: ramp_in[j],
                demand_vpm: ramp_demand_now[j],
            });
        }
        steps.push(record);

        for i in 0..n_seg {
            // A lane drop can trap more density than the reduced jam value;
            // draining from above the bound is legitimate, growing is not.
            let bound = rho_max[i].max(rho[i]);
            rho[i] = segment_density_step(rho[i], q_in[i], q_out[i], lengths[i], dt_min, bound)
                .map_err(|e| match e {
                    SimulationError::DensityOutOfBounds { rho, bound } => {
                        SimulationError::ConservationFault {
                            step: k,
                            segment: i,
                            rho,
                            bound,
                        }
                    }
                    other => other,
                })?;
        }
        for j in 0..n_ramp {
            queues[j] = ramp_queue_step(queues[j], ramp_demand_now[j], ramp_in[j], dt_min)
                .map_err(|e| match e {
                    SimulationError::OverAdmitted {
                        admitted,
                        available,
                    } => SimulationError::QueueFault {
                        step: k,
                        ramp: j,
                        admitted,
                        available,
                    },
                    other => other,
                })?;
        }
    }

    Ok(TrajectoryLog {
        dt_s,
        veh_size_km: veh_size,
        segment_lengths_km: lengths,
        steps,
    })
}
