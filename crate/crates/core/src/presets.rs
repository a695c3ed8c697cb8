//! Bundled example scenarios.
//!
//! The reference corridor is a 7-segment freeway (4.7, 0.6, 1.4, 1.7,
//! 3.7, 0.6, 0.9 km; three lanes everywhere except four on the last
//! segment) with metered on-ramps into segments 1, 4 and 7. Speed tables
//! are synthetic: a bell-shaped speed/occupancy law sampled every 5% of
//! occupancy, per-segment free speeds between 90 and 110 km/h and
//! critical occupancies between 15% and 25%.
//!
//! Two scenario files built from this corridor ship with the crate:
//! `paper-network.json` (a demand peak with a short surge on top) and
//! `paper-incident.json` (the same corridor where segment 2 loses one of
//! its three lanes for an hour). The JSON assets are generated from the
//! builders in this module; `regenerate_bundled_assets` rewrites them.

use crate::control::{ControllerConfig, ControllerKind, FEstimatorKind, SetpointConfig};
use crate::scenario::{
    parse_scenario, DiagramSpec, IncidentSpec, RampSpec, Scenario, SegmentSpec,
};
use std::path::Path;

pub const PAPER_NETWORK: &str = "paper-network";
pub const PAPER_INCIDENT: &str = "paper-incident";

const PAPER_NETWORK_JSON: &str = include_str!("../assets/paper-network.json");
const PAPER_INCIDENT_JSON: &str = include_str!("../assets/paper-incident.json");

/// Names accepted by [`builtin`].
pub fn builtin_names() -> &'static [&'static str] {
    &[PAPER_NETWORK, PAPER_INCIDENT]
}

/// Returns a bundled scenario by name, `None` if the name is unknown.
pub fn builtin(name: &str) -> Option<Scenario> {
    let text = match name {
        PAPER_NETWORK => PAPER_NETWORK_JSON,
        PAPER_INCIDENT => PAPER_INCIDENT_JSON,
        _ => return None,
    };
    Some(parse_scenario(text, Path::new(".")).expect("bundled scenario is valid"))
}

/// Samples a bell-shaped speed/occupancy law `v_f * exp(-(1/a)(To/To_c)^a)`
/// every 5% of occupancy, with a stop-and-go creep floor (8 km/h fading
/// to 5 km/h at full occupancy). Measured speed/occupancy curves flatten
/// out at a crawl instead of decaying to zero; without the floor a fully
/// jammed segment would discharge essentially nothing and never recover.
/// Speeds are rounded to 1e-6 km/h so regeneration is stable and the
/// floor section of the table stays strictly decreasing.
fn speed_table(v_f: f64, to_c_pct: f64, a: f64) -> Vec<(f64, f64)> {
    (0..=20)
        .map(|k| {
            let to = 5.0 * k as f64;
            let bell = v_f * (-(1.0 / a) * (to / to_c_pct).powf(a)).exp();
            let creep = 8.0 - 0.03 * to;
            let v = bell.max(creep);
            (to, (v * 1e6).round() / 1e6)
        })
        .collect()
}

fn corridor_segments() -> Vec<SegmentSpec> {
    // (length_km, lanes, free speed, critical occupancy %)
    let geometry: [(f64, u32, f64, f64); 7] = [
        (4.7, 3, 105.0, 21.0),
        (0.6, 3, 100.0, 20.0),
        (1.4, 3, 102.0, 22.0),
        (1.7, 3, 98.0, 19.0),
        (3.7, 3, 108.0, 23.0),
        (0.6, 3, 100.0, 21.0),
        (0.9, 4, 95.0, 20.0),
    ];
    geometry
        .iter()
        .map(|&(length_km, lanes, v_f, to_c)| SegmentSpec {
            length_km,
            lanes,
            diagram: DiagramSpec::Tabulated {
                knots: speed_table(v_f, to_c, 2.0),
            },
        })
        .collect()
}

fn corridor_controller() -> ControllerConfig {
    ControllerConfig {
        kind: ControllerKind::Alinea,
        // alpha sets the inverse loop gain of the model-free law. The
        // estimator window trails the plant by roughly half its length, so
        // values much above ~0.7 react too slowly to stop a building jam,
        // while the band below ~0.65 is stable on both bundled corridors.
        alpha: 0.6,
        k_p: 1.0,
        k_i: 1.0,
        pi_gains: None,
        estimator: FEstimatorKind::Algebraic,
        window_cycles: 5,
        // Asymmetric adaptation: back off the target quickly when the merge
        // segment slows down, restore it cautiously. The ceiling stays well
        // below critical occupancy so a surge never has to walk the target
        // down from deep in the free-flow range.
        setpoint: SetpointConfig {
            initial_pct: 14.0,
            delta_plus: 0.15,
            delta_minus: 0.5,
            speed_margin_kmh: 10.0,
            min_pct: 10.0,
            max_pct: 16.0,
        },
        noise_to_pct: 0.0,
        noise_v_kmh: 0.0,
    }
}

fn ramp(merge_segment: usize, queue_override_m: f64, demand_vpm: Vec<(f64, f64)>) -> RampSpec {
    RampSpec {
        merge_segment,
        sat_rate_vpm: 30.0,
        gd_min_s: 15.0,
        gd_max_s: 29.0,
        cycle_s: 40.0,
        queue_override_m,
        demand_vpm,
    }
}

/// Four-hour peak on the reference corridor: trapezoidal ramp-up plus a
/// half-hour mainline surge around mid-peak.
///
/// The narrow fourth segment is the corridor bottleneck (about 103 Veh/min).
/// During the surge the unmetered demand through it is about 108 Veh/min,
/// enough to tip it past critical occupancy and collapse the upstream half
/// of the corridor; holding the first ramp at its minimum rate keeps the
/// bottleneck just under capacity, so the metered runs ride the surge out.
pub fn reference_corridor() -> Scenario {
    Scenario {
        name: PAPER_NETWORK.to_string(),
        horizon_s: 14400.0,
        dt_s: 1.0,
        seed: 0,
        vehicle_size_km: 0.0055,
        segments: corridor_segments(),
        ramps: vec![
            ramp(
                1,
                2000.0,
                vec![
                    (0.0, 6.0),
                    (3000.0, 6.0),
                    (4200.0, 20.0),
                    (9000.0, 20.0),
                    (10200.0, 6.0),
                    (14400.0, 6.0),
                ],
            ),
            ramp(
                4,
                400.0,
                vec![
                    (0.0, 4.0),
                    (3600.0, 4.0),
                    (4800.0, 6.0),
                    (9000.0, 6.0),
                    (10200.0, 4.0),
                    (14400.0, 4.0),
                ],
            ),
            ramp(
                7,
                400.0,
                vec![
                    (0.0, 4.0),
                    (3600.0, 4.0),
                    (4800.0, 8.0),
                    (9000.0, 8.0),
                    (10200.0, 4.0),
                    (14400.0, 4.0),
                ],
            ),
        ],
        mainline_inflow_vpm: vec![
            (0.0, 45.0),
            (3000.0, 45.0),
            (4200.0, 55.0),
            (4380.0, 82.0),
            (5820.0, 82.0),
            (6000.0, 55.0),
            (9000.0, 55.0),
            (10200.0, 45.0),
            (14400.0, 45.0),
        ],
        exit_capacity_vpm: None,
        incidents: vec![],
        controller: corridor_controller(),
        output_dir: None,
    }
}

/// The reference corridor during an incident: segment 2 drops from three
/// lanes to two between t = 2400 s and t = 6000 s while demand sits just
/// above the reduced capacity.
pub fn incident_corridor() -> Scenario {
    let mut s = reference_corridor();
    s.name = PAPER_INCIDENT.to_string();
    s.mainline_inflow_vpm = vec![
        (0.0, 45.0),
        (1200.0, 45.0),
        (2100.0, 55.0),
        (7800.0, 55.0),
        (9000.0, 45.0),
        (14400.0, 45.0),
    ];
    s.ramps[0].demand_vpm = vec![
        (0.0, 8.0),
        (1200.0, 8.0),
        (2100.0, 20.0),
        (7800.0, 20.0),
        (9000.0, 8.0),
        (14400.0, 8.0),
    ];
    s.ramps[0].queue_override_m = 4000.0;
    s.ramps[1].demand_vpm = vec![
        (0.0, 5.0),
        (1200.0, 5.0),
        (2100.0, 8.0),
        (7800.0, 8.0),
        (9000.0, 5.0),
        (14400.0, 5.0),
    ];
    s.ramps[2].demand_vpm = vec![
        (0.0, 4.0),
        (1200.0, 4.0),
        (2100.0, 6.0),
        (7800.0, 6.0),
        (9000.0, 4.0),
        (14400.0, 4.0),
    ];
    s.incidents = vec![IncidentSpec {
        segment: 2,
        lanes: 2,
        start_s: 2400.0,
        end_s: 6000.0,
    }];
    // The controllers can only watch their own merge segment, so the
    // bottleneck knowledge lives in the setpoint: holding segment 1 at 8%
    // occupancy caps its discharge at about 71 Veh/min, just under the
    // two-lane capacity of the blocked segment. The setpoint is pinned
    // (zero adaptation) because drifting above 8% would re-trigger the
    // collapse the metering exists to prevent.
    s.controller.setpoint = SetpointConfig {
        initial_pct: 8.0,
        delta_plus: 0.0,
        delta_minus: 0.0,
        speed_margin_kmh: 10.0,
        min_pct: 5.0,
        max_pct: 40.0,
    };
    s
}
