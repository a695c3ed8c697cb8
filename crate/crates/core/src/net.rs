//! Static network description: segments in series, on-ramps, and the shared
//! vehicle geometry that ties density to occupancy.

use crate::diagram::{DiagramError, FundamentalDiagram};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Average effective vehicle length, in km. The default corresponds to
/// 5.5 m per vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleGeometry {
    pub veh_size_km: f64,
}

impl Default for VehicleGeometry {
    fn default() -> Self {
        VehicleGeometry { veh_size_km: 0.0055 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub length_km: f64,
    pub lanes: u32,
    pub diagram: FundamentalDiagram,
}

impl Segment {
    /// Bumper-to-bumper density across all lanes, Veh/km.
    pub fn rho_max(&self, vehicle: &VehicleGeometry) -> f64 {
        self.lanes as f64 / vehicle.veh_size_km
    }
}

/// A metered single-lane on-ramp. Green durations are per signal cycle:
/// the meter admits `sat_rate * gd / cycle` Veh/min.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ramp {
    /// Index of the segment the ramp merges into (0-based).
    pub merge_segment: usize,
    /// Saturation rate of the ramp at full green, Veh/min.
    pub sat_rate_vpm: f64,
    pub gd_min_s: f64,
    pub gd_max_s: f64,
    pub cycle_s: f64,
    /// Queue length (meters) beyond which the meter switches to full green.
    pub queue_override_m: f64,
}

impl Default for Ramp {
    fn default() -> Self {
        Ramp {
            merge_segment: 0,
            sat_rate_vpm: 30.0,
            gd_min_s: 15.0,
            gd_max_s: 29.0,
            cycle_s: 40.0,
            queue_override_m: 200.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub segments: Vec<Segment>,
    pub ramps: Vec<Ramp>,
    pub vehicle: VehicleGeometry,
}

#[derive(Debug, Error, PartialEq)]
pub enum NetworkIssue {
    #[error("network has no segments")]
    Empty,
    #[error("vehicle size must be positive, got {0}")]
    VehicleSize(f64),
    #[error("segment {index}: length must be positive, got {length}")]
    SegmentLength { index: usize, length: f64 },
    #[error("segment {index}: lane count must be positive")]
    SegmentLanes { index: usize },
    #[error("segment {index}: {msg}")]
    SegmentDiagram { index: usize, msg: String },
    #[error("ramp {index}: merges into nonexistent segment {segment} (network has {count})")]
    RampMergeRange {
        index: usize,
        segment: usize,
        count: usize,
    },
    #[error("ramps {first} and {second} both merge into segment {segment}")]
    RampMergeDuplicate {
        first: usize,
        second: usize,
        segment: usize,
    },
    #[error("ramp {index}: saturation rate must be positive, got {value}")]
    RampSatRate { index: usize, value: f64 },
    #[error("ramp {index}: cycle must be positive, got {value}")]
    RampCycle { index: usize, value: f64 },
    #[error("ramp {index}: green bounds must satisfy 0 < gd_min <= gd_max <= cycle, got [{min}, {max}] with cycle {cycle}")]
    RampGreenBounds {
        index: usize,
        min: f64,
        max: f64,
        cycle: f64,
    },
    #[error("ramp {index}: queue override threshold must be positive, got {value}")]
    RampQueueOverride { index: usize, value: f64 },
}

#[derive(Debug, Error)]
#[error("invalid network:\n{}", .issues.iter().map(|i| format!("  - {i}")).collect::<Vec<_>>().join("\n"))]
pub struct NetworkError {
    pub issues: Vec<NetworkIssue>,
}

impl Network {
    /// Checks every structural constraint and reports all violations at once.
    pub fn validate(&self) -> Result<(), NetworkError> {
        let mut issues = Vec::new();
        if self.segments.is_empty() {
            issues.push(NetworkIssue::Empty);
        }
        if !(self.vehicle.veh_size_km > 0.0) {
            issues.push(NetworkIssue::VehicleSize(self.vehicle.veh_size_km));
        }
        for (index, seg) in self.segments.iter().enumerate() {
            if !(seg.length_km > 0.0) {
                issues.push(NetworkIssue::SegmentLength {
                    index,
                    length: seg.length_km,
                });
            }
            if seg.lanes == 0 {
                issues.push(NetworkIssue::SegmentLanes { index });
            }
            if let Err(e) = seg.diagram.validate() {
                issues.push(NetworkIssue::SegmentDiagram {
                    index,
                    msg: diagram_msg(e),
                });
            }
        }
        for (index, ramp) in self.ramps.iter().enumerate() {
            if ramp.merge_segment >= self.segments.len() {
                issues.push(NetworkIssue::RampMergeRange {
                    index,
                    segment: ramp.merge_segment,
                    count: self.segments.len(),
                });
            }
            for (earlier, other) in self.ramps[..index].iter().enumerate() {
                if other.merge_segment == ramp.merge_segment {
                    issues.push(NetworkIssue::RampMergeDuplicate {
                        first: earlier,
                        second: index,
                        segment: ramp.merge_segment,
                    });
                }
            }
            if !(ramp.sat_rate_vpm > 0.0) {
                issues.push(NetworkIssue::RampSatRate {
                    index,
                    value: ramp.sat_rate_vpm,
                });
            }
            if !(ramp.cycle_s > 0.0) {
                issues.push(NetworkIssue::RampCycle {
                    index,
                    value: ramp.cycle_s,
                });
            } else if !(ramp.gd_min_s > 0.0
                && ramp.gd_min_s <= ramp.gd_max_s
                && ramp.gd_max_s <= ramp.cycle_s)
            {
                issues.push(NetworkIssue::RampGreenBounds {
                    index,
                    min: ramp.gd_min_s,
                    max: ramp.gd_max_s,
                    cycle: ramp.cycle_s,
                });
            }
            if !(ramp.queue_override_m > 0.0) {
                issues.push(NetworkIssue::RampQueueOverride {
                    index,
                    value: ramp.queue_override_m,
                });
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(NetworkError { issues })
        }
    }

    pub fn rho_max(&self, segment: usize) -> f64 {
        self.segments[segment].rho_max(&self.vehicle)
    }

    /// Ramp index merging into `segment`, if any.
    pub fn ramp_at(&self, segment: usize) -> Option<usize> {
        self.ramps.iter().position(|r| r.merge_segment == segment)
    }
}

fn diagram_msg(e: DiagramError) -> String {
    e.to_string()
}
