//! Macroscopic freeway traffic simulation with ramp metering.
//!
//! The crate couples a discretized conservation-law traffic model with
//! feedback ramp-metering controllers (ALINEA, discrete PI, and an
//! intelligent-proportional loop built on an online estimate of the lumped
//! dynamics), plus scenario I/O, run metrics, and plot emission.

pub mod control;
pub mod diagram;
pub mod estimation;
pub mod log;
pub mod metrics;
pub mod net;
pub mod plot;
pub mod presets;
pub mod runner;
pub mod scenario;
pub mod simulation;

pub use diagram::FundamentalDiagram;
pub use log::TrajectoryLog;
pub use metrics::MetricsReport;
pub use net::{Network, Ramp, Segment, VehicleGeometry};
pub use scenario::Scenario;
