//! File formats and batch execution: telemetry CSV, run configuration,
//! JSON reports and synthetic rigs.

pub mod config;
pub mod report;
pub mod simulate;
pub mod telemetry;

pub use config::{ChannelSpec, RunConfig};
pub use report::{emit_report, identify_record, parse_report, ChannelReport, Report};
pub use simulate::{simulate_record, SimulationSpec};
pub use telemetry::{parse_csv, write_csv, TelemetryRecord};
