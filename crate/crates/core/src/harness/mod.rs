//! Simulation loop, configuration, sweeps and their outputs.

pub mod chart;
pub mod config;
pub mod sim;
pub mod sweep;
pub mod trace;

pub use chart::{emit_chart, format_chart};
pub use config::{ProfileSource, Settings, SimConfig, SweepSettings, VideoConfig};
pub use sim::{format_summary, run, AggregateMetrics, RunMetrics, UserMetrics, SUMMARY_HEADER};
pub use sweep::{
    emit_csv, format_csv, parse_csv, read_csv, summarize, sweep, sweep_with, Execution,
    SummaryPoint, SweepRow, SweepSpec, Variable,
};
pub use trace::{format_trace, parse_trace, read_trace, replay, write_trace, ReplayMetrics, TraceRow};
