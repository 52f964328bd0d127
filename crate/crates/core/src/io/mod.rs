//! Trace files, configuration and reports.

pub mod config;
pub mod report;
mod trace_file;

pub use report::{emit_report, Plot, ReportOptions, Scale, Series, Table};
pub use trace_file::{read_trace, write_trace, TraceMeta, TRACE_MAGIC};
