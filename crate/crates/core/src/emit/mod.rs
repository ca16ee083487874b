//! Output documents: schedule configuration, timing charts, comparisons.

mod compare;
mod config;
mod gantt;

pub use compare::{compare_values, emit_comparison, format_tenths, improvement_tenths, render_table, CompareError, ComparisonReport};
pub use config::{emit_schedule_config, parse_schedule_config, ConfigError, CONFIG_VERSION};
pub use gantt::{emit_gantt, lanes, Bar, GanttFormat, Lane, SVG_WIDTH, TEXT_WIDTH};

#[cfg(test)]
mod tests;
