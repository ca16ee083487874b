//! Before/after tables.

use std::fmt::Write;

use serde::Serialize;
use thiserror::Error;

use crate::model::Clock;
use crate::schedule::{Objective, Schedule};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComparisonReport {
    pub kpi: String,
    pub baseline: Clock,
    pub optimized: Clock,
    pub delta: i64,
    /// Improvement in tenths of a percent of the baseline.
    pub improvement_tenths: i64,
    pub improvement: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompareError {
    #[error("schedules were scored as {0} and {1}, asked for {2}")]
    ObjectiveMismatch(String, String, String),
}

/// `100 * (b - o) / b` in tenths, halves rounded away from zero.
pub fn improvement_tenths(baseline: Clock, optimized: Clock) -> i64 {
    if baseline == 0 {
        return 0;
    }
    let b = baseline as i128;
    let d = b - optimized as i128;
    let mag = (2000 * d.abs() + b) / (2 * b);
    (if d < 0 { -mag } else { mag }) as i64
}

pub fn format_tenths(t: i64) -> String {
    let sign = if t < 0 { "-" } else { "" };
    format!("{sign}{}.{}%", t.abs() / 10, t.abs() % 10)
}

fn kpi(objective: &Objective) -> &'static str {
    match objective {
        Objective::MinActivePeriod => "active period",
        Objective::MinLatency(_) => "latency",
    }
}

pub fn compare_values(kpi: &str, baseline: Clock, optimized: Clock) -> ComparisonReport {
    let t = improvement_tenths(baseline, optimized);
    ComparisonReport {
        kpi: kpi.to_string(),
        baseline,
        optimized,
        delta: baseline as i64 - optimized as i64,
        improvement_tenths: t,
        improvement: format_tenths(t),
    }
}

pub fn emit_comparison(
    baseline: &Schedule,
    optimized: &Schedule,
    objective: &Objective,
) -> Result<(ComparisonReport, String), CompareError> {
    if &baseline.objective != objective || &optimized.objective != objective {
        return Err(CompareError::ObjectiveMismatch(
            baseline.objective.name().into(),
            optimized.objective.name().into(),
            objective.name().into(),
        ));
    }
    let r = compare_values(kpi(objective), baseline.objective_value, optimized.objective_value);
    let table = render_table(&r);
    Ok((r, table))
}

/// KPI | before & after | impact, columns padded to fit.
pub fn render_table(r: &ComparisonReport) -> String {
    let kpi = format!("{} (clocks)", r.kpi);
    let ba = format!("{} -> {}", r.baseline, r.optimized);
    let verb = if r.improvement_tenths < 0 { "regression" } else { "improvement" };
    let impact = format!("{} {verb}, delta {}", format_tenths(r.improvement_tenths.abs()), r.delta);
    let rows = [["KPI", "Before & After", "Impact"], [kpi.as_str(), ba.as_str(), impact.as_str()]];
    let w: Vec<usize> = (0..3).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    let mut s = String::new();
    for (i, row) in rows.iter().enumerate() {
        let _ = writeln!(s, "{:<a$} | {:<b$} | {}", row[0], row[1], row[2], a = w[0], b = w[1]);
        if i == 0 {
            let _ = writeln!(s, "{}-+-{}-+-{}", "-".repeat(w[0]), "-".repeat(w[1]), "-".repeat(w[2]));
        }
    }
    s
}
