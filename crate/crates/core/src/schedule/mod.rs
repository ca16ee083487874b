//! Assignment and timing of tasks and buffer transfers.
//!
//! Every schedule is produced by one placement routine ([`decode`]) that
//! walks tasks in a priority order and puts each at its earliest feasible
//! clock. The baseline, the annealer and the exhaustive oracle differ only
//! in how they pick orders, processors and patterns.

mod anneal;
mod baseline;
mod brute;
mod decode;
mod problem;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{BufId, TaskGraph, TaskId};
use crate::model::Clock;

pub use anneal::solve;
pub use baseline::baseline_schedule;
pub use brute::{brute_force, BRUTE_MAX_PATTERNS, BRUTE_MAX_PROCESSORS, BRUTE_MAX_TASKS};
pub use problem::Problem;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "sinks")]
pub enum Objective {
    /// Last finish minus first start within the period.
    MinActivePeriod,
    /// Worst sink ready time minus its earliest source arrival. An empty
    /// list means every sink buffer.
    MinLatency(Vec<String>),
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Objective::MinActivePeriod => "active_period",
            Objective::MinLatency(_) => "latency",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub seed: u64,
    pub restarts: usize,
    /// Annealing steps per restart.
    pub iterations: usize,
    /// Initial temperature as a fraction of the baseline objective.
    pub temperature: f64,
    /// Per-step geometric cooling factor.
    pub cooling: f64,
    pub objective: Objective,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            seed: 0,
            restarts: 8,
            iterations: 4000,
            temperature: 0.05,
            cooling: 0.999,
            objective: Objective::MinActivePeriod,
        }
    }
}

/// One leg of a buffer's transfer as placed on a port.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LegTiming {
    pub port: String,
    pub from: String,
    pub to: String,
    pub start: Clock,
    pub duration: Clock,
}

impl LegTiming {
    pub fn end(&self) -> Clock {
        self.start + self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Baseline,
    Solve,
    BruteForce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub hyperperiod: Clock,
    pub task_to_processor: BTreeMap<TaskId, String>,
    /// Keyed by buffer id after sibling expansion; sources are absent.
    pub buffer_to_pattern: BTreeMap<BufId, String>,
    /// Values chosen for free constraint variables.
    pub witness: BTreeMap<String, i64>,
    pub start: BTreeMap<TaskId, Clock>,
    /// Keyed by buffer id after redundant siblings are merged; only
    /// buffers whose pattern has legs appear.
    pub transfers: BTreeMap<BufId, Vec<LegTiming>>,
    pub objective: Objective,
    pub objective_value: Clock,
    pub active_window: (Clock, Clock),
    pub origin: Origin,
    pub seed: u64,
    pub config: Option<SolverConfig>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("infeasible: {cause}")]
    Infeasible {
        cause: String,
        /// Constraint document, memory or resource that failed.
        binding: Option<String>,
    },
    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),
    #[error("unknown sink `{0}`")]
    UnknownSink(String),
    #[error("graph has a same-period cycle through {0:?}")]
    Cycle(Vec<TaskId>),
    #[error("solver produced a schedule the verifier rejects: {0}")]
    Unverified(String),
}

/// Objective value recomputed from a schedule and its graph.
pub fn score(schedule: &Schedule, graph: &TaskGraph, objective: &Objective) -> Result<Clock, SolveError> {
    match objective {
        Objective::MinActivePeriod => Ok(active_window(schedule, graph)
            .map(|(a, b)| b - a)
            .unwrap_or(0)),
        Objective::MinLatency(sinks) => {
            let expanded = crate::elaborate::expand_siblings(graph);
            let ids = problem::resolve_sinks(&expanded, sinks)?;
            let merged =
                crate::elaborate::merge_redundant_siblings(&expanded, &schedule.buffer_to_pattern);
            let mut worst = 0;
            for id in ids {
                let b = &merged.buffers[&id];
                let ready = buffer_ready(schedule, &merged, &id).unwrap_or(0);
                let arrival = merged.ancestor_arrival(&b.id).unwrap_or(0);
                worst = worst.max(ready.saturating_sub(arrival));
            }
            Ok(worst)
        }
    }
}

/// Producer finish or last leg end; arrival for sources.
pub fn buffer_ready(schedule: &Schedule, graph: &TaskGraph, buffer: &str) -> Option<Clock> {
    let b = graph.buffers.get(buffer)?;
    if let Some(legs) = schedule.transfers.get(buffer) {
        if let Some(l) = legs.last() {
            return Some(l.end());
        }
    }
    match &b.producer {
        None => Some(b.arrival),
        Some(p) => Some(schedule.start.get(p)? + graph.tasks[p].worst_case_runtime),
    }
}

/// First start and last finish, transfers included; `None` when nothing runs.
pub fn active_window(schedule: &Schedule, graph: &TaskGraph) -> Option<(Clock, Clock)> {
    let mut lo = Clock::MAX;
    let mut hi = 0;
    for (t, s) in &schedule.start {
        let rt = graph.tasks.get(t).map_or(0, |t| t.worst_case_runtime);
        lo = lo.min(*s);
        hi = hi.max(s + rt);
    }
    for legs in schedule.transfers.values() {
        for l in legs {
            lo = lo.min(l.start);
            hi = hi.max(l.end());
        }
    }
    (lo != Clock::MAX).then_some((lo, hi))
}

pub(crate) fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for stream `index` derived from a user seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix(splitmix(seed) ^ index.wrapping_mul(0xD605_BBB5_8C8A_BBFD))
}

#[cfg(test)]
mod tests;
