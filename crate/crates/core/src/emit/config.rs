//! `schedule.yaml`: the configuration a runtime loads.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Clock;
use crate::schedule::{LegTiming, Objective, Origin, Schedule, SolverConfig};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct Header {
    tool: String,
    seed: u64,
    objective: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    sinks: Vec<String>,
    objective_value: Clock,
    hyperperiod: Clock,
    active_window: (Clock, Clock),
    origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    solver: Option<SolverSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    restarts: usize,
    iterations: usize,
    temperature: f64,
    cooling: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Slot {
    task: String,
    start: Clock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BufferEntry {
    pattern: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    legs: Vec<LegTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ConfigDoc {
    config_version: u32,
    header: Header,
    processors: BTreeMap<String, Vec<Slot>>,
    buffers: BTreeMap<String, BufferEntry>,
    /// Legs of merged buffers whose id is not a pattern key.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    transfers: BTreeMap<String, Vec<LegTiming>>,
    #[serde(default)]
    witness: BTreeMap<String, i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("schedule config: {0}")]
    Yaml(String),
    #[error("unsupported configVersion {0}, expected {CONFIG_VERSION}")]
    Version(u32),
    #[error("unknown objective `{0}`")]
    Objective(String),
    #[error("task {0} listed twice")]
    DuplicateTask(String),
}

pub fn emit_schedule_config(s: &Schedule) -> String {
    let mut processors: BTreeMap<String, Vec<Slot>> = BTreeMap::new();
    for (t, p) in &s.task_to_processor {
        processors.entry(p.clone()).or_default().push(Slot {
            task: t.clone(),
            start: s.start.get(t).copied().unwrap_or(0),
        });
    }
    for slots in processors.values_mut() {
        slots.sort_by(|a, b| (a.start, &a.task).cmp(&(b.start, &b.task)));
    }
    let mut transfers = s.transfers.clone();
    let buffers = s
        .buffer_to_pattern
        .iter()
        .map(|(b, p)| {
            let legs = transfers.remove(b).unwrap_or_default();
            (b.clone(), BufferEntry { pattern: p.clone(), legs })
        })
        .collect();
    let sinks = match &s.objective {
        Objective::MinLatency(v) => v.clone(),
        Objective::MinActivePeriod => Vec::new(),
    };
    let doc = ConfigDoc {
        config_version: CONFIG_VERSION,
        header: Header {
            tool: format!("rdslc {}", env!("CARGO_PKG_VERSION")),
            seed: s.seed,
            objective: s.objective.name().to_string(),
            sinks,
            objective_value: s.objective_value,
            hyperperiod: s.hyperperiod,
            active_window: s.active_window,
            origin: s.origin,
            solver: s.config.as_ref().map(|c| SolverSection {
                restarts: c.restarts,
                iterations: c.iterations,
                temperature: c.temperature,
                cooling: c.cooling,
            }),
        },
        processors,
        buffers,
        transfers,
        witness: s.witness.clone(),
    };
    serde_yaml::to_string(&doc).expect("config serializes")
}

pub fn parse_schedule_config(text: &str) -> Result<Schedule, ConfigError> {
    let doc: ConfigDoc = serde_yaml::from_str(text).map_err(|e| ConfigError::Yaml(e.to_string()))?;
    if doc.config_version != CONFIG_VERSION {
        return Err(ConfigError::Version(doc.config_version));
    }
    let h = doc.header;
    let objective = match h.objective.as_str() {
        "active_period" => Objective::MinActivePeriod,
        "latency" => Objective::MinLatency(h.sinks),
        other => return Err(ConfigError::Objective(other.to_string())),
    };
    let mut task_to_processor = BTreeMap::new();
    let mut start = BTreeMap::new();
    for (p, slots) in doc.processors {
        for s in slots {
            if task_to_processor.insert(s.task.clone(), p.clone()).is_some() {
                return Err(ConfigError::DuplicateTask(s.task));
            }
            start.insert(s.task, s.start);
        }
    }
    let mut transfers = doc.transfers;
    let mut buffer_to_pattern = BTreeMap::new();
    for (b, e) in doc.buffers {
        if !e.legs.is_empty() {
            transfers.insert(b.clone(), e.legs);
        }
        buffer_to_pattern.insert(b, e.pattern);
    }
    let config = h.solver.map(|c| SolverConfig {
        seed: h.seed,
        restarts: c.restarts,
        iterations: c.iterations,
        temperature: c.temperature,
        cooling: c.cooling,
        objective: objective.clone(),
    });
    Ok(Schedule {
        hyperperiod: h.hyperperiod,
        task_to_processor,
        buffer_to_pattern,
        witness: doc.witness,
        start,
        transfers,
        objective,
        objective_value: h.objective_value,
        active_window: h.active_window,
        origin: h.origin,
        seed: h.seed,
        config,
    })
}
