//! One-period task/buffer dependency graph.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::model::Clock;
use crate::rdsl::ast::{GuardCond, ParamDir};

pub type TaskId = String;
pub type BufId = String;

/// A buffer read, possibly from `delay` periods earlier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct BufRef {
    pub buffer: BufId,
    pub delay: u32,
}

impl BufRef {
    pub fn now(buffer: impl Into<BufId>) -> Self {
        BufRef {
            buffer: buffer.into(),
            delay: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum External {
    Source,
    Sink,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Consumer {
    pub task: TaskId,
    pub delay: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BufferInstance {
    pub id: BufId,
    /// Declared stream this buffer belongs to (path-qualified).
    pub stream: String,
    /// `None` only for sources.
    pub producer: Option<TaskId>,
    pub consumers: BTreeSet<Consumer>,
    pub size_bytes: u64,
    /// Largest delay any consumer reads this buffer with.
    pub delay: u32,
    pub sibling_group: Option<BufId>,
    pub external: External,
    /// Arrival offset within the period; sources only.
    pub arrival: Clock,
}

impl BufferInstance {
    pub fn consumer_tasks(&self) -> impl Iterator<Item = &str> {
        self.consumers.iter().map(|c| c.task.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "action")]
pub enum ArmAction {
    Call { function: String, args: Vec<String> },
    ErrorMessage { target: String },
    AssignEmpty { target: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaskArm {
    pub cond: GuardCond,
    pub actions: Vec<ArmAction>,
    pub cost: Clock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaskParam {
    pub dir: ParamDirSer,
    pub buffers: Vec<BufRef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamDirSer {
    In,
    Out,
}

impl From<ParamDir> for ParamDirSer {
    fn from(d: ParamDir) -> Self {
        match d {
            ParamDir::In => ParamDirSer::In,
            ParamDir::Out => ParamDirSer::Out,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaskInstance {
    pub id: TaskId,
    pub modifier: String,
    /// Metadata entry that decides placement and output size.
    pub function: Option<String>,
    pub index_params: BTreeMap<String, i64>,
    pub worst_case_runtime: Clock,
    pub internalsize: u64,
    pub hard_inputs: BTreeSet<BufRef>,
    pub optional_inputs: BTreeSet<BufRef>,
    pub outputs: BTreeSet<BufId>,
    /// Processors the task may run on, sorted.
    pub candidates: Vec<String>,
    pub available_patterns: Vec<String>,
    pub params: BTreeMap<String, TaskParam>,
    pub arms: Vec<TaskArm>,
    pub labels: BTreeSet<String>,
}

impl TaskInstance {
    pub fn inputs(&self) -> impl Iterator<Item = &BufRef> {
        self.hard_inputs.iter().chain(&self.optional_inputs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TaskGraph {
    pub tasks: BTreeMap<TaskId, TaskInstance>,
    pub buffers: BTreeMap<BufId, BufferInstance>,
    pub hyperperiod: Clock,
    /// Timing label → buffers whose latest ready time gives its value.
    pub labels: BTreeMap<String, BTreeSet<BufId>>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("same-period dependency cycle through {0:?}")]
pub struct CycleError(pub Vec<TaskId>);

impl TaskGraph {
    /// Tasks that must finish (with their output transfers) before `task`
    /// starts in the same period.
    pub fn same_period_preds(&self, task: &str) -> BTreeSet<&str> {
        self.tasks[task]
            .hard_inputs
            .iter()
            .filter(|r| r.delay == 0)
            .filter_map(|r| self.buffers.get(&r.buffer)?.producer.as_deref())
            .collect()
    }

    /// Kahn order with lexicographic tie-break over same-period hard edges.
    pub fn topo_order(&self) -> Result<Vec<TaskId>, CycleError> {
        let mut indeg: BTreeMap<&str, usize> = self.tasks.keys().map(|k| (k.as_str(), 0)).collect();
        let mut succ: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for t in self.tasks.keys() {
            for p in self.same_period_preds(t) {
                if succ.entry(p).or_default().insert(t.as_str()) {
                    *indeg.get_mut(t.as_str()).expect("task") += 1;
                }
            }
        }
        let mut ready: BTreeSet<&str> = indeg
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(k, _)| *k)
            .collect();
        let mut order = Vec::with_capacity(self.tasks.len());
        while let Some(t) = ready.pop_first() {
            order.push(t.to_string());
            for s in succ.get(t).into_iter().flatten() {
                let d = indeg.get_mut(s).expect("task");
                *d -= 1;
                if *d == 0 {
                    ready.insert(s);
                }
            }
        }
        if order.len() != self.tasks.len() {
            let stuck = indeg
                .into_iter()
                .filter(|(k, _)| !order.iter().any(|o| o == k))
                .map(|(k, _)| k.to_string())
                .collect();
            return Err(CycleError(stuck));
        }
        Ok(order)
    }

    /// Earliest source arrival among the same-period ancestors of `buffer`.
    pub fn ancestor_arrival(&self, buffer: &str) -> Option<Clock> {
        let mut best: Option<Clock> = None;
        let mut seen = BTreeSet::new();
        let mut stack = vec![buffer.to_string()];
        while let Some(b) = stack.pop() {
            if !seen.insert(b.clone()) {
                continue;
            }
            let Some(buf) = self.buffers.get(&b) else { continue };
            match &buf.producer {
                None => best = Some(best.map_or(buf.arrival, |v| v.min(buf.arrival))),
                Some(t) => {
                    for r in self.tasks[t].inputs() {
                        if r.delay == 0 {
                            stack.push(r.buffer.clone());
                        }
                    }
                }
            }
        }
        best
    }

    /// Deterministic JSON-lines dump: one task or buffer per line, sorted by id.
    pub fn dump_jsonl(&self) -> String {
        let mut lines: Vec<(String, u8, String)> = Vec::new();
        for t in self.tasks.values() {
            let mut v = serde_json::to_value(t).expect("task serializes");
            v["kind"] = "task".into();
            lines.push((t.id.clone(), 0, v.to_string()));
        }
        for b in self.buffers.values() {
            let mut v = serde_json::to_value(b).expect("buffer serializes");
            v["kind"] = "buffer".into();
            lines.push((b.id.clone(), 1, v.to_string()));
        }
        lines.sort();
        let mut out = String::new();
        for (_, _, l) in lines {
            out.push_str(&l);
            out.push('\n');
        }
        out
    }

    /// Checks single producer and that every edge endpoint exists.
    pub fn check_integrity(&self) -> Result<(), String> {
        for b in self.buffers.values() {
            if let Some(p) = &b.producer {
                let t = self.tasks.get(p).ok_or(format!("{}: producer {p} missing", b.id))?;
                if !t.outputs.contains(&b.id) {
                    return Err(format!("{}: producer {p} does not list it", b.id));
                }
            } else if b.external != External::Source {
                return Err(format!("{} has no producer", b.id));
            }
            for c in &b.consumers {
                let t = self
                    .tasks
                    .get(&c.task)
                    .ok_or(format!("{}: consumer {} missing", b.id, c.task))?;
                let r = BufRef {
                    buffer: b.id.clone(),
                    delay: c.delay,
                };
                if !t.hard_inputs.contains(&r) && !t.optional_inputs.contains(&r) {
                    return Err(format!("{}: consumer {} does not read it", b.id, c.task));
                }
            }
        }
        for t in self.tasks.values() {
            for o in &t.outputs {
                if self.buffers.get(o).and_then(|b| b.producer.as_ref()) != Some(&t.id) {
                    return Err(format!("{}: output {o} not attributed", t.id));
                }
            }
            for r in t.inputs() {
                if !self.buffers.contains_key(&r.buffer) {
                    return Err(format!("{}: input {} missing", t.id, r.buffer));
                }
            }
            if !t.hard_inputs.is_disjoint(&t.optional_inputs) {
                return Err(format!("{}: input both hard and optional", t.id));
            }
        }
        Ok(())
    }
}
