//! Event trace of one period, the raw material for timing charts.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::graph::TaskGraph;
use crate::model::Clock;
use crate::platform::PlatformDesc;
use crate::schedule::Schedule;

use super::{Layout, VerifyError};

/// Ordered so that, at one clock, whatever ends comes before whatever
/// begins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    TransferFinish,
    TaskFinish,
    BufferDefine,
    BufferObserve,
    TaskStart,
    TransferStart,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Event {
    pub at: Clock,
    pub kind: EventKind,
    /// Task or buffer id.
    pub subject: String,
    /// Processor, port or memory.
    pub resource: String,
    /// Guard arm for task events, leg index for transfers, reader for
    /// observes.
    pub detail: String,
}

impl Event {
    pub fn is_task(&self) -> bool {
        matches!(self.kind, EventKind::TaskStart | EventKind::TaskFinish)
    }
}

/// Events of period `period` at absolute clocks. `outcomes` maps tasks to
/// the guard arm they took; a task with an outcome finishes after that
/// arm's cost, otherwise after its worst case.
pub fn simulate_timeline(
    schedule: &Schedule,
    graph: &TaskGraph,
    platform: &PlatformDesc,
    period: u64,
    outcomes: &BTreeMap<String, usize>,
) -> Result<Vec<Event>, VerifyError> {
    let lay = Layout::new(schedule, graph, platform)?;
    let off = period * lay.h;
    let mut out = Vec::new();
    for (tid, t) in &lay.graph.tasks {
        let s = off + lay.start[tid];
        let arm = outcomes.get(tid).copied();
        let cost = arm
            .and_then(|a| t.arms.get(a))
            .map_or(t.worst_case_runtime, |a| a.cost);
        let detail = arm.map(|a| format!("arm {a}")).unwrap_or_default();
        let resource = lay.proc[tid].clone();
        out.push(Event {
            at: s,
            kind: EventKind::TaskStart,
            subject: tid.clone(),
            resource: resource.clone(),
            detail: detail.clone(),
        });
        out.push(Event {
            at: s + cost,
            kind: EventKind::TaskFinish,
            subject: tid.clone(),
            resource,
            detail,
        });
    }
    for b in lay.bufs.values() {
        let Some(pat) = b.pattern else { continue };
        for (i, (port, s, e)) in b.legs.iter().enumerate() {
            for (kind, at) in [(EventKind::TransferStart, s), (EventKind::TransferFinish, e)] {
                out.push(Event {
                    at: off + at,
                    kind,
                    subject: b.id.clone(),
                    resource: port.clone(),
                    detail: format!("leg {i}"),
                });
            }
        }
        out.push(Event {
            at: off + b.ready,
            kind: EventKind::BufferDefine,
            subject: b.id.clone(),
            resource: pat.observing_memory.clone(),
            detail: String::new(),
        });
        for c in &lay.graph.buffers[&b.id].consumers {
            out.push(Event {
                at: off + c.delay as Clock * lay.h + lay.start[&c.task],
                kind: EventKind::BufferObserve,
                subject: b.id.clone(),
                resource: pat.observing_memory.clone(),
                detail: c.task.clone(),
            });
        }
    }
    out.sort();
    Ok(out)
}
