//! Replays a schedule over consecutive periods and reports every ordering,
//! capacity, exclusivity and deadline violation it finds.
//!
//! Timing is periodic, so it is simulated explicitly only for as many
//! periods as it takes buffers read across periods to reach steady state;
//! guard outcomes are replayed for every period.

mod inject;
mod timeline;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::constraints::{ConstraintError, ConstraintSet, ConstraintSpec};
use crate::elaborate::{expand_siblings, merge_redundant_siblings};
use crate::graph::{ArmAction, ParamDirSer, TaskGraph};
use crate::model::Clock;
use crate::platform::{Pattern, PlatformDesc};
use crate::rdsl::ast::GuardCond;
use crate::schedule::{derive_seed, Schedule};

pub use inject::{inject, Injected};
pub use timeline::{simulate_timeline, Event, EventKind};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationKind {
    ReadBeforeDefine,
    DoubleDefine,
    CapacityOverflow(String),
    ProcessorOverlap,
    PortOverlap,
    ExclusiveDefineOverlap,
    DeadlineMiss(String),
    UnhandledUndefinedInput,
}

impl ViolationKind {
    pub fn tag(&self) -> &'static str {
        match self {
            ViolationKind::ReadBeforeDefine => "READ_BEFORE_DEFINE",
            ViolationKind::DoubleDefine => "DOUBLE_DEFINE",
            ViolationKind::CapacityOverflow(_) => "CAPACITY_OVERFLOW",
            ViolationKind::ProcessorOverlap => "PROCESSOR_OVERLAP",
            ViolationKind::PortOverlap => "PORT_OVERLAP",
            ViolationKind::ExclusiveDefineOverlap => "EXCLUSIVE_DEFINE_OVERLAP",
            ViolationKind::DeadlineMiss(_) => "DEADLINE_MISS",
            ViolationKind::UnhandledUndefinedInput => "UNHANDLED_UNDEFINED_INPUT",
        }
    }

    pub const ALL_TAGS: [&'static str; 8] = [
        "READ_BEFORE_DEFINE",
        "DOUBLE_DEFINE",
        "CAPACITY_OVERFLOW",
        "PROCESSOR_OVERLAP",
        "PORT_OVERLAP",
        "EXCLUSIVE_DEFINE_OVERLAP",
        "DEADLINE_MISS",
        "UNHANDLED_UNDEFINED_INPUT",
    ];
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::CapacityOverflow(m) => write!(f, "CAPACITY_OVERFLOW({m})"),
            ViolationKind::DeadlineMiss(c) => write!(f, "DEADLINE_MISS({c})"),
            k => f.write_str(k.tag()),
        }
    }
}

impl Serialize for ViolationKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Clock within the period.
    pub at: Clock,
    pub period: u64,
    pub subjects: Vec<String>,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PeriodWindow {
    pub period: u64,
    pub start: Clock,
    pub end: Clock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub verdict: Verdict,
    pub periods: u64,
    /// Periods whose timing was laid out explicitly; later periods repeat
    /// the last of them.
    pub timing_periods: u64,
    pub seed: u64,
    pub violations: Vec<Violation>,
    /// Absolute clocks of each explicitly laid out period.
    pub windows: Vec<PeriodWindow>,
    /// Task → how often each guard arm fired.
    pub coverage: BTreeMap<String, Vec<u64>>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn kinds(&self) -> BTreeSet<&'static str> {
        self.violations.iter().map(|v| v.kind.tag()).collect()
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("report serializes")
    }
}

/// The schedule does not describe the graph it is checked against.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("malformed schedule: {0}")]
    Malformed(String),
    #[error("at least one period must be simulated")]
    NoPeriods,
}

fn malformed<T>(msg: impl Into<String>) -> Result<T, VerifyError> {
    Err(VerifyError::Malformed(msg.into()))
}

/// One buffer after sibling merging, with its placement resolved.
pub(crate) struct Placed<'a> {
    pub id: String,
    pub producer: Option<String>,
    pub pattern: Option<&'a Pattern>,
    pub legs: Vec<(String, Clock, Clock)>,
    pub ready: Clock,
    pub size: u64,
}

/// Schedule and graph joined and checked for structural consistency.
pub(crate) struct Layout<'a> {
    pub graph: TaskGraph,
    pub h: Clock,
    pub start: BTreeMap<String, Clock>,
    pub end: BTreeMap<String, Clock>,
    pub proc: BTreeMap<String, String>,
    pub bufs: BTreeMap<String, Placed<'a>>,
}

impl<'a> Layout<'a> {
    pub fn new(schedule: &Schedule, graph: &TaskGraph, platform: &'a PlatformDesc) -> Result<Layout<'a>, VerifyError> {
        if schedule.hyperperiod != graph.hyperperiod {
            return malformed(format!(
                "hyperperiod {} but the graph has {}",
                schedule.hyperperiod, graph.hyperperiod
            ));
        }
        for t in schedule.start.keys().chain(schedule.task_to_processor.keys()) {
            if !graph.tasks.contains_key(t) {
                return malformed(format!("unknown task {t}"));
            }
        }
        let mut start = BTreeMap::new();
        let mut end = BTreeMap::new();
        let mut proc = BTreeMap::new();
        for (id, t) in &graph.tasks {
            let (Some(s), Some(p)) = (schedule.start.get(id), schedule.task_to_processor.get(id)) else {
                return malformed(format!("task {id} is not scheduled"));
            };
            if platform.processor(p).is_none() {
                return malformed(format!("task {id} on unknown processor {p}"));
            }
            if !t.candidates.contains(p) {
                return malformed(format!("task {id} cannot run on {p}"));
            }
            start.insert(id.clone(), *s);
            end.insert(id.clone(), s + t.worst_case_runtime);
            proc.insert(id.clone(), p.clone());
        }

        let expanded = expand_siblings(graph);
        for id in schedule.buffer_to_pattern.keys() {
            if !expanded.buffers.contains_key(id) {
                return malformed(format!("pattern given for unknown buffer {id}"));
            }
        }
        for b in expanded.buffers.values() {
            let Some(p) = &b.producer else { continue };
            let Some(name) = schedule.buffer_to_pattern.get(&b.id) else {
                return malformed(format!("buffer {} has no pattern", b.id));
            };
            let Some(pat) = platform.pattern(name) else {
                return malformed(format!("buffer {} uses unknown pattern {name}", b.id));
            };
            if !expanded.tasks[p].available_patterns.contains(name) {
                return malformed(format!("pattern {name} is not available to {p}"));
            }
            if pat.home_processor != proc[p] {
                return malformed(format!("pattern {name} is homed off {}", proc[p]));
            }
            for c in b.consumer_tasks() {
                let cp = &platform.processors[&proc[c]];
                if !cp.memories.contains(&pat.observing_memory) {
                    return malformed(format!("{c} on {} cannot observe buffer {} in {}", cp.name, b.id, pat.observing_memory));
                }
            }
        }

        let merged = merge_redundant_siblings(&expanded, &schedule.buffer_to_pattern);
        let pattern_of = |id: &str| -> Option<&String> {
            schedule.buffer_to_pattern.get(id).or_else(|| {
                expanded
                    .buffers
                    .values()
                    .find(|b| b.sibling_group.as_deref() == Some(id))
                    .and_then(|b| schedule.buffer_to_pattern.get(&b.id))
            })
        };
        for id in schedule.transfers.keys() {
            if !merged.buffers.contains_key(id) {
                return malformed(format!("transfer for unknown buffer {id}"));
            }
        }
        let mut bufs = BTreeMap::new();
        for b in merged.buffers.values() {
            let placed = match &b.producer {
                None => Placed {
                    id: b.id.clone(),
                    producer: None,
                    pattern: None,
                    legs: Vec::new(),
                    ready: b.arrival,
                    size: b.size_bytes,
                },
                Some(p) => {
                    let name = pattern_of(&b.id).expect("checked above");
                    let pat = &platform.patterns[name];
                    let given = schedule.transfers.get(&b.id).map_or(&[][..], Vec::as_slice);
                    if given.len() != pat.legs.len() {
                        return malformed(format!(
                            "buffer {} has {} transfer legs, pattern {name} needs {}",
                            b.id,
                            given.len(),
                            pat.legs.len()
                        ));
                    }
                    let mut legs = Vec::new();
                    for (l, want) in given.iter().zip(&pat.legs) {
                        let d = platform.leg_latency(want, b.size_bytes);
                        if l.port != want.port || l.duration != d {
                            return malformed(format!(
                                "buffer {} leg on {} for {} clocks, pattern wants {} for {d}",
                                b.id, l.port, l.duration, want.port
                            ));
                        }
                        legs.push((l.port.clone(), l.start, l.end()));
                    }
                    Placed {
                        id: b.id.clone(),
                        producer: Some(p.clone()),
                        pattern: Some(pat),
                        ready: legs.last().map_or(end[p], |l| l.2),
                        legs,
                        size: b.size_bytes,
                    }
                }
            };
            bufs.insert(b.id.clone(), placed);
        }
        Ok(Layout {
            h: graph.hyperperiod,
            graph: merged,
            start,
            end,
            proc,
            bufs,
        })
    }

    /// Last clock any consumer may still read this buffer, relative to the
    /// producer's period; sinks are held to the end of the period.
    pub fn observe_end(&self, id: &str) -> Clock {
        let b = &self.graph.buffers[id];
        let p = &self.bufs[id];
        if b.consumers.is_empty() {
            return p.ready.max(self.h);
        }
        b.consumers
            .iter()
            .map(|c| self.end[&c.task] + c.delay as Clock * self.h)
            .fold(p.ready, Clock::max)
    }

    /// (memory, start, end) occupied by one buffer instance.
    pub fn residency(&self, id: &str) -> Vec<(String, Clock, Clock)> {
        let p = &self.bufs[id];
        let (Some(pat), Some(prod)) = (p.pattern, &p.producer) else {
            return Vec::new();
        };
        let s = self.start[prod];
        let obs = self.observe_end(id);
        let k = p.legs.len();
        if k == 0 {
            return vec![(pat.chain[0].clone(), s, obs)];
        }
        let mut out = vec![(pat.chain[0].clone(), s, p.legs[0].2)];
        for i in 1..k {
            out.push((pat.chain[i].clone(), p.legs[i - 1].1, p.legs[i].2));
        }
        out.push((pat.chain[k].clone(), p.legs[k - 1].1, obs));
        out
    }

    /// Producer start to the end of the first leg, or of the task.
    pub fn define_phase(&self, id: &str) -> Option<(Clock, Clock)> {
        let p = &self.bufs[id];
        let prod = p.producer.as_ref()?;
        p.pattern?;
        Some((self.start[prod], p.legs.first().map_or(self.end[prod], |l| l.2)))
    }
}

/// Constraint document pinning the period to `h`, if there is one.
pub(crate) fn period_document(constraints: &ConstraintSet, h: Clock) -> String {
    constraints
        .docs
        .iter()
        .find(|d| {
            matches!(&d.spec, ConstraintSpec::Value { variable, value, .. }
                if *value == h as i64 && d.targets().contains(variable))
        })
        .map_or_else(|| "hyperperiod".to_string(), |d| d.name.clone())
}

struct Collector {
    seen: BTreeSet<(ViolationKind, Clock, Vec<String>)>,
    out: Vec<Violation>,
}

impl Collector {
    /// Timing repeats every period; keep the first occurrence only.
    fn timing(&mut self, kind: ViolationKind, at: Clock, period: u64, subjects: Vec<String>, detail: String) {
        if self.seen.insert((kind.clone(), at, subjects.clone())) {
            self.out.push(Violation {
                kind,
                at,
                period,
                subjects,
                detail,
            });
        }
    }
}

/// Pairs of intervals that overlap; `items` are (start, end, payload).
fn overlapping<T>(items: &mut [(Clock, Clock, T)], mut f: impl FnMut(&(Clock, Clock, T), &(Clock, Clock, T))) {
    items.sort_by_key(|x| (x.0, x.1));
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            if items[j].0 >= items[i].1 {
                break;
            }
            if items[i].0 < items[i].1 && items[j].0 < items[j].1 {
                f(&items[i], &items[j]);
            }
        }
    }
}

fn check_timing(lay: &Layout, platform: &PlatformDesc, constraints: &ConstraintSet, periods: u64, col: &mut Collector) {
    let h = lay.h;
    let g = &lay.graph;
    let rel = |abs: Clock| (abs % h.max(1), abs / h.max(1));

    for p in 0..periods {
        let off = p * h;
        // hard inputs, including reads of earlier periods
        for (tid, t) in &g.tasks {
            let s = off + lay.start[tid];
            for r in &t.hard_inputs {
                let Some(q) = p.checked_sub(r.delay as u64) else { continue };
                let ready = q * h + lay.bufs[&r.buffer].ready;
                if s < ready {
                    col.timing(
                        ViolationKind::ReadBeforeDefine,
                        lay.start[tid],
                        p,
                        vec![tid.clone(), r.buffer.clone()],
                        format!("{tid} starts at {} but {} is ready at {}", lay.start[tid], r.buffer, ready - off),
                    );
                }
            }
        }
        // transfer legs read what the previous step wrote
        for b in lay.bufs.values() {
            let Some(prod) = &b.producer else { continue };
            let mut prev = lay.end[prod];
            for (port, s, e) in &b.legs {
                if *s < prev {
                    col.timing(
                        ViolationKind::ReadBeforeDefine,
                        *s,
                        p,
                        vec![b.id.clone(), port.clone()],
                        format!("leg on {port} starts at {s} before its data is ready at {prev}"),
                    );
                }
                prev = *e;
            }
        }
    }

    // the next period's define must not land on a live single-instance buffer
    if periods > 1 {
        for b in lay.bufs.values() {
            let (Some(prod), Some(pat)) = (&b.producer, b.pattern) else { continue };
            if pat.delay_capable() {
                continue;
            }
            let obs = lay.observe_end(&b.id);
            let next = lay.start[prod] + h;
            if obs > next {
                col.timing(
                    ViolationKind::DoubleDefine,
                    lay.start[prod],
                    1,
                    vec![b.id.clone(), prod.clone()],
                    format!("redefined at {next} while still read until {obs} on {}", pat.name),
                );
            }
        }
    }

    // processors
    let mut per_proc: BTreeMap<&str, Vec<(Clock, Clock, &str)>> = BTreeMap::new();
    for p in 0..periods {
        for (tid, s) in &lay.start {
            per_proc
                .entry(lay.proc[tid].as_str())
                .or_default()
                .push((p * h + s, p * h + lay.end[tid], tid.as_str()));
        }
    }
    for (proc, items) in &mut per_proc {
        overlapping(items, |a, b| {
            let (at, period) = rel(b.0);
            col.timing(
                ViolationKind::ProcessorOverlap,
                at,
                period,
                vec![proc.to_string(), a.2.to_string(), b.2.to_string()],
                format!("{} and {} overlap on {proc}", a.2, b.2),
            );
        });
    }

    // ports, including legs that contend through shared sets
    let mut legs: Vec<(Clock, Clock, (&Placed, usize))> = Vec::new();
    for p in 0..periods {
        for b in lay.bufs.values() {
            for (i, l) in b.legs.iter().enumerate() {
                legs.push((p * h + l.1, p * h + l.2, (b, i)));
            }
        }
    }
    overlapping(&mut legs, |x, y| {
        let ((bx, ix), (by, iy)) = (x.2, y.2);
        if std::ptr::eq(bx, by) {
            return;
        }
        let (px, py) = (bx.pattern.expect("legs need a pattern"), by.pattern.expect("legs need a pattern"));
        let same_port = bx.legs[ix].0 == by.legs[iy].0;
        let contend = platform.contending_legs(px, py).contains(&(ix, iy))
            || platform.contending_legs(py, px).contains(&(iy, ix));
        if same_port || contend {
            let (at, period) = rel(y.0);
            let port = by.legs[iy].0.clone();
            col.timing(
                ViolationKind::PortOverlap,
                at,
                period,
                vec![port.clone(), bx.id.clone(), by.id.clone()],
                format!("transfers of {} and {} overlap on {port}", bx.id, by.id),
            );
        }
    });

    // exclusive define phases
    let mut defs: Vec<(Clock, Clock, &Placed)> = Vec::new();
    for p in 0..periods {
        for b in lay.bufs.values() {
            if let Some((s, e)) = lay.define_phase(&b.id) {
                defs.push((p * h + s, p * h + e, b));
            }
        }
    }
    overlapping(&mut defs, |x, y| {
        let (bx, by) = (x.2, y.2);
        if bx.producer == by.producer {
            return;
        }
        let (px, py) = (bx.pattern.expect("defined"), by.pattern.expect("defined"));
        if px.exclusive_define_with.contains(&py.name) || py.exclusive_define_with.contains(&px.name) {
            let (at, period) = rel(y.0);
            col.timing(
                ViolationKind::ExclusiveDefineOverlap,
                at,
                period,
                vec![bx.id.clone(), by.id.clone()],
                format!("{} and {} define at once on exclusive patterns", bx.id, by.id),
            );
        }
    });

    // memory occupancy, swept over interval endpoints
    let mut events: BTreeMap<String, Vec<(Clock, i128)>> = BTreeMap::new();
    for p in 0..periods {
        let off = p * h;
        for b in lay.bufs.values() {
            for (m, s, e) in lay.residency(&b.id) {
                if e > s && b.size > 0 {
                    let ev = events.entry(m).or_default();
                    ev.push((off + s, b.size as i128));
                    ev.push((off + e, -(b.size as i128)));
                }
            }
        }
        for (tid, t) in &g.tasks {
            let local = platform.processors[&lay.proc[tid]].local_memory.clone();
            if let Some(m) = local {
                if t.internalsize > 0 && t.worst_case_runtime > 0 {
                    let ev = events.entry(m).or_default();
                    ev.push((off + lay.start[tid], t.internalsize as i128));
                    ev.push((off + lay.end[tid], -(t.internalsize as i128)));
                }
            }
        }
    }
    for (m, mut ev) in events {
        let cap = platform.memories.get(&m).map_or(0, |x| x.capacity) as i128;
        ev.sort_unstable();
        let mut cur = 0i128;
        let mut reported = BTreeSet::new();
        for (at, d) in ev {
            cur += d;
            if cur > cap && reported.insert(at / h.max(1)) {
                let (rel_at, period) = rel(at);
                col.timing(
                    ViolationKind::CapacityOverflow(m.clone()),
                    rel_at,
                    period,
                    vec![m.clone()],
                    format!("{cur} bytes resident, capacity {cap}"),
                );
            }
        }
    }

    // everything fits in the period
    let doc = period_document(constraints, h);
    for (tid, e) in &lay.end {
        if *e > h {
            col.timing(
                ViolationKind::DeadlineMiss(doc.clone()),
                *e,
                0,
                vec![tid.clone()],
                format!("{tid} finishes at {e}, period is {h}"),
            );
        }
    }
    for b in lay.bufs.values() {
        if let Some((port, _, e)) = b.legs.last() {
            if *e > h {
                col.timing(
                    ViolationKind::DeadlineMiss(doc.clone()),
                    *e,
                    0,
                    vec![b.id.clone(), port.clone()],
                    format!("transfer of {} finishes at {e}, period is {h}", b.id),
                );
            }
        }
    }
}

fn check_constraints(lay: &Layout, schedule: &Schedule, constraints: &ConstraintSet, col: &mut Collector) {
    let mut assign: BTreeMap<String, i64> = schedule.witness.clone();
    for (k, r) in &constraints.resolved {
        if let crate::constraints::TargetRole::Fixed(v) = r {
            assign.insert(k.clone(), *v);
        }
    }
    for label in constraints.timing_labels() {
        let v = lay
            .graph
            .labels
            .get(label)
            .into_iter()
            .flatten()
            .filter_map(|b| lay.bufs.get(b).map(|p| p.ready))
            .max()
            .unwrap_or(0);
        assign.insert(label.to_string(), v as i64);
    }
    for d in &constraints.docs {
        let single = ConstraintSet {
            docs: vec![d.clone()],
            resolved: constraints.resolved.clone(),
        };
        let found = match single.check_satisfaction(&assign) {
            Ok(vs) => vs.into_iter().map(|v| v.detail).collect(),
            Err(ConstraintError::MissingAssignment(v)) => vec![format!("no value for {v}")],
            Err(e) => vec![e.to_string()],
        };
        for detail in found {
            col.timing(ViolationKind::DeadlineMiss(d.name.clone()), 0, 0, vec![d.name.clone()], detail);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Data,
    Empty,
    Undefined,
}

const DRAW: [Status; 3] = [Status::Data, Status::Empty, Status::Undefined];

/// Guard arm each task takes in `period`, with the statuses behind it.
/// Optional inputs are drawn from a stream seeded by (seed, period) alone.
struct Replay<'l, 'a> {
    lay: &'l Layout<'a>,
    order: Vec<String>,
    history: Vec<BTreeMap<String, Status>>,
}

impl Replay<'_, '_> {
    fn period(&mut self, seed: u64, p: u64, coverage: &mut BTreeMap<String, Vec<u64>>, col: &mut Collector) {
        let lay = self.lay;
        let g = &lay.graph;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, p));
        let mut now: BTreeMap<String, Status> = BTreeMap::new();
        for tid in &self.order {
            let t = &g.tasks[tid];
            let input = |r: &crate::graph::BufRef, now: &BTreeMap<String, Status>| -> Status {
                let b = &g.buffers[&r.buffer];
                if b.producer.is_none() {
                    return Status::Data;
                }
                let Some(q) = p.checked_sub(r.delay as u64) else {
                    return Status::Empty;
                };
                let hist = if q == p { now } else { &self.history[q as usize] };
                hist.get(&r.buffer).copied().unwrap_or(Status::Undefined)
            };
            let mut param_status: BTreeMap<&str, Status> = BTreeMap::new();
            for (name, prm) in &t.params {
                if prm.dir != ParamDirSer::In {
                    continue;
                }
                let mut st = Status::Data;
                for r in &prm.buffers {
                    let mut s = input(r, &now);
                    if t.optional_inputs.contains(r) {
                        s = s.max(DRAW[rng.gen_range(0..3)]);
                        // a same-period value still in flight is undefined
                        let b = &lay.bufs[&r.buffer];
                        if r.delay == 0 && b.producer.is_some() && lay.start[tid] < b.ready {
                            s = Status::Undefined;
                        }
                    }
                    st = st.max(s);
                }
                param_status.insert(name, st);
            }
            let status = |n: &str| param_status.get(n).copied().unwrap_or(Status::Undefined);
            let arm = t.arms.iter().position(|a| match &a.cond {
                GuardCond::True => true,
                GuardCond::NotEmpty(x) => status(x) == Status::Data,
                GuardCond::IsEmpty(x) => status(x) == Status::Empty,
            });
            let mut out: BTreeMap<&str, Status> = BTreeMap::new();
            if let Some(a) = arm {
                coverage.entry(tid.clone()).or_insert_with(|| vec![0; t.arms.len()])[a] += 1;
                for act in &t.arms[a].actions {
                    match act {
                        ArmAction::Call { args, .. } => {
                            let bad: Vec<&String> = args
                                .iter()
                                .filter(|x| param_status.contains_key(x.as_str()) && status(x) == Status::Undefined)
                                .collect();
                            for x in &bad {
                                col.out.push(Violation {
                                    kind: ViolationKind::UnhandledUndefinedInput,
                                    at: lay.start[tid],
                                    period: p,
                                    subjects: vec![tid.clone(), x.to_string()],
                                    detail: format!("arm {a} of {tid} uses {x} while it is undefined"),
                                });
                            }
                            let result = if bad.is_empty() { Status::Data } else { Status::Undefined };
                            for x in args {
                                if t.params.get(x).is_some_and(|q| q.dir == ParamDirSer::Out) {
                                    out.insert(x, result);
                                }
                            }
                        }
                        ArmAction::ErrorMessage { target } => {
                            out.insert(target, Status::Data);
                        }
                        ArmAction::AssignEmpty { target } => {
                            out.insert(target, Status::Empty);
                        }
                    }
                }
            } else {
                coverage.entry(tid.clone()).or_insert_with(|| vec![0; t.arms.len()]);
            }
            for (name, prm) in &t.params {
                if prm.dir == ParamDirSer::Out {
                    let s = out.get(name.as_str()).copied().unwrap_or(Status::Empty);
                    for r in &prm.buffers {
                        now.insert(r.buffer.clone(), s);
                    }
                }
            }
            for o in &t.outputs {
                now.entry(o.clone()).or_insert(Status::Empty);
            }
        }
        self.history.push(now);
    }
}

/// Replays `periods` periods of `schedule`. Structural mismatches between
/// schedule and graph are errors; everything else is a reported violation.
pub fn verify(
    schedule: &Schedule,
    graph: &TaskGraph,
    platform: &PlatformDesc,
    constraints: &ConstraintSet,
    periods: u64,
    seed: u64,
) -> Result<VerifyReport, VerifyError> {
    if periods == 0 {
        return Err(VerifyError::NoPeriods);
    }
    let lay = Layout::new(schedule, graph, platform)?;
    let max_delay = lay.graph.buffers.values().map(|b| b.delay as u64).max().unwrap_or(0);
    let timing_periods = periods.min(max_delay + 2);
    let mut col = Collector {
        seen: BTreeSet::new(),
        out: Vec::new(),
    };
    check_timing(&lay, platform, constraints, timing_periods, &mut col);
    check_constraints(&lay, schedule, constraints, &mut col);

    let order = lay
        .graph
        .topo_order()
        .map_err(|e| VerifyError::Malformed(format!("same-period cycle through {:?}", e.0)))?;
    let mut replay = Replay {
        lay: &lay,
        order,
        history: Vec::new(),
    };
    let mut coverage = BTreeMap::new();
    for p in 0..periods {
        replay.period(seed, p, &mut coverage, &mut col);
    }

    let mut windows = Vec::new();
    if let Some((a, b)) = crate::schedule::active_window(schedule, graph) {
        for p in 0..timing_periods {
            windows.push(PeriodWindow {
                period: p,
                start: p * lay.h + a,
                end: p * lay.h + b,
            });
        }
    }
    let mut violations = col.out;
    violations.sort_by(|x, y| (x.period, x.at, &x.kind, &x.subjects).cmp(&(y.period, y.at, &y.kind, &y.subjects)));
    Ok(VerifyReport {
        verdict: if violations.is_empty() { Verdict::Pass } else { Verdict::Fail },
        periods,
        timing_periods,
        seed,
        violations,
        windows,
        coverage,
    })
}

#[cfg(test)]
mod tests;
