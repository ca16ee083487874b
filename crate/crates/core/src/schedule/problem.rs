//! Index-based view of a graph and platform used by the placement loop.

use std::collections::{BTreeMap, BTreeSet};

use crate::constraints::ConstraintSet;
use crate::elaborate::expand_siblings;
use crate::graph::{External, TaskGraph};
use crate::model::Clock;
use crate::platform::{PlatformDesc, ProcClass};

use super::{Objective, SolveError};

pub(crate) const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub(crate) struct TaskInfo {
    pub id: String,
    pub rt: Clock,
    pub internal: u64,
    pub cands: Vec<usize>,
    /// Same-period hard input buffers.
    pub hard: Vec<usize>,
    /// Every buffer read, any delay, hard or optional.
    pub reads: Vec<usize>,
    pub preds: Vec<usize>,
    pub succs: Vec<usize>,
    pub outputs: Vec<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct BufInfo {
    pub id: String,
    pub producer: usize,
    /// Consumer task and the delay it reads with.
    pub consumers: Vec<(usize, u32)>,
    pub size: u64,
    pub group: Option<String>,
    pub arrival: Clock,
    /// Producer's available patterns, in metadata order, that the buffer
    /// may use (delay-capable where needed).
    pub avail: Vec<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct LegInfo {
    pub port: usize,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct PatInfo {
    pub name: String,
    pub home: usize,
    pub chain: Vec<usize>,
    pub legs: Vec<LegInfo>,
    /// Processor index → can read the observing memory.
    pub vis: Vec<bool>,
}

#[derive(Debug, Clone)]
pub(crate) struct PortInfo {
    pub name: String,
    pub base: Clock,
    pub bytes: u64,
    pub clocks: u64,
}

/// Immutable problem instance shared by every search thread.
#[derive(Debug, Clone)]
pub struct Problem {
    pub graph: TaskGraph,
    pub h: Clock,
    pub objective: Objective,
    pub constraints: ConstraintSet,
    pub(crate) tasks: Vec<TaskInfo>,
    pub(crate) bufs: Vec<BufInfo>,
    pub(crate) pats: Vec<PatInfo>,
    pub(crate) proc_names: Vec<String>,
    pub(crate) proc_cpu: Vec<bool>,
    pub(crate) proc_local: Vec<usize>,
    pub(crate) ports: Vec<PortInfo>,
    pub(crate) mem_names: Vec<String>,
    pub(crate) mem_cap: Vec<u64>,
    pub(crate) excl: Vec<Vec<bool>>,
    pub(crate) contend: Vec<Vec<Vec<(usize, usize)>>>,
    /// Buffers measured by the latency objective, with their source arrival.
    pub(crate) sinks: Vec<(usize, Clock)>,
    pub(crate) labels: Vec<(String, Vec<usize>)>,
    /// Witness found without looking at the schedule, when no constraint
    /// mixes free variables with timing labels.
    pub(crate) static_witness: Option<Option<BTreeMap<String, i64>>>,
    pub(crate) fixed: BTreeMap<String, i64>,
    pub(crate) period_doc: Option<String>,
    pub(crate) topo: Vec<usize>,
}

pub(crate) fn resolve_sinks(graph: &TaskGraph, sinks: &[String]) -> Result<Vec<String>, SolveError> {
    if sinks.is_empty() {
        return Ok(graph
            .buffers
            .values()
            .filter(|b| b.external == External::Sink)
            .map(|b| b.id.clone())
            .collect());
    }
    let mut out = BTreeSet::new();
    for s in sinks {
        if graph.buffers.contains_key(s) {
            out.insert(s.clone());
            continue;
        }
        let before = out.len();
        for b in graph.buffers.values() {
            let stream_tail = b.stream.rsplit('/').next().unwrap_or(&b.stream);
            if b.stream == *s || stream_tail == s || b.id.starts_with(&format!("{s}[")) {
                out.insert(b.id.clone());
            }
        }
        if out.len() == before {
            return Err(SolveError::UnknownSink(s.clone()));
        }
    }
    Ok(out.into_iter().collect())
}

impl Problem {
    /// Builds the instance from an unexpanded graph; siblings are split here.
    pub fn new(
        graph: &TaskGraph,
        platform: &PlatformDesc,
        constraints: &ConstraintSet,
        objective: &Objective,
    ) -> Result<Problem, SolveError> {
        let graph = expand_siblings(graph);
        let topo_ids = graph.topo_order().map_err(|e| SolveError::Cycle(e.0))?;

        let proc_names: Vec<String> = platform.processors.keys().cloned().collect();
        let pidx: BTreeMap<&str, usize> =
            proc_names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let mem_names: Vec<String> = platform.memories.keys().cloned().collect();
        let midx: BTreeMap<&str, usize> =
            mem_names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let port_names: Vec<String> = platform.ports.keys().cloned().collect();
        let portidx: BTreeMap<&str, usize> =
            port_names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let pat_names: Vec<String> = platform.patterns.keys().cloned().collect();
        let patidx: BTreeMap<&str, usize> =
            pat_names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();

        let procs: Vec<_> = platform.processors.values().collect();
        let proc_cpu = procs.iter().map(|p| p.class == ProcClass::Cpu).collect();
        let proc_local = procs
            .iter()
            .map(|p| p.local_memory.as_deref().map_or(NONE, |m| midx[m]))
            .collect();
        let ports = platform
            .ports
            .values()
            .map(|p| PortInfo {
                name: p.name.clone(),
                base: p.base_clocks.unwrap_or(platform.base_clocks),
                bytes: p.bandwidth.bytes,
                clocks: p.bandwidth.clocks,
            })
            .collect();
        let pats: Vec<PatInfo> = platform
            .patterns
            .values()
            .map(|p| PatInfo {
                name: p.name.clone(),
                home: pidx[p.home_processor.as_str()],
                chain: p.chain.iter().map(|m| midx[m.as_str()]).collect(),
                legs: p
                    .legs
                    .iter()
                    .map(|l| LegInfo {
                        port: portidx[l.port.as_str()],
                        from: midx[l.from.as_str()],
                        to: midx[l.to.as_str()],
                    })
                    .collect(),
                vis: procs
                    .iter()
                    .map(|pr| pr.memories.contains(&p.observing_memory))
                    .collect(),
            })
            .collect();
        let np = pats.len();
        let mut excl = vec![vec![false; np]; np];
        let mut contend = vec![vec![Vec::new(); np]; np];
        for (a, pa) in platform.patterns.values().enumerate() {
            for m in &pa.exclusive_define_with {
                excl[a][patidx[m.as_str()]] = true;
            }
            for (b, pb) in platform.patterns.values().enumerate() {
                contend[a][b] = platform.contending_legs(pa, pb);
            }
        }

        let tids: Vec<&str> = graph.tasks.keys().map(String::as_str).collect();
        let tidx: BTreeMap<&str, usize> = tids.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let bids: Vec<&str> = graph.buffers.keys().map(String::as_str).collect();
        let bidx: BTreeMap<&str, usize> = bids.iter().enumerate().map(|(i, n)| (*n, i)).collect();

        let mut bufs = Vec::with_capacity(bids.len());
        for b in graph.buffers.values() {
            let producer = b.producer.as_deref().map_or(NONE, |p| tidx[p]);
            let avail = match &b.producer {
                None => Vec::new(),
                Some(p) => graph.tasks[p]
                    .available_patterns
                    .iter()
                    .filter_map(|n| patidx.get(n.as_str()).copied())
                    .filter(|i| b.delay == 0 || platform.patterns[&pat_names[*i]].delay_capable())
                    .collect(),
            };
            bufs.push(BufInfo {
                id: b.id.clone(),
                producer,
                consumers: b.consumers.iter().map(|c| (tidx[c.task.as_str()], c.delay)).collect(),
                size: b.size_bytes,
                group: b.sibling_group.clone(),
                arrival: b.arrival,
                avail,
            });
        }

        let mut tasks = Vec::with_capacity(tids.len());
        for t in graph.tasks.values() {
            let hard: Vec<usize> = t
                .hard_inputs
                .iter()
                .filter(|r| r.delay == 0)
                .map(|r| bidx[r.buffer.as_str()])
                .collect();
            let mut reads: Vec<usize> = t.inputs().map(|r| bidx[r.buffer.as_str()]).collect();
            reads.sort_unstable();
            reads.dedup();
            let preds: BTreeSet<usize> = graph
                .same_period_preds(&t.id)
                .into_iter()
                .map(|p| tidx[p])
                .collect();
            tasks.push(TaskInfo {
                id: t.id.clone(),
                rt: t.worst_case_runtime,
                internal: t.internalsize,
                cands: t
                    .candidates
                    .iter()
                    .filter_map(|c| pidx.get(c.as_str()).copied())
                    .collect(),
                hard,
                reads,
                preds: preds.into_iter().collect(),
                succs: Vec::new(),
                outputs: t.outputs.iter().map(|o| bidx[o.as_str()]).collect(),
            });
        }
        for i in 0..tasks.len() {
            for p in tasks[i].preds.clone() {
                tasks[p].succs.push(i);
            }
        }
        for t in &tasks {
            if t.cands.is_empty() {
                return Err(SolveError::Infeasible {
                    cause: format!("task {} has no candidate processor", t.id),
                    binding: Some(t.id.clone()),
                });
            }
        }

        let sinks = match objective {
            Objective::MinActivePeriod => Vec::new(),
            Objective::MinLatency(names) => resolve_sinks(&graph, names)?
                .into_iter()
                .map(|id| {
                    let a = graph.ancestor_arrival(&id).unwrap_or(0);
                    (bidx[id.as_str()], a)
                })
                .collect(),
        };
        let labels = graph
            .labels
            .iter()
            .map(|(l, set)| {
                (
                    l.clone(),
                    set.iter().filter_map(|b| bidx.get(b.as_str()).copied()).collect(),
                )
            })
            .collect();

        let fixed: BTreeMap<String, i64> = constraints
            .resolved
            .iter()
            .filter_map(|(k, r)| match r {
                crate::constraints::TargetRole::Fixed(v) => Some((k.clone(), *v)),
                _ => None,
            })
            .collect();
        let labelled: BTreeSet<&str> = constraints.timing_labels().into_iter().collect();
        let free: BTreeSet<&str> = constraints.free_variables().into_iter().collect();
        let mixed = constraints.docs.iter().any(|d| {
            let t = d.targets();
            t.iter().any(|x| labelled.contains(x.as_str())) && t.iter().any(|x| free.contains(x.as_str()))
        });
        let h = graph.hyperperiod;
        let static_witness = if mixed {
            None
        } else {
            let w = constraints
                .find_witness(&fixed, h as i64)
                .map_err(|e| SolveError::Infeasible {
                    cause: e.to_string(),
                    binding: None,
                })?;
            Some(w)
        };
        let period_doc = constraints
            .docs
            .iter()
            .find(|d| {
                matches!(&d.spec, crate::constraints::ConstraintSpec::Value { variable, value, .. }
                    if *value == h as i64 && d.targets().contains(variable))
            })
            .map(|d| d.name.clone());

        let topo = topo_ids.iter().map(|t| tidx[t.as_str()]).collect();
        Ok(Problem {
            h,
            objective: objective.clone(),
            constraints: constraints.clone(),
            tasks,
            bufs,
            pats,
            proc_names,
            proc_cpu,
            proc_local,
            ports,
            mem_names,
            mem_cap: platform.memories.values().map(|m| m.capacity).collect(),
            excl,
            contend,
            sinks,
            labels,
            static_witness,
            fixed,
            period_doc,
            topo,
            graph,
        })
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    pub(crate) fn leg_latency(&self, leg: &LegInfo, size: u64) -> Clock {
        let p = &self.ports[leg.port];
        let stream = (size as u128 * p.clocks as u128).div_ceil(p.bytes as u128);
        p.base + stream as Clock
    }

    /// Pattern `pat` is usable for buffer `b` given processor choices.
    pub(crate) fn pattern_ok(&self, b: usize, pat: usize, proc_of: &[usize]) -> bool {
        let buf = &self.bufs[b];
        let p = &self.pats[pat];
        if p.home != proc_of[buf.producer] {
            return false;
        }
        buf.consumers
            .iter()
            .all(|(c, _)| proc_of[*c] == NONE || p.vis[proc_of[*c]])
    }

    pub(crate) fn first_ok_pattern(&self, b: usize, proc_of: &[usize]) -> Option<usize> {
        self.bufs[b]
            .avail
            .iter()
            .copied()
            .find(|p| self.pattern_ok(b, *p, proc_of))
    }

    /// Has any timing-label constraint that start slack could influence.
    pub(crate) fn uses_labels(&self) -> bool {
        !self.constraints.timing_labels().is_empty()
    }
}
