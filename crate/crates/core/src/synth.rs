//! Hand-built and random task graphs on a small synthetic platform, for
//! tests, benches and solver experiments.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use rand::Rng;

use crate::constraints::ConstraintSet;
use crate::graph::{
    ArmAction, BufRef, BufferInstance, Consumer, External, ParamDirSer, TaskArm, TaskGraph,
    TaskInstance, TaskParam,
};
use crate::model::Clock;
use crate::platform::{parse_platform, PlatformDesc};
use crate::rdsl::ast::GuardCond;

pub struct Instance {
    pub graph: TaskGraph,
    pub platform: PlatformDesc,
    pub constraints: ConstraintSet,
}

/// CPUs `c_0..c_{cpus-1}` sharing `L3_0` and `DDR_0`, optionally an
/// accelerator `acc_0` reached over `pcie`. Every CPU has a resident
/// pattern, a pattern that lands in accelerator memory, and a
/// delay-capable round trip through DDR.
pub fn platform_yaml(cpus: usize, accel: bool, capacity: u64) -> String {
    let mut s = String::from("base_clocks: 2\nprocessors:\n");
    for k in 0..cpus {
        let _ = writeln!(
            s,
            "  - {{name: c_{k}, class: cpu, memories: [L3_0, DDR_0{}], local_memory: L2_{k}}}",
            if accel { ", accl3_0" } else { "" }
        );
    }
    if accel {
        s.push_str("  - {name: acc_0, class: accel, memories: [accl3_0]}\n");
    }
    s.push_str("memories:\n");
    let _ = writeln!(s, "  - {{name: L3_0, capacity: {capacity}}}");
    let _ = writeln!(s, "  - {{name: DDR_0, capacity: {}}}", capacity * 4);
    if accel {
        let _ = writeln!(s, "  - {{name: accl3_0, capacity: {capacity}}}");
    }
    for k in 0..cpus {
        let _ = writeln!(s, "  - {{name: L2_{k}, capacity: {capacity}}}");
    }
    s.push_str("ports:\n  - {name: l3_ddr, connects: [L3_0, DDR_0], bandwidth: {bytes: 8, clocks: 1}}\n");
    if accel {
        s.push_str("  - {name: pcie, connects: [L3_0, accl3_0], bandwidth: {bytes: 4, clocks: 1}}\n");
    }
    s.push_str("patterns:\n");
    for k in 0..cpus {
        let delay = format!("big_delay.c_{k}.L3_0.DDR_0.L3_0");
        let mut excl = vec![format!("pipeline.c_{k}.L3_0")];
        let mut oo: Vec<String> = Vec::new();
        if accel {
            excl.push(format!("L2toL2.c_{k}.L3_0.accl3_0"));
            oo.extend((0..cpus).filter(|j| *j != k).map(|j| format!("L2toL2.c_{j}.L3_0.accl3_0")));
        }
        let _ = writeln!(
            s,
            "  - {{name: {delay}, exclusive_define_with: [{}], shares_L2_OO_with: [{}]}}",
            excl.join(", "),
            oo.join(", ")
        );
        let _ = writeln!(s, "  - {{name: pipeline.c_{k}.L3_0}}");
        if accel {
            let _ = writeln!(s, "  - {{name: L2toL2.c_{k}.L3_0.accl3_0}}");
        }
    }
    if accel {
        s.push_str("  - {name: pipeline.acc_0.accl3_0}\n  - {name: L2toL2.acc_0.accl3_0.L3_0}\n");
    }
    s
}

pub fn platform(cpus: usize, accel: bool, capacity: u64) -> PlatformDesc {
    parse_platform(&platform_yaml(cpus, accel, capacity)).expect("synthetic platform parses")
}

/// Patterns a task homed on `procs` may use, resident ones first so that
/// "first usable" picks the cheapest.
pub fn patterns_for(pf: &PlatformDesc, procs: &[String]) -> Vec<String> {
    let mut out: Vec<&crate::platform::Pattern> = pf
        .patterns
        .values()
        .filter(|p| procs.contains(&p.home_processor))
        .collect();
    out.sort_by_key(|p| (p.legs.len(), p.delay_capable(), p.home_processor.clone()));
    out.into_iter().map(|p| p.name.clone()).collect()
}

#[derive(Debug, Clone, Default)]
pub struct Builder {
    tasks: BTreeMap<String, TaskInstance>,
    buffers: BTreeMap<String, BufferInstance>,
    labels: BTreeMap<String, BTreeSet<String>>,
    hyperperiod: Clock,
}

impl Builder {
    pub fn new(hyperperiod: Clock) -> Builder {
        Builder {
            hyperperiod,
            ..Builder::default()
        }
    }

    pub fn task(&mut self, id: &str, runtime: Clock, candidates: &[&str], pf: &PlatformDesc) -> &mut Self {
        let cands: Vec<String> = candidates.iter().map(|s| s.to_string()).collect();
        self.tasks.insert(
            id.to_string(),
            TaskInstance {
                id: id.to_string(),
                modifier: id.to_string(),
                function: Some(format!("{id}_func")),
                index_params: BTreeMap::new(),
                worst_case_runtime: runtime,
                internalsize: 0,
                hard_inputs: BTreeSet::new(),
                optional_inputs: BTreeSet::new(),
                outputs: BTreeSet::new(),
                available_patterns: patterns_for(pf, &cands),
                candidates: cands,
                params: BTreeMap::new(),
                arms: Vec::new(),
                labels: BTreeSet::new(),
            },
        );
        self
    }

    pub fn internal(&mut self, task: &str, bytes: u64) -> &mut Self {
        self.tasks.get_mut(task).expect("task").internalsize = bytes;
        self
    }

    fn buffer(&mut self, id: &str, producer: Option<&str>, size: u64, external: External, arrival: Clock) {
        self.buffers.insert(
            id.to_string(),
            BufferInstance {
                id: id.to_string(),
                stream: id.split('[').next().unwrap_or(id).to_string(),
                producer: producer.map(str::to_string),
                consumers: BTreeSet::new(),
                size_bytes: size,
                delay: 0,
                sibling_group: None,
                external,
                arrival,
            },
        );
        if let Some(p) = producer {
            let t = self.tasks.get_mut(p).expect("producer");
            t.outputs.insert(id.to_string());
            t.params.insert(
                format!("o_{id}"),
                TaskParam {
                    dir: ParamDirSer::Out,
                    buffers: vec![BufRef::now(id)],
                },
            );
        }
    }

    fn read(&mut self, buf: &str, task: &str, delay: u32, optional: bool) {
        let b = self.buffers.get_mut(buf).expect("buffer");
        b.consumers.insert(Consumer {
            task: task.to_string(),
            delay,
        });
        b.delay = b.delay.max(delay);
        if b.external == External::Sink {
            b.external = External::None;
        }
        let t = self.tasks.get_mut(task).expect("consumer");
        let r = BufRef {
            buffer: buf.to_string(),
            delay,
        };
        if optional {
            t.optional_inputs.insert(r.clone());
        } else {
            t.hard_inputs.insert(r.clone());
        }
        t.params.insert(
            format!("i_{buf}"),
            TaskParam {
                dir: ParamDirSer::In,
                buffers: vec![r],
            },
        );
    }

    /// Source buffer `id` arriving at `arrival`, read by `consumer`.
    pub fn source(&mut self, id: &str, consumer: &str, arrival: Clock, size: u64) -> &mut Self {
        if !self.buffers.contains_key(id) {
            self.buffer(id, None, size, External::Source, arrival);
        }
        self.read(id, consumer, 0, false);
        self
    }

    /// Buffer `from.out` written by `from` and read by `to`.
    pub fn edge(&mut self, from: &str, to: &str, size: u64) -> &mut Self {
        self.edge_with(from, to, size, 0, false)
    }

    pub fn edge_with(&mut self, from: &str, to: &str, size: u64, delay: u32, optional: bool) -> &mut Self {
        let id = format!("{from}.out");
        if !self.buffers.contains_key(&id) {
            self.buffer(&id, Some(from), size, External::Sink, 0);
        }
        self.read(&id, to, delay, optional);
        self
    }

    /// Sink `from.out` with no internal consumer.
    pub fn sink(&mut self, from: &str, size: u64) -> &mut Self {
        let id = format!("{from}.out");
        if !self.buffers.contains_key(&id) {
            self.buffer(&id, Some(from), size, External::Sink, 0);
        }
        self
    }

    pub fn label(&mut self, label: &str, buffer: &str) -> &mut Self {
        self.labels.entry(label.to_string()).or_default().insert(buffer.to_string());
        self
    }

    pub fn build(&self) -> TaskGraph {
        let mut tasks = self.tasks.clone();
        for t in tasks.values_mut() {
            let rt = t.worst_case_runtime;
            let optional: Vec<String> = t
                .params
                .iter()
                .filter(|(_, p)| p.buffers.iter().any(|r| t.optional_inputs.contains(r)))
                .map(|(k, _)| k.clone())
                .collect();
            // only the guarded optional input is passed to the call
            let args: Vec<String> = t
                .params
                .keys()
                .filter(|k| !optional.contains(k) || optional.first() == Some(k))
                .cloned()
                .collect();
            let call = ArmAction::Call {
                function: t.function.clone().unwrap_or_default(),
                args,
            };
            t.arms.clear();
            if let Some(first) = optional.first() {
                t.arms.push(TaskArm {
                    cond: GuardCond::NotEmpty(first.clone()),
                    actions: vec![call.clone()],
                    cost: rt,
                });
                let outs: Vec<ArmAction> = t
                    .params
                    .iter()
                    .filter(|(_, p)| p.dir == ParamDirSer::Out)
                    .map(|(k, _)| ArmAction::AssignEmpty { target: k.clone() })
                    .collect();
                t.arms.push(TaskArm {
                    cond: GuardCond::True,
                    actions: outs,
                    cost: rt.min(1),
                });
            } else {
                t.arms.push(TaskArm {
                    cond: GuardCond::True,
                    actions: vec![call],
                    cost: rt,
                });
            }
        }
        let mut graph = TaskGraph {
            tasks,
            buffers: self.buffers.clone(),
            hyperperiod: self.hyperperiod,
            labels: self.labels.clone(),
            warnings: Vec::new(),
        };
        for (l, bufs) in &self.labels {
            for b in bufs {
                if let Some(p) = graph.buffers.get(b).and_then(|b| b.producer.clone()) {
                    graph.tasks.get_mut(&p).expect("producer").labels.insert(l.clone());
                }
            }
        }
        graph
    }
}

/// Knobs for [`random_instance`].
#[derive(Debug, Clone)]
pub struct RandomSpec {
    pub tasks: std::ops::RangeInclusive<usize>,
    pub cpus: std::ops::RangeInclusive<usize>,
    pub accel: bool,
    pub edge_prob: f64,
    pub runtime: std::ops::RangeInclusive<Clock>,
    pub size: std::ops::RangeInclusive<u64>,
    /// Chance a task may run on only one of the CPUs.
    pub pinned_prob: f64,
    pub delay_prob: f64,
    pub optional_prob: f64,
}

impl RandomSpec {
    /// Instances the exhaustive oracle accepts.
    pub fn oracle() -> RandomSpec {
        RandomSpec {
            tasks: 3..=8,
            cpus: 2..=2,
            accel: true,
            edge_prob: 0.3,
            runtime: 1..=30,
            size: 0..=64,
            pinned_prob: 0.2,
            delay_prob: 0.0,
            optional_prob: 0.0,
        }
    }

    /// Wider instances with delays and guarded inputs.
    pub fn suite() -> RandomSpec {
        RandomSpec {
            tasks: 2..=24,
            cpus: 1..=4,
            accel: true,
            edge_prob: 0.2,
            runtime: 1..=200,
            size: 0..=4096,
            pinned_prob: 0.2,
            delay_prob: 0.1,
            optional_prob: 0.15,
        }
    }
}

pub fn random_instance<R: Rng>(rng: &mut R, spec: &RandomSpec) -> Instance {
    let n = rng.gen_range(spec.tasks.clone());
    let cpus = rng.gen_range(spec.cpus.clone());
    let pf = platform(cpus, spec.accel, 1 << 40);
    let cpu_names: Vec<String> = (0..cpus).map(|k| format!("c_{k}")).collect();
    let mut b = Builder::new(0);
    let mut runtimes = Vec::new();
    let mut on_accel = vec![false; n];
    for i in 0..n {
        let id = format!("t{i:02}");
        let rt = rng.gen_range(spec.runtime.clone());
        runtimes.push(rt);
        let cands: Vec<&str> = if spec.accel && rng.gen_bool(0.15) {
            on_accel[i] = true;
            vec!["acc_0"]
        } else if cpus > 1 && rng.gen_bool(spec.pinned_prob) {
            vec![cpu_names[rng.gen_range(0..cpus)].as_str()]
        } else {
            cpu_names.iter().map(String::as_str).collect()
        };
        b.task(&id, rt, &cands, &pf);
    }
    let mut has_pred = vec![false; n];
    for j in 1..n {
        for i in 0..j {
            if rng.gen_bool(spec.edge_prob) {
                let size = rng.gen_range(spec.size.clone());
                let from = format!("t{i:02}");
                let to = format!("t{j:02}");
                b.edge_with(&from, &to, size, 0, rng.gen_bool(spec.optional_prob));
                has_pred[j] = true;
            }
        }
    }
    // a few backward reads from the previous period, CPU producers only
    for j in 0..n {
        if rng.gen_bool(spec.delay_prob) {
            let i = rng.gen_range(j..n);
            if !on_accel[i] && !on_accel[j] {
                let from = format!("t{i:02}");
                let to = format!("t{j:02}");
                let id = format!("{from}.out");
                let taken = b.buffers.get(&id).is_some_and(|x| x.consumers.iter().any(|c| c.task == to));
                if !taken {
                    b.edge_with(&from, &to, 16, 1, false);
                }
            }
        }
    }
    for (j, hp) in has_pred.iter().enumerate() {
        if !hp {
            let id = format!("t{j:02}");
            b.source(&format!("in{j:02}"), &id, 0, 16);
        }
    }
    for i in 0..n {
        let id = format!("t{i:02}");
        if !b.buffers.contains_key(&format!("{id}.out")) {
            b.sink(&id, rng.gen_range(spec.size.clone()));
        }
    }
    let total: Clock = runtimes.iter().sum();
    b.hyperperiod = (total * 4 + 4096).max(64);
    Instance {
        graph: b.build(),
        platform: pf,
        constraints: ConstraintSet::empty(),
    }
}
