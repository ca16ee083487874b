//! Small valid schedules with one deliberate defect each, one per
//! violation kind.

use crate::constraints::{parse_constraints, resolve_references, ConstraintSet};
use crate::graph::TaskGraph;
use crate::model::SymbolTable;
use crate::platform::PlatformDesc;
use crate::rdsl::ast::GuardCond;
use crate::schedule::{baseline_schedule, Objective, Schedule};
use crate::synth::{platform, Builder};

pub struct Injected {
    pub graph: TaskGraph,
    pub platform: PlatformDesc,
    pub constraints: ConstraintSet,
    pub schedule: Schedule,
    /// What was changed, for messages.
    pub defect: String,
}

fn base(graph: TaskGraph, platform: PlatformDesc, constraints: ConstraintSet) -> Injected {
    let schedule = baseline_schedule(&graph, &platform, &constraints, &Objective::MinActivePeriod)
        .expect("injection base is feasible");
    Injected {
        graph,
        platform,
        constraints,
        schedule,
        defect: String::new(),
    }
}

/// `a` on `c_0` feeds `b` one period late; `a.out` sits on a delay-capable
/// pattern whose first leg keeps `b` from defining right after `a`.
fn delayed_pair() -> Injected {
    let pf = platform(1, false, 1 << 30);
    let mut b = Builder::new(1000);
    b.task("a", 10, &["c_0"], &pf)
        .task("b", 10, &["c_0"], &pf)
        .edge_with("a", "b", 16, 1, false)
        .sink("b", 0);
    base(b.build(), pf, ConstraintSet::empty())
}

/// Builds the defective schedule for a violation tag, `None` for an
/// unknown tag.
pub fn inject(kind: &str) -> Option<Injected> {
    let mut inj = match kind {
        "READ_BEFORE_DEFINE" => {
            let pf = platform(2, false, 1 << 30);
            let mut b = Builder::new(100);
            b.task("a", 2, &["c_0"], &pf)
                .task("b", 3, &["c_1"], &pf)
                .edge("a", "b", 0)
                .sink("b", 0);
            let mut inj = base(b.build(), pf, ConstraintSet::empty());
            inj.schedule.start.insert("b".into(), 1);
            inj.defect = "b starts at 1, before a finishes".into();
            inj
        }
        "DOUBLE_DEFINE" => {
            let mut inj = delayed_pair();
            inj.schedule.buffer_to_pattern.insert("a.out".into(), "pipeline.c_0.L3_0".into());
            inj.schedule.transfers.remove("a.out");
            inj.defect = "a.out, read a period later, moved to a single-instance pattern".into();
            inj
        }
        "CAPACITY_OVERFLOW" => {
            let pf = platform(1, false, 1 << 30);
            let mut b = Builder::new(1000);
            b.task("a", 5, &["c_0"], &pf)
                .task("b", 5, &["c_0"], &pf)
                .edge("a", "b", 2_000_000)
                .sink("b", 0);
            let mut inj = base(b.build(), pf, ConstraintSet::empty());
            inj.platform = platform(1, false, 1_000_000);
            inj.defect = "L3_0 shrunk below the 2000000-byte buffer".into();
            inj
        }
        "PROCESSOR_OVERLAP" => {
            let pf = platform(1, false, 1 << 30);
            let mut b = Builder::new(100);
            b.task("a", 5, &["c_0"], &pf)
                .task("b", 5, &["c_0"], &pf)
                .sink("a", 0)
                .sink("b", 0);
            let mut inj = base(b.build(), pf, ConstraintSet::empty());
            inj.schedule.start.insert("b".into(), 2);
            inj.defect = "b moved onto a".into();
            inj
        }
        "PORT_OVERLAP" => {
            let pf = platform(2, true, 1 << 30);
            let mut b = Builder::new(10_000);
            b.task("p0", 10, &["c_0"], &pf)
                .task("p1", 10, &["c_1"], &pf)
                .task("fec", 20, &["acc_0"], &pf)
                .edge("p0", "fec", 400)
                .edge("p1", "fec", 400)
                .sink("fec", 0);
            let mut inj = base(b.build(), pf, ConstraintSet::empty());
            let start = inj.schedule.transfers["p0.out"][0].start;
            inj.schedule.transfers.get_mut("p1.out").expect("leg")[0].start = start;
            inj.defect = "p1.out sent over pcie together with p0.out".into();
            inj
        }
        "EXCLUSIVE_DEFINE_OVERLAP" => {
            let mut inj = delayed_pair();
            inj.schedule.start.insert("b".into(), 10);
            inj.defect = "b defines while a.out is still leaving L3_0".into();
            inj
        }
        "DEADLINE_MISS" => {
            let pf = platform(2, false, 1 << 30);
            let mut b = Builder::new(10);
            b.task("a", 2, &["c_0"], &pf)
                .task("b", 3, &["c_1"], &pf)
                .sink("a", 0)
                .sink("b", 0);
            let text = "apiVersion: rdsl/v0\nkind: timing equality\nmetadata:\n  name: Modem_Period\nspec:\n  constraint: equal\n  variable_name: modem_period\n  unit: clock\n  value: 10\n";
            let docs = parse_constraints(text).expect("constraint parses");
            let cs = resolve_references(&docs, &SymbolTable::new(), &Default::default()).expect("resolves");
            let mut inj = base(b.build(), pf, cs);
            inj.schedule.start.insert("b".into(), 8);
            inj.defect = "b pushed past the period".into();
            inj
        }
        "UNHANDLED_UNDEFINED_INPUT" => {
            let pf = platform(1, false, 1 << 30);
            let mut b = Builder::new(100);
            b.task("a", 5, &["c_0"], &pf)
                .task("b", 5, &["c_0"], &pf)
                .edge_with("a", "b", 16, 0, true)
                .sink("b", 0);
            let mut inj = base(b.build(), pf, ConstraintSet::empty());
            let t = inj.graph.tasks.get_mut("b").expect("b");
            t.arms[0].cond = GuardCond::True;
            inj.defect = "b calls with its optional input unguarded".into();
            inj
        }
        _ => return None,
    };
    inj.schedule.objective_value = crate::schedule::score(&inj.schedule, &inj.graph, &Objective::MinActivePeriod)
        .unwrap_or(inj.schedule.objective_value);
    Some(inj)
}
