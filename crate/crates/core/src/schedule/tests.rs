use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::constraints::{parse_constraints, resolve_references, ConstraintSet};
use crate::model::SymbolTable;
use crate::platform::PlatformDesc;
use crate::synth::{platform, random_instance, Builder, RandomSpec};

fn chain(h: Clock) -> (TaskGraph, PlatformDesc) {
    let pf = platform(1, false, 1 << 30);
    let mut b = Builder::new(h);
    b.task("a", 2, &["c_0"], &pf)
        .task("b", 3, &["c_0"], &pf)
        .task("c", 4, &["c_0"], &pf)
        .edge("a", "b", 0)
        .edge("b", "c", 0)
        .sink("c", 0);
    (b.build(), pf)
}

fn four_independent() -> (TaskGraph, PlatformDesc) {
    let pf = platform(2, false, 1 << 30);
    let mut b = Builder::new(1000);
    for (id, rt) in [("a", 5), ("b", 4), ("c", 3), ("d", 2)] {
        b.task(id, rt, &["c_0", "c_1"], &pf).sink(id, 0);
    }
    (b.build(), pf)
}

fn power() -> SolverConfig {
    SolverConfig {
        seed: 3,
        ..SolverConfig::default()
    }
}

fn none() -> ConstraintSet {
    ConstraintSet::empty()
}

#[test]
fn baseline_chain() {
    let (g, pf) = chain(100);
    let s = baseline_schedule(&g, &pf, &none(), &Objective::MinActivePeriod).unwrap();
    let starts: Vec<Clock> = ["a", "b", "c"].iter().map(|t| s.start[*t]).collect();
    assert_eq!(starts, [0, 2, 5]);
    assert_eq!(s.objective_value, 9);
    assert_eq!(score(&s, &g, &Objective::MinActivePeriod).unwrap(), 9);
}

#[test]
fn empty_graph() {
    let pf = platform(1, false, 1 << 30);
    let g = Builder::new(10).build();
    let s = baseline_schedule(&g, &pf, &none(), &Objective::MinActivePeriod).unwrap();
    assert!(s.start.is_empty());
    assert_eq!(s.objective_value, 0);
    assert_eq!(solve(&g, &pf, &none(), &power()).unwrap().objective_value, 0);
}

#[test]
fn round_robin_then_improve() {
    let (g, pf) = four_independent();
    let base = baseline_schedule(&g, &pf, &none(), &Objective::MinActivePeriod).unwrap();
    assert_eq!(base.task_to_processor["a"], "c_0");
    assert_eq!(base.task_to_processor["b"], "c_1");
    assert_eq!(base.task_to_processor["c"], "c_0");
    assert_eq!(base.objective_value, 8);
    let s = solve(&g, &pf, &none(), &power()).unwrap();
    assert_eq!(s.objective_value, 7);
    let pair = |x: &str| s.task_to_processor[x].clone();
    assert_eq!(pair("a"), pair("d"));
    assert_eq!(pair("b"), pair("c"));
    let oracle = brute_force(&g, &pf, &none(), &Objective::MinActivePeriod).unwrap();
    assert_eq!(oracle.objective_value, 7);
}

fn period_constraint(value: i64) -> ConstraintSet {
    let text = format!(
        "apiVersion: rdsl/v0\nkind: timing equality\nmetadata:\n  name: Modem_Period\nspec:\n  constraint: equal\n  variable_name: modem_period\n  unit: clock\n  value: {value}\n"
    );
    let docs = parse_constraints(&text).unwrap();
    resolve_references(&docs, &SymbolTable::new(), &Default::default()).unwrap()
}

#[test]
fn period_fit() {
    let (g, pf) = chain(9);
    let s = solve(&g, &pf, &period_constraint(9), &power()).unwrap();
    assert_eq!(s.objective_value, 9);
    assert_eq!(s.witness.get("modem_period"), Some(&9));
    let (g, pf) = chain(8);
    match solve(&g, &pf, &period_constraint(8), &power()) {
        Err(SolveError::Infeasible { binding, .. }) => assert_eq!(binding.as_deref(), Some("Modem_Period")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn accelerator_pattern_and_shared_port() {
    let pf = platform(2, true, 1 << 30);
    let mut b = Builder::new(10_000);
    b.task("p0", 10, &["c_0", "c_1"], &pf)
        .task("p1", 10, &["c_0", "c_1"], &pf)
        .task("fec", 20, &["acc_0"], &pf)
        .edge("p0", "fec", 400)
        .edge("p1", "fec", 400)
        .sink("fec", 0);
    let g = b.build();
    let s = solve(&g, &pf, &none(), &power()).unwrap();
    for p in ["p0.out", "p1.out"] {
        let pat = &s.buffer_to_pattern[p];
        assert!(pat.starts_with("L2toL2.c_") && pat.ends_with(".accl3_0"), "{pat}");
    }
    let legs: Vec<&LegTiming> = s.transfers.values().flatten().collect();
    assert_eq!(legs.len(), 2);
    assert!(legs.iter().all(|l| l.port == "pcie" && l.duration == 2 + 100));
    let (x, y) = (legs[0], legs[1]);
    assert!(x.end() <= y.start || y.end() <= x.start);
    // the consumer waits for both transfers
    assert!(s.start["fec"] >= x.end().max(y.end()));
}

#[test]
fn oracle_single_task() {
    let pf = platform(1, false, 1 << 30);
    let mut b = Builder::new(1_000_000);
    b.task("pdsch", 7200, &["c_0"], &pf).sink("pdsch", 0);
    let s = brute_force(&b.build(), &pf, &none(), &Objective::MinActivePeriod).unwrap();
    assert_eq!((s.objective_value, s.start["pdsch"]), (7200, 0));
}

#[test]
fn oracle_refuses_large() {
    let pf = platform(1, false, 1 << 30);
    let mut b = Builder::new(1_000_000);
    for i in 0..11 {
        b.task(&format!("t{i}"), 1, &["c_0"], &pf);
    }
    assert!(matches!(
        brute_force(&b.build(), &pf, &none(), &Objective::MinActivePeriod),
        Err(SolveError::TooLarge(_))
    ));
}

#[test]
fn leading_gap_excluded() {
    let pf = platform(1, false, 1 << 30);
    let mut b = Builder::new(1000);
    b.task("a", 5, &["c_0"], &pf).source("rx", "a", 100, 0).sink("a", 0);
    let g = b.build();
    let s = baseline_schedule(&g, &pf, &none(), &Objective::MinActivePeriod).unwrap();
    assert_eq!(s.start["a"], 100);
    assert_eq!(score(&s, &g, &Objective::MinActivePeriod).unwrap(), 5);
    assert_eq!(score(&s, &g, &Objective::MinLatency(vec![])).unwrap(), 5);
    assert_eq!(
        score(&s, &g, &Objective::MinLatency(vec!["nowhere".into()])),
        Err(SolveError::UnknownSink("nowhere".into()))
    );
}

#[test]
fn deterministic_given_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let inst = random_instance(&mut rng, &RandomSpec::suite());
    let a = solve(&inst.graph, &inst.platform, &inst.constraints, &power()).unwrap();
    let b = solve(&inst.graph, &inst.platform, &inst.constraints, &power()).unwrap();
    assert_eq!(serde_yaml::to_string(&a).unwrap(), serde_yaml::to_string(&b).unwrap());
}

#[test]
fn oracle_bounds_solver_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spec = RandomSpec {
        tasks: 3..=7,
        ..RandomSpec::oracle()
    };
    for _ in 0..12 {
        let inst = random_instance(&mut rng, &spec);
        let obj = Objective::MinActivePeriod;
        let base = baseline_schedule(&inst.graph, &inst.platform, &inst.constraints, &obj).unwrap();
        let s = solve(&inst.graph, &inst.platform, &inst.constraints, &power()).unwrap();
        let o = brute_force(&inst.graph, &inst.platform, &inst.constraints, &obj).unwrap();
        assert!(o.objective_value <= s.objective_value, "{} > {}", o.objective_value, s.objective_value);
        assert!(s.objective_value <= base.objective_value);
    }
}

#[test]
fn latency_objective_orders_by_sink() {
    let pf = platform(1, false, 1 << 30);
    let mut b = Builder::new(1000);
    b.task("slow", 50, &["c_0"], &pf)
        .task("urgent", 5, &["c_0"], &pf)
        .source("rx", "urgent", 0, 0)
        .source("rx2", "slow", 0, 0)
        .sink("slow", 0)
        .sink("urgent", 0);
    let g = b.build();
    let obj = Objective::MinLatency(vec!["urgent.out".into()]);
    let base = baseline_schedule(&g, &pf, &none(), &obj).unwrap();
    assert_eq!(base.objective_value, 55);
    let cfg = SolverConfig {
        objective: obj.clone(),
        ..power()
    };
    let s = solve(&g, &pf, &none(), &cfg).unwrap();
    assert_eq!(s.objective_value, 5);
    assert_eq!(score(&s, &g, &obj).unwrap(), 5);
}
