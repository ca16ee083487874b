use std::collections::BTreeMap;

use proptest::prelude::*;

use super::*;
use crate::constraints::ConstraintSet;
use crate::graph::TaskGraph;
use crate::platform::PlatformDesc;
use crate::schedule::{baseline_schedule, solve, Objective, Schedule, SolverConfig};
use crate::synth::{platform, Builder};
use crate::verify::{simulate_timeline, verify};

fn chain() -> (TaskGraph, PlatformDesc, Schedule) {
    let pf = platform(1, false, 1 << 30);
    let mut b = Builder::new(100);
    b.task("a", 2, &["c_0"], &pf)
        .task("b", 3, &["c_0"], &pf)
        .task("c", 4, &["c_0"], &pf)
        .edge("a", "b", 0)
        .edge("b", "c", 0)
        .sink("c", 0);
    let g = b.build();
    let s = baseline_schedule(&g, &pf, &ConstraintSet::empty(), &Objective::MinActivePeriod).unwrap();
    (g, pf, s)
}

#[test]
fn config_lists_chain_rows() {
    let (_, _, s) = chain();
    let text = emit_schedule_config(&s);
    assert!(text.starts_with("configVersion: 1\n"), "{text}");
    let doc: serde_yaml::Value = serde_yaml::from_str(&text).unwrap();
    let rows = doc["processors"]["c_0"].as_sequence().unwrap();
    let got: Vec<(String, u64)> = rows
        .iter()
        .map(|r| (r["task"].as_str().unwrap().to_string(), r["start"].as_u64().unwrap()))
        .collect();
    assert_eq!(got, [("a".into(), 0), ("b".into(), 2), ("c".into(), 5)]);
    assert_eq!(emit_schedule_config(&s), text);
}

#[test]
fn config_round_trip_with_transfers() {
    let pf = platform(2, true, 1 << 30);
    let mut b = Builder::new(10_000);
    b.task("p0", 10, &["c_0", "c_1"], &pf)
        .task("p1", 10, &["c_0", "c_1"], &pf)
        .task("fec", 20, &["acc_0"], &pf)
        .edge("p0", "fec", 400)
        .edge("p1", "fec", 400)
        .sink("fec", 0);
    let g = b.build();
    let cs = ConstraintSet::empty();
    let s = solve(&g, &pf, &cs, &SolverConfig { seed: 4, ..SolverConfig::default() }).unwrap();
    let back = parse_schedule_config(&emit_schedule_config(&s)).unwrap();
    assert_eq!(back, s);
    let a = verify(&s, &g, &pf, &cs, 100, 1).unwrap();
    let b = verify(&back, &g, &pf, &cs, 100, 1).unwrap();
    assert_eq!(a, b);
}

#[test]
fn config_keeps_delay_pattern_name() {
    let pf = platform(1, false, 1 << 30);
    let mut b = Builder::new(1000);
    b.task("a", 10, &["c_0"], &pf)
        .task("b", 10, &["c_0"], &pf)
        .edge_with("a", "b", 16, 1, false)
        .sink("b", 0);
    let g = b.build();
    let s = baseline_schedule(&g, &pf, &ConstraintSet::empty(), &Objective::MinActivePeriod).unwrap();
    let text = emit_schedule_config(&s);
    assert!(text.contains("pattern: big_delay.c_0.L3_0.DDR_0.L3_0"), "{text}");
}

#[test]
fn config_rejects_other_versions() {
    let (_, _, s) = chain();
    let text = emit_schedule_config(&s).replace("configVersion: 1", "configVersion: 2");
    assert_eq!(parse_schedule_config(&text), Err(ConfigError::Version(2)));
}

#[test]
fn text_chart_of_chain() {
    let (g, pf, s) = chain();
    let tr = simulate_timeline(&s, &g, &pf, 0, &BTreeMap::new()).unwrap();
    let ls = lanes(&tr);
    assert_eq!(ls.len(), 1);
    let widths: Vec<u64> = ls[0].bars.iter().map(|b| b.end - b.start).collect();
    assert_eq!(widths, [2, 3, 4]);
    let t = emit_gantt(&tr, GanttFormat::Text);
    assert!(t.contains("clocks per column: 1"));
    assert!(t.lines().all(|l| l.chars().count() <= TEXT_WIDTH));
    let lane = t.lines().find(|l| l.starts_with("proc:c_0")).unwrap();
    assert!(lane.contains("|AABBBCCCC."), "{lane}");
    assert_eq!(emit_gantt(&tr, GanttFormat::Text), t);
}

#[test]
fn empty_charts_have_axes() {
    let svg = emit_gantt(&[], GanttFormat::Svg);
    roxmltree::Document::parse(&svg).unwrap();
    assert!(svg.contains("<line"));
    assert!(!svg.contains("<rect"));
    let t = emit_gantt(&[], GanttFormat::Text);
    assert!(t.contains("---"));
}

fn check_svg(svg: &str) {
    let doc = roxmltree::Document::parse(svg).unwrap();
    let width: f64 = doc.root_element().attribute("width").unwrap().parse().unwrap();
    for r in doc.descendants().filter(|n| n.has_tag_name("rect")) {
        let x: f64 = r.attribute("x").unwrap().parse().unwrap();
        let w: f64 = r.attribute("width").unwrap().parse().unwrap();
        assert!(x + w <= width + 1e-9, "{x} + {w}");
        assert!(w > 0.0);
    }
}

#[test]
fn svg_is_well_formed() {
    let (g, pf, s) = chain();
    let tr = simulate_timeline(&s, &g, &pf, 0, &BTreeMap::new()).unwrap();
    let svg = emit_gantt(&tr, GanttFormat::Svg);
    check_svg(&svg);
    assert_eq!(svg.matches("<rect").count(), 3);
}

#[test]
fn comparison_fixtures() {
    let r = compare_values("latency", 1522, 1115);
    assert_eq!((r.delta, r.improvement.as_str()), (407, "26.7%"));
    assert_eq!(compare_values("latency", 9, 9).improvement, "0.0%");
    let r = compare_values("active period", 1013, 861);
    assert_eq!((r.delta, r.improvement.as_str()), (152, "15.0%"));
    let t = render_table(&r);
    assert!(t.contains("KPI") && t.contains("Before & After") && t.contains("1013 -> 861"), "{t}");
}

#[test]
fn comparison_checks_objective() {
    let (_, _, s) = chain();
    let err = emit_comparison(&s, &s, &Objective::MinLatency(vec![])).unwrap_err();
    assert!(matches!(err, CompareError::ObjectiveMismatch(..)));
    let (r, _) = emit_comparison(&s, &s, &Objective::MinActivePeriod).unwrap();
    assert_eq!(r.improvement, "0.0%");
}

proptest! {
    #[test]
    fn percent_matches_decimal_rounding(b in 1u64..10_000_000, frac in 0.0f64..=1.0) {
        let o = ((b as f64) * frac) as u64;
        let o = o.min(b);
        let r = compare_values("k", b, o);
        // independent oracle: decimal string arithmetic on 100*(b-o)/b
        let num = 1000u128 * (b - o) as u128;
        let q = num / b as u128;
        let rem = num % b as u128;
        let t = if 2 * rem >= b as u128 { q + 1 } else { q };
        prop_assert_eq!(r.improvement, format!("{}.{}%", t / 10, t % 10));
    }

    #[test]
    fn svg_bars_stay_inside(rts in proptest::collection::vec(1u64..5000, 1..8)) {
        let pf = platform(2, false, 1 << 30);
        let mut b = Builder::new(1_000_000);
        for (i, rt) in rts.iter().enumerate() {
            let id = format!("t{i}");
            b.task(&id, *rt, &["c_0", "c_1"], &pf).sink(&id, 0);
        }
        let g = b.build();
        let s = baseline_schedule(&g, &pf, &ConstraintSet::empty(), &Objective::MinActivePeriod).unwrap();
        let tr = simulate_timeline(&s, &g, &pf, 0, &BTreeMap::new()).unwrap();
        check_svg(&emit_gantt(&tr, GanttFormat::Svg));
        let t = emit_gantt(&tr, GanttFormat::Text);
        prop_assert!(t.lines().all(|l| l.chars().count() <= TEXT_WIDTH));
    }
}
