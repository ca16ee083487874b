use proptest::prelude::*;

use super::*;
use crate::model::{Provenance, SymbolTable};

const QUAD: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/quad_platform.yaml"));
const BIG_DELAY_XML: &str =
    include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/big_delay_pattern.xml"));
const SDK: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/pdsch_sym_sdk.yaml"));

fn quad() -> PlatformDesc {
    parse_platform(QUAD).unwrap()
}

#[test]
fn xml_pattern_import() {
    let docs = import_pattern_xml(BIG_DELAY_XML).unwrap();
    assert_eq!(docs.len(), 1);
    let p = &docs[0];
    assert_eq!(p.name, "big_delay.c_0.L3_0.DDR_0.L3_0");
    assert_eq!(p.defining_memory.as_deref(), Some("L3_0"));
    assert_eq!(p.observing_memory.as_deref(), Some("L3_0"));
    assert_eq!(p.exclusive_define_with.len(), 4);
    assert!(p.exclusive_define_with.contains(&p.name));
    // elided sets import empty
    assert!(p.shares_l2_ii_with.is_empty() && p.can_observe.is_empty());
    assert_eq!(p.shares_l2_oo_with.len(), 12);
}

#[test]
fn fixture_pattern_in_platform() {
    let pf = quad();
    let p = pf.pattern("big_delay.c_0.L3_0.DDR_0.L3_0").unwrap();
    assert_eq!((p.defining_memory.as_str(), p.observing_memory.as_str()), ("L3_0", "L3_0"));
    assert_eq!(p.home_processor, "c_0");
    assert_eq!(p.legs.len(), 2);
    assert!(p.delay_capable());
    assert!(!pf.pattern("pipeline.c_0.L3_0").unwrap().delay_capable());
}

#[test]
fn minimal_resident_pattern() {
    let pf = parse_platform(
        "processors: [{name: c_0, class: cpu, memories: [L3_0]}]\n\
         memories: [{name: L3_0, capacity: 100}]\n\
         patterns: [{name: pipeline.c_0.L3_0}]\n",
    )
    .unwrap();
    let p = pf.pattern("pipeline.c_0.L3_0").unwrap();
    assert!(p.legs.is_empty());
    assert_eq!(p.chain, ["L3_0"]);
    assert_eq!(p.home_processor, "c_0");
    assert_eq!(pf.transfer_latency(p, 123_456), 0);
}

#[test]
fn dangling_memory() {
    let err = parse_platform(
        "processors: [{name: c_0, class: cpu}]\n\
         memories: [{name: L3_0, capacity: 100}]\n\
         patterns: [{name: pipeline.c_0.L9_9}]\n",
    )
    .unwrap_err();
    assert!(matches!(err, PlatformError::DanglingReference { ref name, .. } if name == "L9_9"));
}

#[test]
fn malformed_names_and_duplicates() {
    assert!(matches!(
        split_pattern_name("pipeline.c_0"),
        Err(PlatformError::MalformedPatternName { .. })
    ));
    let err = parse_platform(
        "processors: [{name: x, class: cpu}]\nmemories: [{name: x, capacity: 1}]\n",
    )
    .unwrap_err();
    assert_eq!(err, PlatformError::DuplicateName("x".into()));
}

#[test]
fn relations_are_closed() {
    let pf = quad();
    let a = "big_delay.c_0.L3_0.DDR_0.L3_0";
    for p in pf.patterns.values() {
        for m in &p.exclusive_define_with {
            assert!(pf.patterns[m].exclusive_define_with.contains(&p.name));
        }
        for set in ShareSet::ALL {
            for m in p.share_set(set) {
                assert!(pf.patterns[m].share_set(set).contains(&p.name), "{set:?} {m}");
            }
        }
    }
    assert!(pf.patterns["pipeline.c_0.L3_0"].exclusive_define_with.contains(a));
    assert!(pf.patterns["L2toL2.c_3.L3_0.accl3_0"]
        .share_set(ShareSet::L2OO)
        .contains(a));
}

#[test]
fn transfer_latency_examples() {
    let pf = quad();
    let one = pf.pattern("L2toL2.c_0.L3_0.accl3_0").unwrap();
    assert_eq!(pf.transfer_latency(one, 2_000_000), 500_010);
    let two = pf.pattern("big_delay.c_0.L3_0.DDR_0.L3_0").unwrap();
    assert_eq!(pf.transfer_latency(two, 2_000_000), 1_000_020);
    // ceil on partial words, port-specific base
    assert_eq!(pf.transfer_latency(one, 5), 12);
    let mixed = pf.pattern("big_delay.c_0.L3_0.DDR_0.accl3_0").unwrap();
    assert_eq!(pf.transfer_latency(mixed, 4), 10 + 1 + 20 + 2);
}

#[test]
fn compatibility() {
    let pf = quad();
    let meta = &parse_sdk_meta(SDK).unwrap()[0];
    let with_cpu = pf.compatible_patterns(&meta.available_patterns, "c_0", &["c_0"]);
    assert!(with_cpu.contains(&"pipeline.c_0.L3_0"));
    assert_eq!(with_cpu.len(), 4);
    let with_acc = pf.compatible_patterns(&meta.available_patterns, "c_0", &["acc_0"]);
    assert_eq!(
        with_acc,
        ["big_delay.c_0.L3_0.DDR_0.accl3_0", "L2toL2.c_0.L3_0.accl3_0"]
    );
    assert!(pf.compatible_patterns(&[], "c_0", &["c_0"]).is_empty());
}

#[test]
fn contention_sides() {
    let pf = quad();
    let a = &pf.patterns["big_delay.c_0.L3_0.DDR_0.L3_0"];
    let b = &pf.patterns["L2toL2.c_1.L3_0.accl3_0"];
    assert_eq!(pf.contending_legs(a, b), [(1, 0)]);
    let pipe = &pf.patterns["pipeline.c_1.L3_0"];
    assert!(pf.contending_legs(a, pipe).is_empty());
}

#[test]
fn yaml_and_xml_round_trip() {
    let pf = quad();
    let again = parse_platform(&pf.to_yaml()).unwrap();
    assert_eq!(pf, again);
    assert_eq!(again.to_yaml(), pf.to_yaml());
    let via_xml = parse_platform_xml(&platform_to_xml(&pf)).unwrap();
    assert_eq!(pf, via_xml);
}

#[test]
fn sdk_fixture() {
    let metas = parse_sdk_meta(SDK).unwrap();
    assert_eq!(metas.len(), 1);
    let m = &metas[0];
    assert_eq!(m.name, "NR5G1_DL_PDSCH_SYM");
    assert_eq!(m.available_patterns.len(), 16);
    let g = m.ground(&SymbolTable::new()).unwrap();
    assert_eq!((g.elementsize, g.internalsize, g.runtime), (2_000_000, 8_000_000, 7200));
    m.check_patterns(&quad()).unwrap();
}

#[test]
fn sdk_equation_grounding() {
    let text = "apiVersion: rdsl/v0\nkind: SDK\nmetadata:\n  name: f\nspec:\n  available patterns: []\n  elementsize: 4\n  internalsize: 0\n  runtime: base + num_ue1*per_ue\n";
    let m = &parse_sdk_meta(text).unwrap()[0];
    let syms = SymbolTable::new()
        .bind([
            ("base", 100, Provenance::Builtin),
            ("per_ue", 50, Provenance::Builtin),
            ("num_ue1", 4, Provenance::Builtin),
        ])
        .unwrap();
    assert_eq!(m.ground(&syms).unwrap().runtime, 300);
    let neg = text.replace("runtime: base + num_ue1*per_ue", "runtime: 1 - 5");
    assert!(matches!(
        parse_sdk_meta(&neg).unwrap()[0].ground(&syms),
        Err(SdkError::NegativeCost { value: -4, .. })
    ));
}

#[test]
fn sdk_unknown_pattern() {
    let text = SDK.replace("pipeline.c_3.L3_0", "pipeline.c_9.L3_0");
    let m = &parse_sdk_meta(&text).unwrap()[0];
    assert!(matches!(
        m.check_patterns(&quad()),
        Err(SdkError::UnknownPattern { .. })
    ));
}

proptest! {
    #[test]
    fn latency_monotone(a in 0u64..50_000_000, b in 0u64..50_000_000) {
        let pf = quad();
        let (lo, hi) = (a.min(b), a.max(b));
        for p in pf.patterns.values() {
            prop_assert!(pf.transfer_latency(p, lo) <= pf.transfer_latency(p, hi));
        }
    }
}
