use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bundled(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(rel)
}

fn rdslc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdslc"))
        .args(args)
        .env_remove("RDSLC_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Copy of a bundled scenario directory that a test may edit.
fn scratch(dir: &str) -> tempfile::TempDir {
    let tmp = tempfile::tempdir().unwrap();
    for e in fs::read_dir(bundled(dir)).unwrap() {
        let e = e.unwrap();
        fs::copy(e.path(), tmp.path().join(e.file_name())).unwrap();
    }
    tmp
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_and_graph_dump() {
    let tmp = tempfile::tempdir().unwrap();
    let dump = tmp.path().join("graph.jsonl");
    let o = rdslc(&["check", path(&bundled("srs_chest/scenario.yaml")), "--dump-graph", path(&dump)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("tasks: 18"));
    let text = fs::read_to_string(dump).unwrap();
    assert!(text.lines().count() > 18);
    assert!(text.lines().all(|l| l.starts_with('{') && l.ends_with('}')));
}

#[test]
fn double_define_is_a_diagnostic() {
    let tmp = scratch("mmimo");
    let src = tmp.path().join("uplink.rdsl");
    let text = fs::read_to_string(&src).unwrap().replace(
        "  decodeStage(x = llr, y = tb_out)\n",
        "  decodeStage(x = llr, y = tb_out)\n  demapStage(l = 1:NUM_LAYERS, x = eq[l], y = tb_out)\n",
    );
    fs::write(&src, text).unwrap();
    let o = rdslc(&["check", path(&tmp.path().join("scenario.yaml"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("tb_out"), "{}", stderr(&o));
}

#[test]
fn infeasible_period_exits_3() {
    let tmp = scratch("mmimo");
    let p = tmp.path().join("period.yaml");
    fs::write(&p, fs::read_to_string(&p).unwrap().replace("value: 100000", "value: 500")).unwrap();
    let out = tmp.path().join("out");
    let o = rdslc(&["solve", path(&tmp.path().join("scenario.yaml")), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("binding: slot_period"), "{}", stdout(&o));
    assert!(!out.join("schedule.yaml").exists());
}

#[test]
fn usage_and_io_exit_2() {
    assert_eq!(rdslc(&["check", "/nonexistent/scenario.yaml"]).status.code(), Some(2));
    assert_eq!(rdslc(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(rdslc(&[]).status.code(), Some(2));
}

#[test]
fn solve_verify_render() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = bundled("mmimo/scenario.yaml");
    let o = rdslc(&["solve", path(&sc), "--out", path(tmp.path()), "--periods", "50"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("baseline: 1522"), "{s}");
    assert!(s.contains("verdict: PASS"));
    for f in ["schedule.yaml", "timeline.svg", "timeline.txt", "report.yaml"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
    let sched = tmp.path().join("schedule.yaml");
    assert!(fs::read_to_string(&sched).unwrap().starts_with("configVersion: 1\n"));

    let report = tmp.path().join("again.yaml");
    let o = rdslc(&["verify", path(&sc), path(&sched), "--periods", "20", "--report", path(&report)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(fs::read_to_string(report).unwrap().contains("verdict: PASS"));
    let o = rdslc(&["verify", path(&sc), path(&sched), "--periods", "0"]);
    assert_eq!(o.status.code(), Some(2));

    let o = rdslc(&["render", path(&sc), path(&sched), "--format", "text", "--period", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let chart = stdout(&o);
    assert!(chart.lines().any(|l| l.starts_with("proc:c_0")));
    assert!(chart.contains("origin: 200000"), "{chart}");
}

#[test]
fn verify_flags_a_broken_schedule() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = bundled("mmimo/scenario.yaml");
    assert_eq!(rdslc(&["solve", path(&sc), "--out", path(tmp.path()), "--periods", "5"]).status.code(), Some(0));
    let sched = tmp.path().join("schedule.yaml");
    // every task at clock 0 collides on its processor
    let text: String = fs::read_to_string(&sched)
        .unwrap()
        .lines()
        .map(|l| match l.find("start: ") {
            Some(i) if l.trim_start().starts_with("start:") => format!("{}start: 0\n", &l[..i]),
            _ => format!("{l}\n"),
        })
        .collect();
    fs::write(&sched, text).unwrap();
    let o = rdslc(&["verify", path(&sc), path(&sched), "--periods", "5"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("PROCESSOR_OVERLAP"));
}

#[test]
fn seed_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_rdslc"))
        .args(["solve", path(&bundled("mmimo/scenario.yaml")), "--out", path(tmp.path()), "--periods", "5"])
        .env("RDSLC_SEED", "4242")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("seed: 4242"));
    let cfg = fs::read_to_string(tmp.path().join("schedule.yaml")).unwrap();
    assert!(cfg.contains("seed: 4242"));
}

#[test]
fn compare_prints_table() {
    let tmp = tempfile::tempdir().unwrap();
    let o = rdslc(&["compare", path(&bundled("mmimo/scenario.yaml")), "--out", path(tmp.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("KPI"), "{s}");
    assert!(s.contains("latency (clocks) | 1522 -> "), "{s}");
    let doc = fs::read_to_string(tmp.path().join("comparison.yaml")).unwrap();
    assert!(doc.contains("baseline: 1522"));
    assert!(tmp.path().join("baseline.yaml").exists());
}
