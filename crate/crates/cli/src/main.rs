//! `rdslc`: check, solve, verify, render and compare scenarios.
//!
//! Exit codes: 0 clean, 1 diagnostics or violations, 2 usage or IO,
//! 3 infeasible.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use rdsl::emit::{
    emit_comparison, emit_gantt, emit_schedule_config, parse_schedule_config, GanttFormat,
};
use rdsl::scenario::{Scenario, ScenarioError};
use rdsl::schedule::{baseline_schedule, solve, Objective, Schedule, SolveError};
use rdsl::verify::{simulate_timeline, verify, VerifyReport};

const DEFAULT_PERIODS: u64 = 1000;

#[derive(Parser)]
#[command(name = "rdslc", version, about = "Compile RDSL flows into verified real-time schedules")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjArg {
    Power,
    Latency,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Svg,
    Text,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse, validate and elaborate a scenario.
    Check {
        scenario: PathBuf,
        /// Write the elaborated graph as JSON lines.
        #[arg(long)]
        dump_graph: Option<PathBuf>,
    },
    /// Solve a scenario and write schedule.yaml, timeline.svg,
    /// timeline.txt and report.yaml.
    Solve {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        objective: Option<ObjArg>,
        #[arg(long, env = "RDSLC_SEED")]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Periods replayed for report.yaml.
        #[arg(long, default_value_t = DEFAULT_PERIODS)]
        periods: u64,
    },
    /// Replay a schedule against its scenario.
    Verify {
        scenario: PathBuf,
        schedule: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PERIODS)]
        periods: u64,
        #[arg(long, env = "RDSLC_SEED")]
        seed: Option<u64>,
        /// Where to write the report; next to the schedule by default.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Draw the timing of one period.
    Render {
        scenario: PathBuf,
        schedule: PathBuf,
        #[arg(long, value_enum, default_value = "svg")]
        format: FormatArg,
        #[arg(long, default_value_t = 0)]
        period: u64,
        /// Output file; stdout by default.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Baseline against solver, as a table.
    Compare {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        objective: Option<ObjArg>,
        #[arg(long, env = "RDSLC_SEED")]
        seed: Option<u64>,
        /// Directory for comparison.yaml and both schedules.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure with its exit code already decided.
struct Fail(u8, String);

impl From<anyhow::Error> for Fail {
    fn from(e: anyhow::Error) -> Self {
        Fail(2, format!("{e:#}"))
    }
}

type Res = Result<u8, Fail>;

fn load(path: &Path) -> Result<Scenario, Fail> {
    Scenario::load(path).map_err(|e| {
        let code = if e.is_io() { 2 } else { 1 };
        let mut msg = format!("error: {e}");
        if let ScenarioError::Diagnostics(ds) = &e {
            for d in ds {
                msg.push_str(&format!("\ndiagnostic: {d}"));
            }
        }
        Fail(code, msg)
    })
}

fn solve_fail(e: SolveError) -> Fail {
    match e {
        SolveError::Infeasible { cause, binding } => {
            let mut msg = format!("status: infeasible\ncause: {cause}");
            if let Some(b) = binding {
                msg.push_str(&format!("\nbinding: {b}"));
            }
            Fail(3, msg)
        }
        SolveError::UnknownSink(s) => Fail(2, format!("error: unknown sink `{s}`")),
        other => Fail(1, format!("error: {other}")),
    }
}

fn objective(sc: &Scenario, arg: Option<ObjArg>) -> Objective {
    match arg {
        None => sc.objective(),
        Some(ObjArg::Power) => Objective::MinActivePeriod,
        Some(ObjArg::Latency) => Objective::MinLatency(sc.manifest.latency_sinks.clone()),
    }
}

fn write(path: &Path, text: &str) -> Result<(), Fail> {
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Fail::from)
}

fn read(path: &Path) -> Result<String, Fail> {
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Fail::from)
}

fn read_schedule(path: &Path) -> Result<Schedule, Fail> {
    parse_schedule_config(&read(path)?).map_err(|e| Fail(2, format!("error: {}: {e}", path.display())))
}

fn report(sc: &Scenario, s: &Schedule, periods: u64, seed: u64) -> Result<VerifyReport, Fail> {
    verify(s, &sc.graph, &sc.platform, &sc.constraints, periods, seed).map_err(|e| Fail(2, format!("error: {e}")))
}

fn verdict(r: &VerifyReport) -> &'static str {
    if r.passed() {
        "PASS"
    } else {
        "FAIL"
    }
}

fn print_report(r: &VerifyReport) {
    println!("verdict: {}", verdict(r));
    println!("periods: {}", r.periods);
    println!("violations: {}", r.violations.len());
    for v in &r.violations {
        println!(
            "violation: {} at={} period={} subjects={}",
            v.kind,
            v.at,
            v.period,
            v.subjects.join(",")
        );
    }
}

fn check(path: &Path, dump: Option<&Path>) -> Res {
    let sc = load(path)?;
    for w in &sc.warnings {
        println!("warning: {w}");
    }
    for w in &sc.graph.warnings {
        println!("warning: {w}");
    }
    if let Some(p) = dump {
        write(p, &sc.graph.dump_jsonl())?;
    }
    println!("status: ok");
    println!("tasks: {}", sc.graph.tasks.len());
    println!("buffers: {}", sc.graph.buffers.len());
    println!("hyperperiod: {}", sc.graph.hyperperiod);
    Ok(0)
}

fn seed_of(sc: &Scenario, seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| sc.solver_config().seed)
}

fn run_solve(sc: &Scenario, obj: &Objective, seed: u64) -> Result<(Schedule, Schedule), Fail> {
    let base = baseline_schedule(&sc.graph, &sc.platform, &sc.constraints, obj).map_err(solve_fail)?;
    let mut cfg = sc.solver_config();
    cfg.seed = seed;
    cfg.objective = obj.clone();
    let s = solve(&sc.graph, &sc.platform, &sc.constraints, &cfg).map_err(solve_fail)?;
    Ok((base, s))
}

fn cmd_solve(path: &Path, obj: Option<ObjArg>, seed: Option<u64>, out: &Path, periods: u64) -> Res {
    let sc = load(path)?;
    let obj = objective(&sc, obj);
    let seed = seed_of(&sc, seed);
    let (base, s) = run_solve(&sc, &obj, seed)?;
    fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(Fail::from)?;
    write(&out.join("schedule.yaml"), &emit_schedule_config(&s))?;
    let trace = simulate_timeline(&s, &sc.graph, &sc.platform, 0, &BTreeMap::new())
        .map_err(|e| Fail(1, format!("error: {e}")))?;
    write(&out.join("timeline.svg"), &emit_gantt(&trace, GanttFormat::Svg))?;
    write(&out.join("timeline.txt"), &emit_gantt(&trace, GanttFormat::Text))?;
    let r = report(&sc, &s, periods, seed)?;
    write(&out.join("report.yaml"), &r.to_yaml())?;
    println!("status: solved");
    println!("objective: {}", obj.name());
    println!("seed: {seed}");
    println!("baseline: {}", base.objective_value);
    println!("optimized: {}", s.objective_value);
    println!("verdict: {}", verdict(&r));
    println!("out: {}", out.display());
    Ok(if r.passed() { 0 } else { 1 })
}

fn cmd_verify(path: &Path, sched: &Path, periods: u64, seed: Option<u64>, dest: Option<&Path>) -> Res {
    if periods == 0 {
        return Err(Fail(2, "error: --periods must be at least 1".into()));
    }
    let sc = load(path)?;
    let s = read_schedule(sched)?;
    let seed = seed.unwrap_or(s.seed);
    let r = report(&sc, &s, periods, seed)?;
    let dest = dest.map_or_else(|| sched.with_file_name("report.yaml"), Path::to_path_buf);
    write(&dest, &r.to_yaml())?;
    print_report(&r);
    println!("report: {}", dest.display());
    Ok(if r.passed() { 0 } else { 1 })
}

fn cmd_render(path: &Path, sched: &Path, format: FormatArg, period: u64, out: Option<&Path>) -> Res {
    let sc = load(path)?;
    let s = read_schedule(sched)?;
    let trace = simulate_timeline(&s, &sc.graph, &sc.platform, period, &BTreeMap::new())
        .map_err(|e| Fail(2, format!("error: {e}")))?;
    let fmt = match format {
        FormatArg::Svg => GanttFormat::Svg,
        FormatArg::Text => GanttFormat::Text,
    };
    let doc = emit_gantt(&trace, fmt);
    match out {
        Some(p) => write(p, &doc)?,
        None => print!("{doc}"),
    }
    Ok(0)
}

fn cmd_compare(path: &Path, obj: Option<ObjArg>, seed: Option<u64>, out: Option<&Path>) -> Res {
    let sc = load(path)?;
    let obj = objective(&sc, obj);
    let seed = seed_of(&sc, seed);
    let (base, s) = run_solve(&sc, &obj, seed)?;
    let (r, table) = emit_comparison(&base, &s, &obj).map_err(|e| Fail(1, format!("error: {e}")))?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(Fail::from)?;
        write(&dir.join("comparison.yaml"), &serde_yaml::to_string(&r).expect("report serializes"))?;
        write(&dir.join("baseline.yaml"), &emit_schedule_config(&base))?;
        write(&dir.join("schedule.yaml"), &emit_schedule_config(&s))?;
    }
    println!("kpi: {}", r.kpi);
    println!("baseline: {}", r.baseline);
    println!("optimized: {}", r.optimized);
    println!("delta: {}", r.delta);
    println!("improvement: {}", r.improvement);
    print!("{table}");
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Check { scenario, dump_graph } => check(scenario, dump_graph.as_deref()),
        Cmd::Solve {
            scenario,
            objective,
            seed,
            out,
            periods,
        } => cmd_solve(scenario, *objective, *seed, out, *periods),
        Cmd::Verify {
            scenario,
            schedule,
            periods,
            seed,
            report,
        } => cmd_verify(scenario, schedule, *periods, *seed, report.as_deref()),
        Cmd::Render {
            scenario,
            schedule,
            format,
            period,
            out,
        } => cmd_render(scenario, schedule, *format, *period, out.as_deref()),
        Cmd::Compare {
            scenario,
            objective,
            seed,
            out,
        } => cmd_compare(scenario, *objective, *seed, out.as_deref()),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, msg)) => {
            if code == 3 {
                println!("{msg}");
            } else {
                eprintln!("{msg}");
            }
            ExitCode::from(code)
        }
    }
}
