//! Greedy reference schedule.

use crate::constraints::ConstraintSet;
use crate::graph::TaskGraph;
use crate::platform::PlatformDesc;

use super::decode::{decode, Decoded, Genome};
use super::problem::{Problem, NONE};
use super::{Objective, Origin, Schedule, SolveError};

/// Tasks in id-tie-broken topological order, processors dealt round-robin
/// over each task's CPU candidates, first usable pattern per buffer.
pub(crate) fn baseline_genome(pr: &Problem) -> Genome {
    let n = pr.tasks.len();
    let mut rank = vec![0u32; n];
    let mut proc = vec![NONE; n];
    let mut counter = 0usize;
    for (pos, &t) in pr.topo.iter().enumerate() {
        rank[t] = pos as u32;
        let cands = &pr.tasks[t].cands;
        let cpus: Vec<usize> = cands.iter().copied().filter(|p| pr.proc_cpu[*p]).collect();
        let pool = if cpus.is_empty() { cands.clone() } else { cpus };
        proc[t] = pool[counter % pool.len()];
        counter += 1;
    }
    let pat = (0..pr.bufs.len())
        .map(|b| {
            if pr.bufs[b].producer == NONE {
                NONE
            } else {
                pr.first_ok_pattern(b, &proc).unwrap_or(NONE)
            }
        })
        .collect();
    Genome {
        rank,
        proc,
        pat,
        slack: vec![0; n],
    }
}

pub(crate) fn infeasible(d: &Decoded) -> SolveError {
    let p = d.most_binding().expect("infeasible decode has a penalty");
    SolveError::Infeasible {
        cause: p.cause.clone(),
        binding: p.binding.clone(),
    }
}

pub fn baseline_schedule(
    graph: &TaskGraph,
    platform: &PlatformDesc,
    constraints: &ConstraintSet,
    objective: &Objective,
) -> Result<Schedule, SolveError> {
    let pr = Problem::new(graph, platform, constraints, objective)?;
    let d = decode(&pr, &baseline_genome(&pr));
    if !d.feasible() {
        return Err(infeasible(&d));
    }
    Ok(pr.to_schedule(&d, Origin::Baseline, 0))
}
