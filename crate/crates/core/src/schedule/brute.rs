//! Exhaustive oracle for small instances: every processor assignment,
//! pattern choice and placement order, with the same earliest-start
//! placement the other schedulers use.

use std::collections::{BTreeSet, HashSet};
use std::hash::{Hash, Hasher};

use crate::constraints::ConstraintSet;
use crate::graph::TaskGraph;
use crate::model::Clock;
use crate::platform::PlatformDesc;

use super::anneal::{self, static_lower_bound};
use super::baseline::{baseline_genome, infeasible};
use super::decode::{decode, finish, Decoded, State, UNSET};
use super::problem::{Problem, NONE};
use super::{Objective, Origin, Schedule, SolveError, SolverConfig};

pub const BRUTE_MAX_TASKS: usize = 10;
pub const BRUTE_MAX_PROCESSORS: usize = 3;
pub const BRUTE_MAX_PATTERNS: usize = 4;

struct Search<'a> {
    pr: &'a Problem,
    tail: Vec<Clock>,
    static_lb: Clock,
    /// distinct candidate sets and the tasks confined to each
    sets: Vec<(Vec<usize>, Vec<usize>)>,
    best: Option<Decoded>,
    seen: HashSet<(u64, u64)>,
}

fn state_key(st: &State) -> (u64, u64) {
    let mut phys: Vec<_> = st.phys.iter().map(|p| (&p.id, p.pat, &p.legs)).collect();
    phys.sort();
    let mut out = [0u64; 2];
    for (i, salt) in [0x5eedu64, 0xfacade].into_iter().enumerate() {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        salt.hash(&mut h);
        st.start.hash(&mut h);
        st.proc.hash(&mut h);
        st.pat.hash(&mut h);
        phys.hash(&mut h);
        out[i] = h.finish();
    }
    (out[0], out[1])
}

impl Search<'_> {
    fn best_obj(&self) -> Option<Clock> {
        self.best.as_ref().map(|d| d.objective)
    }

    /// Earliest possible start of every unplaced task ignoring resources.
    fn heads(&self, st: &State) -> Vec<Clock> {
        let pr = self.pr;
        let mut head = vec![0; pr.tasks.len()];
        for &t in &pr.topo {
            if st.placed(t) {
                head[t] = st.start[t];
                continue;
            }
            let mut h: Clock = 0;
            for &b in &pr.tasks[t].hard {
                let r = st.ready[b];
                h = h.max(if r != UNSET {
                    r
                } else {
                    let p = pr.bufs[b].producer;
                    head[p] + pr.tasks[p].rt
                });
            }
            head[t] = h;
        }
        head
    }

    fn lower_bound(&self, st: &State) -> Clock {
        let pr = self.pr;
        let head = self.heads(st);
        match pr.objective {
            Objective::MinActivePeriod => {
                let mut end = st.max_end;
                for t in 0..pr.tasks.len() {
                    if !st.placed(t) {
                        end = end.max(head[t] + self.tail[t]);
                    }
                }
                let dyn_lb = if st.min_start == UNSET { 0 } else { end - st.min_start.min(end) };
                // all work bound to a processor set fits inside the window
                let mut load_lb = 0;
                for (set, confined) in &self.sets {
                    let mut w: Clock = 0;
                    for t in 0..pr.tasks.len() {
                        if st.placed(t) && set.contains(&st.proc[t]) {
                            w += pr.tasks[t].rt;
                        }
                    }
                    w += confined.iter().filter(|t| !st.placed(**t)).map(|t| pr.tasks[*t].rt).sum::<Clock>();
                    load_lb = load_lb.max(w.div_ceil(set.len() as Clock));
                }
                dyn_lb.max(self.static_lb).max(load_lb)
            }
            Objective::MinLatency(_) => pr
                .sinks
                .iter()
                .map(|(b, arr)| {
                    let r = st.ready[*b];
                    let r = if r != UNSET {
                        r
                    } else {
                        let p = pr.bufs[*b].producer;
                        if p == NONE { 0 } else { head[p] + pr.tasks[p].rt }
                    };
                    r.saturating_sub(*arr)
                })
                .max()
                .unwrap_or(0),
        }
    }

    fn dfs(&mut self, st: State, depth: usize) {
        let pr = self.pr;
        let n = pr.tasks.len();
        if st.max_end > pr.h {
            return;
        }
        if let Some(b) = self.best_obj() {
            if self.lower_bound(&st) >= b {
                return;
            }
        }
        if depth == n {
            let d = finish(pr, st);
            if d.feasible() && self.best_obj().map_or(true, |b| d.objective < b) {
                self.best = Some(d);
            }
            return;
        }
        if !self.seen.insert(state_key(&st)) {
            return;
        }
        let mut eligible: Vec<(Clock, usize)> = (0..n)
            .filter(|t| !st.placed(*t) && pr.tasks[*t].preds.iter().all(|p| st.placed(*p)))
            .map(|t| (st.est(pr, t), t))
            .collect();
        eligible.sort_unstable();
        for (est, t) in eligible {
            let info = &pr.tasks[t];
            for &proc in &info.cands {
                let blocked = info
                    .reads
                    .iter()
                    .any(|b| st.pat[*b] != NONE && !pr.pats[st.pat[*b]].vis[proc]);
                if blocked {
                    continue;
                }
                let mut options: Vec<Vec<usize>> = Vec::with_capacity(info.outputs.len());
                for &b in &info.outputs {
                    let opts: Vec<usize> = pr.bufs[b]
                        .avail
                        .iter()
                        .copied()
                        .filter(|p| {
                            pr.pats[*p].home == proc
                                && pr.bufs[b]
                                    .consumers
                                    .iter()
                                    .all(|(c, _)| !st.placed(*c) || pr.pats[*p].vis[st.proc[*c]])
                        })
                        .collect();
                    options.push(opts);
                }
                if options.iter().any(Vec::is_empty) {
                    continue;
                }
                let mut idx = vec![0usize; options.len()];
                loop {
                    let combo: Vec<usize> = idx.iter().zip(&options).map(|(i, o)| o[*i]).collect();
                    let mut next = st.clone();
                    next.place(pr, t, proc, &combo, est);
                    self.dfs(next, depth + 1);
                    // odometer over pattern choices
                    let mut k = 0;
                    while k < idx.len() {
                        idx[k] += 1;
                        if idx[k] < options[k].len() {
                            break;
                        }
                        idx[k] = 0;
                        k += 1;
                    }
                    if k == idx.len() {
                        break;
                    }
                }
            }
        }
    }
}

pub fn brute_force(
    graph: &TaskGraph,
    platform: &PlatformDesc,
    constraints: &ConstraintSet,
    objective: &Objective,
) -> Result<Schedule, SolveError> {
    let pr = Problem::new(graph, platform, constraints, objective)?;
    if pr.tasks.len() > BRUTE_MAX_TASKS {
        return Err(SolveError::TooLarge(format!(
            "{} tasks, limit {BRUTE_MAX_TASKS}",
            pr.tasks.len()
        )));
    }
    let procs: BTreeSet<usize> = pr.tasks.iter().flat_map(|t| t.cands.iter().copied()).collect();
    if procs.len() > BRUTE_MAX_PROCESSORS {
        return Err(SolveError::TooLarge(format!(
            "{} processors, limit {BRUTE_MAX_PROCESSORS}",
            procs.len()
        )));
    }
    for b in &pr.bufs {
        for p in &procs {
            let k = b.avail.iter().filter(|a| pr.pats[**a].home == *p).count();
            if k > BRUTE_MAX_PATTERNS {
                return Err(SolveError::TooLarge(format!(
                    "buffer {} has {k} patterns on one processor, limit {BRUTE_MAX_PATTERNS}",
                    b.id
                )));
            }
        }
    }

    let n = pr.tasks.len();
    let mut tail = vec![0; n];
    for &t in pr.topo.iter().rev() {
        let s = pr.tasks[t].succs.iter().map(|s| tail[*s]).max().unwrap_or(0);
        tail[t] = s + pr.tasks[t].rt;
    }
    let mut cand_sets: Vec<Vec<usize>> = pr.tasks.iter().map(|t| t.cands.clone()).collect();
    cand_sets.sort();
    cand_sets.dedup();
    let sets = cand_sets
        .into_iter()
        .map(|s| {
            let confined = (0..n).filter(|t| pr.tasks[*t].cands.iter().all(|c| s.contains(c))).collect();
            (s, confined)
        })
        .collect();
    // a good incumbent up front lets the bound cut early
    let base = decode(&pr, &baseline_genome(&pr));
    let warm = anneal::search(&pr, &SolverConfig { objective: objective.clone(), ..SolverConfig::default() });
    let incumbent = if warm.feasible() { Some(warm) } else { base.feasible().then(|| base.clone()) };
    let mut search = Search {
        pr: &pr,
        tail,
        static_lb: static_lower_bound(&pr),
        sets,
        best: incumbent,
        seen: HashSet::new(),
    };
    search.dfs(State::new(&pr), 0);
    match search.best {
        Some(d) => Ok(pr.to_schedule(&d, Origin::BruteForce, 0)),
        None => Err(infeasible(&base)),
    }
}
