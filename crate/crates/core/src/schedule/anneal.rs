//! Simulated annealing over placement priorities, processors, patterns
//! and start slack.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::constraints::ConstraintSet;
use crate::graph::TaskGraph;
use crate::model::Clock;
use crate::platform::PlatformDesc;

use super::baseline::{baseline_genome, infeasible};
use super::decode::{decode, Decoded, Genome};
use super::problem::{Problem, NONE};
use super::{derive_seed, Objective, Origin, Schedule, SolveError, SolverConfig};

/// Periods replayed on every schedule before it is returned.
const POSTCHECK_PERIODS: u64 = 16;

/// `e^-x` from basic arithmetic only, so acceptance decisions do not
/// depend on the platform's libm.
pub(crate) fn exp_neg(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x > 50.0 {
        return 0.0;
    }
    let y = x / 256.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..8 {
        term *= -y / k as f64;
        sum += term;
    }
    for _ in 0..8 {
        sum *= sum;
    }
    sum
}

/// Bound no schedule can beat: critical path and per-candidate-set load
/// for the active period, arrival-to-sink path for latency.
pub(crate) fn static_lower_bound(pr: &Problem) -> Clock {
    let n = pr.tasks.len();
    let mut head = vec![0; n];
    for &t in &pr.topo {
        let mut h: Clock = 0;
        for &b in &pr.tasks[t].hard {
            let buf = &pr.bufs[b];
            h = h.max(if buf.producer == NONE {
                buf.arrival
            } else {
                head[buf.producer] + pr.tasks[buf.producer].rt
            });
        }
        head[t] = h;
    }
    match pr.objective {
        Objective::MinActivePeriod => {
            if n == 0 {
                return 0;
            }
            let mut path = vec![0; n];
            for &t in &pr.topo {
                let p = pr.tasks[t].preds.iter().map(|p| path[*p]).max().unwrap_or(0);
                path[t] = p + pr.tasks[t].rt;
            }
            let mut lb = path.iter().copied().max().unwrap_or(0);
            let mut sets: Vec<Vec<usize>> = pr.tasks.iter().map(|t| t.cands.clone()).collect();
            sets.sort();
            sets.dedup();
            for s in sets {
                let w: Clock = pr
                    .tasks
                    .iter()
                    .filter(|t| t.cands.iter().all(|c| s.contains(c)))
                    .map(|t| t.rt)
                    .sum();
                lb = lb.max(w.div_ceil(s.len() as Clock));
            }
            lb
        }
        Objective::MinLatency(_) => pr
            .sinks
            .iter()
            .filter(|(b, _)| pr.bufs[*b].producer != NONE)
            .map(|(b, arr)| {
                let p = pr.bufs[*b].producer;
                (head[p] + pr.tasks[p].rt).saturating_sub(*arr)
            })
            .max()
            .unwrap_or(0),
    }
}

struct Moves {
    multi_proc: Vec<usize>,
    multi_pat: Vec<usize>,
    slack: bool,
}

fn mutate(pr: &Problem, mv: &Moves, g: &Genome, scale: Clock, rng: &mut ChaCha8Rng) -> Genome {
    let mut c = g.clone();
    let n = pr.tasks.len();
    let pick: u32 = rng.gen_range(0..100);
    if pick < 35 && !mv.multi_proc.is_empty() {
        let t = *mv.multi_proc.choose(rng).expect("non-empty");
        let cands = &pr.tasks[t].cands;
        let others: Vec<usize> = cands.iter().copied().filter(|p| *p != g.proc[t]).collect();
        c.proc[t] = *others.choose(rng).expect("two candidates");
        for &b in &pr.tasks[t].outputs {
            c.pat[b] = NONE;
        }
    } else if pick < 50 && !mv.multi_pat.is_empty() {
        let b = *mv.multi_pat.choose(rng).expect("non-empty");
        c.pat[b] = *pr.bufs[b].avail.choose(rng).expect("options");
    } else if pick < 60 && mv.slack && n > 0 {
        let t = rng.gen_range(0..n);
        c.slack[t] = if rng.gen_bool(0.5) {
            0
        } else {
            rng.gen_range(0..=scale.max(1) / 8)
        };
    } else if n >= 2 {
        let a = rng.gen_range(0..n);
        let mut b = rng.gen_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        c.rank.swap(a, b);
    }
    c
}

/// Keeps pattern choices the decoder repaired.
fn adopt(pr: &Problem, mut g: Genome, d: &Decoded) -> Genome {
    for (b, p) in d.state.pat.iter().enumerate() {
        if pr.bufs[b].producer != NONE {
            g.pat[b] = *p;
        }
    }
    g
}

fn run_restart(
    pr: &Problem,
    cfg: &SolverConfig,
    start: &Genome,
    lb: Clock,
    scale: Clock,
    index: usize,
) -> Decoded {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, index as u64));
    let n = pr.tasks.len();
    let mv = Moves {
        multi_proc: (0..n).filter(|t| pr.tasks[*t].cands.len() > 1).collect(),
        multi_pat: (0..pr.bufs.len()).filter(|b| pr.bufs[*b].avail.len() > 1).collect(),
        slack: pr.uses_labels(),
    };
    let mut g = start.clone();
    if index > 0 {
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.shuffle(&mut rng);
        g.rank = order;
        if index % 2 == 0 {
            for t in &mv.multi_proc {
                g.proc[*t] = *pr.tasks[*t].cands.choose(&mut rng).expect("candidates");
            }
            g.pat.iter_mut().for_each(|p| *p = NONE);
        }
    }
    let mut cur = decode(pr, &g);
    g = adopt(pr, g, &cur);
    let mut best = cur.clone();
    let mut temp = cfg.temperature * scale.max(1) as f64;
    for _ in 0..cfg.iterations {
        if best.feasible() && best.objective <= lb {
            break;
        }
        let cand = mutate(pr, &mv, &g, scale, &mut rng);
        let d = decode(pr, &cand);
        let delta = d.cost(pr.h) - cur.cost(pr.h);
        let accept = delta <= 0.0 || (temp > 0.0 && rng.gen::<f64>() < exp_neg(delta / temp));
        if accept {
            g = adopt(pr, cand, &d);
            if d.key() < best.key() {
                best = d.clone();
            }
            cur = d;
        }
        temp *= cfg.cooling;
    }
    best
}

pub fn solve(
    graph: &TaskGraph,
    platform: &PlatformDesc,
    constraints: &ConstraintSet,
    config: &SolverConfig,
) -> Result<Schedule, SolveError> {
    let pr = Problem::new(graph, platform, constraints, &config.objective)?;
    let best = search(&pr, config);
    if !best.feasible() {
        return Err(infeasible(&best));
    }
    let mut s = pr.to_schedule(&best, Origin::Solve, config.seed);
    s.config = Some(config.clone());
    let report = crate::verify::verify(&s, graph, platform, constraints, POSTCHECK_PERIODS, config.seed)
        .map_err(|e| SolveError::Unverified(e.to_string()))?;
    if let Some(v) = report.violations.first() {
        return Err(SolveError::Unverified(format!("{} at {}: {}", v.kind, v.at, v.detail)));
    }
    Ok(s)
}

/// Best decode over the baseline and every restart.
pub(crate) fn search(pr: &Problem, config: &SolverConfig) -> Decoded {
    let base_g = baseline_genome(pr);
    let base = decode(pr, &base_g);
    let lb = static_lower_bound(pr);
    let scale = if base.objective > 0 { base.objective } else { pr.h.max(1) };

    let run = |r: usize| run_restart(pr, config, &base_g, lb, scale, r);
    let restarts = config.restarts.max(1);
    #[cfg(feature = "parallel")]
    let runs: Vec<Decoded> = (0..restarts).into_par_iter().map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<Decoded> = (0..restarts).map(run).collect();

    // baseline wins ties, then the lowest restart index
    let mut best = base;
    for d in runs {
        if d.key() < best.key() {
            best = d;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::exp_neg;

    #[test]
    fn exp_matches_libm() {
        for x in [0.0, 0.01, 0.5, 1.0, 3.0, 10.0, 30.0] {
            let e: f64 = (-x as f64).exp();
            assert!((exp_neg(x) - e).abs() <= 1e-6 * e.max(1e-300), "{x}");
        }
    }
}
