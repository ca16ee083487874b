//! Serial placement: each task goes to its earliest feasible clock given
//! everything placed before it.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use crate::model::Clock;

use super::problem::{Problem, NONE};
use super::{LegTiming, Origin, Schedule};

pub(crate) const UNSET: Clock = Clock::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct Genome {
    /// Lower rank is placed first among eligible tasks.
    pub rank: Vec<u32>,
    pub proc: Vec<usize>,
    /// Per buffer; `NONE` for sources or "pick the first usable".
    pub pat: Vec<usize>,
    pub slack: Vec<Clock>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct Phys {
    pub id: String,
    pub members: Vec<usize>,
    pub producer: usize,
    pub pat: usize,
    /// (start, end) per leg.
    pub legs: Vec<(Clock, Clock)>,
    pub def: (Clock, Clock),
    pub ready: Clock,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct PlacedLeg {
    pat: usize,
    leg: usize,
    port: usize,
    start: Clock,
    end: Clock,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Penalty {
    pub cause: String,
    pub binding: Option<String>,
    pub amount: u64,
}

/// Partial placement; cheap to clone for tree search.
#[derive(Debug, Clone)]
pub(crate) struct State {
    pub start: Vec<Clock>,
    pub proc: Vec<usize>,
    pub pat: Vec<usize>,
    pub ready: Vec<Clock>,
    proc_busy: Vec<Vec<(Clock, Clock)>>,
    legs: Vec<PlacedLeg>,
    defs: Vec<(usize, usize, Clock, Clock)>,
    pub phys: Vec<Phys>,
    pub max_end: Clock,
    pub min_start: Clock,
    pub unplaceable: Vec<usize>,
}

/// First `x >= from` such that `[x, x+len)` misses every interval.
/// `busy` must be sorted by start.
fn earliest_fit(busy: &[(Clock, Clock)], from: Clock, len: Clock) -> Clock {
    if len == 0 {
        return from;
    }
    let mut x = from;
    for &(a, b) in busy {
        if b <= x || a == b {
            continue;
        }
        if a >= x + len {
            break;
        }
        x = b;
    }
    x
}

fn insert_sorted(v: &mut Vec<(Clock, Clock)>, iv: (Clock, Clock)) {
    let pos = v.partition_point(|x| *x < iv);
    v.insert(pos, iv);
}

fn overlaps(a: (Clock, Clock), b: (Clock, Clock)) -> bool {
    a.0 < b.1 && b.0 < a.1
}

impl State {
    pub fn new(pr: &Problem) -> State {
        let ready = pr
            .bufs
            .iter()
            .map(|b| if b.producer == NONE { b.arrival } else { UNSET })
            .collect();
        State {
            start: vec![UNSET; pr.tasks.len()],
            proc: vec![NONE; pr.tasks.len()],
            pat: vec![NONE; pr.bufs.len()],
            ready,
            proc_busy: vec![Vec::new(); pr.proc_names.len()],
            legs: Vec::new(),
            defs: Vec::new(),
            phys: Vec::new(),
            max_end: 0,
            min_start: UNSET,
            unplaceable: Vec::new(),
        }
    }

    /// Earliest start allowed by hard same-period inputs.
    pub fn est(&self, pr: &Problem, t: usize) -> Clock {
        pr.tasks[t]
            .hard
            .iter()
            .map(|b| self.ready[*b])
            .max()
            .unwrap_or(0)
    }

    fn leg_conflicts(&self, pr: &Problem, pat: usize, leg: usize, port: usize, extra: &[PlacedLeg]) -> Vec<(Clock, Clock)> {
        let mut out: Vec<(Clock, Clock)> = self
            .legs
            .iter()
            .chain(extra)
            .filter(|o| o.port == port || pr.contend[pat][o.pat].contains(&(leg, o.leg)))
            .map(|o| (o.start, o.end))
            .collect();
        out.sort_unstable();
        out
    }

    /// Places task `t` on `proc`. `pats` is aligned with the task's outputs;
    /// `NONE` marks an output without a usable pattern.
    pub fn place(&mut self, pr: &Problem, t: usize, proc: usize, pats: &[usize], not_before: Clock) {
        let info = &pr.tasks[t];
        // physical buffers: siblings that share a pattern are one buffer
        let mut groups: BTreeMap<(String, usize), Vec<usize>> = BTreeMap::new();
        for (k, &b) in info.outputs.iter().enumerate() {
            let buf = &pr.bufs[b];
            let key = buf.group.clone().unwrap_or_else(|| buf.id.clone());
            groups.entry((key, pats[k])).or_default().push(b);
        }
        let mut per_key: BTreeMap<&str, usize> = BTreeMap::new();
        for (key, _) in groups.keys() {
            *per_key.entry(key.as_str()).or_default() += 1;
        }
        let mut shapes: Vec<(String, usize, Vec<usize>)> = Vec::new();
        for ((key, pat), members) in &groups {
            let grouped = pr.bufs[members[0]].group.is_some();
            let id = if grouped && per_key[key.as_str()] == 1 {
                key.clone()
            } else {
                pr.bufs[members[0]].id.clone()
            };
            shapes.push((id, *pat, members.clone()));
        }

        let mut t0 = self.est(pr, t).max(not_before);
        loop {
            let s = earliest_fit(&self.proc_busy[proc], t0, info.rt);
            let f = s + info.rt;
            let mut tentative: Vec<PlacedLeg> = Vec::new();
            let mut placed: Vec<Phys> = Vec::new();
            for (id, pat, members) in &shapes {
                let mut cur = f;
                let mut legs = Vec::new();
                if *pat != NONE {
                    let size = pr.bufs[members[0]].size;
                    for (i, leg) in pr.pats[*pat].legs.iter().enumerate() {
                        let d = pr.leg_latency(leg, size);
                        let busy = self.leg_conflicts(pr, *pat, i, leg.port, &tentative);
                        let x = earliest_fit(&busy, cur, d);
                        tentative.push(PlacedLeg {
                            pat: *pat,
                            leg: i,
                            port: leg.port,
                            start: x,
                            end: x + d,
                        });
                        legs.push((x, x + d));
                        cur = x + d;
                    }
                }
                let def_end = legs.first().map_or(f, |l| l.1);
                placed.push(Phys {
                    id: id.clone(),
                    members: members.clone(),
                    producer: t,
                    pat: *pat,
                    legs,
                    def: (s, def_end),
                    ready: cur,
                });
            }
            let mut bump: Option<Clock> = None;
            for p in placed.iter().filter(|p| p.pat != NONE) {
                for &(prod, opat, ds, de) in &self.defs {
                    if prod != t && pr.excl[p.pat][opat] && overlaps(p.def, (ds, de)) {
                        bump = Some(bump.map_or(de, |b: Clock| b.max(de)));
                    }
                }
            }
            if let Some(b) = bump {
                t0 = b.max(s + 1);
                continue;
            }
            // commit
            if info.rt > 0 {
                insert_sorted(&mut self.proc_busy[proc], (s, f));
            }
            self.start[t] = s;
            self.proc[t] = proc;
            self.min_start = self.min_start.min(s);
            self.max_end = self.max_end.max(f);
            for (k, &b) in info.outputs.iter().enumerate() {
                self.pat[b] = pats[k];
                if pats[k] == NONE {
                    self.unplaceable.push(b);
                }
            }
            for p in placed {
                for &m in &p.members {
                    self.ready[m] = p.ready;
                }
                self.max_end = self.max_end.max(p.ready);
                if p.pat != NONE {
                    self.defs.push((t, p.pat, p.def.0, p.def.1));
                }
                self.phys.push(p);
            }
            self.legs.extend(tentative);
            return;
        }
    }

    pub fn placed(&self, t: usize) -> bool {
        self.start[t] != UNSET
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Decoded {
    pub state: State,
    pub objective: Clock,
    pub window: Option<(Clock, Clock)>,
    pub penalties: Vec<Penalty>,
    pub witness: BTreeMap<String, i64>,
}

impl Decoded {
    pub fn feasible(&self) -> bool {
        self.penalties.is_empty()
    }

    /// Scalar used by annealing; any penalty outweighs any objective.
    pub fn cost(&self, h: Clock) -> f64 {
        let pen: f64 = self
            .penalties
            .iter()
            .map(|p| 4.0 * (h as f64 + p.amount as f64))
            .sum();
        self.objective as f64 + pen
    }

    /// Sort key: feasible first, then objective.
    pub fn key(&self) -> (bool, Clock, u64) {
        let pen = self.penalties.iter().map(|p| p.amount.saturating_add(1)).fold(0u64, u64::saturating_add);
        (!self.feasible(), if self.feasible() { self.objective } else { pen }, self.objective)
    }

    pub fn most_binding(&self) -> Option<&Penalty> {
        self.penalties.iter().max_by(|a, b| a.amount.cmp(&b.amount).then_with(|| b.cause.cmp(&a.cause)))
    }
}

/// Adds `[a, b)` folded into `[0, h)` to an event list.
fn fold(events: &mut Vec<(Clock, i128)>, base: &mut i128, a: Clock, b: Clock, amount: u64, h: Clock) {
    if b <= a || amount == 0 {
        return;
    }
    let x = amount as i128;
    let len = b - a;
    *base += (len / h) as i128 * x;
    let rem = len % h;
    if rem == 0 {
        return;
    }
    let a = a % h;
    if a + rem <= h {
        events.push((a, x));
        events.push((a + rem, -x));
    } else {
        events.push((a, x));
        events.push((h, -x));
        events.push((0, x));
        events.push((a + rem - h, -x));
    }
}

fn peak(mut events: Vec<(Clock, i128)>, base: i128) -> i128 {
    events.sort_unstable();
    let mut cur = base;
    let mut best = base;
    for (_, d) in events {
        cur += d;
        best = best.max(cur);
    }
    best
}

/// End of the observing-memory residency of a placed buffer.
pub(crate) fn observe_end(pr: &Problem, st: &State, p: &Phys) -> Clock {
    let mut end = p.ready;
    let mut any = false;
    for &m in &p.members {
        for &(c, d) in &pr.bufs[m].consumers {
            any = true;
            if st.placed(c) {
                end = end.max(st.start[c] + pr.tasks[c].rt + d as Clock * pr.h);
            }
        }
    }
    if !any {
        end = end.max(pr.h);
    }
    end
}

/// Memory intervals of one placed buffer: (memory, start, end).
pub(crate) fn residency(pr: &Problem, st: &State, p: &Phys) -> Vec<(usize, Clock, Clock)> {
    if p.pat == NONE {
        return Vec::new();
    }
    let chain = &pr.pats[p.pat].chain;
    let s = st.start[p.producer];
    let obs = observe_end(pr, st, p);
    let k = p.legs.len();
    if k == 0 {
        return vec![(chain[0], s, obs)];
    }
    let mut out = vec![(chain[0], s, p.legs[0].1)];
    for i in 1..k {
        out.push((chain[i], p.legs[i - 1].0, p.legs[i].1));
    }
    out.push((chain[k], p.legs[k - 1].0, obs));
    out
}

pub(crate) fn finish(pr: &Problem, st: State) -> Decoded {
    let mut penalties = Vec::new();
    for &b in &st.unplaceable {
        penalties.push(Penalty {
            cause: format!("no compatible pattern for buffer {}", pr.bufs[b].id),
            binding: Some(pr.bufs[b].id.clone()),
            amount: pr.bufs[b].size.max(1),
        });
    }
    if st.max_end > pr.h {
        penalties.push(Penalty {
            cause: format!("work ends at {} past the period {}", st.max_end, pr.h),
            binding: Some(pr.period_doc.clone().unwrap_or_else(|| "hyperperiod".into())),
            amount: st.max_end - pr.h,
        });
    }

    // memory, folded over the period
    let nm = pr.mem_names.len();
    let mut events: Vec<Vec<(Clock, i128)>> = vec![Vec::new(); nm];
    let mut base = vec![0i128; nm];
    if pr.h > 0 {
        for p in &st.phys {
            let size = pr.bufs[p.members[0]].size;
            for (m, a, b) in residency(pr, &st, p) {
                fold(&mut events[m], &mut base[m], a, b, size, pr.h);
            }
        }
        for (t, info) in pr.tasks.iter().enumerate() {
            if !st.placed(t) {
                continue;
            }
            let lm = pr.proc_local[st.proc[t]];
            if lm != NONE {
                fold(&mut events[lm], &mut base[lm], st.start[t], st.start[t] + info.rt, info.internal, pr.h);
            }
        }
    }
    for (m, ev) in events.into_iter().enumerate() {
        let used = peak(ev, base[m]);
        let cap = pr.mem_cap[m] as i128;
        if used > cap {
            penalties.push(Penalty {
                cause: format!("memory {} holds {used} bytes, capacity {cap}", pr.mem_names[m]),
                binding: Some(pr.mem_names[m].clone()),
                amount: (used - cap).min(u64::MAX as i128) as u64,
            });
        }
    }

    // constraints
    let mut witness = BTreeMap::new();
    if !pr.constraints.docs.is_empty() {
        let mut known = pr.fixed.clone();
        for (l, bufs) in &pr.labels {
            if pr.constraints.resolved.contains_key(l) {
                let v = bufs.iter().map(|b| st.ready[*b]).filter(|r| *r != UNSET).max().unwrap_or(0);
                known.insert(l.clone(), v as i64);
            }
        }
        let w = match &pr.static_witness {
            Some(w) => w.clone(),
            None => pr.constraints.find_witness(&known, pr.h as i64).ok().flatten(),
        };
        let mut assign = known.clone();
        match w {
            Some(w) => {
                assign.extend(w.iter().map(|(k, v)| (k.clone(), *v)));
                witness = w;
            }
            None => {
                for v in pr.constraints.free_variables() {
                    assign.entry(v.to_string()).or_insert(0);
                }
            }
        }
        match pr.constraints.check_satisfaction(&assign) {
            Ok(vs) => {
                for v in vs {
                    penalties.push(Penalty {
                        cause: format!("constraint {} violated: {}", v.constraint, v.detail),
                        binding: Some(v.constraint.clone()),
                        amount: v.amount.max(1) as u64,
                    });
                }
            }
            Err(e) => penalties.push(Penalty {
                cause: e.to_string(),
                binding: None,
                amount: 1,
            }),
        }
    }

    let window = (st.min_start != UNSET).then_some((st.min_start, st.max_end));
    let objective = if pr.sinks.is_empty() {
        window.map_or(0, |(a, b)| b - a)
    } else {
        pr.sinks
            .iter()
            .map(|(b, arr)| {
                let r = st.ready[*b];
                if r == UNSET { 0 } else { r.saturating_sub(*arr) }
            })
            .max()
            .unwrap_or(0)
    };
    Decoded {
        state: st,
        objective,
        window,
        penalties,
        witness,
    }
}

/// Pattern choice for each output of `t`: the genome's if still usable,
/// else the first usable one.
pub(crate) fn output_patterns(pr: &Problem, g: &Genome, t: usize) -> Vec<usize> {
    pr.tasks[t]
        .outputs
        .iter()
        .map(|&b| {
            let want = g.pat[b];
            if want != NONE && pr.bufs[b].avail.contains(&want) && pr.pattern_ok(b, want, &g.proc) {
                want
            } else {
                pr.first_ok_pattern(b, &g.proc).unwrap_or(NONE)
            }
        })
        .collect()
}

pub(crate) fn decode(pr: &Problem, g: &Genome) -> Decoded {
    let n = pr.tasks.len();
    let mut st = State::new(pr);
    let mut indeg: Vec<usize> = pr.tasks.iter().map(|t| t.preds.len()).collect();
    let mut heap: BinaryHeap<Reverse<(u32, usize)>> = (0..n)
        .filter(|t| indeg[*t] == 0)
        .map(|t| Reverse((g.rank[t], t)))
        .collect();
    while let Some(Reverse((_, t))) = heap.pop() {
        let pats = output_patterns(pr, g, t);
        let not_before = st.est(pr, t) + g.slack[t];
        st.place(pr, t, g.proc[t], &pats, not_before);
        for &s in &pr.tasks[t].succs {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                heap.push(Reverse((g.rank[s], s)));
            }
        }
    }
    finish(pr, st)
}

impl Problem {
    pub(crate) fn to_schedule(&self, d: &Decoded, origin: Origin, seed: u64) -> Schedule {
        let st = &d.state;
        let mut task_to_processor = BTreeMap::new();
        let mut start = BTreeMap::new();
        for (t, info) in self.tasks.iter().enumerate() {
            if st.placed(t) {
                task_to_processor.insert(info.id.clone(), self.proc_names[st.proc[t]].clone());
                start.insert(info.id.clone(), st.start[t]);
            }
        }
        let mut buffer_to_pattern = BTreeMap::new();
        for (b, info) in self.bufs.iter().enumerate() {
            if st.pat[b] != NONE {
                buffer_to_pattern.insert(info.id.clone(), self.pats[st.pat[b]].name.clone());
            }
        }
        let mut transfers = BTreeMap::new();
        for p in &st.phys {
            if p.pat == NONE || p.legs.is_empty() {
                continue;
            }
            let pat = &self.pats[p.pat];
            let legs = p
                .legs
                .iter()
                .zip(&pat.legs)
                .map(|(&(s, e), l)| LegTiming {
                    port: self.ports[l.port].name.clone(),
                    from: self.mem_names[l.from].clone(),
                    to: self.mem_names[l.to].clone(),
                    start: s,
                    duration: e - s,
                })
                .collect();
            transfers.insert(p.id.clone(), legs);
        }
        Schedule {
            hyperperiod: self.h,
            task_to_processor,
            buffer_to_pattern,
            witness: d.witness.clone(),
            start,
            transfers,
            objective: self.objective.clone(),
            objective_value: d.objective,
            active_window: d.window.unwrap_or((0, 0)),
            origin,
            seed,
            config: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_skips_busy() {
        let busy = [(0, 5), (7, 9)];
        assert_eq!(earliest_fit(&busy, 0, 2), 5);
        assert_eq!(earliest_fit(&busy, 0, 3), 9);
        assert_eq!(earliest_fit(&busy, 6, 1), 6);
        assert_eq!(earliest_fit(&busy, 3, 0), 3);
    }

    #[test]
    fn fold_wraps() {
        let mut ev = Vec::new();
        let mut base = 0;
        fold(&mut ev, &mut base, 8, 12, 5, 10);
        assert_eq!(peak(ev.clone(), base), 5);
        fold(&mut ev, &mut base, 0, 25, 1, 10);
        // two full periods plus [0,5)
        assert_eq!(base, 2);
        assert_eq!(peak(ev, base), 8);
    }
}
