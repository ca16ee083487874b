//! Flattens a flow hierarchy into a [`TaskGraph`].

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::graph::*;
use crate::model::{Clock, Expr, Layered, ModelError, SymbolTable};
use crate::platform::{GroundedMeta, PlatformDesc, ProcClass, ASSIGN_EMPTY_META, ERROR_MESSAGE_META};
use crate::rdsl::ast::*;
use crate::rdsl::Span;

pub const MAX_CALL_DEPTH: usize = 32;
pub const DEFAULT_ACTION_COST: Clock = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ElabError {
    #[error("unknown flow `{0}`")]
    UnknownFlow(String),
    #[error("{span}: `{name}` is neither a flow nor a modifier")]
    UnknownCallee { name: String, span: Span },
    #[error("flow `{0}` calls itself")]
    RecursiveFlow(String),
    #[error("call depth exceeds {MAX_CALL_DEPTH} at `{0}`")]
    TooDeep(String),
    #[error("{span}: {source}")]
    UnboundDimension { span: Span, source: ModelError },
    #[error("{span}: index {index} of `{stream}` is outside 1..={dim}")]
    IndexOutOfRange {
        stream: String,
        index: i64,
        dim: usize,
        span: Span,
    },
    #[error("{span}: `{stream}` has {dims} dimension(s) but {given} indices were given")]
    TooManyIndices {
        stream: String,
        dims: usize,
        given: usize,
        span: Span,
    },
    #[error("{span}: cannot bind `{actual}` (dims {actual_dims:?}) to `{formal}` (dims {formal_dims:?})")]
    DimensionMismatch {
        formal: String,
        actual: String,
        formal_dims: Vec<usize>,
        actual_dims: Vec<usize>,
        span: Span,
    },
    #[error("{span}: undeclared stream `{0}`", span = .1)]
    UndeclaredStream(String, Span),
    #[error("{span}: `{callee}` has no parameter `{formal}`")]
    UnknownFormal {
        callee: String,
        formal: String,
        span: Span,
    },
    #[error("{span}: `{callee}` takes {expected} argument(s), {given} given")]
    ArityMismatch {
        callee: String,
        expected: usize,
        given: usize,
        span: Span,
    },
    #[error("{span}: `{callee}` index argument `{name}` is not an index variable")]
    BadIndexArg {
        callee: String,
        name: String,
        span: Span,
    },
    #[error("flow `{callee}` needs {expected} index value(s), the call provides {given}")]
    MissingIndex {
        callee: String,
        expected: usize,
        given: usize,
    },
    #[error("buffer `{buffer}` is defined by both `{first}` and `{second}`")]
    DoubleDefine {
        buffer: String,
        first: String,
        second: String,
    },
    #[error("{span}: output `{stream}` is written through a delayed reference")]
    DelayedWrite { stream: String, span: Span },
    #[error("buffer `{buffer}` is read by `{consumer}` but never defined")]
    DanglingConsumer { buffer: String, consumer: String },
    #[error("modifier `{modifier}` calls `{function}`, which has no metadata")]
    UnknownFunction { modifier: String, function: String },
    #[error("{0}")]
    Cycle(#[from] CycleError),
    #[error("arrival given for unknown source `{0}`")]
    UnknownArrival(String),
}

/// Inputs elaboration needs besides the source unit.
pub struct ElabContext<'a> {
    pub symbols: &'a SymbolTable,
    pub metas: &'a BTreeMap<String, GroundedMeta>,
    pub platform: &'a PlatformDesc,
    /// Top-level IN stream name or source buffer id → arrival offset.
    pub arrivals: &'a BTreeMap<String, Clock>,
}

/// Result of lowering one modifier's body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskTemplate {
    pub arms: Vec<TaskArm>,
    pub optional_params: BTreeSet<String>,
    pub worst_case_runtime: Clock,
    pub function: Option<String>,
    pub internalsize: u64,
    pub elementsize: u64,
}

pub fn lower_guards(
    m: &ModifierDef,
    metas: &BTreeMap<String, GroundedMeta>,
) -> Result<TaskTemplate, ElabError> {
    let special = |name: &str| metas.get(name).map_or(DEFAULT_ACTION_COST, |g| g.runtime);
    let mut arms = Vec::new();
    let mut optional_params = BTreeSet::new();
    let mut function = None;
    let mut internalsize = 0;
    for arm in m.arms() {
        if let Some(s) = arm.cond.stream() {
            optional_params.insert(s.to_string());
        }
        let mut cost = 0;
        let mut actions = Vec::new();
        for a in &arm.actions {
            match a {
                Action::Call { function: f, args } => {
                    let meta = metas.get(f).ok_or_else(|| ElabError::UnknownFunction {
                        modifier: m.name.clone(),
                        function: f.clone(),
                    })?;
                    cost += meta.runtime;
                    internalsize = internalsize.max(meta.internalsize);
                    function.get_or_insert_with(|| f.clone());
                    actions.push(ArmAction::Call {
                        function: f.clone(),
                        args: args.clone(),
                    });
                }
                Action::ErrorMessage { target, .. } => {
                    cost += special(ERROR_MESSAGE_META);
                    actions.push(ArmAction::ErrorMessage {
                        target: target.clone(),
                    });
                }
                Action::AssignEmpty { target } => {
                    cost += special(ASSIGN_EMPTY_META);
                    actions.push(ArmAction::AssignEmpty {
                        target: target.clone(),
                    });
                }
            }
        }
        arms.push(TaskArm {
            cond: arm.cond.clone(),
            actions,
            cost,
        });
    }
    let worst_case_runtime = arms.iter().map(|a| a.cost).max().unwrap_or(0);
    let elementsize = function
        .as_ref()
        .map_or(0, |f: &String| metas[f].elementsize);
    Ok(TaskTemplate {
        arms,
        optional_params,
        worst_case_runtime,
        function,
        internalsize,
        elementsize,
    })
}

/// A tensor of buffer bundles: each cell is the set of buffers one scalar
/// position stands for.
#[derive(Debug, Clone)]
struct Tensor {
    dims: Vec<usize>,
    cells: Vec<Vec<BufRef>>,
}

impl Tensor {
    fn index(&self, idx: &[usize]) -> Tensor {
        let rest: Vec<usize> = self.dims[idx.len()..].to_vec();
        let inner: usize = rest.iter().product();
        let mut offset = 0;
        for (k, i) in idx.iter().enumerate() {
            let stride: usize = self.dims[k + 1..].iter().product();
            offset += i * stride;
        }
        Tensor {
            dims: rest,
            cells: self.cells[offset..offset + inner].to_vec(),
        }
    }

    fn delayed(mut self, k: u32) -> Tensor {
        for c in &mut self.cells {
            for r in c {
                r.delay += k;
            }
        }
        self
    }

    fn aggregate(&self) -> Tensor {
        let mut all: Vec<BufRef> = self.cells.iter().flatten().cloned().collect();
        all.sort();
        all.dedup();
        Tensor {
            dims: vec![],
            cells: vec![all],
        }
    }
}

#[derive(Debug, Default)]
struct BufDraft {
    stream: String,
    label: Option<String>,
    top: Option<Direction>,
    producer: Option<TaskId>,
    consumers: BTreeSet<Consumer>,
    size: u64,
}

struct Elaborator<'a> {
    unit: &'a SourceUnit,
    ctx: &'a ElabContext<'a>,
    bufs: BTreeMap<BufId, BufDraft>,
    tasks: BTreeMap<TaskId, TaskInstance>,
    templates: BTreeMap<String, TaskTemplate>,
    stack: Vec<String>,
}

fn join(path: &str, leaf: &str) -> String {
    if path.is_empty() {
        leaf.to_string()
    } else {
        format!("{path}/{leaf}")
    }
}

fn suffix(idx: &[i64]) -> String {
    idx.iter().map(|i| format!("[{i}]")).collect()
}

pub fn elaborate(unit: &SourceUnit, top: &str, ctx: &ElabContext) -> Result<TaskGraph, ElabError> {
    let flow = unit
        .flow(top)
        .ok_or_else(|| ElabError::UnknownFlow(top.to_string()))?;
    let mut e = Elaborator {
        unit,
        ctx,
        bufs: BTreeMap::new(),
        tasks: BTreeMap::new(),
        templates: BTreeMap::new(),
        stack: Vec::new(),
    };
    e.instantiate(flow, "", &BTreeMap::new(), BTreeMap::new(), true)?;
    e.finish()
}

impl<'a> Elaborator<'a> {
    fn eval(&self, expr: &Expr, scope: &BTreeMap<String, i64>, span: Span) -> Result<i64, ElabError> {
        expr.eval_int(&Layered(scope, self.ctx.symbols))
            .map_err(|source| ElabError::UnboundDimension { span, source })
    }

    fn dims(&self, s: &StreamDecl, scope: &BTreeMap<String, i64>) -> Result<Vec<usize>, ElabError> {
        s.dims
            .iter()
            .map(|d| {
                let v = self.eval(d, scope, s.pos.0)?;
                usize::try_from(v).map_err(|_| ElabError::UnboundDimension {
                    span: s.pos.0,
                    source: ModelError::Overflow,
                })
            })
            .collect()
    }

    fn fresh(&mut self, path: &str, s: &StreamDecl, dims: Vec<usize>, top: bool) -> Tensor {
        let n: usize = dims.iter().product();
        let mut cells = Vec::with_capacity(n);
        for flat in 0..n {
            let mut idx = Vec::with_capacity(dims.len());
            let mut rem = flat;
            for k in 0..dims.len() {
                let stride: usize = dims[k + 1..].iter().product();
                idx.push((rem / stride) as i64 + 1);
                rem %= stride;
            }
            let id = join(path, &format!("{}{}", s.name, suffix(&idx)));
            self.bufs.insert(
                id.clone(),
                BufDraft {
                    stream: join(path, &s.name),
                    label: s.label.clone(),
                    top: top.then_some(s.direction),
                    ..BufDraft::default()
                },
            );
            cells.push(vec![BufRef::now(id)]);
        }
        Tensor { dims, cells }
    }

    fn resolve_ref(
        &self,
        env: &BTreeMap<String, Tensor>,
        r: &StreamRef,
        scope: &BTreeMap<String, i64>,
    ) -> Result<Tensor, ElabError> {
        let span = r.pos.0;
        let t = env
            .get(&r.name)
            .ok_or_else(|| ElabError::UndeclaredStream(r.name.clone(), span))?;
        if r.indices.len() > t.dims.len() {
            return Err(ElabError::TooManyIndices {
                stream: r.name.clone(),
                dims: t.dims.len(),
                given: r.indices.len(),
                span,
            });
        }
        let mut idx = Vec::new();
        for (k, e) in r.indices.iter().enumerate() {
            let v = self.eval(e, scope, span)?;
            if v < 1 || v as usize > t.dims[k] {
                return Err(ElabError::IndexOutOfRange {
                    stream: r.name.clone(),
                    index: v,
                    dim: t.dims[k],
                    span,
                });
            }
            idx.push(v as usize - 1);
        }
        let sub = t.index(&idx);
        Ok(match r.delay {
            Some(k) => sub.delayed(k),
            None => sub,
        })
    }

    fn instantiate(
        &mut self,
        flow: &'a FlowDef,
        path: &str,
        scope: &BTreeMap<String, i64>,
        mut env: BTreeMap<String, Tensor>,
        top: bool,
    ) -> Result<(), ElabError> {
        if self.stack.contains(&flow.name) {
            return Err(ElabError::RecursiveFlow(flow.name.clone()));
        }
        if self.stack.len() >= MAX_CALL_DEPTH {
            return Err(ElabError::TooDeep(flow.name.clone()));
        }
        self.stack.push(flow.name.clone());
        for s in &flow.streams {
            if !env.contains_key(&s.name) {
                let dims = self.dims(s, scope)?;
                let t = self.fresh(path, s, dims, top);
                env.insert(s.name.clone(), t);
            } else if let Some(label) = &s.label {
                // a label on a bound interface stream names the caller's buffers
                for b in env[&s.name].cells.iter().flatten() {
                    if let Some(d) = self.bufs.get_mut(&b.buffer) {
                        d.label.get_or_insert_with(|| label.clone());
                    }
                }
            }
        }
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        for call in &flow.body {
            *seen.entry(&call.callee).or_default() += 1;
        }
        let mut occurrence: BTreeMap<&str, usize> = BTreeMap::new();
        for call in &flow.body {
            let n = occurrence.entry(&call.callee).or_default();
            *n += 1;
            let tag = if seen[call.callee.as_str()] > 1 {
                format!("@{n}")
            } else {
                String::new()
            };
            self.expand_call(flow, call, path, scope, &env, &tag)?;
        }
        self.stack.pop();
        Ok(())
    }

    fn expand_call(
        &mut self,
        flow: &FlowDef,
        call: &'a CallStmt,
        path: &str,
        scope: &BTreeMap<String, i64>,
        env: &BTreeMap<String, Tensor>,
        tag: &str,
    ) -> Result<(), ElabError> {
        let span = call.pos.0;
        let mut ranges = Vec::new();
        for (var, lo, hi) in call.ranges() {
            ranges.push((
                var.to_string(),
                self.eval(lo, scope, span)?,
                self.eval(hi, scope, span)?,
            ));
        }
        let mut combos: Vec<Vec<i64>> = vec![vec![]];
        for (_, lo, hi) in &ranges {
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    (*lo..=*hi).map(move |v| {
                        let mut c = c.clone();
                        c.push(v);
                        c
                    })
                })
                .collect();
        }
        for values in combos {
            let mut inner = scope.clone();
            for ((var, _, _), v) in ranges.iter().zip(&values) {
                inner.insert(var.clone(), *v);
            }
            let leaf = format!("{}{}{}", call.callee, suffix(&values), tag);
            let child = join(path, &leaf);
            if let Some(m) = self.unit.modifier(&call.callee) {
                self.make_task(flow, call, m, &child, &inner, env)?;
            } else if let Some(f) = self.unit.flow(&call.callee) {
                self.call_flow(flow, call, f, &child, &inner, &values, env)?;
            } else {
                return Err(ElabError::UnknownCallee {
                    name: call.callee.clone(),
                    span,
                });
            }
        }
        Ok(())
    }

    /// Splits call args into index values and stream bindings.
    fn split_args<'c>(
        &self,
        call: &'c CallStmt,
        scope: &BTreeMap<String, i64>,
        env: &BTreeMap<String, Tensor>,
    ) -> Result<(Vec<(String, i64)>, Vec<(Option<String>, Tensor, &'c StreamRef)>), ElabError> {
        let mut index = Vec::new();
        let mut streams = Vec::new();
        for a in &call.args {
            match a {
                CallArg::Range { .. } => {}
                CallArg::Positional(r) if r.is_bare() && !env.contains_key(&r.name) => {
                    let v = scope.get(&r.name).ok_or_else(|| ElabError::BadIndexArg {
                        callee: call.callee.clone(),
                        name: r.name.clone(),
                        span: r.pos.0,
                    })?;
                    index.push((r.name.clone(), *v));
                }
                CallArg::Positional(r) => streams.push((None, self.resolve_ref(env, r, scope)?, r)),
                CallArg::Binding { formal, stream } => streams.push((
                    Some(formal.clone()),
                    self.resolve_ref(env, stream, scope)?,
                    stream,
                )),
            }
        }
        Ok((index, streams))
    }

    #[allow(clippy::too_many_arguments)]
    fn call_flow(
        &mut self,
        _caller: &FlowDef,
        call: &CallStmt,
        callee: &'a FlowDef,
        child: &str,
        scope: &BTreeMap<String, i64>,
        range_values: &[i64],
        env: &BTreeMap<String, Tensor>,
    ) -> Result<(), ElabError> {
        let (index, streams) = self.split_args(call, scope, env)?;
        let mut values: Vec<i64> = range_values.to_vec();
        values.extend(index.iter().map(|(_, v)| *v));
        if values.len() < callee.formals.len() {
            return Err(ElabError::MissingIndex {
                callee: callee.name.clone(),
                expected: callee.formals.len(),
                given: values.len(),
            });
        }
        let inner_scope: BTreeMap<String, i64> = callee
            .formals
            .iter()
            .cloned()
            .zip(values.iter().copied())
            .collect();
        let iface: Vec<&StreamDecl> = callee.interface().collect();
        let mut bound = BTreeMap::new();
        let mut positional = iface.iter();
        for (formal, actual, r) in streams {
            let decl = match &formal {
                Some(f) => callee.stream(f).filter(|s| s.direction != Direction::Internal),
                None => positional.next().copied(),
            }
            .ok_or_else(|| match &formal {
                Some(f) => ElabError::UnknownFormal {
                    callee: callee.name.clone(),
                    formal: f.clone(),
                    span: r.pos.0,
                },
                None => ElabError::ArityMismatch {
                    callee: callee.name.clone(),
                    expected: iface.len(),
                    given: iface.len() + 1,
                    span: call.pos.0,
                },
            })?;
            let fdims = self.dims(decl, &inner_scope)?;
            let t = adapt(&decl.name, &fdims, actual, r)?;
            if decl.direction == Direction::Out && t.cells.iter().flatten().any(|b| b.delay > 0) {
                return Err(ElabError::DelayedWrite {
                    stream: r.name.clone(),
                    span: r.pos.0,
                });
            }
            bound.insert(decl.name.clone(), t);
        }
        self.instantiate(callee, child, &inner_scope, bound, false)
    }

    fn make_task(
        &mut self,
        _flow: &FlowDef,
        call: &CallStmt,
        m: &ModifierDef,
        id: &str,
        scope: &BTreeMap<String, i64>,
        env: &BTreeMap<String, Tensor>,
    ) -> Result<(), ElabError> {
        if !self.templates.contains_key(&m.name) {
            let t = lower_guards(m, self.ctx.metas)?;
            self.templates.insert(m.name.clone(), t);
        }
        let tpl = self.templates[&m.name].clone();
        let (index, streams) = self.split_args(call, scope, env)?;
        let given = streams.len();
        let mut params: BTreeMap<String, TaskParam> = BTreeMap::new();
        let mut positional = m.params.iter();
        for (formal, actual, r) in streams {
            let p = match &formal {
                Some(f) => m.param(f),
                None => positional.next(),
            }
            .ok_or_else(|| match &formal {
                Some(f) => ElabError::UnknownFormal {
                    callee: m.name.clone(),
                    formal: f.clone(),
                    span: r.pos.0,
                },
                None => ElabError::ArityMismatch {
                    callee: m.name.clone(),
                    expected: m.params.len(),
                    given,
                    span: call.pos.0,
                },
            })?;
            let bundle = actual.aggregate().cells.remove(0);
            if p.dir == ParamDir::Out && bundle.iter().any(|b| b.delay > 0) {
                return Err(ElabError::DelayedWrite {
                    stream: r.name.clone(),
                    span: r.pos.0,
                });
            }
            params.insert(
                p.name.clone(),
                TaskParam {
                    dir: p.dir.into(),
                    buffers: bundle,
                },
            );
        }
        if params.len() != m.params.len() {
            return Err(ElabError::ArityMismatch {
                callee: m.name.clone(),
                expected: m.params.len(),
                given,
                span: call.pos.0,
            });
        }

        let mut hard = BTreeSet::new();
        let mut optional = BTreeSet::new();
        let mut outputs = BTreeSet::new();
        for (name, p) in &params {
            match p.dir {
                ParamDirSer::In if tpl.optional_params.contains(name) => {
                    optional.extend(p.buffers.iter().cloned())
                }
                ParamDirSer::In => hard.extend(p.buffers.iter().cloned()),
                ParamDirSer::Out => outputs.extend(p.buffers.iter().map(|b| b.buffer.clone())),
            }
        }
        let optional: BTreeSet<BufRef> = optional.difference(&hard).cloned().collect();

        let platform = self.ctx.platform;
        let available: Vec<String> = match &tpl.function {
            Some(f) => self.ctx.metas[f].available_patterns.clone(),
            None => platform
                .patterns
                .values()
                .filter(|p| {
                    platform.processors[&p.home_processor].class == ProcClass::Cpu
                })
                .map(|p| p.name.clone())
                .collect(),
        };
        let candidates: BTreeSet<String> = available
            .iter()
            .filter_map(|p| platform.patterns.get(p).map(|p| p.home_processor.clone()))
            .collect();

        for o in &outputs {
            let d = self.bufs.get_mut(o).expect("buffer registered");
            if let Some(first) = &d.producer {
                return Err(ElabError::DoubleDefine {
                    buffer: o.clone(),
                    first: first.clone(),
                    second: id.to_string(),
                });
            }
            if d.top == Some(Direction::In) {
                return Err(ElabError::DoubleDefine {
                    buffer: o.clone(),
                    first: "<source>".into(),
                    second: id.to_string(),
                });
            }
            d.producer = Some(id.to_string());
            d.size = tpl.elementsize;
        }
        for r in hard.iter().chain(&optional) {
            self.bufs
                .get_mut(&r.buffer)
                .expect("buffer registered")
                .consumers
                .insert(Consumer {
                    task: id.to_string(),
                    delay: r.delay,
                });
        }
        let labels = outputs
            .iter()
            .filter_map(|o| self.bufs[o].label.clone())
            .collect();
        self.tasks.insert(
            id.to_string(),
            TaskInstance {
                id: id.to_string(),
                modifier: m.name.clone(),
                function: tpl.function.clone(),
                index_params: index.into_iter().collect(),
                worst_case_runtime: tpl.worst_case_runtime,
                internalsize: tpl.internalsize,
                hard_inputs: hard,
                optional_inputs: optional,
                outputs,
                candidates: candidates.into_iter().collect(),
                available_patterns: available,
                params,
                arms: tpl.arms.clone(),
                labels,
            },
        );
        Ok(())
    }

    fn finish(self) -> Result<TaskGraph, ElabError> {
        let mut g = TaskGraph::default();
        let mut known_sources = BTreeSet::new();
        for (id, d) in self.bufs {
            let external = match (d.top, &d.producer, d.consumers.is_empty()) {
                (Some(Direction::In), _, _) => External::Source,
                (Some(Direction::Out), None, _) => {
                    return Err(ElabError::DanglingConsumer {
                        buffer: id,
                        consumer: "<sink>".into(),
                    })
                }
                (Some(Direction::Out), Some(_), _) => External::Sink,
                (_, None, true) => continue,
                (_, None, false) => {
                    return Err(ElabError::DanglingConsumer {
                        buffer: id,
                        consumer: d.consumers.first().expect("non-empty").task.clone(),
                    })
                }
                (_, Some(_), true) => {
                    g.warnings
                        .push(format!("buffer `{id}` is never read; treating it as a sink"));
                    External::Sink
                }
                (_, Some(_), false) => External::None,
            };
            let arrival = if external == External::Source {
                known_sources.insert(d.stream.clone());
                known_sources.insert(id.clone());
                self.ctx
                    .arrivals
                    .get(&id)
                    .or_else(|| self.ctx.arrivals.get(&d.stream))
                    .copied()
                    .unwrap_or(0)
            } else {
                0
            };
            if let Some(l) = &d.label {
                g.labels.entry(l.clone()).or_default().insert(id.clone());
            }
            g.buffers.insert(
                id.clone(),
                BufferInstance {
                    id,
                    stream: d.stream,
                    producer: d.producer,
                    delay: d.consumers.iter().map(|c| c.delay).max().unwrap_or(0),
                    consumers: d.consumers,
                    size_bytes: d.size,
                    sibling_group: None,
                    external,
                    arrival,
                },
            );
        }
        for k in self.ctx.arrivals.keys() {
            if !known_sources.contains(k) {
                return Err(ElabError::UnknownArrival(k.clone()));
            }
        }
        g.tasks = self.tasks;
        g.topo_order()?;
        Ok(g)
    }
}

fn adapt(formal: &str, fdims: &[usize], actual: Tensor, r: &StreamRef) -> Result<Tensor, ElabError> {
    if actual.dims == fdims {
        Ok(actual)
    } else if fdims.is_empty() {
        Ok(actual.aggregate())
    } else {
        Err(ElabError::DimensionMismatch {
            formal: formal.to_string(),
            actual: r.name.clone(),
            formal_dims: fdims.to_vec(),
            actual_dims: actual.dims,
            span: r.pos.0,
        })
    }
}

/// Splits buffers whose consumers fall into more than one candidate
/// processor set. Siblings are named `<id>~<k>`.
pub fn expand_siblings(graph: &TaskGraph) -> TaskGraph {
    let mut g = graph.clone();
    let mut renames: BTreeMap<(BufId, TaskId), BufId> = BTreeMap::new();
    for b in graph.buffers.values() {
        if b.external == External::Source || b.sibling_group.is_some() {
            continue;
        }
        let mut groups: BTreeMap<&Vec<String>, BTreeSet<Consumer>> = BTreeMap::new();
        for c in &b.consumers {
            groups
                .entry(&graph.tasks[&c.task].candidates)
                .or_default()
                .insert(c.clone());
        }
        if groups.len() < 2 {
            continue;
        }
        g.buffers.remove(&b.id);
        for (k, (_, consumers)) in groups.into_iter().enumerate() {
            let sid = format!("{}~{k}", b.id);
            for c in &consumers {
                renames.insert((b.id.clone(), c.task.clone()), sid.clone());
            }
            g.buffers.insert(
                sid.clone(),
                BufferInstance {
                    id: sid.clone(),
                    delay: consumers.iter().map(|c| c.delay).max().unwrap_or(0),
                    consumers,
                    sibling_group: Some(b.id.clone()),
                    ..b.clone()
                },
            );
            if let Some(p) = &b.producer {
                let t = g.tasks.get_mut(p).expect("producer");
                t.outputs.remove(&b.id);
                t.outputs.insert(sid.clone());
                for prm in t.params.values_mut() {
                    if prm.dir == ParamDirSer::Out && prm.buffers.iter().any(|r| r.buffer == b.id) {
                        prm.buffers.retain(|r| r.buffer != b.id);
                        prm.buffers.push(BufRef::now(sid.clone()));
                        prm.buffers.sort();
                    }
                }
            }
        }
        for set in g.labels.values_mut() {
            if set.remove(&b.id) {
                set.extend(
                    g.buffers
                        .values()
                        .filter(|s| s.sibling_group.as_deref() == Some(&b.id))
                        .map(|s| s.id.clone()),
                );
            }
        }
    }
    rename_inputs(&mut g, &renames);
    g
}

fn rename_inputs(g: &mut TaskGraph, renames: &BTreeMap<(BufId, TaskId), BufId>) {
    if renames.is_empty() {
        return;
    }
    for t in g.tasks.values_mut() {
        let map = |r: &BufRef| -> BufRef {
            match renames.get(&(r.buffer.clone(), t.id.clone())) {
                Some(n) => BufRef {
                    buffer: n.clone(),
                    delay: r.delay,
                },
                None => r.clone(),
            }
        };
        t.hard_inputs = t.hard_inputs.iter().map(map).collect();
        t.optional_inputs = t.optional_inputs.iter().map(map).collect();
        for p in t.params.values_mut() {
            if p.dir == ParamDirSer::In {
                p.buffers = p.buffers.iter().map(map).collect();
                p.buffers.sort();
                p.buffers.dedup();
            }
        }
    }
}

/// Merges siblings of one group that were assigned the same pattern. A
/// group that collapses to one buffer gets its original id back.
pub fn merge_redundant_siblings(
    graph: &TaskGraph,
    assignment: &BTreeMap<BufId, String>,
) -> TaskGraph {
    let mut g = graph.clone();
    let mut groups: BTreeMap<&str, BTreeMap<&str, Vec<&BufferInstance>>> = BTreeMap::new();
    for b in graph.buffers.values() {
        if let (Some(grp), Some(p)) = (&b.sibling_group, assignment.get(&b.id)) {
            groups
                .entry(grp)
                .or_default()
                .entry(p)
                .or_default()
                .push(b);
        }
    }
    let mut renames: BTreeMap<(BufId, TaskId), BufId> = BTreeMap::new();
    for (grp, by_pattern) in groups {
        let members: usize = graph
            .buffers
            .values()
            .filter(|b| b.sibling_group.as_deref() == Some(grp))
            .count();
        let collapse = by_pattern.len() == 1 && by_pattern.values().next().expect("one").len() == members;
        for (_, sibs) in by_pattern {
            if sibs.len() < 2 && !collapse {
                continue;
            }
            let keep = if collapse {
                grp.to_string()
            } else {
                sibs[0].id.clone()
            };
            let mut merged = BufferInstance {
                id: keep.clone(),
                consumers: BTreeSet::new(),
                sibling_group: (!collapse).then(|| grp.to_string()),
                ..sibs[0].clone()
            };
            for s in &sibs {
                g.buffers.remove(&s.id);
                merged.consumers.extend(s.consumers.iter().cloned());
                for c in &s.consumers {
                    renames.insert((s.id.clone(), c.task.clone()), keep.clone());
                }
                if let Some(p) = &s.producer {
                    let t = g.tasks.get_mut(p).expect("producer");
                    t.outputs.remove(&s.id);
                    t.outputs.insert(keep.clone());
                    for prm in t.params.values_mut() {
                        for r in &mut prm.buffers {
                            if r.buffer == s.id {
                                r.buffer = keep.clone();
                            }
                        }
                        prm.buffers.sort();
                        prm.buffers.dedup();
                    }
                }
                for set in g.labels.values_mut() {
                    if set.remove(&s.id) {
                        set.insert(keep.clone());
                    }
                }
            }
            merged.delay = merged.consumers.iter().map(|c| c.delay).max().unwrap_or(0);
            g.buffers.insert(keep, merged);
        }
    }
    rename_inputs(&mut g, &renames);
    g
}

#[cfg(test)]
mod tests;
