use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::ast::*;
use super::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DiagnosticKind {
    DuplicateName,
    UndeclaredStream,
    ArityMismatch,
    UnknownFormal,
    MissingTrueArm,
    InvalidGuard,
    UnknownParam,
    InvalidTarget,
    DoubleAssign,
    /// An OUT parameter left unassigned on some arm; it becomes EMPTY there.
    UnassignedOutput,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub kind: DiagnosticKind,
    pub span: Span,
    pub message: String,
}

impl Diagnostic {
    fn error(kind: DiagnosticKind, span: Span, message: String) -> Self {
        Diagnostic {
            severity: Severity::Error,
            kind,
            span,
            message,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}: {sev}: {:?}: {}", self.span, self.kind, self.message)
    }
}

/// Static checks over a parsed unit. Problems are returned, never raised.
pub fn validate_unit(unit: &SourceUnit) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut seen = BTreeMap::new();
    let defs = unit
        .flows
        .iter()
        .map(|f| (&f.name, f.pos.0))
        .chain(unit.modifiers.iter().map(|m| (&m.name, m.pos.0)));
    for (name, span) in defs {
        if seen.insert(name.clone(), span).is_some() {
            diags.push(Diagnostic::error(
                DiagnosticKind::DuplicateName,
                span,
                format!("`{name}` is defined more than once"),
            ));
        }
    }
    for flow in &unit.flows {
        check_flow(unit, flow, &mut diags);
    }
    for m in &unit.modifiers {
        check_modifier(m, &mut diags);
    }
    diags.sort_by_key(|d| (d.span, d.kind));
    diags
}

fn check_flow(unit: &SourceUnit, flow: &FlowDef, diags: &mut Vec<Diagnostic>) {
    let mut declared = BTreeSet::new();
    for s in &flow.streams {
        if !declared.insert(s.name.as_str()) {
            diags.push(Diagnostic::error(
                DiagnosticKind::DuplicateName,
                s.pos.0,
                format!("stream `{}` declared twice in flow `{}`", s.name, flow.name),
            ));
        }
    }
    for call in &flow.body {
        let mut index_vars: BTreeSet<&str> = flow.formals.iter().map(String::as_str).collect();
        index_vars.extend(call.ranges().map(|(v, _, _)| v));

        let mut named = Vec::new();
        let mut positional = 0usize;
        for arg in &call.args {
            match arg {
                CallArg::Range { .. } => {}
                CallArg::Binding { formal, stream } => {
                    named.push((formal.as_str(), stream.pos.0));
                    check_ref(flow, &declared, stream, diags);
                }
                CallArg::Positional(stream) => {
                    if stream.is_bare() && index_vars.contains(stream.name.as_str()) {
                        continue;
                    }
                    positional += 1;
                    check_ref(flow, &declared, stream, diags);
                }
            }
        }

        let formals: Option<Vec<&str>> = if let Some(m) = unit.modifier(&call.callee) {
            Some(m.params.iter().map(|p| p.name.as_str()).collect())
        } else {
            unit.flow(&call.callee)
                .map(|f| f.streams.iter().map(|s| s.name.as_str()).collect())
        };
        let Some(formals) = formals else { continue };
        let is_modifier = unit.modifier(&call.callee).is_some();
        for (formal, span) in &named {
            if !formals.contains(formal) {
                diags.push(Diagnostic::error(
                    DiagnosticKind::UnknownFormal,
                    *span,
                    format!("`{}` has no parameter `{formal}`", call.callee),
                ));
            }
        }
        let arity_ok = if is_modifier {
            positional + named.len() == formals.len()
        } else {
            let iface = unit
                .flow(&call.callee)
                .map(|f| f.interface().count())
                .unwrap_or(0);
            positional <= iface
        };
        if !arity_ok {
            diags.push(Diagnostic::error(
                DiagnosticKind::ArityMismatch,
                call.pos.0,
                format!(
                    "`{}` takes {} stream argument(s), {} given",
                    call.callee,
                    formals.len(),
                    positional + named.len()
                ),
            ));
        }
    }
}

fn check_ref(
    flow: &FlowDef,
    declared: &BTreeSet<&str>,
    stream: &StreamRef,
    diags: &mut Vec<Diagnostic>,
) {
    if !declared.contains(stream.name.as_str()) {
        diags.push(Diagnostic::error(
            DiagnosticKind::UndeclaredStream,
            stream.pos.0,
            format!(
                "stream `{}` is not declared in flow `{}`",
                stream.name, flow.name
            ),
        ));
    }
}

fn check_modifier(m: &ModifierDef, diags: &mut Vec<Diagnostic>) {
    let mut names = BTreeSet::new();
    for p in &m.params {
        if !names.insert(p.name.as_str()) {
            diags.push(Diagnostic::error(
                DiagnosticKind::DuplicateName,
                m.pos.0,
                format!("parameter `{}` repeated in `{}`", p.name, m.name),
            ));
        }
    }
    if let ModifierBody::Guarded(block) = &m.body {
        if !matches!(block.arms.last(), Some(a) if a.cond == GuardCond::True) {
            diags.push(Diagnostic::error(
                DiagnosticKind::MissingTrueArm,
                m.pos.0,
                format!("guarded block in `{}` must end with a TRUE arm", m.name),
            ));
        }
    }
    for arm in m.arms() {
        if let Some(s) = arm.cond.stream() {
            if !matches!(m.param(s), Some(p) if p.dir == ParamDir::In) {
                diags.push(Diagnostic::error(
                    DiagnosticKind::InvalidGuard,
                    arm.pos.0,
                    format!("guard tests `{s}`, which is not an input of `{}`", m.name),
                ));
            }
        }
        let mut assigned: BTreeSet<&str> = BTreeSet::new();
        for action in &arm.actions {
            let outs: Vec<&str> = match action {
                Action::Call { args, .. } => {
                    for a in args {
                        if m.param(a).is_none() {
                            diags.push(Diagnostic::error(
                                DiagnosticKind::UnknownParam,
                                arm.pos.0,
                                format!("`{a}` is not a parameter of `{}`", m.name),
                            ));
                        }
                    }
                    args.iter()
                        .map(String::as_str)
                        .filter(|a| matches!(m.param(a), Some(p) if p.dir == ParamDir::Out))
                        .collect()
                }
                Action::ErrorMessage { target, .. } | Action::AssignEmpty { target } => {
                    if !matches!(m.param(target), Some(p) if p.dir == ParamDir::Out) {
                        diags.push(Diagnostic::error(
                            DiagnosticKind::InvalidTarget,
                            arm.pos.0,
                            format!("`{target}` is not an output of `{}`", m.name),
                        ));
                        continue;
                    }
                    vec![target.as_str()]
                }
            };
            for o in outs {
                if !assigned.insert(o) {
                    diags.push(Diagnostic::error(
                        DiagnosticKind::DoubleAssign,
                        arm.pos.0,
                        format!("`{o}` is assigned twice in one arm of `{}`", m.name),
                    ));
                }
            }
        }
        for p in m.params.iter().filter(|p| p.dir == ParamDir::Out) {
            if !assigned.contains(p.name.as_str()) {
                diags.push(Diagnostic {
                    severity: Severity::Warning,
                    kind: DiagnosticKind::UnassignedOutput,
                    span: arm.pos.0,
                    message: format!(
                        "`{}` is not assigned on this arm of `{}` and will be EMPTY",
                        p.name, m.name
                    ),
                });
            }
        }
    }
}
