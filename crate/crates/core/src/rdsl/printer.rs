use std::fmt::Write;

use super::ast::*;

/// Canonical text for a unit. Parsing the output yields an equal unit.
pub fn pretty_print(unit: &SourceUnit) -> String {
    let mut blocks = Vec::new();
    for flow in &unit.flows {
        blocks.push(print_flow(flow));
    }
    for m in &unit.modifiers {
        blocks.push(print_modifier(m));
    }
    blocks.join("\n")
}

fn print_flow(flow: &FlowDef) -> String {
    let mut out = String::new();
    out.push_str("flow ");
    out.push_str(&flow.name);
    if !flow.formals.is_empty() {
        write!(out, "({})", flow.formals.join(", ")).unwrap();
    }
    out.push('\n');
    for s in &flow.streams {
        write!(out, "  {} : stream", s.name).unwrap();
        for d in &s.dims {
            write!(out, "[{d}]").unwrap();
        }
        let mut attrs = Vec::new();
        match s.direction {
            Direction::In => attrs.push("type = in".to_string()),
            Direction::Out => attrs.push("type = out".to_string()),
            Direction::Internal => {}
        }
        if let Some(label) = &s.label {
            attrs.push(format!("label = {label}"));
        }
        if !attrs.is_empty() {
            write!(out, "{{{}}}", attrs.join(", ")).unwrap();
        }
        if let Some(c) = &s.comment {
            write!(out, " % {c}").unwrap();
        }
        out.push('\n');
    }
    for call in &flow.body {
        let args: Vec<String> = call.args.iter().map(print_arg).collect();
        writeln!(out, "  {}({})", call.callee, args.join(", ")).unwrap();
    }
    out
}

fn print_arg(arg: &CallArg) -> String {
    match arg {
        CallArg::Range { var, lo, hi } => format!("{var} = {lo}:{hi}"),
        CallArg::Binding { formal, stream } => format!("{formal} = {}", print_ref(stream)),
        CallArg::Positional(stream) => print_ref(stream),
    }
}

pub(crate) fn print_ref(r: &StreamRef) -> String {
    let mut s = r.name.clone();
    for i in &r.indices {
        write!(s, "[{i}]").unwrap();
    }
    if let Some(k) = r.delay {
        write!(s, "@-{k}").unwrap();
    }
    s
}

fn print_modifier(m: &ModifierDef) -> String {
    let mut out = String::new();
    let params: Vec<String> = m
        .params
        .iter()
        .map(|p| {
            let dir = match p.dir {
                ParamDir::In => "in",
                ParamDir::Out => "out",
            };
            format!("{dir} {}", p.name)
        })
        .collect();
    writeln!(out, "modifier {}({})", m.name, params.join(", ")).unwrap();
    match &m.body {
        ModifierBody::Actions(actions) => {
            for a in actions {
                writeln!(out, "  {}", print_action(a)).unwrap();
            }
        }
        ModifierBody::Guarded(block) => {
            out.push_str("  guarded{first}{\n");
            for arm in &block.arms {
                match &arm.cond {
                    GuardCond::True => out.push_str("    TRUE :\n"),
                    GuardCond::NotEmpty(s) => writeln!(out, "    ({s} != EMPTY) :").unwrap(),
                    GuardCond::IsEmpty(s) => writeln!(out, "    ({s} == EMPTY) :").unwrap(),
                }
                for a in &arm.actions {
                    writeln!(out, "      {}", print_action(a)).unwrap();
                }
            }
            out.push_str("  }\n");
        }
    }
    out
}

fn print_action(a: &Action) -> String {
    match a {
        Action::Call { function, args } => format!("{function}({})", args.join(", ")),
        Action::ErrorMessage { target, message } => {
            format!("error_message({target}, \"{}\")", escape(message))
        }
        Action::AssignEmpty { target } => format!("{target} = EMPTY"),
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            c => out.push(c),
        }
    }
    out
}
