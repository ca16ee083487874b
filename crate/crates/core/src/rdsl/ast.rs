use crate::model::Expr;

use super::Span;

/// Source position attached to an AST node. Ignored by equality so that a
/// reformatted unit compares equal to the original.
#[derive(Debug, Clone, Copy, Default)]
pub struct NodePos(pub Span);

impl PartialEq for NodePos {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for NodePos {}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceUnit {
    pub flows: Vec<FlowDef>,
    pub modifiers: Vec<ModifierDef>,
}

impl SourceUnit {
    pub fn flow(&self, name: &str) -> Option<&FlowDef> {
        self.flows.iter().find(|f| f.name == name)
    }

    pub fn modifier(&self, name: &str) -> Option<&ModifierDef> {
        self.modifiers.iter().find(|m| m.name == name)
    }

    /// Concatenates units loaded from separate files.
    pub fn merge(units: impl IntoIterator<Item = SourceUnit>) -> SourceUnit {
        let mut out = SourceUnit::default();
        for u in units {
            out.flows.extend(u.flows);
            out.modifiers.extend(u.modifiers);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    In,
    Out,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamDecl {
    pub name: String,
    pub dims: Vec<Expr>,
    pub direction: Direction,
    /// Timing label other documents can refer to.
    pub label: Option<String>,
    pub comment: Option<String>,
    pub pos: NodePos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowDef {
    pub name: String,
    /// Index parameters, e.g. `flow f(i, j)`.
    pub formals: Vec<String>,
    pub streams: Vec<StreamDecl>,
    pub body: Vec<CallStmt>,
    pub pos: NodePos,
}

impl FlowDef {
    pub fn stream(&self, name: &str) -> Option<&StreamDecl> {
        self.streams.iter().find(|s| s.name == name)
    }

    /// Declared IN and OUT streams, in declaration order.
    pub fn interface(&self) -> impl Iterator<Item = &StreamDecl> {
        self.streams
            .iter()
            .filter(|s| s.direction != Direction::Internal)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamRef {
    pub name: String,
    pub indices: Vec<Expr>,
    /// `@-k`: the buffer from `k` periods earlier.
    pub delay: Option<u32>,
    pub pos: NodePos,
}

impl StreamRef {
    /// A bare identifier with no indices or delay; may name an index variable.
    pub fn is_bare(&self) -> bool {
        self.indices.is_empty() && self.delay.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CallArg {
    Range { var: String, lo: Expr, hi: Expr },
    Binding { formal: String, stream: StreamRef },
    Positional(StreamRef),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallStmt {
    pub callee: String,
    pub args: Vec<CallArg>,
    pub pos: NodePos,
}

impl CallStmt {
    pub fn ranges(&self) -> impl Iterator<Item = (&str, &Expr, &Expr)> {
        self.args.iter().filter_map(|a| match a {
            CallArg::Range { var, lo, hi } => Some((var.as_str(), lo, hi)),
            _ => None,
        })
    }

    pub fn stream_refs(&self) -> impl Iterator<Item = &StreamRef> {
        self.args.iter().filter_map(|a| match a {
            CallArg::Binding { stream, .. } | CallArg::Positional(stream) => Some(stream),
            CallArg::Range { .. } => None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamDir {
    In,
    Out,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub dir: ParamDir,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModifierDef {
    pub name: String,
    pub params: Vec<Param>,
    pub body: ModifierBody,
    pub pos: NodePos,
}

impl ModifierDef {
    pub fn param(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    /// The body as an ordered arm list; a plain body is a single `TRUE` arm.
    pub fn arms(&self) -> Vec<GuardArm> {
        match &self.body {
            ModifierBody::Guarded(block) => block.arms.clone(),
            ModifierBody::Actions(actions) => vec![GuardArm {
                cond: GuardCond::True,
                actions: actions.clone(),
                pos: self.pos,
            }],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModifierBody {
    Actions(Vec<Action>),
    Guarded(GuardedBlock),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardPolicy {
    First,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuardedBlock {
    pub policy: GuardPolicy,
    pub arms: Vec<GuardArm>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuardArm {
    pub cond: GuardCond,
    pub actions: Vec<Action>,
    pub pos: NodePos,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardCond {
    True,
    NotEmpty(String),
    IsEmpty(String),
}

impl GuardCond {
    pub fn stream(&self) -> Option<&str> {
        match self {
            GuardCond::True => None,
            GuardCond::NotEmpty(s) | GuardCond::IsEmpty(s) => Some(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Call { function: String, args: Vec<String> },
    ErrorMessage { target: String, message: String },
    AssignEmpty { target: String },
}

impl Action {
    pub fn targets(&self) -> Vec<&str> {
        match self {
            Action::Call { args, .. } => args.iter().map(String::as_str).collect(),
            Action::ErrorMessage { target, .. } | Action::AssignEmpty { target } => {
                vec![target.as_str()]
            }
        }
    }
}
