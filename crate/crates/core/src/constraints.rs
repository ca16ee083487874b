//! Kubernetes-style constraint documents: parsing, reference resolution and
//! satisfaction checks.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use serde_yaml::Value;
use thiserror::Error;

use crate::model::{Expr, ModelError, Scope, SymbolTable, CLOCK_UNIT};

pub const API_VERSION: &str = "rdsl/v0";
pub const KIND_TIMING: &str = "timing equality";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstraintError {
    #[error("document {doc}: unknown apiVersion `{found}`")]
    UnknownApiVersion { doc: usize, found: String },
    #[error("document {doc}: unknown kind `{found}` for apiVersion {api}")]
    UnknownKind {
        doc: usize,
        api: String,
        found: String,
    },
    #[error("document {doc}: missing field `{path}`")]
    MissingField { doc: usize, path: String },
    #[error("document {doc}: field `{path}` is malformed: {reason}")]
    Malformed {
        doc: usize,
        path: String,
        reason: String,
    },
    #[error("document {doc}: unit `{found}` is not `clock`")]
    UnitNotClock { doc: usize, found: String },
    #[error("constraint `{constraint}`: letter `{letter}` has no binding")]
    UnboundLetter { constraint: String, letter: String },
    #[error("constraint `{constraint}`: binding `{letter}` does not appear in the equation")]
    UnusedBinding { constraint: String, letter: String },
    #[error("invalid YAML: {0}")]
    Yaml(String),
    #[error("`{0}` is both a bound symbol and a timing label")]
    AmbiguousTarget(String),
    #[error("`{name}` pinned to {first} by `{first_doc}` and to {second} by `{second_doc}`")]
    ConflictingValue {
        name: String,
        first: i64,
        first_doc: String,
        second: i64,
        second_doc: String,
    },
    #[error("no value assigned to `{0}`")]
    MissingAssignment(String),
    #[error("constraint `{constraint}`: {source}")]
    Eval {
        constraint: String,
        source: ModelError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Equal,
    Le,
    Ge,
}

impl Relation {
    fn holds(self, actual: i64, bound: i64) -> bool {
        match self {
            Relation::Equal => actual == bound,
            Relation::Le => actual <= bound,
            Relation::Ge => actual >= bound,
        }
    }
}

/// Right-hand side of a letter binding in an equation document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum BindingTarget {
    Ident(String),
    Int(i64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintSpec {
    Value {
        relation: Relation,
        variable: String,
        value: i64,
    },
    Equation {
        equation: Expr,
        bindings: BTreeMap<String, BindingTarget>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintDoc {
    pub api_version: String,
    pub kind: String,
    pub name: String,
    pub unit: String,
    pub spec: ConstraintSpec,
    /// Unknown fields that were ignored.
    pub warnings: Vec<String>,
}

impl ConstraintDoc {
    /// Identifiers this document constrains.
    pub fn targets(&self) -> BTreeSet<String> {
        match &self.spec {
            ConstraintSpec::Value { variable, .. } => [variable.clone()].into(),
            ConstraintSpec::Equation { equation, bindings } => equation
                .identifiers()
                .into_iter()
                .map(|id| match bindings.get(&id) {
                    Some(BindingTarget::Ident(t)) => Some(t.clone()),
                    Some(BindingTarget::Int(_)) => None,
                    None => Some(id),
                })
                .flatten()
                .collect(),
        }
    }
}

fn is_letter(key: &str) -> bool {
    key.len() == 1 && key.chars().all(|c| c.is_ascii_alphabetic())
}

pub(crate) fn yaml_documents(text: &str) -> Result<Vec<Value>, String> {
    use serde::Deserialize;
    let mut docs = Vec::new();
    for de in serde_yaml::Deserializer::from_str(text) {
        let v = Value::deserialize(de).map_err(|e| e.to_string())?;
        if !v.is_null() {
            docs.push(v);
        }
    }
    Ok(docs)
}

pub(crate) fn get<'a>(v: &'a Value, key: &str) -> Option<&'a Value> {
    v.as_mapping().and_then(|m| m.get(key))
}

pub(crate) fn scalar_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

/// Reads the `apiVersion`/`kind`/`metadata.name` envelope shared by every
/// document type.
pub(crate) struct Envelope {
    pub api_version: String,
    pub kind: String,
    pub name: String,
}

pub(crate) fn envelope(doc: usize, v: &Value) -> Result<Envelope, ConstraintError> {
    let field = |path: &str, v: Option<&Value>| -> Result<String, ConstraintError> {
        let v = v.ok_or_else(|| ConstraintError::MissingField {
            doc,
            path: path.into(),
        })?;
        scalar_string(v).ok_or_else(|| ConstraintError::Malformed {
            doc,
            path: path.into(),
            reason: "expected a scalar".into(),
        })
    };
    let api_version = field("apiVersion", get(v, "apiVersion"))?;
    if api_version != API_VERSION {
        return Err(ConstraintError::UnknownApiVersion {
            doc,
            found: api_version,
        });
    }
    let kind = field("kind", get(v, "kind"))?;
    let name = field(
        "metadata.name",
        get(v, "metadata").and_then(|m| get(m, "name")),
    )?;
    Ok(Envelope {
        api_version,
        kind,
        name,
    })
}

pub fn parse_constraints(text: &str) -> Result<Vec<ConstraintDoc>, ConstraintError> {
    let docs = yaml_documents(text).map_err(ConstraintError::Yaml)?;
    docs.iter()
        .enumerate()
        .map(|(i, v)| parse_doc(i + 1, v))
        .collect()
}

fn parse_doc(doc: usize, v: &Value) -> Result<ConstraintDoc, ConstraintError> {
    let env = envelope(doc, v)?;
    if env.kind != KIND_TIMING {
        return Err(ConstraintError::UnknownKind {
            doc,
            api: env.api_version,
            found: env.kind,
        });
    }
    let mut warnings = Vec::new();
    if let Some(m) = v.as_mapping() {
        for key in m.keys().filter_map(Value::as_str) {
            if !matches!(key, "apiVersion" | "kind" | "metadata" | "spec") {
                warnings.push(format!("document {doc}: ignoring unknown field `{key}`"));
            }
        }
    }
    let spec = get(v, "spec").ok_or_else(|| ConstraintError::MissingField {
        doc,
        path: "spec".into(),
    })?;
    let malformed = |path: &str, reason: &str| ConstraintError::Malformed {
        doc,
        path: path.into(),
        reason: reason.into(),
    };
    let missing = |path: &str| ConstraintError::MissingField {
        doc,
        path: path.into(),
    };
    let unit = get(spec, "unit")
        .ok_or_else(|| missing("spec.unit"))
        .and_then(|u| scalar_string(u).ok_or_else(|| malformed("spec.unit", "expected a string")))?;
    if unit != CLOCK_UNIT {
        return Err(ConstraintError::UnitNotClock { doc, found: unit });
    }

    let parsed = if let Some(eq) = get(spec, "equation") {
        let text = scalar_string(eq).ok_or_else(|| malformed("spec.equation", "expected a string"))?;
        let equation = Expr::parse(&text)
            .map_err(|e| malformed("spec.equation", &e.to_string()))?;
        if !equation.is_chain() {
            return Err(malformed("spec.equation", "expected a comparison"));
        }
        let mut bindings = BTreeMap::new();
        for (k, val) in spec.as_mapping().into_iter().flatten() {
            let Some(key) = k.as_str() else { continue };
            if matches!(key, "equation" | "unit") {
                continue;
            }
            if !is_letter(key) {
                warnings.push(format!("document {doc}: ignoring unknown field `spec.{key}`"));
                continue;
            }
            let target = match val {
                Value::Number(n) => BindingTarget::Int(
                    n.as_i64()
                        .ok_or_else(|| malformed(&format!("spec.{key}"), "expected an integer"))?,
                ),
                Value::String(s) if crate::model::is_identifier(s) => BindingTarget::Ident(s.clone()),
                _ => {
                    return Err(malformed(
                        &format!("spec.{key}"),
                        "expected an identifier or integer",
                    ))
                }
            };
            bindings.insert(key.to_string(), target);
        }
        let used = equation.identifiers();
        for letter in used.iter().filter(|id| is_letter(id)) {
            if !bindings.contains_key(letter) {
                return Err(ConstraintError::UnboundLetter {
                    constraint: env.name.clone(),
                    letter: letter.clone(),
                });
            }
        }
        for letter in bindings.keys() {
            if !used.contains(letter) {
                return Err(ConstraintError::UnusedBinding {
                    constraint: env.name.clone(),
                    letter: letter.clone(),
                });
            }
        }
        ConstraintSpec::Equation { equation, bindings }
    } else if let Some(rel) = get(spec, "constraint") {
        let rel = scalar_string(rel).ok_or_else(|| malformed("spec.constraint", "expected a string"))?;
        let relation = match rel.as_str() {
            "equal" => Relation::Equal,
            "le" => Relation::Le,
            "ge" => Relation::Ge,
            other => {
                return Err(malformed(
                    "spec.constraint",
                    &format!("unknown relation `{other}`"),
                ))
            }
        };
        let variable = get(spec, "variable_name")
            .ok_or_else(|| missing("spec.variable_name"))
            .and_then(|v| {
                v.as_str()
                    .filter(|s| crate::model::is_identifier(s))
                    .map(str::to_string)
                    .ok_or_else(|| malformed("spec.variable_name", "expected an identifier"))
            })?;
        let value = get(spec, "value")
            .ok_or_else(|| missing("spec.value"))
            .and_then(|v| v.as_i64().ok_or_else(|| malformed("spec.value", "expected an integer")))?;
        for key in spec.as_mapping().into_iter().flatten().filter_map(|(k, _)| k.as_str()) {
            if !matches!(key, "constraint" | "variable_name" | "unit" | "value") {
                warnings.push(format!("document {doc}: ignoring unknown field `spec.{key}`"));
            }
        }
        ConstraintSpec::Value {
            relation,
            variable,
            value,
        }
    } else {
        return Err(missing("spec.equation"));
    };

    Ok(ConstraintDoc {
        api_version: env.api_version,
        kind: env.kind,
        name: env.name,
        unit,
        spec: parsed,
        warnings,
    })
}

/// How a constrained identifier gets its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "role", content = "value")]
pub enum TargetRole {
    Fixed(i64),
    /// Ready time of a labelled stream in the schedule.
    TimingLabel,
    /// Chosen by the solver and reported as a witness.
    Free,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintSet {
    pub docs: Vec<ConstraintDoc>,
    pub resolved: BTreeMap<String, TargetRole>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ConstraintViolation {
    pub constraint: String,
    pub detail: String,
    /// Size of the violation in clocks; positive.
    pub amount: i64,
}

pub fn resolve_references(
    docs: &[ConstraintDoc],
    symbols: &SymbolTable,
    labels: &BTreeSet<String>,
) -> Result<ConstraintSet, ConstraintError> {
    let mut docs = docs.to_vec();
    // set semantics: document order carries no meaning
    docs.sort_by(|a, b| a.name.cmp(&b.name).then_with(|| format!("{a:?}").cmp(&format!("{b:?}"))));

    let mut pinned: BTreeMap<&str, (i64, &str)> = BTreeMap::new();
    for d in &docs {
        if let ConstraintSpec::Value {
            relation: Relation::Equal,
            variable,
            value,
        } = &d.spec
        {
            if let Some((first, first_doc)) = pinned.get(variable.as_str()) {
                if first != value {
                    return Err(ConstraintError::ConflictingValue {
                        name: variable.clone(),
                        first: *first,
                        first_doc: first_doc.to_string(),
                        second: *value,
                        second_doc: d.name.clone(),
                    });
                }
            } else {
                pinned.insert(variable, (*value, &d.name));
            }
        }
    }

    let mut resolved = BTreeMap::new();
    for d in &docs {
        for t in d.targets() {
            let bound = symbols.is_bound(&t);
            let labelled = labels.contains(&t);
            let role = match (bound, labelled) {
                (true, true) => return Err(ConstraintError::AmbiguousTarget(t)),
                (true, false) => TargetRole::Fixed(symbols.get(&t).expect("bound")),
                (false, true) => TargetRole::TimingLabel,
                (false, false) => TargetRole::Free,
            };
            resolved.insert(t, role);
        }
    }
    Ok(ConstraintSet { docs, resolved })
}

impl ConstraintSet {
    pub fn empty() -> Self {
        ConstraintSet {
            docs: Vec::new(),
            resolved: BTreeMap::new(),
        }
    }

    pub fn free_variables(&self) -> Vec<&str> {
        self.targets_with(|r| *r == TargetRole::Free)
    }

    pub fn timing_labels(&self) -> Vec<&str> {
        self.targets_with(|r| *r == TargetRole::TimingLabel)
    }

    fn targets_with(&self, pred: impl Fn(&TargetRole) -> bool) -> Vec<&str> {
        self.resolved
            .iter()
            .filter(|(_, r)| pred(r))
            .map(|(k, _)| k.as_str())
            .collect()
    }

    /// Value forced on `name` by a fixed binding or an `equal` constraint.
    pub fn pinned_value(&self, name: &str) -> Option<i64> {
        if let Some(TargetRole::Fixed(v)) = self.resolved.get(name) {
            return Some(*v);
        }
        self.docs.iter().find_map(|d| match &d.spec {
            ConstraintSpec::Value {
                relation: Relation::Equal,
                variable,
                value,
            } if variable == name => Some(*value),
            _ => None,
        })
    }

    /// Name of the document pinning `name`, if any.
    pub fn pinning_doc(&self, name: &str) -> Option<&str> {
        self.docs.iter().find_map(|d| match &d.spec {
            ConstraintSpec::Value {
                relation: Relation::Equal,
                variable,
                ..
            } if variable == name => Some(d.name.as_str()),
            _ => None,
        })
    }

    pub fn check_satisfaction(
        &self,
        assignment: &BTreeMap<String, i64>,
    ) -> Result<Vec<ConstraintViolation>, ConstraintError> {
        let value_of = |name: &str| -> Result<i64, ConstraintError> {
            if let Some(v) = assignment.get(name) {
                return Ok(*v);
            }
            match self.resolved.get(name) {
                Some(TargetRole::Fixed(v)) => Ok(*v),
                _ => Err(ConstraintError::MissingAssignment(name.to_string())),
            }
        };
        let mut out = Vec::new();
        for d in &self.docs {
            match &d.spec {
                ConstraintSpec::Value {
                    relation,
                    variable,
                    value,
                } => {
                    let actual = value_of(variable)?;
                    if !relation.holds(actual, *value) {
                        out.push(ConstraintViolation {
                            constraint: d.name.clone(),
                            detail: format!(
                                "{variable} = {actual}, required {relation:?} {value}"
                            ),
                            amount: (actual - value).abs().max(1),
                        });
                    }
                }
                ConstraintSpec::Equation { equation, bindings } => {
                    let mut env = BTreeMap::new();
                    for id in equation.identifiers() {
                        let v = match bindings.get(&id) {
                            Some(BindingTarget::Int(v)) => *v,
                            Some(BindingTarget::Ident(t)) => value_of(t)?,
                            None => value_of(&id)?,
                        };
                        env.insert(id, v);
                    }
                    let amount = chain_violation(equation, &env).map_err(|source| {
                        ConstraintError::Eval {
                            constraint: d.name.clone(),
                            source,
                        }
                    })?;
                    if amount > 0 {
                        out.push(ConstraintViolation {
                            constraint: d.name.clone(),
                            detail: format!("`{equation}` is false with {env:?}"),
                            amount,
                        });
                    }
                }
            }
        }
        out.sort();
        Ok(out)
    }

    /// Finds values for the free variables, given values for every other
    /// target, so that no constraint is violated. Values are searched in
    /// `0..=upper` smallest first; `None` when no witness exists in range.
    pub fn find_witness(
        &self,
        known: &BTreeMap<String, i64>,
        upper: i64,
    ) -> Result<Option<BTreeMap<String, i64>>, ConstraintError> {
        let free: Vec<String> = self
            .free_variables()
            .into_iter()
            .filter(|v| !known.contains_key(*v))
            .map(str::to_string)
            .collect();
        let mut domains = Vec::new();
        for v in &free {
            let mut lo = 0i64;
            let mut hi = upper;
            for d in &self.docs {
                if let ConstraintSpec::Value {
                    relation,
                    variable,
                    value,
                } = &d.spec
                {
                    if variable == v {
                        match relation {
                            Relation::Equal => {
                                lo = *value;
                                hi = *value;
                            }
                            Relation::Le => hi = hi.min(*value),
                            Relation::Ge => lo = lo.max(*value),
                        }
                    }
                }
            }
            domains.push((lo, hi));
        }
        let mut assignment = known.clone();
        let mut budget: u64 = 2_000_000;
        if self.search(&free, &domains, 0, &mut assignment, &mut budget)? {
            Ok(Some(
                free.iter()
                    .map(|v| (v.clone(), assignment[v]))
                    .collect(),
            ))
        } else {
            Ok(None)
        }
    }

    fn search(
        &self,
        free: &[String],
        domains: &[(i64, i64)],
        depth: usize,
        assignment: &mut BTreeMap<String, i64>,
        budget: &mut u64,
    ) -> Result<bool, ConstraintError> {
        if depth == free.len() {
            return Ok(self.check_satisfaction(assignment)?.is_empty());
        }
        let (lo, hi) = domains[depth];
        let mut v = lo;
        while v <= hi {
            if *budget == 0 {
                return Ok(false);
            }
            *budget -= 1;
            assignment.insert(free[depth].clone(), v);
            if self.partial_ok(assignment)? && self.search(free, domains, depth + 1, assignment, budget)? {
                return Ok(true);
            }
            v += 1;
        }
        assignment.remove(&free[depth]);
        Ok(false)
    }

    /// True unless a document whose targets are all assigned is violated.
    fn partial_ok(&self, assignment: &BTreeMap<String, i64>) -> Result<bool, ConstraintError> {
        for d in &self.docs {
            let complete = d
                .targets()
                .iter()
                .all(|t| assignment.contains_key(t) || matches!(self.resolved.get(t), Some(TargetRole::Fixed(_))));
            if complete {
                let single = ConstraintSet {
                    docs: vec![d.clone()],
                    resolved: self.resolved.clone(),
                };
                if !single.check_satisfaction(assignment)?.is_empty() {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Sum of per-pair shortfalls of a comparison chain; zero iff it holds.
fn chain_violation(e: &Expr, scope: &dyn Scope) -> Result<i64, ModelError> {
    use crate::model::Rel;
    let Expr::Chain { first, rest } = e else {
        return Err(ModelError::ExpectedBoolean);
    };
    let mut lhs = first.eval_int(scope)?;
    let mut total = 0i64;
    for (rel, term) in rest {
        let rhs = term.eval_int(scope)?;
        if !rel.holds(lhs, rhs) {
            let gap = match rel {
                Rel::Lt => lhs - rhs + 1,
                Rel::Le => lhs - rhs,
                Rel::Eq => (lhs - rhs).abs(),
                Rel::Ge => rhs - lhs,
                Rel::Gt => rhs - lhs + 1,
            };
            total = total.saturating_add(gap.max(1));
        }
        lhs = rhs;
    }
    Ok(total)
}
