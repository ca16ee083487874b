use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Where a symbol binding came from. Kept so conflicting bindings can name
/// both sources.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Constraint(String),
    SystemFile(String),
    FlowLabel(String),
    Builtin,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Constraint(name) => write!(f, "constraint `{name}`"),
            Provenance::SystemFile(path) => write!(f, "system file `{path}`"),
            Provenance::FlowLabel(flow) => write!(f, "flow label in `{flow}`"),
            Provenance::Builtin => f.write_str("builtin"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolEntry {
    pub value: Option<i64>,
    pub provenance: Provenance,
}

/// Identifier to integer map shared by every stage of the toolchain.
///
/// Tables are values: [`SymbolTable::bind`] returns a new table and leaves the
/// receiver untouched. An entry may be declared without a value (UNBOUND);
/// looking such an entry up during grounding is an error.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolTable {
    entries: BTreeMap<String, SymbolEntry>,
}

/// Name resolution used by expression evaluation.
pub trait Scope {
    fn lookup(&self, name: &str) -> Option<i64>;
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind<I, S>(&self, bindings: I) -> Result<SymbolTable, ModelError>
    where
        I: IntoIterator<Item = (S, i64, Provenance)>,
        S: Into<String>,
    {
        let mut next = self.clone();
        for (name, value, provenance) in bindings {
            let name = name.into();
            if !is_identifier(&name) {
                return Err(ModelError::InvalidIdentifier(name));
            }
            match next.entries.get(&name) {
                Some(SymbolEntry {
                    value: Some(old),
                    provenance: old_prov,
                }) if *old != value => {
                    return Err(ModelError::ConflictingBinding {
                        name,
                        old: *old,
                        new: value,
                        old_provenance: old_prov.to_string(),
                        new_provenance: provenance.to_string(),
                    });
                }
                Some(SymbolEntry { value: Some(_), .. }) => {}
                _ => {
                    next.entries.insert(
                        name,
                        SymbolEntry {
                            value: Some(value),
                            provenance,
                        },
                    );
                }
            }
        }
        Ok(next)
    }

    /// Declares `name` without a value. Existing entries are left alone.
    pub fn declare(&self, name: impl Into<String>, provenance: Provenance) -> SymbolTable {
        let mut next = self.clone();
        next.entries.entry(name.into()).or_insert(SymbolEntry {
            value: None,
            provenance,
        });
        next
    }

    pub fn get(&self, name: &str) -> Result<i64, ModelError> {
        match self.entries.get(name) {
            Some(SymbolEntry { value: Some(v), .. }) => Ok(*v),
            _ => Err(ModelError::UnboundSymbol(name.to_string())),
        }
    }

    pub fn entry(&self, name: &str) -> Option<&SymbolEntry> {
        self.entries.get(name)
    }

    pub fn is_bound(&self, name: &str) -> bool {
        matches!(self.entries.get(name), Some(SymbolEntry { value: Some(_), .. }))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &SymbolEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Scope for SymbolTable {
    fn lookup(&self, name: &str) -> Option<i64> {
        self.entries.get(name).and_then(|e| e.value)
    }
}

impl<S: Scope + ?Sized> Scope for &S {
    fn lookup(&self, name: &str) -> Option<i64> {
        (**self).lookup(name)
    }
}

impl Scope for BTreeMap<String, i64> {
    fn lookup(&self, name: &str) -> Option<i64> {
        self.get(name).copied()
    }
}

/// Two scopes searched in order; the first hit wins.
pub struct Layered<'a, A: ?Sized, B: ?Sized>(pub &'a A, pub &'a B);

impl<A: Scope + ?Sized, B: Scope + ?Sized> Scope for Layered<'_, A, B> {
    fn lookup(&self, name: &str) -> Option<i64> {
        self.0.lookup(name).or_else(|| self.1.lookup(name))
    }
}

pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys() -> Provenance {
        Provenance::SystemFile("system.yaml".into())
    }

    #[test]
    fn bind_then_lookup() {
        let t = SymbolTable::new()
            .bind([("modem_period", 1_000_000, sys())])
            .unwrap();
        assert_eq!(t.get("modem_period").unwrap(), 1_000_000);
    }

    #[test]
    fn rebinding_same_value_is_idempotent() {
        let t = SymbolTable::new().bind([("X", 5, sys())]).unwrap();
        let t2 = t.bind([("X", 5, Provenance::Builtin)]).unwrap();
        assert_eq!(t, t2);
    }

    #[test]
    fn conflicting_binding_names_both_sources() {
        let t = SymbolTable::new().bind([("X", 5, sys())]).unwrap();
        let err = t
            .bind([("X", 6, Provenance::Constraint("c".into()))])
            .unwrap_err();
        match err {
            ModelError::ConflictingBinding {
                name,
                old,
                new,
                old_provenance,
                new_provenance,
            } => {
                assert_eq!((name.as_str(), old, new), ("X", 5, 6));
                assert!(old_provenance.contains("system.yaml"));
                assert!(new_provenance.contains("constraint"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bind_leaves_input_untouched() {
        let t = SymbolTable::new().bind([("A", 1, sys())]).unwrap();
        let before = t.clone();
        let _ = t.bind([("B", 2, sys())]).unwrap();
        let _ = t.bind([("A", 3, sys())]);
        assert_eq!(t, before);
    }

    #[test]
    fn unbound_lookup_is_an_error() {
        let t = SymbolTable::new().declare("grid_period", Provenance::Builtin);
        assert!(matches!(t.get("grid_period"), Err(ModelError::UnboundSymbol(_))));
        assert!(matches!(t.get("nope"), Err(ModelError::UnboundSymbol(_))));
    }

    #[test]
    fn identifiers_are_case_sensitive() {
        let t = SymbolTable::new()
            .bind([("srsIOSymbols", 1, sys()), ("srsiosymbols", 2, sys())])
            .unwrap();
        assert_eq!(t.get("srsIOSymbols").unwrap(), 1);
        assert_eq!(t.get("srsiosymbols").unwrap(), 2);
    }

    #[test]
    fn rejects_bad_identifiers() {
        assert!(SymbolTable::new().bind([("1abc", 1, sys())]).is_err());
        assert!(SymbolTable::new().bind([("a-b", 1, sys())]).is_err());
    }
}
