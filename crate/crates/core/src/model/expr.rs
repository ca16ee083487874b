use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{ModelError, Scope};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rel {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl Rel {
    pub fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            Rel::Lt => lhs < rhs,
            Rel::Le => lhs <= rhs,
            Rel::Eq => lhs == rhs,
            Rel::Ge => lhs >= rhs,
            Rel::Gt => lhs > rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Lt => "<",
            Rel::Le => "<=",
            Rel::Eq => "=",
            Rel::Ge => ">=",
            Rel::Gt => ">",
        }
    }
}

/// Integer expression, or a chain of comparisons `e1 REL e2 REL e3 ...`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Ident(String),
    Neg(Box<Expr>),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Chain {
        first: Box<Expr>,
        rest: Vec<(Rel, Expr)>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Value {
    Int(i64),
    Bool(bool),
}

impl Expr {
    pub fn ident(name: impl Into<String>) -> Expr {
        Expr::Ident(name.into())
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    /// Parses an expression written in the DSL's expression syntax.
    pub fn parse(text: &str) -> Result<Expr, ModelError> {
        crate::rdsl::parse_expr_str(text).map_err(|e| ModelError::Parse {
            text: text.to_string(),
            reason: e.to_string(),
        })
    }

    pub fn is_chain(&self) -> bool {
        matches!(self, Expr::Chain { .. })
    }

    pub fn eval(&self, scope: &dyn Scope) -> Result<Value, ModelError> {
        match self {
            Expr::Chain { first, rest } => {
                let mut lhs = first.eval_int(scope)?;
                let mut all = true;
                for (rel, term) in rest {
                    let rhs = term.eval_int(scope)?;
                    all &= rel.holds(lhs, rhs);
                    lhs = rhs;
                }
                Ok(Value::Bool(all))
            }
            _ => self.eval_int(scope).map(Value::Int),
        }
    }

    pub fn eval_int(&self, scope: &dyn Scope) -> Result<i64, ModelError> {
        match self {
            Expr::Int(v) => Ok(*v),
            Expr::Ident(name) => scope
                .lookup(name)
                .ok_or_else(|| ModelError::UnboundSymbol(name.clone())),
            Expr::Neg(inner) => inner
                .eval_int(scope)?
                .checked_neg()
                .ok_or(ModelError::Overflow),
            Expr::Binary { op, lhs, rhs } => {
                let a = lhs.eval_int(scope)?;
                let b = rhs.eval_int(scope)?;
                match op {
                    BinOp::Add => a.checked_add(b).ok_or(ModelError::Overflow),
                    BinOp::Sub => a.checked_sub(b).ok_or(ModelError::Overflow),
                    BinOp::Mul => a.checked_mul(b).ok_or(ModelError::Overflow),
                    BinOp::Div if b == 0 => Err(ModelError::DivisionByZero),
                    // truncates toward zero
                    BinOp::Div => a.checked_div(b).ok_or(ModelError::Overflow),
                }
            }
            Expr::Chain { .. } => Err(ModelError::ExpectedInteger),
        }
    }

    pub fn eval_bool(&self, scope: &dyn Scope) -> Result<bool, ModelError> {
        match self.eval(scope)? {
            Value::Bool(b) => Ok(b),
            Value::Int(_) => Err(ModelError::ExpectedBoolean),
        }
    }

    /// Every identifier mentioned, sorted.
    pub fn identifiers(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_identifiers(&mut out);
        out
    }

    fn collect_identifiers(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Int(_) => {}
            Expr::Ident(name) => {
                out.insert(name.clone());
            }
            Expr::Neg(inner) => inner.collect_identifiers(out),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.collect_identifiers(out);
                rhs.collect_identifiers(out);
            }
            Expr::Chain { first, rest } => {
                first.collect_identifiers(out);
                for (_, e) in rest {
                    e.collect_identifiers(out);
                }
            }
        }
    }

    /// Replaces identifiers through `f`; names for which `f` returns `None`
    /// are kept.
    pub fn rename(&self, f: &dyn Fn(&str) -> Option<Expr>) -> Expr {
        match self {
            Expr::Int(v) => Expr::Int(*v),
            Expr::Ident(name) => f(name).unwrap_or_else(|| Expr::Ident(name.clone())),
            Expr::Neg(inner) => Expr::Neg(Box::new(inner.rename(f))),
            Expr::Binary { op, lhs, rhs } => Expr::binary(*op, lhs.rename(f), rhs.rename(f)),
            Expr::Chain { first, rest } => Expr::Chain {
                first: Box::new(first.rename(f)),
                rest: rest.iter().map(|(r, e)| (*r, e.rename(f))).collect(),
            },
        }
    }

    /// Largest absolute integer literal; used to size witness searches.
    pub fn max_literal(&self) -> i64 {
        match self {
            Expr::Int(v) => v.saturating_abs(),
            Expr::Ident(_) => 0,
            Expr::Neg(inner) => inner.max_literal(),
            Expr::Binary { lhs, rhs, .. } => lhs.max_literal().max(rhs.max_literal()),
            Expr::Chain { first, rest } => rest
                .iter()
                .map(|(_, e)| e.max_literal())
                .fold(first.max_literal(), i64::max),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Chain { .. } => 0,
            Expr::Binary { op, .. } => op.precedence(),
            Expr::Neg(_) => 3,
            Expr::Int(v) if *v < 0 => 3,
            Expr::Int(_) | Expr::Ident(_) => 4,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let paren = self.precedence() < min;
        if paren {
            f.write_str("(")?;
        }
        match self {
            Expr::Int(v) => write!(f, "{v}")?,
            Expr::Ident(name) => f.write_str(name)?,
            Expr::Neg(inner) => {
                f.write_str("-")?;
                inner.fmt_prec(f, 4)?;
            }
            Expr::Binary { op, lhs, rhs } => {
                let p = op.precedence();
                lhs.fmt_prec(f, p)?;
                write!(f, " {} ", op.symbol())?;
                rhs.fmt_prec(f, p + 1)?;
            }
            Expr::Chain { first, rest } => {
                first.fmt_prec(f, 1)?;
                for (rel, e) in rest {
                    write!(f, " {} ", rel.symbol())?;
                    e.fmt_prec(f, 1)?;
                }
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl From<i64> for Expr {
    fn from(v: i64) -> Self {
        Expr::Int(v)
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Expr::Int(v) => s.serialize_i64(*v),
            _ => s.serialize_str(&self.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) => Ok(Expr::Int(v)),
            Raw::Text(t) => Expr::parse(&t).map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use proptest::prelude::*;

    use super::*;

    fn scope(pairs: &[(&str, i64)]) -> BTreeMap<String, i64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn arithmetic_with_fig2_coefficients() {
        let e = Expr::parse("A*370 + B").unwrap();
        assert_eq!(e.eval(&scope(&[("A", 1), ("B", 10)])).unwrap(), Value::Int(380));
    }

    #[test]
    fn chain_lower_boundary_holds() {
        let e = Expr::parse("C <= A*370 + B < 500").unwrap();
        let s = scope(&[("C", 380), ("A", 1), ("B", 10)]);
        assert_eq!(e.eval(&s).unwrap(), Value::Bool(true));
    }

    #[test]
    fn chain_right_bound_violated() {
        let e = Expr::parse("C <= A*370 + B < 500").unwrap();
        let s = scope(&[("C", 380), ("A", 2), ("B", 10)]);
        assert_eq!(e.eval(&s).unwrap(), Value::Bool(false));
    }

    #[test]
    fn unbound_and_div_by_zero() {
        let e = Expr::parse("A / B").unwrap();
        assert_eq!(
            e.eval(&scope(&[("A", 1)])),
            Err(ModelError::UnboundSymbol("B".into()))
        );
        assert_eq!(
            e.eval(&scope(&[("A", 1), ("B", 0)])),
            Err(ModelError::DivisionByZero)
        );
    }

    #[test]
    fn division_truncates_toward_zero() {
        let e = Expr::parse("A / 2").unwrap();
        assert_eq!(e.eval_int(&scope(&[("A", -7)])).unwrap(), -3);
        assert_eq!(e.eval_int(&scope(&[("A", 7)])).unwrap(), 3);
    }

    #[test]
    fn equality_relation_in_chain() {
        let e = Expr::parse("X = 4").unwrap();
        assert!(e.eval_bool(&scope(&[("X", 4)])).unwrap());
    }

    #[test]
    fn non_integer_coefficient_is_a_parse_error() {
        assert!(matches!(
            Expr::parse("A*3.5 + B"),
            Err(ModelError::Parse { .. })
        ));
    }

    #[test]
    fn display_keeps_associativity() {
        let e = Expr::parse("a - (b - c)").unwrap();
        assert_eq!(e.to_string(), "a - (b - c)");
        assert_eq!(Expr::parse(&e.to_string()).unwrap(), e);
        let e = Expr::parse("(a + b) * c").unwrap();
        assert_eq!(e.to_string(), "(a + b) * c");
    }

    fn arb_term() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0i64..50).prop_map(Expr::Int),
            prop::sample::select(vec!["a", "b", "c"]).prop_map(Expr::ident),
        ];
        leaf.prop_recursive(3, 12, 2, |inner| {
            (
                prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul]),
                inner.clone(),
                inner,
            )
                .prop_map(|(op, l, r)| Expr::binary(op, l, r))
        })
    }

    fn arb_rel() -> impl Strategy<Value = Rel> {
        prop::sample::select(vec![Rel::Lt, Rel::Le, Rel::Eq, Rel::Ge, Rel::Gt])
    }

    /// Independent evaluator: checks each adjacent pair on its own.
    fn naive_chain(terms: &[Expr], rels: &[Rel], s: &BTreeMap<String, i64>) -> bool {
        let values: Vec<i64> = terms.iter().map(|t| t.eval_int(s).unwrap()).collect();
        rels.iter()
            .enumerate()
            .filter(|(i, r)| !r.holds(values[*i], values[i + 1]))
            .count()
            == 0
    }

    proptest! {
        #[test]
        fn chain_equals_pairwise_conjunction(
            terms in prop::collection::vec(arb_term(), 2..5),
            rels in prop::collection::vec(arb_rel(), 4),
            a in -20i64..20, b in -20i64..20, c in -20i64..20,
        ) {
            let rels = &rels[..terms.len() - 1];
            let chain = Expr::Chain {
                first: Box::new(terms[0].clone()),
                rest: rels.iter().copied().zip(terms[1..].iter().cloned()).collect(),
            };
            let s = scope(&[("a", a), ("b", b), ("c", c)]);
            let got = chain.eval_bool(&s).unwrap();
            prop_assert_eq!(got, naive_chain(&terms, rels, &s));
            // referential transparency
            prop_assert_eq!(chain.eval(&s).unwrap(), chain.eval(&s).unwrap());
        }

        #[test]
        fn display_parse_round_trip(e in arb_term()) {
            prop_assert_eq!(Expr::parse(&e.to_string()).unwrap(), e);
        }
    }
}
