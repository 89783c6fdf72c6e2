//! Statements of the control-flow alphabet, valuations, and their
//! evaluation semantics.

use crate::syntax::{BExpr, CmpOp, Expr};
use num_bigint::BigInt;
use std::collections::BTreeMap;
use std::fmt;

/// Alphabet symbol of a control-flow automaton.
///
/// `ProbLeft(i)`/`ProbRight(i)` with the same tag form a fair pair;
/// `Nondet(i)` is a non-deterministic branch marker. The derived `Ord`
/// (variant order, then recursive field order) is the fixed total order
/// used everywhere ties must be broken deterministically.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Statement {
    Skip,
    Assign(String, Expr),
    Assume(BExpr),
    ProbLeft(u32),
    ProbRight(u32),
    Nondet(u32),
}

impl Statement {
    pub fn assign(var: &str, e: Expr) -> Statement {
        Statement::Assign(var.to_string(), e)
    }

    pub fn assume(b: BExpr) -> Statement {
        Statement::Assume(b)
    }

    pub fn is_probabilistic(&self) -> bool {
        matches!(self, Statement::ProbLeft(_) | Statement::ProbRight(_))
    }

    /// Distribution tag of a probabilistic statement.
    pub fn prob_tag(&self) -> Option<u32> {
        match self {
            Statement::ProbLeft(i) | Statement::ProbRight(i) => Some(*i),
            _ => None,
        }
    }

    /// The other half of a fair pair.
    pub fn prob_sibling(&self) -> Option<Statement> {
        match self {
            Statement::ProbLeft(i) => Some(Statement::ProbRight(*i)),
            Statement::ProbRight(i) => Some(Statement::ProbLeft(*i)),
            _ => None,
        }
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::Skip => write!(f, "skip"),
            Statement::Assign(x, e) => write!(f, "{x} := {e}"),
            Statement::Assume(b) => write!(f, "assume {b}"),
            Statement::ProbLeft(i) => write!(f, "probL({i})"),
            Statement::ProbRight(i) => write!(f, "probR({i})"),
            Statement::Nondet(i) => write!(f, "nondet({i})"),
        }
    }
}

/// A total map from variables to integers, or the absorbing non-sense
/// value for the whole state. Unmapped variables read as 0.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Valuation {
    Bottom,
    Map(BTreeMap<String, BigInt>),
}

impl Valuation {
    pub fn empty() -> Valuation {
        Valuation::Map(BTreeMap::new())
    }

    pub fn from_pairs(pairs: &[(&str, i64)]) -> Valuation {
        Valuation::Map(
            pairs
                .iter()
                .map(|(k, v)| (k.to_string(), BigInt::from(*v)))
                .collect(),
        )
    }

    pub fn is_bottom(&self) -> bool {
        matches!(self, Valuation::Bottom)
    }

    pub fn get(&self, var: &str) -> Option<BigInt> {
        match self {
            Valuation::Bottom => None,
            Valuation::Map(m) => Some(m.get(var).cloned().unwrap_or_else(|| BigInt::from(0))),
        }
    }

    pub fn set(&mut self, var: &str, value: BigInt) {
        if let Valuation::Map(m) = self {
            m.insert(var.to_string(), value);
        }
    }
}

/// Evaluates an arithmetic expression; `None` iff the valuation is bottom.
pub fn eval_expr(e: &Expr, v: &Valuation) -> Option<BigInt> {
    match v {
        Valuation::Bottom => None,
        Valuation::Map(_) => Some(match e {
            Expr::Lit(n) => n.clone(),
            Expr::Var(x) => v.get(x).expect("non-bottom valuation"),
            Expr::Add(a, b) => eval_expr(a, v)? + eval_expr(b, v)?,
            Expr::Sub(a, b) => eval_expr(a, v)? - eval_expr(b, v)?,
            Expr::Mul(a, b) => eval_expr(a, v)? * eval_expr(b, v)?,
        }),
    }
}

/// Evaluates a predicate. Every predicate is false at bottom.
pub fn eval_bexpr(b: &BExpr, v: &Valuation) -> bool {
    if v.is_bottom() {
        return false;
    }
    match b {
        BExpr::Lit(x) => *x,
        BExpr::Cmp(op, a, c) => {
            let a = eval_expr(a, v).expect("non-bottom");
            let c = eval_expr(c, v).expect("non-bottom");
            match op {
                CmpOp::Eq => a == c,
                CmpOp::Ne => a != c,
                CmpOp::Lt => a < c,
                CmpOp::Le => a <= c,
                CmpOp::Gt => a > c,
                CmpOp::Ge => a >= c,
            }
        }
        BExpr::Not(inner) => !eval_bexpr(inner, v),
        BExpr::And(a, c) => eval_bexpr(a, v) && eval_bexpr(c, v),
        BExpr::Or(a, c) => eval_bexpr(a, v) || eval_bexpr(c, v),
    }
}

/// Evaluates one statement. Bottom absorbs; a failed assumption yields
/// bottom; probabilistic and non-deterministic markers act like skip.
pub fn eval_statement(s: &Statement, v: &Valuation) -> Valuation {
    if v.is_bottom() {
        return Valuation::Bottom;
    }
    match s {
        Statement::Skip | Statement::ProbLeft(_) | Statement::ProbRight(_) | Statement::Nondet(_) => {
            v.clone()
        }
        Statement::Assign(x, e) => {
            let value = eval_expr(e, v).expect("non-bottom");
            let mut next = v.clone();
            next.set(x, value);
            next
        }
        Statement::Assume(b) => {
            if eval_bexpr(b, v) {
                v.clone()
            } else {
                Valuation::Bottom
            }
        }
    }
}
