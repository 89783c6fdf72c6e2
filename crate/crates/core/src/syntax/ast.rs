//! Abstract syntax for the input language: arithmetic and Boolean
//! expressions, programs, and verification tasks.

use num_bigint::BigInt;
use num_rational::BigRational;
use std::fmt;

/// Arithmetic expression over integer literals and variables.
///
/// The parser guarantees linearity: at least one operand of every
/// multiplication is a constant expression.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Lit(BigInt),
    Var(String),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn lit(n: i64) -> Expr {
        Expr::Lit(BigInt::from(n))
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    /// True when the expression contains no variables.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Lit(_) => true,
            Expr::Var(_) => false,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.is_constant() && b.is_constant()
            }
        }
    }

    pub fn collect_vars(&self, out: &mut std::collections::BTreeSet<String>) {
        match self {
            Expr::Lit(_) => {}
            Expr::Var(x) => {
                out.insert(x.clone());
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Substitutes `expr` for every occurrence of variable `var`.
    pub fn subst(&self, var: &str, expr: &Expr) -> Expr {
        match self {
            Expr::Lit(_) => self.clone(),
            Expr::Var(x) => {
                if x == var {
                    expr.clone()
                } else {
                    self.clone()
                }
            }
            Expr::Add(a, b) => Expr::add(a.subst(var, expr), b.subst(var, expr)),
            Expr::Sub(a, b) => Expr::sub(a.subst(var, expr), b.subst(var, expr)),
            Expr::Mul(a, b) => Expr::mul(a.subst(var, expr), b.subst(var, expr)),
        }
    }
}

/// Comparison operators relating two arithmetic expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

/// Boolean expression: comparisons closed under negation, conjunction
/// and disjunction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BExpr {
    Lit(bool),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    Not(Box<BExpr>),
    And(Box<BExpr>, Box<BExpr>),
    Or(Box<BExpr>, Box<BExpr>),
}

impl BExpr {
    pub const TRUE: BExpr = BExpr::Lit(true);
    pub const FALSE: BExpr = BExpr::Lit(false);

    pub fn cmp(op: CmpOp, a: Expr, b: Expr) -> BExpr {
        BExpr::Cmp(op, Box::new(a), Box::new(b))
    }

    pub fn eq(a: Expr, b: Expr) -> BExpr {
        Self::cmp(CmpOp::Eq, a, b)
    }

    pub fn not(b: BExpr) -> BExpr {
        BExpr::Not(Box::new(b))
    }

    pub fn and(a: BExpr, b: BExpr) -> BExpr {
        BExpr::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: BExpr, b: BExpr) -> BExpr {
        BExpr::Or(Box::new(a), Box::new(b))
    }

    /// `a -> b` encoded as `!a || b`.
    pub fn implies(a: BExpr, b: BExpr) -> BExpr {
        BExpr::or(BExpr::not(a), b)
    }

    pub fn collect_vars(&self, out: &mut std::collections::BTreeSet<String>) {
        match self {
            BExpr::Lit(_) => {}
            BExpr::Cmp(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            BExpr::Not(b) => b.collect_vars(out),
            BExpr::And(a, b) | BExpr::Or(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn vars(&self) -> std::collections::BTreeSet<String> {
        let mut out = std::collections::BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    /// Substitutes `expr` for variable `var` in every comparison.
    pub fn subst(&self, var: &str, expr: &Expr) -> BExpr {
        match self {
            BExpr::Lit(_) => self.clone(),
            BExpr::Cmp(op, a, b) => BExpr::cmp(*op, a.subst(var, expr), b.subst(var, expr)),
            BExpr::Not(b) => BExpr::not(b.subst(var, expr)),
            BExpr::And(a, b) => BExpr::and(a.subst(var, expr), b.subst(var, expr)),
            BExpr::Or(a, b) => BExpr::or(a.subst(var, expr), b.subst(var, expr)),
        }
    }
}

/// Program AST, mirroring the seven production rules of the input grammar.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Program {
    Skip,
    Assign(String, Expr),
    /// Fair binary probabilistic choice.
    ProbChoice(Box<Program>, Box<Program>),
    /// Binary non-deterministic choice.
    NondetChoice(Box<Program>, Box<Program>),
    Seq(Box<Program>, Box<Program>),
    Ite(BExpr, Box<Program>, Box<Program>),
    While(BExpr, Box<Program>),
}

impl Program {
    pub fn assign(var: &str, e: Expr) -> Program {
        Program::Assign(var.to_string(), e)
    }

    pub fn prob(a: Program, b: Program) -> Program {
        Program::ProbChoice(Box::new(a), Box::new(b))
    }

    pub fn nondet(a: Program, b: Program) -> Program {
        Program::NondetChoice(Box::new(a), Box::new(b))
    }

    pub fn seq(a: Program, b: Program) -> Program {
        Program::Seq(Box::new(a), Box::new(b))
    }

    pub fn ite(c: BExpr, a: Program, b: Program) -> Program {
        Program::Ite(c, Box::new(a), Box::new(b))
    }

    pub fn while_loop(c: BExpr, body: Program) -> Program {
        Program::While(c, Box::new(body))
    }

    pub fn collect_vars(&self, out: &mut std::collections::BTreeSet<String>) {
        match self {
            Program::Skip => {}
            Program::Assign(x, e) => {
                out.insert(x.clone());
                e.collect_vars(out);
            }
            Program::ProbChoice(a, b) | Program::NondetChoice(a, b) | Program::Seq(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Program::Ite(c, a, b) => {
                c.collect_vars(out);
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Program::While(c, b) => {
                c.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }
}

/// A verification task: program, pre-condition, post-condition and the
/// probability threshold, kept as an exact rational.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationTask {
    pub program: Program,
    pub pre: BExpr,
    pub post: BExpr,
    /// Threshold in [0, 1]; `None` when the task file omits `bound`
    /// and the caller must supply one.
    pub beta: Option<BigRational>,
}

impl VerificationTask {
    /// All variables mentioned by the program, pre- or post-condition.
    pub fn vars(&self) -> std::collections::BTreeSet<String> {
        let mut out = std::collections::BTreeSet::new();
        self.program.collect_vars(&mut out);
        self.pre.collect_vars(&mut out);
        self.post.collect_vars(&mut out);
        out
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        };
        f.write_str(s)
    }
}
