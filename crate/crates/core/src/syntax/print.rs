//! Canonical pretty-printer. `parse_program(print(p)) == p` for every AST.

use super::ast::{BExpr, Expr, Program};
use std::fmt;

// Expression precedence levels: additive = 0, multiplicative = 1, atom = 2.
fn expr_prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 0,
        Expr::Mul(..) => 1,
        Expr::Lit(_) | Expr::Var(_) => 2,
    }
}

fn fmt_expr(e: &Expr, min_prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let prec = expr_prec(e);
    let parens = prec < min_prec;
    if parens {
        write!(f, "(")?;
    }
    match e {
        Expr::Lit(n) => {
            if n.sign() == num_bigint::Sign::Minus {
                // negative literals only arise from programmatic construction
                write!(f, "(0 - {})", -n)?;
            } else {
                write!(f, "{n}")?;
            }
        }
        Expr::Var(x) => write!(f, "{x}")?,
        // left-assoc: the right operand of `-` needs the next level
        Expr::Add(a, b) => {
            fmt_expr(a, 0, f)?;
            write!(f, " + ")?;
            fmt_expr(b, 1, f)?;
        }
        Expr::Sub(a, b) => {
            fmt_expr(a, 0, f)?;
            write!(f, " - ")?;
            fmt_expr(b, 1, f)?;
        }
        Expr::Mul(a, b) => {
            fmt_expr(a, 1, f)?;
            write!(f, " * ")?;
            fmt_expr(b, 2, f)?;
        }
    }
    if parens {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_expr(self, 0, f)
    }
}

// Boolean precedence: or = 0, and = 1, unary/atom = 2.
fn bexpr_prec(b: &BExpr) -> u8 {
    match b {
        BExpr::Or(..) => 0,
        BExpr::And(..) => 1,
        BExpr::Not(..) | BExpr::Lit(_) | BExpr::Cmp(..) => 2,
    }
}

fn fmt_bexpr(b: &BExpr, min_prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let prec = bexpr_prec(b);
    let parens = prec < min_prec;
    if parens {
        write!(f, "(")?;
    }
    match b {
        BExpr::Lit(true) => write!(f, "True")?,
        BExpr::Lit(false) => write!(f, "False")?,
        BExpr::Cmp(op, a, c) => write!(f, "{a} {op} {c}")?,
        BExpr::Not(inner) => {
            write!(f, "!")?;
            // a comparison under `!` must be parenthesised to reparse
            match inner.as_ref() {
                BExpr::Lit(_) | BExpr::Not(_) => fmt_bexpr(inner, 2, f)?,
                _ => {
                    write!(f, "(")?;
                    fmt_bexpr(inner, 0, f)?;
                    write!(f, ")")?;
                }
            }
        }
        BExpr::And(a, c) => {
            fmt_bexpr(a, 1, f)?;
            write!(f, " && ")?;
            fmt_bexpr(c, 2, f)?;
        }
        BExpr::Or(a, c) => {
            fmt_bexpr(a, 0, f)?;
            write!(f, " || ")?;
            fmt_bexpr(c, 1, f)?;
        }
    }
    if parens {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for BExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_bexpr(self, 0, f)
    }
}

fn fmt_program(p: &Program, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match p {
        Program::Skip => write!(f, "skip"),
        Program::Assign(x, e) => write!(f, "{x} := {e}"),
        Program::ProbChoice(a, b) => write!(f, "{{ {a} }} <+> {{ {b} }}"),
        Program::NondetChoice(a, b) => write!(f, "{{ {a} }} [] {{ {b} }}"),
        Program::Seq(a, b) => write!(f, "{a}; {b}"),
        Program::Ite(c, a, b) => write!(f, "if {c} then {{ {a} }} else {{ {b} }}"),
        Program::While(c, body) => write!(f, "while {c} do {{ {body} }}"),
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_program(self, f)
    }
}
