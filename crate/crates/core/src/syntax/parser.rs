//! Recursive-descent parser for programs and task files.
//!
//! Precedence: `!` over `&&` over `||`; `*` over `+`/`-`; comparisons are
//! non-associative. Variables are declared implicitly on first use.

use super::ast::{BExpr, CmpOp, Expr, Program, VerificationTask};
use super::lexer::{lex, Pos, SyntaxError, Tok};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

const KEYWORDS: &[&str] = &[
    "skip", "if", "then", "else", "while", "do", "True", "False", "pre", "prog", "post", "bound",
];

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Parser, SyntaxError> {
        Ok(Parser {
            toks: lex(text)?,
            at: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, SyntaxError> {
        Err(SyntaxError {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn expect(&mut self, tok: Tok) -> Result<(), SyntaxError> {
        if *self.peek() == tok {
            self.next();
            Ok(())
        } else {
            self.err(format!("expected {}, found {}", tok, self.peek()))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), SyntaxError> {
        match self.peek() {
            Tok::Ident(s) if s == kw => {
                self.next();
                Ok(())
            }
            other => self.err(format!("expected `{kw}`, found {other}")),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    // ---- arithmetic expressions ----

    fn aexpr(&mut self) -> Result<Expr, SyntaxError> {
        let mut e = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.next();
                    e = Expr::add(e, self.term()?);
                }
                Tok::Minus => {
                    self.next();
                    e = Expr::sub(e, self.term()?);
                }
                _ => return Ok(e),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, SyntaxError> {
        let mut e = self.factor()?;
        loop {
            if *self.peek() == Tok::Star {
                let pos = self.pos();
                self.next();
                let rhs = self.factor()?;
                if !e.is_constant() && !rhs.is_constant() {
                    return Err(SyntaxError {
                        pos,
                        msg: "nonlinear multiplication: one factor must be constant".to_string(),
                    });
                }
                e = Expr::mul(e, rhs);
            } else {
                return Ok(e);
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, SyntaxError> {
        match self.peek().clone() {
            Tok::Int(raw) => {
                self.next();
                Ok(Expr::Lit(raw.parse::<BigInt>().expect("digit string")))
            }
            Tok::Minus => {
                self.next();
                let e = self.factor()?;
                Ok(Expr::sub(Expr::lit(0), e))
            }
            Tok::Ident(name) => {
                if KEYWORDS.contains(&name.as_str()) {
                    self.err(format!("keyword `{name}` cannot be used as a variable"))
                } else {
                    self.next();
                    Ok(Expr::Var(name))
                }
            }
            Tok::LParen => {
                self.next();
                let e = self.aexpr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            other => self.err(format!("expected expression, found {other}")),
        }
    }

    // ---- boolean expressions ----

    fn bexpr(&mut self) -> Result<BExpr, SyntaxError> {
        let mut e = self.band()?;
        while *self.peek() == Tok::OrOr {
            self.next();
            e = BExpr::or(e, self.band()?);
        }
        Ok(e)
    }

    fn band(&mut self) -> Result<BExpr, SyntaxError> {
        let mut e = self.bunary()?;
        while *self.peek() == Tok::AndAnd {
            self.next();
            e = BExpr::and(e, self.bunary()?);
        }
        Ok(e)
    }

    fn bunary(&mut self) -> Result<BExpr, SyntaxError> {
        if *self.peek() == Tok::Bang {
            self.next();
            return Ok(BExpr::not(self.bunary()?));
        }
        self.batom()
    }

    fn cmp_op(&self) -> Option<CmpOp> {
        match self.peek() {
            Tok::EqCmp => Some(CmpOp::Eq),
            Tok::NeCmp => Some(CmpOp::Ne),
            Tok::LtCmp => Some(CmpOp::Lt),
            Tok::LeCmp => Some(CmpOp::Le),
            Tok::GtCmp => Some(CmpOp::Gt),
            Tok::GeCmp => Some(CmpOp::Ge),
            _ => None,
        }
    }

    fn batom(&mut self) -> Result<BExpr, SyntaxError> {
        if self.at_keyword("True") {
            self.next();
            return Ok(BExpr::TRUE);
        }
        if self.at_keyword("False") {
            self.next();
            return Ok(BExpr::FALSE);
        }
        // A comparison and a parenthesised boolean can both start with `(`;
        // try the comparison first and backtrack.
        let save = self.at;
        if let Ok(lhs) = self.aexpr() {
            if let Some(op) = self.cmp_op() {
                self.next();
                let rhs = self.aexpr()?;
                return Ok(BExpr::cmp(op, lhs, rhs));
            }
        }
        self.at = save;
        if *self.peek() == Tok::LParen {
            self.next();
            let e = self.bexpr()?;
            self.expect(Tok::RParen)?;
            return Ok(e);
        }
        self.err(format!(
            "expected boolean expression, found {}",
            self.peek()
        ))
    }

    // ---- programs ----

    fn program(&mut self) -> Result<Program, SyntaxError> {
        let mut stmts = vec![self.stmt()?];
        while *self.peek() == Tok::Semi {
            self.next();
            // tolerate a trailing `;` before a closing brace
            if *self.peek() == Tok::RBrace || *self.peek() == Tok::Eof {
                break;
            }
            stmts.push(self.stmt()?);
        }
        let mut it = stmts.into_iter().rev();
        let last = it.next().expect("at least one statement");
        Ok(it.fold(last, |acc, s| Program::seq(s, acc)))
    }

    fn braced_program(&mut self) -> Result<Program, SyntaxError> {
        self.expect(Tok::LBrace)?;
        let p = self.program()?;
        self.expect(Tok::RBrace)?;
        Ok(p)
    }

    fn stmt(&mut self) -> Result<Program, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(name) => match name.as_str() {
                "skip" => {
                    self.next();
                    Ok(Program::Skip)
                }
                "if" => {
                    self.next();
                    let cond = self.bexpr()?;
                    self.expect_keyword("then")?;
                    let then_branch = self.braced_program()?;
                    self.expect_keyword("else")?;
                    let else_branch = self.braced_program()?;
                    Ok(Program::ite(cond, then_branch, else_branch))
                }
                "while" => {
                    self.next();
                    let cond = self.bexpr()?;
                    self.expect_keyword("do")?;
                    let body = self.braced_program()?;
                    Ok(Program::while_loop(cond, body))
                }
                _ if KEYWORDS.contains(&name.as_str()) => {
                    self.err(format!("unexpected keyword `{name}`"))
                }
                _ => {
                    self.next();
                    self.expect(Tok::Assign)?;
                    let e = self.aexpr()?;
                    Ok(Program::Assign(name, e))
                }
            },
            Tok::LBrace => {
                let left = self.braced_program()?;
                match self.peek() {
                    Tok::ProbOp => {
                        self.next();
                        let right = self.braced_program()?;
                        Ok(Program::prob(left, right))
                    }
                    Tok::NondetOp => {
                        self.next();
                        let right = self.braced_program()?;
                        Ok(Program::nondet(left, right))
                    }
                    other => self.err(format!("expected `<+>` or `[]`, found {other}")),
                }
            }
            other => self.err(format!("expected statement, found {other}")),
        }
    }

    // ---- bounds ----

    /// `digits`, `digits.digits` or `digits/digits`.
    fn rational(&mut self) -> Result<BigRational, SyntaxError> {
        let int_part = match self.peek().clone() {
            Tok::Int(raw) => {
                self.next();
                raw
            }
            other => return self.err(format!("expected a number, found {other}")),
        };
        let whole: BigInt = int_part.parse().expect("digit string");
        match self.peek().clone() {
            Tok::Dot => {
                self.next();
                let frac_raw = match self.peek().clone() {
                    Tok::Int(raw) => {
                        self.next();
                        raw
                    }
                    other => return self.err(format!("expected digits after `.`, found {other}")),
                };
                let frac: BigInt = frac_raw.parse().expect("digit string");
                let scale = BigInt::from(10u32).pow(frac_raw.len() as u32);
                Ok(BigRational::from_integer(whole)
                    + BigRational::new(frac, scale))
            }
            Tok::Slash => {
                self.next();
                let den_raw = match self.peek().clone() {
                    Tok::Int(raw) => {
                        self.next();
                        raw
                    }
                    other => return self.err(format!("expected digits after `/`, found {other}")),
                };
                let den: BigInt = den_raw.parse().expect("digit string");
                if den.is_zero() {
                    return self.err("zero denominator");
                }
                Ok(BigRational::new(whole, den))
            }
            _ => Ok(BigRational::from_integer(whole)),
        }
    }
}

/// Parses a program per the statement grammar.
pub fn parse_program(text: &str) -> Result<Program, SyntaxError> {
    let mut p = Parser::new(text)?;
    let prog = p.program()?;
    p.expect(Tok::Eof)?;
    Ok(prog)
}

/// Parses a boolean expression on its own (used for CLI arguments and tests).
pub fn parse_bexpr(text: &str) -> Result<BExpr, SyntaxError> {
    let mut p = Parser::new(text)?;
    let b = p.bexpr()?;
    p.expect(Tok::Eof)?;
    Ok(b)
}

/// Parses an arithmetic expression on its own.
pub fn parse_expr(text: &str) -> Result<Expr, SyntaxError> {
    let mut p = Parser::new(text)?;
    let e = p.aexpr()?;
    p.expect(Tok::Eof)?;
    Ok(e)
}

/// Parses a threshold value: decimal (`0.375`), integer, or `num/den`.
/// The result must lie in [0, 1].
pub fn parse_threshold(text: &str) -> Result<BigRational, SyntaxError> {
    let mut p = Parser::new(text)?;
    let r = p.rational()?;
    p.expect(Tok::Eof)?;
    check_threshold_range(&r).map_err(|msg| SyntaxError {
        pos: Pos { line: 1, col: 1 },
        msg,
    })?;
    Ok(r)
}

fn check_threshold_range(r: &BigRational) -> Result<(), String> {
    if r < &BigRational::zero() || r > &BigRational::one() {
        Err(format!("bound {r} is outside [0, 1]"))
    } else {
        Ok(())
    }
}

/// Parses a full task file:
/// `pre <bexpr> ; prog { <program> } post <bexpr> ; [bound <number> ;]`
pub fn parse_task(text: &str) -> Result<VerificationTask, SyntaxError> {
    let mut p = Parser::new(text)?;
    p.expect_keyword("pre")?;
    let pre = p.bexpr()?;
    p.expect(Tok::Semi)?;
    p.expect_keyword("prog")?;
    let program = p.braced_program()?;
    p.expect_keyword("post")?;
    let post = p.bexpr()?;
    p.expect(Tok::Semi)?;
    let beta = if p.at_keyword("bound") {
        p.next();
        let r = p.rational()?;
        check_threshold_range(&r).map_err(|msg| SyntaxError { pos: p.pos(), msg })?;
        p.expect(Tok::Semi)?;
        Some(r)
    } else {
        None
    };
    p.expect(Tok::Eof)?;
    Ok(VerificationTask {
        program,
        pre,
        post,
        beta,
    })
}
