//! Hand-rolled lexer with line/column tracking for parse errors.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// Raw digit string; kept textual so decimal bounds retain leading zeros.
    Int(String),
    // punctuation
    Assign,    // :=
    ProbOp,    // <+>
    NondetOp,  // []
    Semi,      // ;
    LBrace,    // {
    RBrace,    // }
    LParen,    // (
    RParen,    // )
    Plus,      // +
    Minus,     // -
    Star,      // *
    Bang,      // !
    AndAnd,    // &&
    OrOr,      // ||
    EqCmp,     // =
    NeCmp,     // !=
    LtCmp,     // <
    LeCmp,     // <=
    GtCmp,     // >
    GeCmp,     // >=
    Slash,     // / (exact rationals in bounds)
    Dot,       // . (decimals in bounds)
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Int(n) => write!(f, "integer `{n}`"),
            Tok::Assign => write!(f, "`:=`"),
            Tok::ProbOp => write!(f, "`<+>`"),
            Tok::NondetOp => write!(f, "`[]`"),
            Tok::Semi => write!(f, "`;`"),
            Tok::LBrace => write!(f, "`{{`"),
            Tok::RBrace => write!(f, "`}}`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::Plus => write!(f, "`+`"),
            Tok::Minus => write!(f, "`-`"),
            Tok::Star => write!(f, "`*`"),
            Tok::Bang => write!(f, "`!`"),
            Tok::AndAnd => write!(f, "`&&`"),
            Tok::OrOr => write!(f, "`||`"),
            Tok::EqCmp => write!(f, "`=`"),
            Tok::NeCmp => write!(f, "`!=`"),
            Tok::LtCmp => write!(f, "`<`"),
            Tok::LeCmp => write!(f, "`<=`"),
            Tok::GtCmp => write!(f, "`>`"),
            Tok::GeCmp => write!(f, "`>=`"),
            Tok::Slash => write!(f, "`/`"),
            Tok::Dot => write!(f, "`.`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
#[error("syntax error at {pos}: {msg}")]
pub struct SyntaxError {
    pub pos: Pos,
    pub msg: String,
}

pub fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, SyntaxError> {
    let mut toks = Vec::new();
    let mut chars = text.chars().peekable();
    let mut line = 1usize;
    let mut col = 1usize;

    macro_rules! bump {
        () => {{
            let c = chars.next();
            if let Some(c) = c {
                if c == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
            }
            c
        }};
    }

    loop {
        let pos = Pos { line, col };
        let c = match chars.peek() {
            None => break,
            Some(c) => *c,
        };
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            while let Some(d) = chars.peek() {
                if d.is_ascii_digit() {
                    s.push(*d);
                    bump!();
                } else {
                    break;
                }
            }
            toks.push((Tok::Int(s), pos));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(d) = chars.peek() {
                if d.is_alphanumeric() || *d == '_' {
                    s.push(*d);
                    bump!();
                } else {
                    break;
                }
            }
            toks.push((Tok::Ident(s), pos));
            continue;
        }
        bump!();
        let tok = match c {
            ';' => Tok::Semi,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '.' => Tok::Dot,
            '=' => Tok::EqCmp,
            ':' => {
                if chars.peek() == Some(&'=') {
                    bump!();
                    Tok::Assign
                } else {
                    return Err(SyntaxError {
                        pos,
                        msg: "expected `:=`".to_string(),
                    });
                }
            }
            '!' => {
                if chars.peek() == Some(&'=') {
                    bump!();
                    Tok::NeCmp
                } else {
                    Tok::Bang
                }
            }
            '&' => {
                if chars.peek() == Some(&'&') {
                    bump!();
                    Tok::AndAnd
                } else {
                    return Err(SyntaxError {
                        pos,
                        msg: "expected `&&`".to_string(),
                    });
                }
            }
            '|' => {
                if chars.peek() == Some(&'|') {
                    bump!();
                    Tok::OrOr
                } else {
                    return Err(SyntaxError {
                        pos,
                        msg: "expected `||`".to_string(),
                    });
                }
            }
            '<' => match chars.peek() {
                Some('=') => {
                    bump!();
                    Tok::LeCmp
                }
                Some('+') => {
                    bump!();
                    if chars.peek() == Some(&'>') {
                        bump!();
                        Tok::ProbOp
                    } else {
                        return Err(SyntaxError {
                            pos,
                            msg: "expected `<+>`".to_string(),
                        });
                    }
                }
                _ => Tok::LtCmp,
            },
            '>' => {
                if chars.peek() == Some(&'=') {
                    bump!();
                    Tok::GeCmp
                } else {
                    Tok::GtCmp
                }
            }
            '[' => {
                if chars.peek() == Some(&']') {
                    bump!();
                    Tok::NondetOp
                } else {
                    return Err(SyntaxError {
                        pos,
                        msg: "expected `[]`".to_string(),
                    });
                }
            }
            other => {
                return Err(SyntaxError {
                    pos,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        };
        toks.push((tok, pos));
    }
    toks.push((
        Tok::Eof,
        Pos { line, col },
    ));
    Ok(toks)
}
