//! Surface syntax: AST types, parsing and printing for programs and
//! verification task files.

mod ast;
mod lexer;
mod parser;
mod print;

pub use ast::{BExpr, CmpOp, Expr, Program, VerificationTask};
pub use lexer::{Pos, SyntaxError};
pub use parser::{parse_bexpr, parse_expr, parse_program, parse_task, parse_threshold};
