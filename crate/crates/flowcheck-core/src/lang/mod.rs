//! Abstract syntax, program points and concrete syntax for the
//! while-language with channel outputs and policy directives.

mod ast;
mod parser;
mod printer;

pub use ast::{BinOp, Chan, Command, DirectiveAction, Expr, Point, UnOp, Var};
pub use parser::{parse_expr, parse_program, ParseError};
pub use printer::canonical_source;
