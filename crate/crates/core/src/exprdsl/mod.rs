//! A small expression language for Lagrangians, metrics, constants of motion and
//! vector fields.
//!
//! Grammar (whitespace-insensitive, no implicit multiplication):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | symbol | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! Symbols are `q<i>`, `qd<i>` (one-based), `t`, declared parameters and
//! optional aliases. Functions: `sin cos tan exp log sqrt sinh cosh abs`.

mod ast;
mod diff;
mod eval;
mod parser;

pub use ast::{free_symbols, BinOp, ExprAst, Func, Node, Span, Symbol};
pub use diff::differentiate;
pub use eval::{evaluate, Bindings, EvalError, EvalErrorKind};
pub use parser::{parse, parse_with, ParseError, ParseErrorKind, SymbolTable};
