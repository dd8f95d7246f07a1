//! Arithmetic expression language for user-configurable nonlinearities.
//!
//! Grammar, whitespace-insensitive:
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus (`-2^2 == -4`) and is right-associative.
//! Its exponent must be a constant subtree. Variables are `t u v y r`;
//! functions are `abs sin cos sqrt sign` (one argument) and `min max powabs`
//! (two arguments), with `powabs(x, e) = |x|^(e-1) x`.

mod ast;
mod eval;
mod parse;

pub use ast::{BinOp, Expr, Func, Var};
pub use eval::{Env, EvalError};
pub use parse::{parse, ParseError, MAX_DEPTH};

use crate::error::{Error, Result};

/// Parses `source` and rejects variables outside `allowed`. `slot` names the
/// configuration field in error messages.
pub fn parse_slot(slot: &str, source: &str, allowed: &[Var]) -> Result<Expr> {
    let expr = parse(source)?;
    for var in expr.variables() {
        if !allowed.contains(&var) {
            let names: Vec<&str> = allowed.iter().map(|v| v.name()).collect();
            return Err(Error::Config(format!(
                "`{slot}` uses variable `{}`, only [{}] are declared for it",
                var.name(),
                names.join(", ")
            )));
        }
    }
    Ok(expr)
}
