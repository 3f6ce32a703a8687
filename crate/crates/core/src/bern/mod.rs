//! The Bernoulli Boolean language: syntax, printing and reference semantics.

mod ast;
mod interp;
mod parse;
mod print;

pub use ast::{desugar_choose, walk_stmts, BernExpr, BernProgram, BernStmt, Mode, Param};
pub use interp::{
    all_states, interp_exact, interp_exact_points, interp_nondet, interp_nondet_points, AbstractDistribution,
    BernState, DEFAULT_FLIP_CAP,
};
pub use parse::{parse_bern, parse_bern_expr};
pub use print::expr_to_string;
