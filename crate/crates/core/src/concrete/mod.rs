//! The loop-free source language over bounded integers.

mod ast;
mod eval;
mod parse;

pub use ast::{states_of, CmpOp, ConcreteProgram, ConcreteState, Cond, IntExpr, Stmt, StmtKind, VarDecl, VarIdx};
pub use eval::{eval_det, eval_dist, eval_dist_probe, query_prob, ConcreteDistribution, Outcome, DEFAULT_CAP};
pub use parse::{parse_concrete, parse_cond, parse_expr};
