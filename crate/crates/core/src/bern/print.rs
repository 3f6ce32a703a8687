use std::fmt::{self, Write as _};

use super::ast::{BernExpr, BernProgram, BernStmt, Param};
use crate::rational;

fn prec(e: &BernExpr) -> u8 {
    match e {
        BernExpr::Iff(..) => 0,
        BernExpr::Implies(..) => 1,
        BernExpr::Or(..) => 2,
        BernExpr::And(..) => 3,
        _ => 4,
    }
}

fn write_expr(out: &mut String, e: &BernExpr, vars: &[String], min: u8) {
    let p = prec(e);
    if p < min {
        out.push('(');
    }
    match e {
        BernExpr::Const(true) => out.push('T'),
        BernExpr::Const(false) => out.push('F'),
        BernExpr::Var(v) => out.push_str(&vars[*v]),
        BernExpr::Not(a) => {
            out.push('!');
            write_expr(out, a, vars, 4);
        }
        BernExpr::And(a, b) => {
            write_expr(out, a, vars, 3);
            out.push_str(" && ");
            write_expr(out, b, vars, 4);
        }
        BernExpr::Or(a, b) => {
            write_expr(out, a, vars, 2);
            out.push_str(" || ");
            write_expr(out, b, vars, 3);
        }
        BernExpr::Implies(a, b) => {
            write_expr(out, a, vars, 2);
            out.push_str(" => ");
            write_expr(out, b, vars, 1);
        }
        BernExpr::Iff(a, b) => {
            write_expr(out, a, vars, 0);
            out.push_str(" <=> ");
            write_expr(out, b, vars, 1);
        }
        BernExpr::Flip { param, .. } => {
            out.push_str("flip(");
            match param {
                Param::Value(v) => out.push_str(&rational::format(v)),
                Param::Symbol(s) => out.push_str(s),
            }
            out.push(')');
        }
        BernExpr::Star => out.push('*'),
        BernExpr::Choose(a, b) => {
            out.push_str("choose(");
            write_expr(out, a, vars, 0);
            out.push_str(", ");
            write_expr(out, b, vars, 0);
            out.push(')');
        }
    }
    if p < min {
        out.push(')');
    }
}

/// Renders an expression with the program's variable names.
pub fn expr_to_string(e: &BernExpr, vars: &[String]) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, vars, 0);
    s
}

fn write_block(out: &mut String, stmts: &[BernStmt], vars: &[String], depth: usize) {
    let pad = "  ".repeat(depth);
    for s in stmts {
        match s {
            BernStmt::Assign(items) if items.is_empty() => writeln!(out, "{pad}skip").unwrap(),
            BernStmt::Assign(items) => {
                let lhs: Vec<&str> = items.iter().map(|(v, _)| vars[*v].as_str()).collect();
                let rhs: Vec<String> = items.iter().map(|(_, e)| expr_to_string(e, vars)).collect();
                if items.len() == 1 {
                    writeln!(out, "{pad}{} = {}", lhs[0], rhs[0]).unwrap();
                } else {
                    writeln!(out, "{pad}{} =", lhs.join(", ")).unwrap();
                    let sep = format!(",\n{pad}    ");
                    writeln!(out, "{pad}    {}", rhs.join(&sep)).unwrap();
                }
            }
            BernStmt::Observe(e) => writeln!(out, "{pad}observe({})", expr_to_string(e, vars)).unwrap(),
            BernStmt::Assume(e) => writeln!(out, "{pad}assume({})", expr_to_string(e, vars)).unwrap(),
            BernStmt::If(g, a, b) => {
                writeln!(out, "{pad}if ({}) {{", expr_to_string(g, vars)).unwrap();
                write_block(out, a, vars, depth + 1);
                if b.is_empty() {
                    writeln!(out, "{pad}}}").unwrap();
                } else {
                    writeln!(out, "{pad}}} else {{").unwrap();
                    write_block(out, b, vars, depth + 1);
                    writeln!(out, "{pad}}}").unwrap();
                }
            }
        }
    }
}

impl fmt::Display for BernProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        for v in &self.vars {
            writeln!(out, "bool {v}").unwrap();
        }
        write_block(&mut out, &self.body, &self.vars, 0);
        f.write_str(&out)
    }
}
