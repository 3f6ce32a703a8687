//! Decision procedure for conditions over bounded integer domains.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt::Write as _;

use crate::concrete::{states_of, CmpOp, Cond, IntExpr, VarDecl, VarIdx, DEFAULT_CAP};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Query {
    Sat(Cond),
    /// Holds iff every state satisfying the first condition satisfies the second.
    Entails(Cond, Cond),
}

impl Query {
    /// The condition whose satisfiability decides the query.
    pub fn sat_condition(&self) -> Cond {
        match self {
            Query::Sat(c) => c.clone(),
            Query::Entails(a, b) => Cond::and(a.clone(), Cond::not(b.clone())),
        }
    }
}

/// Enumeration-backed oracle with memoized verdicts.
#[derive(Debug)]
pub struct TheoryContext {
    decls: Vec<VarDecl>,
    cap: u128,
    memo: RefCell<HashMap<Cond, bool>>,
    log: Option<RefCell<Vec<Query>>>,
}

impl TheoryContext {
    pub fn new(decls: Vec<VarDecl>) -> Self {
        Self::with_cap(decls, DEFAULT_CAP)
    }

    pub fn with_cap(decls: Vec<VarDecl>, cap: u128) -> Self {
        TheoryContext { decls, cap, memo: RefCell::new(HashMap::new()), log: None }
    }

    /// Records every query issued from now on.
    pub fn with_log(mut self) -> Self {
        self.log = Some(RefCell::new(Vec::new()));
        self
    }

    pub fn decls(&self) -> &[VarDecl] {
        &self.decls
    }

    pub fn cap(&self) -> u128 {
        self.cap
    }

    pub fn logged(&self) -> Vec<Query> {
        self.log.as_ref().map(|l| l.borrow().clone()).unwrap_or_default()
    }

    pub fn cache_len(&self) -> usize {
        self.memo.borrow().len()
    }

    fn record(&self, q: Query) {
        if let Some(log) = &self.log {
            log.borrow_mut().push(q);
        }
    }

    pub fn satisfiable(&self, c: &Cond) -> Result<bool> {
        self.record(Query::Sat(c.clone()));
        self.decide(c)
    }

    pub fn entails(&self, a: &Cond, b: &Cond) -> Result<bool> {
        self.record(Query::Entails(a.clone(), b.clone()));
        Ok(!self.decide(&Cond::and(a.clone(), Cond::not(b.clone())))?)
    }

    pub fn valid(&self, c: &Cond) -> Result<bool> {
        self.entails(&Cond::Const(true), c)
    }

    fn decide(&self, c: &Cond) -> Result<bool> {
        if let Cond::Const(b) = c {
            return Ok(*b);
        }
        if let Some(&v) = self.memo.borrow().get(c) {
            return Ok(v);
        }
        let free: Vec<VarIdx> = c.vars().into_iter().collect();
        let sub: Vec<VarDecl> = free.iter().map(|&v| self.decls[v].clone()).collect();
        let needed = sub.iter().fold(1u128, |acc, d| acc.saturating_mul(d.size()));
        if needed > self.cap {
            return Err(Error::CapExceeded { needed, cap: self.cap });
        }
        let mut state: Vec<i64> = self.decls.iter().map(|d| d.lo).collect();
        let mut verdict = false;
        for z in states_of(&sub) {
            for (&v, &value) in free.iter().zip(z.values()) {
                state[v] = value;
            }
            if c.eval(&state) {
                verdict = true;
                break;
            }
        }
        self.memo.borrow_mut().insert(c.clone(), verdict);
        Ok(verdict)
    }
}

/// Weakest precondition of `var = e` with respect to `c`.
pub fn wp_subst(var: VarIdx, e: &IntExpr, c: &Cond) -> Cond {
    c.substitute(var, e)
}

fn smt_symbol(name: &str) -> String {
    const RESERVED: [&str; 12] = ["and", "or", "not", "ite", "let", "true", "false", "assert", "distinct", "Int", "Bool", "exists"];
    if RESERVED.contains(&name) {
        format!("|{name}|")
    } else {
        name.to_string()
    }
}

fn smt_int(n: i64) -> String {
    if n < 0 {
        format!("(- {})", n.unsigned_abs())
    } else {
        n.to_string()
    }
}

fn smt_expr(e: &IntExpr, decls: &[VarDecl]) -> String {
    match e {
        IntExpr::Const(c) => smt_int(*c),
        IntExpr::Var(v) => smt_symbol(&decls[*v].name),
        IntExpr::Add(a, b) => format!("(+ {} {})", smt_expr(a, decls), smt_expr(b, decls)),
        IntExpr::Sub(a, b) => format!("(- {} {})", smt_expr(a, decls), smt_expr(b, decls)),
        IntExpr::Scale(k, a) => format!("(* {} {})", smt_int(*k), smt_expr(a, decls)),
    }
}

fn smt_cond(c: &Cond, decls: &[VarDecl]) -> String {
    match c {
        Cond::Const(true) => "true".into(),
        Cond::Const(false) => "false".into(),
        Cond::Cmp(op, a, b) => {
            let (a, b) = (smt_expr(a, decls), smt_expr(b, decls));
            match op {
                CmpOp::Lt => format!("(< {a} {b})"),
                CmpOp::Le => format!("(<= {a} {b})"),
                CmpOp::Eq => format!("(= {a} {b})"),
                CmpOp::Ne => format!("(not (= {a} {b}))"),
                CmpOp::Gt => format!("(> {a} {b})"),
                CmpOp::Ge => format!("(>= {a} {b})"),
            }
        }
        Cond::Not(a) => format!("(not {})", smt_cond(a, decls)),
        Cond::And(a, b) => format!("(and {} {})", smt_cond(a, decls), smt_cond(b, decls)),
        Cond::Or(a, b) => format!("(or {} {})", smt_cond(a, decls), smt_cond(b, decls)),
    }
}

/// SMT-LIB2 script that is `sat` iff the query's condition is satisfiable.
/// For an entailment, `unsat` means the entailment holds.
pub fn emit_smtlib(ctx: &TheoryContext, query: &Query) -> String {
    let decls = ctx.decls();
    let mut out = String::from("(set-logic QF_LIA)\n");
    for d in decls {
        writeln!(out, "(declare-const {} Int)", smt_symbol(&d.name)).unwrap();
    }
    let mut parts: Vec<String> = Vec::new();
    for d in decls {
        let x = smt_symbol(&d.name);
        parts.push(format!("(<= {} {x})", smt_int(d.lo)));
        parts.push(format!("(< {x} {})", smt_int(d.hi)));
    }
    parts.push(smt_cond(&query.sat_condition(), decls));
    writeln!(out, "(assert (and {}))", parts.join(" ")).unwrap();
    out.push_str("(check-sat)\n");
    out
}
