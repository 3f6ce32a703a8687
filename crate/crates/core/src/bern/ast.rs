use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::logic::{BoolFormula, VarId};
use crate::rational::{is_probability, Prob};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Param {
    Value(Prob),
    /// A named parameter awaiting a value.
    Symbol(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Probabilistic,
    Nondeterministic,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BernExpr {
    Const(bool),
    Var(usize),
    Not(Box<BernExpr>),
    And(Box<BernExpr>, Box<BernExpr>),
    Or(Box<BernExpr>, Box<BernExpr>),
    Implies(Box<BernExpr>, Box<BernExpr>),
    Iff(Box<BernExpr>, Box<BernExpr>),
    Flip { site: usize, param: Param },
    Star,
    Choose(Box<BernExpr>, Box<BernExpr>),
}

impl BernExpr {
    pub const T: BernExpr = BernExpr::Const(true);
    pub const F: BernExpr = BernExpr::Const(false);

    pub fn flip(site: usize, param: Param) -> Self {
        BernExpr::Flip { site, param }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: BernExpr) -> Self {
        match e {
            BernExpr::Const(b) => BernExpr::Const(!b),
            BernExpr::Not(inner) => *inner,
            other => BernExpr::Not(Box::new(other)),
        }
    }

    pub fn and(a: BernExpr, b: BernExpr) -> Self {
        match (a, b) {
            (BernExpr::Const(false), _) | (_, BernExpr::Const(false)) => BernExpr::F,
            (BernExpr::Const(true), x) | (x, BernExpr::Const(true)) => x,
            (a, b) => BernExpr::And(Box::new(a), Box::new(b)),
        }
    }

    pub fn or(a: BernExpr, b: BernExpr) -> Self {
        match (a, b) {
            (BernExpr::Const(true), _) | (_, BernExpr::Const(true)) => BernExpr::T,
            (BernExpr::Const(false), x) | (x, BernExpr::Const(false)) => x,
            (a, b) => BernExpr::Or(Box::new(a), Box::new(b)),
        }
    }

    pub fn implies(a: BernExpr, b: BernExpr) -> Self {
        BernExpr::Implies(Box::new(a), Box::new(b))
    }

    pub fn choose(a: BernExpr, b: BernExpr) -> Self {
        BernExpr::Choose(Box::new(a), Box::new(b))
    }

    pub fn children(&self) -> Vec<&BernExpr> {
        match self {
            BernExpr::Const(_) | BernExpr::Var(_) | BernExpr::Flip { .. } | BernExpr::Star => vec![],
            BernExpr::Not(a) => vec![a],
            BernExpr::And(a, b)
            | BernExpr::Or(a, b)
            | BernExpr::Implies(a, b)
            | BernExpr::Iff(a, b)
            | BernExpr::Choose(a, b) => vec![a, b],
        }
    }

    fn children_mut(&mut self) -> Vec<&mut BernExpr> {
        match self {
            BernExpr::Const(_) | BernExpr::Var(_) | BernExpr::Flip { .. } | BernExpr::Star => vec![],
            BernExpr::Not(a) => vec![a],
            BernExpr::And(a, b)
            | BernExpr::Or(a, b)
            | BernExpr::Implies(a, b)
            | BernExpr::Iff(a, b)
            | BernExpr::Choose(a, b) => vec![a, b],
        }
    }

    /// Pre-order walk, left to right.
    pub fn visit(&self, f: &mut impl FnMut(&BernExpr)) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }

    pub fn visit_mut(&mut self, f: &mut impl FnMut(&mut BernExpr)) {
        f(self);
        for c in self.children_mut() {
            c.visit_mut(f);
        }
    }

    pub fn has_star(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| found |= matches!(e, BernExpr::Star | BernExpr::Choose(..)));
        found
    }

    pub fn has_flip(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| found |= matches!(e, BernExpr::Flip { .. }));
        found
    }

    pub fn vars(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let BernExpr::Var(v) = e {
                out.insert(*v);
            }
        });
        out
    }

    /// Deterministic evaluation; flips read their outcome from `flip`.
    pub fn eval<E: From<Error>>(
        &self,
        state: &[bool],
        flip: &mut impl FnMut(usize) -> std::result::Result<bool, E>,
    ) -> std::result::Result<bool, E> {
        Ok(match self {
            BernExpr::Const(b) => *b,
            BernExpr::Var(v) => state[*v],
            BernExpr::Not(a) => !a.eval(state, flip)?,
            BernExpr::And(a, b) => {
                let x = a.eval(state, flip)?;
                let y = b.eval(state, flip)?;
                x && y
            }
            BernExpr::Or(a, b) => {
                let x = a.eval(state, flip)?;
                let y = b.eval(state, flip)?;
                x || y
            }
            BernExpr::Implies(a, b) => {
                let x = a.eval(state, flip)?;
                let y = b.eval(state, flip)?;
                !x || y
            }
            BernExpr::Iff(a, b) => a.eval(state, flip)? == b.eval(state, flip)?,
            BernExpr::Flip { site, .. } => flip(*site)?,
            BernExpr::Star => return Err(Error::UnexpectedStar.into()),
            BernExpr::Choose(..) => return Err(Error::UnexpectedChoose.into()),
        })
    }

    /// Translation into a propositional formula. Flip sites are mapped by
    /// `flip`; `*` and `choose` are rejected.
    pub fn to_formula(&self, var: &impl Fn(usize) -> VarId, flip: &impl Fn(usize) -> Result<VarId>) -> Result<BoolFormula> {
        Ok(match self {
            BernExpr::Const(b) => BoolFormula::Const(*b),
            BernExpr::Var(v) => BoolFormula::Var(var(*v)),
            BernExpr::Not(a) => BoolFormula::not(a.to_formula(var, flip)?),
            BernExpr::And(a, b) => BoolFormula::and(a.to_formula(var, flip)?, b.to_formula(var, flip)?),
            BernExpr::Or(a, b) => BoolFormula::or(a.to_formula(var, flip)?, b.to_formula(var, flip)?),
            BernExpr::Implies(a, b) => BoolFormula::implies(a.to_formula(var, flip)?, b.to_formula(var, flip)?),
            BernExpr::Iff(a, b) => BoolFormula::iff(a.to_formula(var, flip)?, b.to_formula(var, flip)?),
            BernExpr::Flip { site, .. } => BoolFormula::Var(flip(*site)?),
            BernExpr::Star => return Err(Error::UnexpectedStar),
            BernExpr::Choose(..) => return Err(Error::UnexpectedChoose),
        })
    }

    /// Translation from a formula whose variables map to program variables.
    pub fn from_formula(f: &BoolFormula, var: &impl Fn(VarId) -> BernExpr) -> BernExpr {
        match f {
            BoolFormula::Const(b) => BernExpr::Const(*b),
            BoolFormula::Var(v) => var(*v),
            BoolFormula::Not(a) => BernExpr::not(Self::from_formula(a, var)),
            BoolFormula::And(a, b) => BernExpr::and(Self::from_formula(a, var), Self::from_formula(b, var)),
            BoolFormula::Or(a, b) => BernExpr::or(Self::from_formula(a, var), Self::from_formula(b, var)),
            BoolFormula::Implies(a, b) => BernExpr::implies(Self::from_formula(a, var), Self::from_formula(b, var)),
            BoolFormula::Iff(a, b) => {
                BernExpr::Iff(Box::new(Self::from_formula(a, var)), Box::new(Self::from_formula(b, var)))
            }
        }
    }
}

/// `choose(a, b)` as `a ∨ (¬b ∧ unknown)`, with constants folded.
pub fn desugar_choose(a: BernExpr, b: BernExpr, unknown: BernExpr) -> BernExpr {
    BernExpr::or(a, BernExpr::and(BernExpr::not(b), unknown))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BernStmt {
    /// Simultaneous assignment; the empty list is `skip`.
    Assign(Vec<(usize, BernExpr)>),
    If(BernExpr, Vec<BernStmt>, Vec<BernStmt>),
    Observe(BernExpr),
    Assume(BernExpr),
}

impl BernStmt {
    pub fn exprs(&self) -> Vec<&BernExpr> {
        match self {
            BernStmt::Assign(items) => items.iter().map(|(_, e)| e).collect(),
            BernStmt::If(g, _, _) => vec![g],
            BernStmt::Observe(e) | BernStmt::Assume(e) => vec![e],
        }
    }
}

/// Visits every statement in pre-order; ids start at 1.
pub fn walk_stmts<'a>(stmts: &'a [BernStmt], f: &mut impl FnMut(usize, &'a BernStmt)) {
    fn go<'a>(stmts: &'a [BernStmt], next: &mut usize, f: &mut impl FnMut(usize, &'a BernStmt)) {
        for s in stmts {
            *next += 1;
            f(*next, s);
            if let BernStmt::If(_, a, b) = s {
                go(a, next, f);
                go(b, next, f);
            }
        }
    }
    let mut next = 0;
    go(stmts, &mut next, f);
}

fn walk_exprs_mut(stmts: &mut [BernStmt], f: &mut impl FnMut(&mut BernExpr)) {
    for s in stmts {
        match s {
            BernStmt::Assign(items) => {
                for (_, e) in items {
                    e.visit_mut(f);
                }
            }
            BernStmt::If(g, a, b) => {
                g.visit_mut(f);
                walk_exprs_mut(a, f);
                walk_exprs_mut(b, f);
            }
            BernStmt::Observe(e) | BernStmt::Assume(e) => e.visit_mut(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BernProgram {
    /// Variable names as written, e.g. `{x<3}` or `a`.
    pub vars: Vec<String>,
    pub body: Vec<BernStmt>,
    pub mode: Mode,
}

impl BernProgram {
    /// Validates the program, numbers flip sites in textual order and
    /// infers the mode.
    pub fn new(vars: Vec<String>, body: Vec<BernStmt>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for v in &vars {
            if !seen.insert(v) {
                return Err(Error::DuplicateVariable(v.clone()));
            }
        }
        let mut p = BernProgram { vars, body, mode: Mode::Probabilistic };
        let (mut star, mut flip) = (false, false);
        let mut bad = None;
        let n = p.vars.len();
        p.walk_exprs(&mut |e| match e {
            BernExpr::Star | BernExpr::Choose(..) => star = true,
            BernExpr::Flip { param: Param::Value(theta), .. } => {
                flip = true;
                if !is_probability(theta) {
                    bad.get_or_insert(Error::ParameterRange(crate::rational::format(theta)));
                }
            }
            BernExpr::Flip { .. } => flip = true,
            BernExpr::Var(v) if *v >= n => {
                bad.get_or_insert(Error::UndeclaredVariable(format!("#{v}")));
            }
            _ => {}
        });
        if let Some(e) = bad {
            return Err(e);
        }
        if star && flip {
            return Err(Error::MixedMode);
        }
        let mut dup = None;
        walk_stmts(&p.body, &mut |_, s| {
            if let BernStmt::Assign(items) = s {
                let mut targets = BTreeSet::new();
                for (v, _) in items {
                    if !targets.insert(*v) {
                        dup.get_or_insert(*v);
                    }
                }
            }
        });
        if let Some(v) = dup {
            return Err(Error::DuplicateTarget(p.vars.get(v).cloned().unwrap_or_default()));
        }
        if star {
            p.mode = Mode::Nondeterministic;
        }
        p.renumber_sites();
        Ok(p)
    }

    pub fn walk_exprs(&self, f: &mut impl FnMut(&BernExpr)) {
        fn go(stmts: &[BernStmt], f: &mut impl FnMut(&BernExpr)) {
            for s in stmts {
                for e in s.exprs() {
                    e.visit(f);
                }
                if let BernStmt::If(_, a, b) = s {
                    go(a, f);
                    go(b, f);
                }
            }
        }
        go(&self.body, f);
    }

    pub fn walk_exprs_mut(&mut self, f: &mut impl FnMut(&mut BernExpr)) {
        walk_exprs_mut(&mut self.body, f);
    }

    /// Renumbers flip sites `0, 1, …` in textual order and returns the map
    /// from old to new site ids.
    pub fn renumber_sites(&mut self) -> BTreeMap<usize, usize> {
        let mut map = BTreeMap::new();
        let mut next = 0;
        self.walk_exprs_mut(&mut |e| {
            if let BernExpr::Flip { site, .. } = e {
                map.insert(*site, next);
                *site = next;
                next += 1;
            }
        });
        map
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    /// Flip sites with their parameters, in site order.
    pub fn flips(&self) -> Vec<(usize, Param)> {
        let mut out = Vec::new();
        self.walk_exprs(&mut |e| {
            if let BernExpr::Flip { site, param } = e {
                out.push((*site, param.clone()));
            }
        });
        out.sort_by_key(|(s, _)| *s);
        out
    }

    pub fn num_sites(&self) -> usize {
        self.flips().len()
    }

    /// Numeric parameter of every site; symbolic ones are an error.
    pub fn thetas(&self) -> Result<BTreeMap<usize, Prob>> {
        self.flips()
            .into_iter()
            .map(|(s, p)| match p {
                Param::Value(v) => Ok((s, v)),
                Param::Symbol(name) => Err(Error::UnboundParameter(s, name)),
            })
            .collect()
    }

    /// Substitutes values for sites present in `values`.
    pub fn with_params(&self, values: &BTreeMap<usize, Prob>) -> BernProgram {
        let mut p = self.clone();
        p.walk_exprs_mut(&mut |e| {
            if let BernExpr::Flip { site, param } = e {
                if let Some(v) = values.get(site) {
                    *param = Param::Value(v.clone());
                }
            }
        });
        p
    }

    /// Number of statements, counting nested ones.
    pub fn stmt_count(&self) -> usize {
        let mut n = 0;
        walk_stmts(&self.body, &mut |_, _| n += 1);
        n
    }

    /// Point after the last top-level statement.
    pub fn end_point(&self) -> usize {
        let mut last = 0;
        let mut top: BTreeSet<*const BernStmt> = BTreeSet::new();
        for s in &self.body {
            top.insert(s as *const _);
        }
        walk_stmts(&self.body, &mut |id, s| {
            if top.contains(&(s as *const _)) {
                last = id;
            }
        });
        last
    }

    /// Resolves `entry`, `end` or a statement number.
    pub fn point(&self, label: &str) -> Result<usize> {
        match label.trim() {
            "entry" => Ok(0),
            "end" => Ok(self.end_point()),
            other => match other.parse::<usize>() {
                Ok(k) if k <= self.stmt_count() => Ok(k),
                _ => Err(Error::UnknownPoint(other.to_string())),
            },
        }
    }
}
