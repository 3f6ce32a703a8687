//! Seeded random programs, predicates and queries for property suites.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::bern::{BernExpr, BernProgram, BernStmt, Param};
use crate::concrete::{CmpOp, ConcreteProgram, Cond, IntExpr, Stmt, StmtKind, VarDecl};
use crate::predicates::{Predicate, PredicateList};
use crate::rational::{ratio, Prob};

pub type Rng8 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng8 {
    rand::SeedableRng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy)]
pub struct GenParams {
    pub max_vars: usize,
    /// Largest declared range size.
    pub max_range: i64,
    pub max_stmts: usize,
    pub max_preds: usize,
    pub draws: bool,
    pub observes: bool,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams { max_vars: 3, max_range: 8, max_stmts: 6, max_preds: 3, draws: false, observes: false }
    }
}

pub fn decls(r: &mut Rng8, g: &GenParams) -> Vec<VarDecl> {
    let n = r.gen_range(1..=g.max_vars);
    (0..n)
        .map(|i| {
            let size = r.gen_range(2..=g.max_range);
            let lo = r.gen_range(-size..=0);
            VarDecl { name: ["x", "y", "z", "w"].get(i).map_or_else(|| format!("v{i}"), |s| s.to_string()), lo, hi: lo + size }
        })
        .collect()
}

fn constant_in(r: &mut Rng8, d: &VarDecl) -> i64 {
    r.gen_range(d.lo..d.hi)
}

pub fn int_expr(r: &mut Rng8, decls: &[VarDecl], target: usize) -> IntExpr {
    let v = IntExpr::Var(r.gen_range(0..decls.len()));
    match r.gen_range(0..6) {
        0 => IntExpr::Const(constant_in(r, &decls[target])),
        1 => IntExpr::Add(Box::new(IntExpr::Var(target)), Box::new(IntExpr::Const(r.gen_range(-2..=2)))),
        2 => IntExpr::Sub(Box::new(IntExpr::Const(r.gen_range(0..=2))), Box::new(v)),
        3 => IntExpr::Add(Box::new(v), Box::new(IntExpr::Var(r.gen_range(0..decls.len())))),
        4 => IntExpr::Scale(r.gen_range(-2..=2), Box::new(v)),
        _ => v,
    }
}

pub fn atom(r: &mut Rng8, decls: &[VarDecl]) -> Cond {
    let i = r.gen_range(0..decls.len());
    let op = *[CmpOp::Lt, CmpOp::Le, CmpOp::Eq, CmpOp::Ne, CmpOp::Gt, CmpOp::Ge].choose(r).expect("ops");
    let lhs = if decls.len() > 1 && r.gen_bool(0.3) {
        let j = (i + r.gen_range(1..decls.len())) % decls.len();
        IntExpr::Add(Box::new(IntExpr::Var(i)), Box::new(IntExpr::Var(j)))
    } else {
        IntExpr::Var(i)
    };
    let k = r.gen_range(decls[i].lo - 1..=decls[i].hi);
    Cond::cmp(op, lhs, IntExpr::Const(k))
}

pub fn cond(r: &mut Rng8, decls: &[VarDecl], depth: usize) -> Cond {
    match if depth == 0 { 0 } else { r.gen_range(0..5) } {
        0 | 1 => atom(r, decls),
        2 => Cond::not(cond(r, decls, depth - 1)),
        3 => Cond::and(cond(r, decls, depth - 1), cond(r, decls, depth - 1)),
        _ => Cond::or(cond(r, decls, depth - 1), cond(r, decls, depth - 1)),
    }
}

fn concrete_block(r: &mut Rng8, decls: &[VarDecl], g: &GenParams, budget: &mut usize, depth: usize) -> Vec<Stmt> {
    let mut out = Vec::new();
    let len = r.gen_range(1..=3);
    for _ in 0..len {
        if *budget == 0 {
            break;
        }
        *budget -= 1;
        let x = r.gen_range(0..decls.len());
        let kind = match r.gen_range(0..10) {
            0..=2 if depth < 2 && *budget > 0 => {
                let c = cond(r, decls, 1);
                let a = concrete_block(r, decls, g, budget, depth + 1);
                let b = if r.gen_bool(0.7) { concrete_block(r, decls, g, budget, depth + 1) } else { Vec::new() };
                StmtKind::If(c, a, b)
            }
            3 if g.observes => StmtKind::Observe(cond(r, decls, 1)),
            4 | 5 if g.draws => {
                let lo = r.gen_range(decls[x].lo..decls[x].hi);
                StmtKind::Uniform(x, lo, r.gen_range(lo + 1..=decls[x].hi))
            }
            _ => StmtKind::Assign(x, int_expr(r, decls, x)),
        };
        out.push(Stmt::new(kind));
    }
    out
}

pub fn concrete_program(r: &mut Rng8, g: &GenParams) -> ConcreteProgram {
    let decls = decls(r, g);
    let mut budget = r.gen_range(1..=g.max_stmts);
    let mut body = Vec::new();
    while budget > 0 {
        body.extend(concrete_block(r, &decls, g, &mut budget, 0));
    }
    ConcreteProgram::new(decls, body)
}

/// A single assignment or draw.
pub fn single_statement(r: &mut Rng8, g: &GenParams) -> ConcreteProgram {
    let decls = decls(r, g);
    let x = r.gen_range(0..decls.len());
    let kind = if g.draws && r.gen_bool(0.3) {
        let lo = r.gen_range(decls[x].lo..decls[x].hi);
        StmtKind::Uniform(x, lo, r.gen_range(lo + 1..=decls[x].hi))
    } else {
        StmtKind::Assign(x, int_expr(r, &decls, x))
    };
    ConcreteProgram::new(decls, vec![Stmt::new(kind)])
}

/// Up to `max_preds` distinct atomic predicates, labelled by their text.
pub fn predicates(r: &mut Rng8, decls: &[VarDecl], max_preds: usize) -> PredicateList {
    let n = r.gen_range(1..=max_preds);
    let mut preds: Vec<Predicate> = Vec::new();
    for _ in 0..4 * n {
        if preds.len() == n {
            break;
        }
        let c = atom(r, decls);
        let label: String = c.show(decls).to_string().chars().filter(|ch| !ch.is_whitespace()).collect();
        if preds.iter().all(|p| p.label != label) {
            preds.push(Predicate { label, cond: c });
        }
    }
    PredicateList::new(preds).expect("bounded predicate count")
}

pub fn theta(r: &mut Rng8, extremes: bool) -> Prob {
    let pool: &[(i64, i64)] = if extremes {
        &[(0, 1), (1, 4), (1, 3), (1, 2), (2, 3), (1, 1)]
    } else {
        &[(1, 4), (1, 3), (1, 2), (2, 3), (3, 4)]
    };
    let &(n, d) = pool.choose(r).expect("pool");
    ratio(n, d)
}

/// Replaces every flip parameter by a random value.
pub fn randomize_thetas(r: &mut Rng8, p: &BernProgram, extremes: bool) -> BernProgram {
    let mut q = p.clone();
    q.walk_exprs_mut(&mut |e| {
        if let BernExpr::Flip { param, .. } = e {
            *param = Param::Value(theta(r, extremes));
        }
    });
    q
}

fn bern_expr(r: &mut Rng8, n: usize, depth: usize, flips: &mut usize) -> BernExpr {
    let leaf = depth == 0 || r.gen_bool(0.35);
    if leaf {
        return match r.gen_range(0..6) {
            0 if *flips > 0 => {
                *flips -= 1;
                BernExpr::flip(0, Param::Value(theta(r, true)))
            }
            1 => BernExpr::Const(r.gen_bool(0.5)),
            _ => BernExpr::Var(r.gen_range(0..n)),
        };
    }
    let a = bern_expr(r, n, depth - 1, flips);
    match r.gen_range(0..5) {
        0 => BernExpr::Not(Box::new(a)),
        1 => BernExpr::And(Box::new(a), Box::new(bern_expr(r, n, depth - 1, flips))),
        2 => BernExpr::Or(Box::new(a), Box::new(bern_expr(r, n, depth - 1, flips))),
        3 => BernExpr::Iff(Box::new(a), Box::new(bern_expr(r, n, depth - 1, flips))),
        _ => BernExpr::Implies(Box::new(a), Box::new(bern_expr(r, n, depth - 1, flips))),
    }
}

fn bern_block(r: &mut Rng8, n: usize, budget: &mut usize, flips: &mut usize, depth: usize, observes: bool) -> Vec<BernStmt> {
    let mut out = Vec::new();
    for _ in 0..r.gen_range(1..=3) {
        if *budget == 0 {
            break;
        }
        *budget -= 1;
        out.push(match r.gen_range(0..10) {
            0 | 1 if depth < 2 => {
                let g = bern_expr(r, n, 1, flips);
                BernStmt::If(g, bern_block(r, n, budget, flips, depth + 1, observes), bern_block(r, n, budget, flips, depth + 1, observes))
            }
            2 if observes => BernStmt::Observe(bern_expr(r, n, 2, flips)),
            _ => {
                let mut targets: Vec<usize> = (0..n).collect();
                targets.shuffle(r);
                targets.truncate(r.gen_range(1..=n));
                BernStmt::Assign(targets.into_iter().map(|v| (v, bern_expr(r, n, 2, flips))).collect())
            }
        });
    }
    out
}

/// A BERN program over `n` variables with at most `max_flips` sites.
pub fn bern_program(r: &mut Rng8, n: usize, max_stmts: usize, max_flips: usize, observes: bool) -> BernProgram {
    let vars: Vec<String> = (0..n).map(|i| format!("b{i}")).collect();
    let mut budget = r.gen_range(1..=max_stmts);
    let mut flips = max_flips;
    let mut body = Vec::new();
    while budget > 0 {
        body.extend(bern_block(r, n, &mut budget, &mut flips, 0, observes));
    }
    BernProgram::new(vars, body).expect("generated program is well formed")
}

/// A BERN program over the predicate variables of `preds`.
pub fn bern_over(r: &mut Rng8, preds: &PredicateList, max_stmts: usize, max_flips: usize) -> BernProgram {
    let mut p = bern_program(r, preds.len(), max_stmts, max_flips, false);
    p.vars = preds.iter().map(|p| p.var_name()).collect();
    p
}
