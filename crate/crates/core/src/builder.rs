//! Construction of Boolean and BERN abstractions from concrete programs.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::json;

use crate::bern::{walk_stmts, BernExpr, BernProgram, BernStmt, Mode, Param};
use crate::concrete::{CmpOp, ConcreteProgram, Cond, IntExpr, Stmt, StmtKind, VarDecl, VarIdx};
use crate::error::{Error, Result};
use crate::logic::{Bdd, BddManager, BoolFormula, VarId, VarKind};
use crate::predicates::{cube_formula, feasible_minterms, strongest_implied, AbstractState, PredicateList};
use crate::rational::{self, ratio, Prob};
use crate::theory::{wp_subst, TheoryContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvariantStyle {
    None,
    Observe,
    Structural,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamPolicy {
    /// Named parameters `theta0, theta1, …` in site order.
    Symbolic,
    Fixed(Prob),
    /// Parameters estimated from the concrete program.
    Fitted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractionConfig {
    pub mode: Mode,
    pub invariants: InvariantStyle,
    pub params: ParamPolicy,
}

impl AbstractionConfig {
    pub fn nondeterministic() -> Self {
        AbstractionConfig { mode: Mode::Nondeterministic, invariants: InvariantStyle::Observe, params: ParamPolicy::Symbolic }
    }

    pub fn probabilistic(params: ParamPolicy) -> Self {
        AbstractionConfig { mode: Mode::Probabilistic, invariants: InvariantStyle::Structural, params }
    }

    pub fn with_invariants(mut self, style: InvariantStyle) -> Self {
        self.invariants = style;
        self
    }

    fn validate(&self) -> Result<()> {
        match (self.mode, self.invariants, &self.params) {
            (Mode::Nondeterministic, InvariantStyle::Structural, _) => {
                Err(Error::Config("structural invariants need probabilistic mode".into()))
            }
            (Mode::Nondeterministic, _, ParamPolicy::Fitted) => Err(Error::Config("fitted parameters need probabilistic mode".into())),
            (_, _, ParamPolicy::Fixed(v)) if !rational::is_probability(v) => Err(Error::ParameterRange(rational::format(v))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteRole {
    Branch,
    Assignment,
    Draw,
}

impl SiteRole {
    pub fn name(self) -> &'static str {
        match self {
            SiteRole::Branch => "branch",
            SiteRole::Assignment => "assignment",
            SiteRole::Draw => "draw",
        }
    }
}

/// Where a flip came from and the abstract situation in which it decides.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipSite {
    pub site: usize,
    /// Concrete statement id and source line.
    pub stmt: usize,
    pub line: usize,
    /// Predicate being updated; `None` for branch guards.
    pub pred: Option<usize>,
    pub role: SiteRole,
    pub theta: Param,
    /// Pre-state minterms where the flip is consulted.
    pub region: BTreeSet<AbstractState>,
    /// Post-state values of predicates updated before this one.
    pub post: Vec<(usize, bool)>,
}

impl FlipSite {
    /// Whether a pre-state / post-state pair falls in the fitting context.
    pub fn applies(&self, pre: &[bool], post: &[bool]) -> bool {
        self.region.contains(pre) && self.post.iter().all(|&(p, v)| post[p] == v)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlipSiteTable {
    pub sites: Vec<FlipSite>,
}

impl FlipSiteTable {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn get(&self, site: usize) -> Option<&FlipSite> {
        self.sites.iter().find(|s| s.site == site)
    }

    pub fn to_json(&self, preds: &PredicateList) -> serde_json::Value {
        let labels: Vec<String> = preds.iter().map(|p| p.var_name()).collect();
        let label = |v: VarId| labels[v.index()].clone();
        let rows: Vec<_> = self
            .sites
            .iter()
            .map(|s| {
                let region = BoolFormula::disj(s.region.iter().map(|m| cube_formula(m)));
                json!({
                    "site": s.site,
                    "stmt": s.stmt,
                    "line": s.line,
                    "role": s.role.name(),
                    "pred": s.pred.map(|p| labels[p].clone()),
                    "theta": match &s.theta {
                        Param::Value(v) => json!(rational::format(v)),
                        Param::Symbol(n) => json!(n),
                    },
                    "region": region.display_with(&label).to_string(),
                    "post": s.post.iter().map(|(p, v)| json!({"pred": labels[*p], "value": v})).collect::<Vec<_>>(),
                })
            })
            .collect();
        json!(rows)
    }
}

#[derive(Debug, Clone)]
pub struct Abstraction {
    pub program: BernProgram,
    pub sites: FlipSiteTable,
    /// The invariant over predicate variables `VarId(i)`.
    pub invariant: BoolFormula,
    pub config: AbstractionConfig,
}

/// Possible post values of each affected predicate, per feasible pre-state.
struct PostValues {
    affected: Vec<usize>,
    rows: Vec<(AbstractState, Vec<(bool, bool)>)>,
}

struct Origin {
    stmt: usize,
    line: usize,
    role: SiteRole,
}

pub struct Builder<'a> {
    ctx: &'a TheoryContext,
    preds: &'a PredicateList,
    config: AbstractionConfig,
    mgr: BddManager,
    inv: Bdd,
    feasible: BTreeSet<AbstractState>,
    sites: BTreeMap<usize, FlipSite>,
    next_site: usize,
    leaked: BTreeSet<usize>,
}

impl<'a> Builder<'a> {
    pub fn new(ctx: &'a TheoryContext, preds: &'a PredicateList, config: AbstractionConfig) -> Result<Self> {
        config.validate()?;
        let mut mgr = BddManager::with_vars(preds.iter().map(|p| (VarKind::Predicate, p.var_name())));
        let feasible: BTreeSet<AbstractState> = feasible_minterms(ctx, preds)?.into_iter().collect();
        let inv_f = BoolFormula::disj(feasible.iter().map(|m| cube_formula(m)));
        let inv = mgr.build(&inv_f)?;
        Ok(Builder { ctx, preds, config, mgr, inv, feasible, sites: BTreeMap::new(), next_site: 0, leaked: BTreeSet::new() })
    }

    pub fn invariant(&self) -> Result<BoolFormula> {
        self.mgr.to_formula(self.inv)
    }

    fn minterms_bdd(&mut self, ms: &BTreeSet<AbstractState>) -> Result<Bdd> {
        let f = BoolFormula::disj(ms.iter().map(|m| cube_formula(m)));
        self.mgr.build(&f)
    }

    /// `d` simplified under `care`, read back as a formula.
    fn simp(&mut self, d: Bdd, care: Bdd) -> Result<BoolFormula> {
        let dc = self.mgr.and(d, care)?;
        if dc.is_false() {
            return Ok(BoolFormula::FALSE);
        }
        if dc == care {
            return Ok(BoolFormula::TRUE);
        }
        let s = self.mgr.simplify_under(d, care)?;
        self.mgr.to_formula(s)
    }

    fn simp_formula(&mut self, f: &BoolFormula) -> Result<BoolFormula> {
        let d = self.mgr.build(f)?;
        self.simp(d, self.inv)
    }

    fn expr(f: &BoolFormula) -> BernExpr {
        BernExpr::from_formula(f, &|v| BernExpr::Var(v.index()))
    }

    fn fresh_flip(&mut self, origin: &Origin, pred: Option<usize>, region: BTreeSet<AbstractState>, post: Vec<(usize, bool)>) -> BernExpr {
        let site = self.next_site;
        self.next_site += 1;
        let theta = match &self.config.params {
            ParamPolicy::Fixed(v) => Param::Value(v.clone()),
            _ => Param::Symbol(format!("theta{site}")),
        };
        self.sites.insert(
            site,
            FlipSite { site, stmt: origin.stmt, line: origin.line, pred, role: origin.role, theta: theta.clone(), region, post },
        );
        BernExpr::flip(site, theta)
    }

    fn unknown(&mut self, origin: &Origin, pred: Option<usize>, region: BTreeSet<AbstractState>, post: Vec<(usize, bool)>) -> BernExpr {
        match self.config.mode {
            Mode::Nondeterministic => BernExpr::Star,
            Mode::Probabilistic => self.fresh_flip(origin, pred, region, post),
        }
    }

    fn block(&mut self, stmts: &[Stmt]) -> Result<Vec<BernStmt>> {
        let mut out = Vec::new();
        for s in stmts {
            out.extend(self.stmt(s)?);
        }
        Ok(out)
    }

    fn stmt(&mut self, s: &Stmt) -> Result<Vec<BernStmt>> {
        match &s.kind {
            StmtKind::If(c, a, b) => {
                let origin = Origin { stmt: s.id, line: s.line, role: SiteRole::Branch };
                let (guard, assume_t, assume_f) = self.branch(c, &origin)?;
                let (mut ta, mut tb) = (Vec::new(), Vec::new());
                if let Some(g) = assume_t {
                    ta.push(BernStmt::Assume(g));
                }
                if let Some(g) = assume_f {
                    tb.push(BernStmt::Assume(g));
                }
                ta.extend(self.block(a)?);
                tb.extend(self.block(b)?);
                Ok(vec![BernStmt::If(guard, ta, tb)])
            }
            StmtKind::Observe(c) => {
                let f = strongest_implied(self.ctx, self.preds, c)?;
                let e = Self::expr(&self.simp_formula(&f)?);
                Ok(vec![match self.config.mode {
                    Mode::Probabilistic => BernStmt::Observe(e),
                    Mode::Nondeterministic => BernStmt::Assume(e),
                }])
            }
            StmtKind::Assign(x, e) => {
                let origin = Origin { stmt: s.id, line: s.line, role: SiteRole::Assignment };
                let affected = self.affected(*x);
                let wps: Vec<Cond> = affected.iter().map(|&i| wp_subst(*x, e, &self.preds.get(i).cond)).collect();
                let d = &self.ctx.decls()[*x];
                let dom = Cond::and(
                    Cond::cmp(CmpOp::Ge, e.clone(), IntExpr::Const(d.lo)),
                    Cond::cmp(CmpOp::Lt, e.clone(), IntExpr::Const(d.hi)),
                );
                let post = self.post_values(self.ctx, affected, &wps, &dom)?;
                self.update(&post, &origin)
            }
            StmtKind::Uniform(x, lo, hi) => {
                let origin = Origin { stmt: s.id, line: s.line, role: SiteRole::Draw };
                let affected = self.affected(*x);
                let mut decls: Vec<VarDecl> = self.ctx.decls().to_vec();
                let fresh = decls.len();
                decls.push(VarDecl { name: format!("{}'", decls[*x].name), lo: *lo, hi: *hi });
                let ext = TheoryContext::with_cap(decls, self.ctx.cap());
                let draw = IntExpr::Var(fresh);
                let wps: Vec<Cond> = affected.iter().map(|&i| wp_subst(*x, &draw, &self.preds.get(i).cond)).collect();
                let post = self.post_values(&ext, affected, &wps, &Cond::Const(true))?;
                self.update(&post, &origin)
            }
        }
    }

    fn affected(&self, x: VarIdx) -> Vec<usize> {
        (0..self.preds.len()).filter(|&i| self.preds.get(i).cond.mentions(x)).collect()
    }

    /// Returns the guard and the assumptions opening each branch.
    fn branch(&mut self, c: &Cond, origin: &Origin) -> Result<(BernExpr, Option<BernExpr>, Option<BernExpr>)> {
        let pt = strongest_implied(self.ctx, self.preds, c)?;
        let pf = strongest_implied(self.ctx, self.preds, &Cond::not(c.clone()))?;
        let (st, sf) = (self.simp_formula(&pt)?, self.simp_formula(&pf)?);
        match self.config.mode {
            Mode::Nondeterministic => Ok((BernExpr::Star, Some(Self::expr(&st)), Some(Self::expr(&sf)))),
            Mode::Probabilistic => {
                let (dt, df) = (self.mgr.build(&pt)?, self.mgr.build(&pf)?);
                let both = self.mgr.and(dt, df)?;
                let both = self.mgr.and(both, self.inv)?;
                if both.is_false() {
                    return Ok((Self::expr(&st), None, None));
                }
                let vars = self.preds.var_ids();
                let region: BTreeSet<AbstractState> = self.mgr.enumerate_models(both, &vars)?.into_iter().collect();
                let flip = self.fresh_flip(origin, None, region, Vec::new());
                let guard = BernExpr::or(BernExpr::not(Self::expr(&sf)), BernExpr::and(Self::expr(&st), flip));
                Ok((guard, None, None))
            }
        }
    }

    /// Possible post values per feasible pre-minterm, over pre-states
    /// satisfying `dom`. Minterms with no such state keep their values.
    fn post_values(&self, ctx: &TheoryContext, affected: Vec<usize>, wps: &[Cond], dom: &Cond) -> Result<PostValues> {
        let mut rows = Vec::new();
        for a in &self.feasible {
            let pre = Cond::and(self.preds.minterm_cond(a), dom.clone());
            if !ctx.satisfiable(&pre)? {
                let vals = affected.iter().map(|&p| (a[p], !a[p])).collect();
                rows.push((a.clone(), vals));
                continue;
            }
            let mut vals = Vec::with_capacity(wps.len());
            for wp in wps {
                let t = ctx.satisfiable(&Cond::and(pre.clone(), wp.clone()))?;
                let f = ctx.satisfiable(&Cond::and(pre.clone(), Cond::not(wp.clone())))?;
                vals.push((t, f));
            }
            rows.push((a.clone(), vals));
        }
        Ok(PostValues { affected, rows })
    }

    fn update(&mut self, post: &PostValues, origin: &Origin) -> Result<Vec<BernStmt>> {
        if post.affected.is_empty() {
            return Ok(vec![BernStmt::Assign(Vec::new())]);
        }
        if self.config.invariants == InvariantStyle::Structural && post.affected.len() > 1 {
            return self.structural(post, origin);
        }
        let mut items = Vec::new();
        let all: Vec<usize> = (0..post.rows.len()).collect();
        for j in 0..post.affected.len() {
            let e = self.update_expr(post, j, &all, &[], &[], &[], origin)?;
            items.push((post.affected[j], e));
        }
        let mut out = vec![BernStmt::Assign(items)];
        if self.config.invariants == InvariantStyle::Observe {
            let inv = Self::expr(&self.invariant()?);
            out.push(match self.config.mode {
                Mode::Probabilistic => BernStmt::Observe(inv),
                Mode::Nondeterministic => BernStmt::Assume(inv),
            });
        }
        Ok(out)
    }

    /// Update of affected predicate `j` over the reachable pre-states
    /// `rows`, where `allowed[r]` restricts the post values on row `r`.
    /// The pre-values in `known` are shared by all rows and never read.
    #[allow(clippy::too_many_arguments)]
    fn update_expr(
        &mut self,
        post: &PostValues,
        j: usize,
        rows: &[usize],
        allowed: &[(usize, bool, bool)],
        prefix: &[(usize, bool)],
        known: &[(usize, bool)],
        origin: &Origin,
    ) -> Result<BernExpr> {
        let allowed: BTreeMap<usize, (bool, bool)> = allowed.iter().map(|&(r, t, f)| (r, (t, f))).collect();
        let (mut forced_t, mut forced_f, mut open, mut reach) = (BTreeSet::new(), BTreeSet::new(), BTreeSet::new(), BTreeSet::new());
        for &r in rows {
            let (a, vals) = &post.rows[r];
            let (t, f) = allowed.get(&r).copied().unwrap_or(vals[j]);
            reach.insert(a.clone());
            match (t, f) {
                (true, false) => forced_t.insert(a.clone()),
                (false, true) => forced_f.insert(a.clone()),
                _ => open.insert(a.clone()),
            };
        }
        let cube: Vec<(VarId, bool)> = known.iter().map(|&(p, v)| (VarId(p as u32), v)).collect();
        let care = self.mgr.restrict_cube(self.inv, &cube)?;
        let dt = self.minterms_bdd(&forced_t)?;
        let dt = self.mgr.restrict_cube(dt, &cube)?;
        let t = self.simp(dt, care)?;
        if open.is_empty() {
            return Ok(Self::expr(&t));
        }
        let pred = post.affected[j];
        match self.config.mode {
            Mode::Probabilistic => {
                let mut not_f = forced_t.clone();
                not_f.extend(open.iter().cloned());
                let dnf = self.minterms_bdd(&not_f)?;
                let dnf = self.mgr.restrict_cube(dnf, &cube)?;
                let nf = self.simp(dnf, care)?;
                let flip = self.unknown(origin, Some(pred), open, prefix.to_vec());
                Ok(BernExpr::or(Self::expr(&t), BernExpr::and(Self::expr(&nf), flip)))
            }
            Mode::Nondeterministic => {
                let df = self.minterms_bdd(&forced_f)?;
                let df = self.mgr.restrict_cube(df, &cube)?;
                let f = self.simp(df, care)?;
                if t == BoolFormula::FALSE && f == BoolFormula::FALSE {
                    return Ok(BernExpr::Star);
                }
                Ok(BernExpr::choose(Self::expr(&t), Self::expr(&f)))
            }
        }
    }

    /// Update order: predicates implied by fewer of the others go first.
    fn update_order(&self, affected: &[usize]) -> Result<Vec<usize>> {
        let mut score = Vec::new();
        for (j, &p) in affected.iter().enumerate() {
            let mut n = 0;
            for &q in affected {
                if p != q {
                    let (cp, cq) = (&self.preds.get(p).cond, &self.preds.get(q).cond);
                    if self.ctx.entails(cp, cq)? && !self.ctx.entails(cq, cp)? {
                        n += 1;
                    }
                }
            }
            score.push((n, j));
        }
        score.sort();
        Ok(score.into_iter().map(|(_, j)| j).collect())
    }

    /// Sequential updates branching on already-updated predicates, so that
    /// every post-state combines per-predicate possible values and satisfies
    /// the invariant.
    fn structural(&mut self, post: &PostValues, origin: &Origin) -> Result<Vec<BernStmt>> {
        let order = self.update_order(&post.affected)?;
        let mut split: Vec<usize> = Vec::new();
        loop {
            self.leaked.clear();
            let before = self.next_site;
            let body = self.cases(post, &order, &split, 0, &[], origin)?;
            let leaked: Vec<usize> = self.leaked.iter().copied().filter(|p| !split.contains(p)).collect();
            if leaked.is_empty() {
                return Ok(body);
            }
            self.sites.retain(|&s, _| s < before);
            split.extend(leaked);
            split.sort();
        }
    }

    /// Case split on the pre-values of predicates in `split`.
    fn cases(
        &mut self,
        post: &PostValues,
        order: &[usize],
        split: &[usize],
        depth: usize,
        known: &[(usize, bool)],
        origin: &Origin,
    ) -> Result<Vec<BernStmt>> {
        if depth == split.len() {
            let rows: Vec<usize> =
                (0..post.rows.len()).filter(|&r| known.iter().all(|&(p, v)| post.rows[r].0[p] == v)).collect();
            if rows.is_empty() {
                return Ok(Vec::new());
            }
            return self.sequence(post, order, 0, &rows, &[], known, origin);
        }
        let p = split[depth];
        let mut kt = known.to_vec();
        kt.push((p, true));
        let mut kf = known.to_vec();
        kf.push((p, false));
        let a = self.cases(post, order, split, depth + 1, &kt, origin)?;
        let b = self.cases(post, order, split, depth + 1, &kf, origin)?;
        Ok(vec![BernStmt::If(BernExpr::Var(p), a, b)])
    }

    /// Whether post value `v` of order position `i` can be completed into a
    /// feasible post-state on row `r`, given a decided prefix.
    fn completable(&self, post: &PostValues, order: &[usize], r: usize, decided: &[bool]) -> bool {
        let (a, vals) = &post.rows[r];
        let mut state = a.clone();
        for (i, &v) in decided.iter().enumerate() {
            state[post.affected[order[i]]] = v;
        }
        fn go(b: &Builder, post: &PostValues, order: &[usize], vals: &[(bool, bool)], i: usize, state: &mut AbstractState) -> bool {
            if i == order.len() {
                return b.feasible.contains(state);
            }
            let (t, f) = vals[order[i]];
            for (ok, v) in [(t, true), (f, false)] {
                if ok {
                    state[post.affected[order[i]]] = v;
                    if go(b, post, order, vals, i + 1, state) {
                        return true;
                    }
                }
            }
            false
        }
        let i = decided.len();
        if decided.iter().enumerate().any(|(k, &v)| if v { !vals[order[k]].0 } else { !vals[order[k]].1 }) {
            return false;
        }
        go(self, post, order, vals, i, &mut state)
    }

    #[allow(clippy::too_many_arguments)]
    fn sequence(
        &mut self,
        post: &PostValues,
        order: &[usize],
        i: usize,
        rows: &[usize],
        decided: &[bool],
        known: &[(usize, bool)],
        origin: &Origin,
    ) -> Result<Vec<BernStmt>> {
        let j = order[i];
        let mut allowed = Vec::new();
        for &r in rows {
            let with = |v: bool| {
                let mut d = decided.to_vec();
                d.push(v);
                self.completable(post, order, r, &d)
            };
            allowed.push((r, with(true), with(false)));
        }
        let prefix: Vec<(usize, bool)> = decided.iter().enumerate().map(|(k, &v)| (post.affected[order[k]], v)).collect();
        let e = self.update_expr(post, j, rows, &allowed, &prefix, known, origin)?;
        for v in e.vars() {
            let updated = order[..i].iter().any(|&k| post.affected[k] == v);
            if updated && !known.iter().any(|k| k.0 == v) {
                self.leaked.insert(v);
            }
        }
        let pred = post.affected[j];
        let mut out = vec![BernStmt::Assign(vec![(pred, e)])];
        if i + 1 == order.len() {
            return Ok(out);
        }
        let sub = |v: bool, b: &mut Self| -> Result<(Vec<usize>, Vec<BernStmt>)> {
            let live: Vec<usize> = allowed.iter().filter(|&&(_, t, f)| if v { t } else { f }).map(|&(r, _, _)| r).collect();
            let mut d = decided.to_vec();
            d.push(v);
            if live.is_empty() {
                return Ok((live, Vec::new()));
            }
            let body = b.sequence(post, order, i + 1, &live, &d, known, origin)?;
            Ok((live, body))
        };
        let (live_t, then_b) = sub(true, self)?;
        let (live_f, else_b) = sub(false, self)?;
        if live_f.is_empty() {
            out.extend(then_b);
        } else if live_t.is_empty() {
            out.extend(else_b);
        } else if erase_sites(&then_b) == erase_sites(&else_b) {
            self.merge_sites(&then_b, &else_b, pred);
            out.extend(then_b);
        } else {
            out.push(BernStmt::If(BernExpr::Var(pred), then_b, else_b));
        }
        Ok(out)
    }

    /// Folds the flips of `drop` into the matching flips of `keep`, which
    /// no longer depend on the post value of `pred`.
    fn merge_sites(&mut self, keep: &[BernStmt], drop: &[BernStmt], pred: usize) {
        for (k, d) in sites_of(keep).into_iter().zip(sites_of(drop)) {
            if let Some(gone) = self.sites.remove(&d) {
                if let Some(s) = self.sites.get_mut(&k) {
                    s.region.extend(gone.region);
                    s.post.retain(|&(p, _)| p != pred);
                }
            }
        }
    }
}

fn sites_of(stmts: &[BernStmt]) -> Vec<usize> {
    let mut out = Vec::new();
    walk_stmts(stmts, &mut |_, s| {
        for e in s.exprs() {
            e.visit(&mut |x| {
                if let BernExpr::Flip { site, .. } = x {
                    out.push(*site);
                }
            });
        }
    });
    out
}

fn erase_sites(stmts: &[BernStmt]) -> Vec<BernStmt> {
    let mut p = BernProgram { vars: Vec::new(), body: stmts.to_vec(), mode: Mode::Probabilistic };
    p.walk_exprs_mut(&mut |e| {
        if let BernExpr::Flip { site, param } = e {
            *site = 0;
            *param = Param::Symbol(String::new());
        }
    });
    p.body
}

/// Default value used by the fixed parameter policy.
pub fn default_theta() -> Prob {
    ratio(1, 2)
}

/// Builds the abstraction of `p` under `preds`.
pub fn abstract_program(
    ctx: &TheoryContext,
    p: &ConcreteProgram,
    preds: &PredicateList,
    config: &AbstractionConfig,
) -> Result<Abstraction> {
    let mut b = Builder::new(ctx, preds, config.clone())?;
    let body = b.block(&p.body)?;
    let vars: Vec<String> = preds.iter().map(|p| p.var_name()).collect();
    let mut raw = BernProgram { vars: vars.clone(), body, mode: config.mode };
    let map = raw.renumber_sites();
    raw.walk_exprs_mut(&mut |e| {
        if let BernExpr::Flip { param: param @ Param::Symbol(_), site } = e {
            *param = Param::Symbol(format!("theta{site}"));
        }
    });
    let mut program = BernProgram::new(vars, raw.body)?;
    if program.mode != config.mode && program.num_sites() == 0 {
        program.mode = config.mode;
    }
    let mut sites = Vec::new();
    for (old, new) in &map {
        if let Some(mut s) = b.sites.remove(old) {
            s.site = *new;
            if let Param::Symbol(_) = s.theta {
                s.theta = Param::Symbol(format!("theta{new}"));
            }
            sites.push(s);
        }
    }
    sites.sort_by_key(|s| s.site);
    let mut abs = Abstraction { program, sites: FlipSiteTable { sites }, invariant: b.invariant()?, config: config.clone() };
    if config.params == ParamPolicy::Fitted {
        let input = crate::concrete::ConcreteDistribution::point(p.initial_state());
        crate::soundness::fit_parameters(ctx, p, preds, &mut abs, &input)?;
    }
    Ok(abs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bern::parse_bern_expr;
    use crate::concrete::parse_concrete;

    const STEP: &str = include_str!("../../../fixtures/step.cp");
    const STEP_PREDS: &str = include_str!("../../../fixtures/step.preds");
    const CHAIN: &str = include_str!("../../../fixtures/chain.cp");
    const CHAIN_PREDS: &str = include_str!("../../../fixtures/chain.preds");
    const SHIFT: &str = "var x in [-32, 32)\nx = x + 10\n";

    fn setup(src: &str, preds: &str) -> (ConcreteProgram, PredicateList, TheoryContext) {
        let p = parse_concrete(src).unwrap();
        let preds = PredicateList::parse(preds, &p.decls).unwrap();
        let ctx = TheoryContext::new(p.decls.clone());
        (p, preds, ctx)
    }

    /// Equivalence over feasible abstract states; expressions hold one flip.
    fn equiv_mod(abs: &Abstraction, a: &BernExpr, b: &str) -> bool {
        let b = parse_bern_expr(b, &abs.program).unwrap();
        let n = abs.program.vars.len();
        let mut m = BddManager::with_vars((0..=n).map(|i| (VarKind::Predicate, format!("v{i}"))));
        let to = |e: &BernExpr| e.to_formula(&|v| VarId(v as u32), &|_| Ok(VarId(n as u32))).unwrap();
        let inv = m.build(&abs.invariant).unwrap();
        let (x, y) = (m.build(&to(a)).unwrap(), m.build(&to(&b)).unwrap());
        m.and(x, inv).unwrap() == m.and(y, inv).unwrap()
    }

    #[test]
    fn nondeterministic_step() {
        let (p, preds, ctx) = setup(STEP, STEP_PREDS);
        let abs = abstract_program(&ctx, &p, &preds, &AbstractionConfig::nondeterministic()).unwrap();
        let BernStmt::If(BernExpr::Star, then_b, else_b) = &abs.program.body[0] else { panic!("{}", abs.program) };
        let BernStmt::Assume(g) = &then_b[0] else { panic!() };
        assert!(equiv_mod(&abs, g, "{x<3}"));
        let BernStmt::Assume(g) = &else_b[0] else { panic!() };
        assert!(equiv_mod(&abs, g, "!{x<-4}"));
        let BernStmt::Assign(items) = &then_b[1] else { panic!() };
        assert_eq!(items, &vec![(0, BernExpr::F), (1, BernExpr::T)]);
        let BernStmt::Assign(items) = &else_b[1] else { panic!() };
        let (BernExpr::Choose(t0, f0), BernExpr::Choose(t1, f1)) = (&items[0].1, &items[1].1) else { panic!() };
        assert!(equiv_mod(&abs, t0, "F") && equiv_mod(&abs, f0, "!{x<3} || !{x<-4}"));
        assert!(equiv_mod(&abs, t1, "{x<-4}") && equiv_mod(&abs, f1, "!{x<3}"));
        assert!(matches!(then_b[2], BernStmt::Assume(_)) && matches!(else_b[2], BernStmt::Assume(_)));
        assert!(abs.sites.is_empty());
    }

    #[test]
    fn probabilistic_branch_guard() {
        let (p, preds, ctx) = setup(STEP, STEP_PREDS);
        let cfg = AbstractionConfig::probabilistic(ParamPolicy::Symbolic).with_invariants(InvariantStyle::None);
        let abs = abstract_program(&ctx, &p, &preds, &cfg).unwrap();
        let BernStmt::If(g, _, b) = &abs.program.body[0] else { panic!() };
        assert_eq!(expr_text(&abs, g), "{x<-4} || {x<3} && flip(theta0)");
        let BernStmt::Assign(items) = &b[0] else { panic!() };
        assert!(equiv_mod(&abs, &items[0].1, "{x<-4} && {x<3} && flip(theta1)"));
        assert!(equiv_mod(&abs, &items[1].1, "{x<-4} || {x<3} && flip(theta2)"));
        let s = abs.sites.get(0).unwrap();
        assert_eq!((s.role, s.pred, s.stmt), (SiteRole::Branch, None, 0));
        assert_eq!(s.region, BTreeSet::from([vec![false, true]]));
        assert_eq!(abs.sites.len(), 3);
    }

    fn expr_text(abs: &Abstraction, e: &BernExpr) -> String {
        crate::bern::expr_to_string(e, &abs.program.vars)
    }

    #[test]
    fn trivial_guard() {
        let (p, preds, ctx) = setup("var x in [0, 4)\nif (x < 9) { x = 1 }", "x<2");
        let abs = abstract_program(&ctx, &p, &preds, &AbstractionConfig::nondeterministic()).unwrap();
        let BernStmt::If(_, a, b) = &abs.program.body[0] else { panic!() };
        assert_eq!((&a[0], &b[0]), (&BernStmt::Assume(BernExpr::T), &BernStmt::Assume(BernExpr::F)));
        let cfg = AbstractionConfig::probabilistic(ParamPolicy::Symbolic);
        let abs = abstract_program(&ctx, &p, &preds, &cfg).unwrap();
        let BernStmt::If(g, ..) = &abs.program.body[0] else { panic!() };
        assert_eq!(g, &BernExpr::T);
    }

    #[test]
    fn observe_style_shift() {
        let (p, preds, ctx) = setup(SHIFT, "x<-4\nx<3");
        let cfg = AbstractionConfig::probabilistic(ParamPolicy::Symbolic).with_invariants(InvariantStyle::Observe);
        let abs = abstract_program(&ctx, &p, &preds, &cfg).unwrap();
        assert_eq!(abs.program.body.len(), 2);
        let BernStmt::Assign(items) = &abs.program.body[0] else { panic!() };
        assert!(equiv_mod(&abs, &items[0].1, "{x<-4} && {x<3} && flip(theta0)"));
        assert!(equiv_mod(&abs, &items[1].1, "{x<-4} && {x<3} && flip(theta1)"));
        let BernStmt::Observe(inv) = &abs.program.body[1] else { panic!() };
        assert!(equiv_mod(&abs, inv, "{x<-4} => {x<3}"));
        let mut m = BddManager::with_vars([(VarKind::Predicate, "a"), (VarKind::Predicate, "b")]);
        let lhs = m.build(&abs.invariant).unwrap();
        let rhs = m.build(&BoolFormula::implies(BoolFormula::var(0), BoolFormula::var(1))).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn structural_shift() {
        let (p, preds, ctx) = setup(SHIFT, "x<-4\nx<3");
        let cfg = AbstractionConfig::probabilistic(ParamPolicy::Symbolic);
        let abs = abstract_program(&ctx, &p, &preds, &cfg).unwrap();
        let text = abs.program.to_string();
        assert_eq!(
            text,
            "bool {x<-4}\nbool {x<3}\n{x<3} = {x<-4} && flip(theta0)\nif ({x<3}) {\n  {x<-4} = {x<-4} && flip(theta1)\n} else {\n  {x<-4} = F\n}\n"
        );
        let s = abs.sites.get(1).unwrap();
        assert_eq!(s.post, vec![(1, true)]);
        let out = crate::bern::interp_nondet(&crate::soundness::lower(&abs.program), &crate::bern::all_states(2)).unwrap();
        assert!(out.iter().all(|s| !s[0] || s[1]));
    }

    #[test]
    fn single_predicate_structural_is_plain() {
        let (p, preds, ctx) = setup(SHIFT, "x<3");
        let abs = abstract_program(&ctx, &p, &preds, &AbstractionConfig::probabilistic(ParamPolicy::Symbolic)).unwrap();
        assert_eq!(abs.program.to_string(), "bool {x<3}\n{x<3} = {x<3} && flip(theta0)\n");
    }

    #[test]
    fn draws_and_untouched_predicates() {
        let (p, preds, ctx) = setup("var x in [0, 32)\nvar y in [0, 4)\nx = unif [0, 10)\ny = 1", "x<20\nx<5");
        let cfg = AbstractionConfig::probabilistic(ParamPolicy::Fixed(default_theta()));
        let abs = abstract_program(&ctx, &p, &preds, &cfg).unwrap();
        assert_eq!(abs.program.to_string(), "bool {x<20}\nbool {x<5}\n{x<20} = T\n{x<5} = flip(1/2)\nskip\n");
        let abs = abstract_program(&ctx, &p, &preds, &AbstractionConfig::nondeterministic()).unwrap();
        let BernStmt::Assign(items) = &abs.program.body[0] else { panic!() };
        assert_eq!(items, &vec![(0, BernExpr::T), (1, BernExpr::Star)]);
        assert_eq!(abs.program.body.len(), 3);
    }

    #[test]
    fn chain_fitting() {
        let (p, preds, ctx) = setup(CHAIN, CHAIN_PREDS);
        let abs = abstract_program(&ctx, &p, &preds, &AbstractionConfig::probabilistic(ParamPolicy::Fitted)).unwrap();
        let expected = include_str!("../../../fixtures/chain_fitted.bern");
        assert_eq!(abs.program, crate::bern::parse_bern(expected).unwrap());
        let roles: Vec<SiteRole> = abs.sites.sites.iter().map(|s| s.role).collect();
        assert_eq!(roles, vec![SiteRole::Draw; 5]);
        let json = abs.sites.to_json(&preds);
        assert_eq!(json[2]["theta"], "1/4");
        assert_eq!(json[2]["line"], 9);
    }

    #[test]
    fn empty_program() {
        let (p, preds, ctx) = setup("var x in [0, 4)\n", "x<2");
        let abs = abstract_program(&ctx, &p, &preds, &AbstractionConfig::nondeterministic()).unwrap();
        assert!(abs.program.body.is_empty());
    }

    #[test]
    fn rejects_bad_configs() {
        let (p, preds, ctx) = setup(STEP, STEP_PREDS);
        let cfg = AbstractionConfig::nondeterministic().with_invariants(InvariantStyle::Structural);
        assert!(matches!(abstract_program(&ctx, &p, &preds, &cfg), Err(Error::Config(_))));
        let cfg = AbstractionConfig::probabilistic(ParamPolicy::Fixed(ratio(3, 2)));
        assert!(matches!(abstract_program(&ctx, &p, &preds, &cfg), Err(Error::ParameterRange(_))));
    }
}
