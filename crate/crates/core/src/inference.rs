//! Symbolic inference: reachable-state knowledge bases over a decision
//! diagram, with flips as weighted free variables.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use serde::Serialize;

use crate::bern::{BernExpr, BernProgram, BernState, BernStmt, Param};
use crate::error::{Error, Result};
use crate::logic::{wmc, Bdd, BddManager, BoolFormula, VarId, VarKind, WeightMap};
use crate::rational::{self, one, ratio, Prob};

/// Decision-diagram universe for one program.
///
/// Each program variable `v` gets three diagram variables placed next to
/// each other: a copy of its input value, its current value and a primed
/// value used during assignments. Flip variables follow, by site.
pub struct SymbolicEngine {
    pub mgr: BddManager,
    input: Vec<VarId>,
    current: Vec<VarId>,
    primed: Vec<VarId>,
    flips: BTreeMap<usize, VarId>,
    params: BTreeMap<usize, Param>,
}

impl SymbolicEngine {
    pub fn new(p: &BernProgram) -> Self {
        let mut mgr = BddManager::new();
        let (mut input, mut current, mut primed) = (Vec::new(), Vec::new(), Vec::new());
        for name in &p.vars {
            input.push(mgr.add_var(VarKind::Auxiliary, format!("in:{name}")));
            current.push(mgr.add_var(VarKind::Predicate, name.clone()));
            primed.push(mgr.add_var(VarKind::Auxiliary, format!("{name}'")));
        }
        let mut flips = BTreeMap::new();
        let mut params = BTreeMap::new();
        for (site, param) in p.flips() {
            flips.insert(site, mgr.add_var(VarKind::Flip, format!("flip_{site}")));
            params.insert(site, param);
        }
        SymbolicEngine { mgr, input, current, primed, flips, params }
    }

    pub fn state_var(&self, i: usize) -> VarId {
        self.current[i]
    }

    pub fn state_vars(&self) -> &[VarId] {
        &self.current
    }

    pub fn flip_var(&self, site: usize) -> Option<VarId> {
        self.flips.get(&site).copied()
    }

    /// Builds a formula whose `VarId(i)` refers to program variable `i`.
    pub fn build_state_formula(&mut self, f: &BoolFormula) -> Result<Bdd> {
        let current = self.current.clone();
        for v in f.vars() {
            if v.index() >= current.len() {
                return Err(Error::UnknownVariable(format!("v{}", v.0)));
            }
        }
        let mapped = f.map_vars(&|v| current[v.index()]);
        self.mgr.build(&mapped)
    }

    fn expr(&mut self, e: &BernExpr) -> Result<Bdd> {
        let current = self.current.clone();
        let flips = self.flips.clone();
        let f = e.to_formula(&|v| current[v], &|site| {
            flips.get(&site).copied().ok_or_else(|| Error::UnknownVariable(format!("flip_{site}")))
        })?;
        self.mgr.build(&f)
    }

    /// Initial knowledge base: `init` over the current variables, with each
    /// current variable tied to its input copy.
    pub fn initial(&mut self, init: &BoolFormula) -> Result<Bdd> {
        let mut d = self.build_state_formula(init)?;
        for i in 0..self.current.len() {
            let (a, b) = (self.mgr.var_bdd(self.input[i])?, self.mgr.var_bdd(self.current[i])?);
            let tie = self.mgr.iff(a, b)?;
            d = self.mgr.and(d, tie)?;
        }
        Ok(d)
    }

    /// Image of `delta` under one statement.
    pub fn transfer(&mut self, delta: Bdd, stmt: &BernStmt) -> Result<Bdd> {
        let mut points = Vec::new();
        self.transfer_block(delta, std::slice::from_ref(stmt), &mut 0, &mut points)
    }

    fn assign(&mut self, delta: Bdd, items: &[(usize, BernExpr)]) -> Result<Bdd> {
        if items.is_empty() {
            return Ok(delta);
        }
        let mut rel = delta;
        for (v, e) in items {
            let rhs = self.expr(e)?;
            let target = self.mgr.var_bdd(self.primed[*v])?;
            let link = self.mgr.iff(target, rhs)?;
            rel = self.mgr.and(rel, link)?;
        }
        let old: Vec<VarId> = items.iter().map(|(v, _)| self.current[*v]).collect();
        let projected = self.mgr.exists(&old, rel)?;
        let back: BTreeMap<VarId, VarId> = items.iter().map(|(v, _)| (self.primed[*v], self.current[*v])).collect();
        self.mgr.rename(projected, &back)
    }

    fn transfer_block(&mut self, delta: Bdd, stmts: &[BernStmt], next: &mut usize, points: &mut Vec<Bdd>) -> Result<Bdd> {
        let mut d = delta;
        for s in stmts {
            *next += 1;
            let id = *next;
            d = match s {
                BernStmt::Assign(items) => self.assign(d, items)?,
                BernStmt::Observe(e) | BernStmt::Assume(e) => {
                    let g = self.expr(e)?;
                    self.mgr.and(d, g)?
                }
                BernStmt::If(g, a, b) => {
                    let g = self.expr(g)?;
                    let ng = self.mgr.not(g)?;
                    let (yes, no) = (self.mgr.and(d, g)?, self.mgr.and(d, ng)?);
                    let da = self.transfer_block(yes, a, next, points)?;
                    let db = self.transfer_block(no, b, next, points)?;
                    self.mgr.or(da, db)?
                }
            };
            if points.len() <= id {
                points.resize(id + 1, self.mgr.f());
            }
            points[id] = d;
        }
        Ok(d)
    }

    fn weights(&self, unweighted_flips: bool) -> Result<WeightMap> {
        let mut w = WeightMap::new();
        let half = ratio(1, 2);
        for i in 0..self.current.len() {
            w.set(self.input[i], half.clone(), half.clone());
            w.set(self.current[i], one(), one());
        }
        for (site, v) in &self.flips {
            match (&self.params[site], unweighted_flips) {
                (_, true) => w.set(*v, half.clone(), half.clone()),
                (Param::Value(theta), false) => w.set(*v, theta.clone(), one() - theta),
                (Param::Symbol(name), false) => return Err(Error::UnboundParameter(*site, name.clone())),
            }
        }
        Ok(w)
    }

    /// Projects `d` onto the current variables.
    pub fn project_state(&mut self, d: Bdd) -> Result<Bdd> {
        let hidden: Vec<VarId> = self.input.iter().chain(self.flips.values()).copied().collect();
        self.mgr.exists(&hidden, d)
    }
}

/// Knowledge bases at every program point, indexed as in
/// [`crate::bern::interp_exact_points`].
pub struct SymbolicRun {
    pub engine: SymbolicEngine,
    pub points: Vec<Bdd>,
    pub initial: Bdd,
    end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryResult {
    pub point: String,
    pub event: String,
    #[serde(skip)]
    pub probability: Prob,
    #[serde(skip)]
    pub survival: Prob,
}

impl QueryResult {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "point": self.point,
            "event": self.event,
            "numerator": rational::json_int(self.probability.numer()),
            "denominator": rational::json_int(self.probability.denom()),
            "survival_numerator": rational::json_int(self.survival.numer()),
            "survival_denominator": rational::json_int(self.survival.denom()),
        })
    }
}

/// Model checks `p` from the uniform distribution over the models of `init`
/// (a formula over program variable indices).
pub fn run_symbolic(p: &BernProgram, init: &BoolFormula) -> Result<SymbolicRun> {
    let p = starify(p);
    let mut engine = SymbolicEngine::new(&p);
    let initial = engine.initial(init)?;
    let mut points = vec![initial];
    engine.transfer_block(initial, &p.body, &mut 0, &mut points)?;
    points.resize(p.stmt_count() + 1, engine.mgr.f());
    Ok(SymbolicRun { engine, points, initial, end: p.end_point() })
}

/// Replaces `*` and `choose` by unweighted flip sites so non-deterministic
/// programs can be model checked with the same transfer functions.
fn starify(p: &BernProgram) -> BernProgram {
    let mut q = p.clone();
    let mut next = p.flips().iter().map(|(s, _)| s + 1).max().unwrap_or(0);
    q.walk_exprs_mut(&mut |e| {
        if let BernExpr::Choose(a, b) = e {
            let (a, b) = ((**a).clone(), (**b).clone());
            *e = crate::bern::desugar_choose(a, b, BernExpr::Star);
        }
    });
    q.walk_exprs_mut(&mut |e| {
        if matches!(e, BernExpr::Star) {
            *e = BernExpr::Flip { site: next, param: Param::Symbol("*".into()) };
            next += 1;
        }
    });
    q
}

impl SymbolicRun {
    pub fn end(&self) -> usize {
        self.end
    }

    fn point_bdd(&self, point: usize) -> Result<Bdd> {
        self.points.get(point).copied().ok_or_else(|| Error::UnknownPoint(point.to_string()))
    }

    fn masses(&mut self, event: &BoolFormula, point: usize) -> Result<(Prob, Prob, Prob)> {
        let d = self.point_bdd(point)?;
        let e = self.engine.build_state_formula(event)?;
        let de = self.engine.mgr.and(d, e)?;
        let w = self.engine.weights(false)?;
        let m = &self.engine.mgr;
        let start = wmc(m, self.initial, &w)?;
        if start.is_zero() {
            return Err(Error::ConditioningOnImpossible);
        }
        Ok((wmc(m, de, &w)?, wmc(m, d, &w)?, start))
    }

    /// `Pr(event | reaching point)`.
    pub fn query(&mut self, event: &BoolFormula, point: usize) -> Result<QueryResult> {
        let (num, reach, start) = self.masses(event, point)?;
        if reach.is_zero() {
            return Err(Error::ConditioningOnImpossible);
        }
        Ok(self.result(event, point, num / &reach, reach / start))
    }

    /// Mass of `event` at `point` relative to the initial mass.
    pub fn query_unnormalized(&mut self, event: &BoolFormula, point: usize) -> Result<QueryResult> {
        let (num, reach, start) = self.masses(event, point)?;
        Ok(self.result(event, point, num / &start, reach / start))
    }

    fn result(&self, event: &BoolFormula, point: usize, probability: Prob, survival: Prob) -> QueryResult {
        let names: Vec<String> = self.engine.current.iter().map(|v| self.engine.mgr.var(*v).label.clone()).collect();
        let label = move |v: VarId| names.get(v.index()).cloned().unwrap_or_else(|| format!("v{}", v.0));
        let event = event.display_with(&label).to_string();
        let point = if point == self.end { "end".to_string() } else if point == 0 { "entry".into() } else { point.to_string() };
        QueryResult { point, event, probability, survival }
    }

    /// States reachable at `point`, ignoring weights.
    pub fn reachable(&mut self, point: usize) -> Result<BTreeSet<BernState>> {
        let d = self.point_bdd(point)?;
        let s = self.engine.project_state(d)?;
        let vars = self.engine.current.clone();
        Ok(self.engine.mgr.enumerate_models(s, &vars)?.into_iter().collect())
    }
}

/// One-shot query.
pub fn query(p: &BernProgram, event: &BoolFormula, point: usize, init: &BoolFormula) -> Result<QueryResult> {
    run_symbolic(p, init)?.query(event, point)
}
