//! Soundness checks, concretization distributions and parameter fitting.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

use crate::bern::{interp_exact, interp_nondet, AbstractDistribution, BernExpr, BernProgram, BernStmt, Mode, Param};
use crate::builder::{abstract_program, Abstraction, AbstractionConfig, ParamPolicy, SiteRole};
use crate::concrete::{
    eval_dist, eval_dist_probe, states_of, ConcreteDistribution, ConcreteProgram, ConcreteState, Cond, StmtKind,
};
use crate::error::{Error, Result};
use crate::inference::run_symbolic;
use crate::logic::{BddManager, BoolFormula, VarKind};
use crate::predicates::{alpha, cube_formula, gamma_lower, strongest_implied, weakest_sufficient, AbstractState, PredicateList};
use crate::rational::{self, int, one, ratio, zero, Prob};
use crate::theory::TheoryContext;

/// Replaces flips by their support: `*` for θ in (0,1) or symbolic,
/// constants for 0 and 1. `observe` becomes `assume`.
pub fn lower(p: &BernProgram) -> BernProgram {
    fn stmts(body: &[BernStmt]) -> Vec<BernStmt> {
        body.iter()
            .map(|s| match s {
                BernStmt::Assign(items) => BernStmt::Assign(items.iter().map(|(v, e)| (*v, expr(e))).collect()),
                BernStmt::If(g, a, b) => BernStmt::If(expr(g), stmts(a), stmts(b)),
                BernStmt::Observe(e) | BernStmt::Assume(e) => BernStmt::Assume(expr(e)),
            })
            .collect()
    }
    fn expr(e: &BernExpr) -> BernExpr {
        let mut out = e.clone();
        out.visit_mut(&mut |x| {
            if let BernExpr::Flip { param, .. } = x {
                *x = match param {
                    Param::Value(t) if t.is_zero() => BernExpr::F,
                    Param::Value(t) if t.is_one() => BernExpr::T,
                    _ => BernExpr::Star,
                };
            }
        });
        out
    }
    BernProgram { vars: p.vars.clone(), body: stmts(&p.body), mode: Mode::Nondeterministic }
}

fn bits(s: &[bool]) -> String {
    s.iter().map(|&b| if b { 'T' } else { 'F' }).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub z: ConcreteState,
    pub expected: AbstractState,
    pub got: Vec<AbstractState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub check: String,
    pub passed: bool,
    pub counterexamples: Vec<Counterexample>,
    pub stats: BTreeMap<String, Value>,
}

impl Report {
    fn new(check: &str) -> Self {
        Report { check: check.into(), passed: true, counterexamples: Vec::new(), stats: BTreeMap::new() }
    }

    fn stat(&mut self, key: &str, v: impl Into<Value>) {
        self.stats.insert(key.into(), v.into());
    }

    pub fn to_json(&self, c: &ConcreteProgram) -> Value {
        json!({
            "check": self.check,
            "status": if self.passed { "pass" } else { "fail" },
            "counterexamples": self.counterexamples.iter().map(|cx| json!({
                "z": cx.z.show(&c.decls),
                "expected": bits(&cx.expected),
                "got": cx.got.iter().map(|g| bits(g)).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
            "stats": self.stats,
        })
    }
}

fn check_shape(a: &BernProgram, preds: &PredicateList) -> Result<()> {
    if a.vars.len() != preds.len() {
        return Err(Error::Config(format!("abstraction has {} variables, {} predicates given", a.vars.len(), preds.len())));
    }
    Ok(())
}

/// Concrete outcomes of `c` from `z`, or `None` when the run leaves a
/// declared range.
fn outcomes(c: &ConcreteProgram, z: &ConcreteState, cap: u128) -> Result<Option<BTreeSet<ConcreteState>>> {
    match eval_dist(c, &ConcreteDistribution::point(z.clone()), cap) {
        Ok(d) => Ok(Some(d.states.into_keys().collect())),
        Err(Error::RangeViolation { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn sound_by(
    name: &str,
    c: &ConcreteProgram,
    preds: &PredicateList,
    cap: u128,
    mut reach: impl FnMut(&AbstractState) -> Result<BTreeSet<AbstractState>>,
) -> Result<Report> {
    if c.joint_size() > cap {
        return Err(Error::CapExceeded { needed: c.joint_size(), cap });
    }
    let mut r = Report::new(name);
    let (mut checked, mut skipped) = (0u64, 0u64);
    let mut cache: BTreeMap<AbstractState, BTreeSet<AbstractState>> = BTreeMap::new();
    for z in c.states() {
        let Some(outs) = outcomes(c, &z, cap)? else {
            skipped += 1;
            continue;
        };
        checked += 1;
        let a = alpha(preds, &z);
        if !cache.contains_key(&a) {
            let got = reach(&a)?;
            cache.insert(a.clone(), got);
        }
        let got = &cache[&a];
        for zo in outs {
            let expected = alpha(preds, &zo);
            if !got.contains(&expected) {
                r.passed = false;
                r.counterexamples.push(Counterexample { z: z.clone(), expected, got: got.iter().cloned().collect() });
            }
        }
    }
    r.stat("checked", checked);
    r.stat("skipped_range", skipped);
    Ok(r)
}

/// Every concrete outcome must be reachable in the abstraction.
pub fn check_sound_nondet(c: &ConcreteProgram, a: &BernProgram, preds: &PredicateList, cap: u128) -> Result<Report> {
    check_shape(a, preds)?;
    sound_by("sound-nondet", c, preds, cap, |s| interp_nondet(a, &BTreeSet::from([s.clone()])))
}

/// Every concrete outcome must carry positive abstract probability,
/// checked by exact enumeration of the flips.
pub fn check_sound_prob_direct(c: &ConcreteProgram, a: &BernProgram, preds: &PredicateList, cap: u128) -> Result<Report> {
    check_shape(a, preds)?;
    sound_by("sound-prob", c, preds, cap, |s| Ok(interp_exact(a, &AbstractDistribution::point(s.clone()))?.support()))
}

/// The direct probabilistic check, cross-checked against the check on the
/// lowered program. Both verdicts are recorded; either failing fails.
pub fn check_sound_prob(c: &ConcreteProgram, a: &BernProgram, preds: &PredicateList, cap: u128) -> Result<Report> {
    let mut r = check_sound_prob_direct(c, a, preds, cap)?;
    let lowered = check_sound_nondet(c, &lower(a), preds, cap)?;
    r.stat("lowered_pass", lowered.passed);
    r.passed &= lowered.passed;
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaFamily {
    Uniform,
    /// Weight `k + 1` on the `k`-th state of the cell.
    Rank,
    /// Weight `2^-(k+1)`, the last state taking the remainder.
    Geometric,
    /// All mass on the smallest state of the cell.
    PointMass,
}

impl GammaFamily {
    pub const COMPATIBLE: [GammaFamily; 3] = [GammaFamily::Uniform, GammaFamily::Rank, GammaFamily::Geometric];
}

/// `Pr_γ(z | a)` for every feasible abstract state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Concretization {
    pub cells: BTreeMap<AbstractState, BTreeMap<ConcreteState, Prob>>,
}

impl Concretization {
    pub fn family(ctx: &TheoryContext, preds: &PredicateList, family: GammaFamily) -> Result<Self> {
        let mut cells = BTreeMap::new();
        for a in preds.minterms() {
            let cell = gamma_lower(ctx, preds, &a)?;
            if cell.is_empty() {
                continue;
            }
            let n = cell.len() as i64;
            let weights: Vec<Prob> = match family {
                GammaFamily::Uniform => vec![ratio(1, n); cell.len()],
                GammaFamily::Rank => (1..=n).map(|k| ratio(2 * k, n * (n + 1))).collect(),
                GammaFamily::Geometric => {
                    let mut w: Vec<Prob> = Vec::new();
                    let mut left = one();
                    for k in 0..cell.len() {
                        let share = if k + 1 == cell.len() { left.clone() } else { &left / int(2) };
                        left -= &share;
                        w.push(share);
                    }
                    w
                }
                GammaFamily::PointMass => (0..cell.len()).map(|k| if k == 0 { one() } else { zero() }).collect(),
            };
            let dist: BTreeMap<ConcreteState, Prob> =
                cell.into_iter().zip(weights).filter(|(_, w)| !w.is_zero()).collect();
            cells.insert(a, dist);
        }
        Ok(Concretization { cells })
    }

    pub fn prob(&self, z: &ConcreteState, a: &[bool]) -> Prob {
        self.cells.get(a).and_then(|c| c.get(z)).cloned().unwrap_or_else(zero)
    }

    /// Mass only inside each cell, summing to one per cell.
    pub fn check_strong(&self, preds: &PredicateList) -> Result<()> {
        for (a, cell) in &self.cells {
            let mut total = zero();
            for (z, p) in cell {
                if alpha(preds, z) != *a {
                    return Err(Error::IncompatibleConcretization(format!(
                        "state {:?} carries mass for abstract state {}",
                        z.values(),
                        bits(a)
                    )));
                }
                if p.is_negative() {
                    return Err(Error::IncompatibleConcretization(format!("negative mass for {}", bits(a))));
                }
                total += p;
            }
            if !total.is_one() {
                return Err(Error::IncompatibleConcretization(format!("cell {} sums to {}", bits(a), rational::format(&total))));
            }
        }
        Ok(())
    }

    /// Strong compatibility plus positive mass on every state of every cell.
    pub fn check_compatible(&self, ctx: &TheoryContext, preds: &PredicateList) -> Result<()> {
        self.check_strong(preds)?;
        for z in states_of(ctx.decls()) {
            let a = alpha(preds, &z);
            if self.prob(&z, &a).is_zero() {
                return Err(Error::IncompatibleConcretization(format!("state {:?} has no mass", z.values())));
            }
        }
        Ok(())
    }
}


/// `Pr_A(· | α(z))`, normalized.
fn abstract_posterior(a: &BernProgram, preds: &PredicateList, z: &ConcreteState) -> Result<BTreeMap<AbstractState, Prob>> {
    let out = interp_exact(a, &AbstractDistribution::point(alpha(preds, z)))?;
    if out.survival.is_zero() {
        return Err(Error::ConditioningOnImpossible);
    }
    Ok(out.states.iter().map(|(s, m)| (s.clone(), m / &out.survival)).collect())
}

/// Concrete semantics by the full sum over abstract outputs.
pub fn concrete_semantics(
    ctx: &TheoryContext,
    a: &BernProgram,
    preds: &PredicateList,
    gamma: &Concretization,
    z: &ConcreteState,
) -> Result<ConcreteDistribution> {
    gamma.check_strong(preds)?;
    let post = abstract_posterior(a, preds, z)?;
    for ao in post.keys() {
        if !gamma.cells.contains_key(ao) {
            return Err(Error::IncompatibleConcretization(format!("no concretization for {}", bits(ao))));
        }
    }
    let mut out = ConcreteDistribution::default();
    for zo in states_of(ctx.decls()) {
        let mut m = zero();
        for (ao, p) in &post {
            m += gamma.prob(&zo, ao) * p;
        }
        out.add(zo, m);
    }
    Ok(out)
}

/// Concrete semantics with the single term `Pr_γ(z | α(z)) Pr_A(α(z) | α(z_i))`.
pub fn concrete_semantics_collapsed(
    ctx: &TheoryContext,
    a: &BernProgram,
    preds: &PredicateList,
    gamma: &Concretization,
    z: &ConcreteState,
) -> Result<ConcreteDistribution> {
    gamma.check_strong(preds)?;
    let post = abstract_posterior(a, preds, z)?;
    let mut out = ConcreteDistribution::default();
    for zo in states_of(ctx.decls()) {
        let ao = alpha(preds, &zo);
        if let Some(p) = post.get(&ao) {
            out.add(zo.clone(), gamma.prob(&zo, &ao) * p);
        }
    }
    Ok(out)
}

/// Compares the concrete mass of `γ(a_o)` with `Pr_A(a_o | α(z))` under
/// each concretization.
pub fn check_invariance(
    ctx: &TheoryContext,
    a: &BernProgram,
    preds: &PredicateList,
    gammas: &[Concretization],
    z: &ConcreteState,
    ao: &AbstractState,
) -> Result<Report> {
    let mut r = Report::new("invariance");
    let expected = abstract_posterior(a, preds, z)?.get(ao).cloned().unwrap_or_else(zero);
    let mut values = Vec::new();
    for g in gammas {
        let d = concrete_semantics(ctx, a, preds, g, z)?;
        let m = d.states.iter().filter(|(zo, _)| alpha(preds, zo) == *ao).fold(zero(), |acc, (_, p)| acc + p);
        if m != expected {
            r.passed = false;
        }
        values.push(json!(rational::format(&m)));
    }
    r.stat("abstract", rational::format(&expected));
    r.stat("concrete", values);
    Ok(r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedSite {
    pub site: usize,
    pub theta: Prob,
    /// No concrete mass reached the site's context; θ was defaulted.
    pub defaulted: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitReport {
    pub sites: Vec<FittedSite>,
}

impl FitReport {
    pub fn to_json(&self) -> Value {
        json!(self
            .sites
            .iter()
            .map(|s| json!({"site": s.site, "theta": rational::format(&s.theta), "defaulted": s.defaulted}))
            .collect::<Vec<_>>())
    }

    pub fn defaulted(&self) -> Vec<usize> {
        self.sites.iter().filter(|s| s.defaulted).map(|s| s.site).collect()
    }
}

/// Sets each flip to the concrete conditional probability of its outcome,
/// given the abstract context in which it is consulted.
pub fn fit_parameters(
    ctx: &TheoryContext,
    c: &ConcreteProgram,
    preds: &PredicateList,
    abs: &mut Abstraction,
    input: &ConcreteDistribution,
) -> Result<FitReport> {
    let mut by_stmt: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in abs.sites.sites.iter().enumerate() {
        by_stmt.entry(s.stmt).or_default().push(i);
    }
    let mut report = FitReport::default();
    let mut values = BTreeMap::new();
    for (stmt, idxs) in by_stmt {
        let (_, reaching) = eval_dist_probe(c, input, stmt, ctx.cap())?;
        let kind = &c.stmt(stmt).ok_or_else(|| Error::UnknownPoint(format!("statement {stmt}")))?.kind;
        let mut tallies = vec![(zero(), zero()); idxs.len()];
        for (z, m) in &reaching.states {
            let pre = alpha(preds, z);
            let posts: Vec<(ConcreteState, Prob)> = match kind {
                StmtKind::Assign(x, e) => {
                    let mut next = z.0.clone();
                    next[*x] = e.eval(z.values());
                    vec![(ConcreteState(next), m.clone())]
                }
                StmtKind::Uniform(x, lo, hi) => {
                    let each = m / int(hi - lo);
                    (*lo..*hi)
                        .map(|v| {
                            let mut next = z.0.clone();
                            next[*x] = v;
                            (ConcreteState(next), each.clone())
                        })
                        .collect()
                }
                StmtKind::If(..) | StmtKind::Observe(_) => vec![(z.clone(), m.clone())],
            };
            for (k, &i) in idxs.iter().enumerate() {
                let site = &abs.sites.sites[i];
                for (zo, w) in &posts {
                    let post = alpha(preds, zo);
                    if !site.applies(&pre, &post) {
                        continue;
                    }
                    let hit = match (site.role, kind) {
                        (SiteRole::Branch, StmtKind::If(g, ..)) => g.eval(z.values()),
                        _ => site.pred.is_some_and(|p| post[p]),
                    };
                    tallies[k].1 += w;
                    if hit {
                        tallies[k].0 += w;
                    }
                }
            }
        }
        for (k, &i) in idxs.iter().enumerate() {
            let (num, den) = &tallies[k];
            let defaulted = den.is_zero();
            let theta = if defaulted { ratio(1, 2) } else { num / den };
            let site = &mut abs.sites.sites[i];
            site.theta = Param::Value(theta.clone());
            values.insert(site.site, theta.clone());
            report.sites.push(FittedSite { site: site.site, theta, defaulted });
        }
    }
    report.sites.sort_by_key(|s| s.site);
    abs.program = abs.program.with_params(&values);
    abs.config.params = ParamPolicy::Fitted;
    Ok(report)
}

/// `event` as a formula over the predicates, when it is a Boolean
/// combination of them.
pub fn event_formula(ctx: &TheoryContext, preds: &PredicateList, event: &Cond) -> Result<BoolFormula> {
    let upper = strongest_implied(ctx, preds, event)?;
    let lower = weakest_sufficient(ctx, preds, event)?;
    let mut m = BddManager::with_vars(preds.iter().map(|p| (VarKind::Predicate, p.var_name())));
    let inv = BoolFormula::disj(crate::predicates::feasible_minterms(ctx, preds)?.iter().map(|s| cube_formula(s)));
    let (u, l, i) = (m.build(&upper)?, m.build(&lower)?, m.build(&inv)?);
    let (u, l) = (m.and(u, i)?, m.and(l, i)?);
    if u != l {
        return Err(Error::NotExpressible);
    }
    Ok(lower)
}

/// Abstracts, fits and queries: `Pr(event)` at the end of `c` from `z`.
pub fn end_to_end_decomposed_query(
    ctx: &TheoryContext,
    c: &ConcreteProgram,
    preds: &PredicateList,
    event: &Cond,
    z: &ConcreteState,
) -> Result<Prob> {
    let e = event_formula(ctx, preds, event)?;
    let mut abs = abstract_program(ctx, c, preds, &AbstractionConfig::probabilistic(ParamPolicy::Symbolic))?;
    fit_parameters(ctx, c, preds, &mut abs, &ConcreteDistribution::point(z.clone()))?;
    let init = cube_formula(&alpha(preds, z));
    let mut run = run_symbolic(&abs.program, &init)?;
    let end = run.end();
    Ok(run.query(&e, end)?.probability)
}
