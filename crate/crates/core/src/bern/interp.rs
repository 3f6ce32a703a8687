use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;

use super::ast::{BernExpr, BernProgram, BernStmt};
use crate::error::{Error, Result};
use crate::rational::{one, zero, Prob};

/// Default bound on the number of flip sites enumerated exactly.
pub const DEFAULT_FLIP_CAP: usize = 24;

pub type BernState = Vec<bool>;

/// Sub-normalized distribution over Boolean states.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AbstractDistribution {
    pub states: BTreeMap<BernState, Prob>,
    pub survival: Prob,
}

impl AbstractDistribution {
    pub fn point(s: BernState) -> Self {
        let mut d = Self::default();
        d.add(s, one());
        d
    }

    pub fn add(&mut self, s: BernState, mass: Prob) {
        if mass.is_zero() {
            return;
        }
        self.survival += &mass;
        *self.states.entry(s).or_insert_with(zero) += mass;
    }

    pub fn mass(&self, s: &[bool]) -> Prob {
        self.states.get(s).cloned().unwrap_or_else(zero)
    }

    pub fn mass_where(&self, pred: impl Fn(&[bool]) -> bool) -> Prob {
        self.states.iter().filter(|(s, _)| pred(s)).fold(zero(), |acc, (_, p)| acc + p)
    }

    /// Conditional probability of `pred` given survival.
    pub fn prob_where(&self, pred: impl Fn(&[bool]) -> bool) -> Result<Prob> {
        if self.survival.is_zero() {
            return Err(Error::ConditioningOnImpossible);
        }
        Ok(self.mass_where(pred) / &self.survival)
    }

    pub fn support(&self) -> BTreeSet<BernState> {
        self.states.keys().cloned().collect()
    }
}

fn block_size(stmts: &[BernStmt]) -> usize {
    stmts
        .iter()
        .map(|s| match s {
            BernStmt::If(_, a, b) => 1 + block_size(a) + block_size(b),
            _ => 1,
        })
        .sum()
}

enum Stop {
    /// A flip site with no decision yet on this path.
    Need(usize),
    Fail(Error),
}

impl From<Error> for Stop {
    fn from(e: Error) -> Self {
        Stop::Fail(e)
    }
}

struct Run<'a> {
    decided: &'a BTreeMap<usize, bool>,
    trace: Vec<(usize, BernState)>,
}

impl Run<'_> {
    fn eval(&self, e: &BernExpr, state: &[bool]) -> std::result::Result<bool, Stop> {
        e.eval(state, &mut |site| self.decided.get(&site).copied().ok_or(Stop::Need(site)))
    }

    /// Returns `false` when the run is blocked.
    fn block(&mut self, stmts: &[BernStmt], state: &mut BernState, next: &mut usize) -> std::result::Result<bool, Stop> {
        for s in stmts {
            *next += 1;
            let id = *next;
            match s {
                BernStmt::Assign(items) => {
                    let values = items
                        .iter()
                        .map(|(_, e)| self.eval(e, state))
                        .collect::<std::result::Result<Vec<_>, _>>()?;
                    for ((v, _), value) in items.iter().zip(values) {
                        state[*v] = value;
                    }
                }
                BernStmt::Observe(e) | BernStmt::Assume(e) => {
                    if !self.eval(e, state)? {
                        return Ok(false);
                    }
                }
                BernStmt::If(g, a, b) => {
                    let taken = self.eval(g, state)?;
                    let live = if taken {
                        let live = self.block(a, state, next)?;
                        *next = id + block_size(a) + block_size(b);
                        live
                    } else {
                        *next = id + block_size(a);
                        self.block(b, state, next)?
                    };
                    if !live {
                        return Ok(false);
                    }
                    *next = id + block_size(a) + block_size(b);
                }
            }
            self.trace.push((id, state.clone()));
        }
        Ok(true)
    }
}

/// Exact distribution at every program point: index 0 is the entry and
/// index `k` is just after statement `k` (pre-order, from 1). Each point
/// holds the mass of the executions reaching it.
pub fn interp_exact_points(
    p: &BernProgram,
    input: &AbstractDistribution,
    flip_cap: usize,
) -> Result<Vec<AbstractDistribution>> {
    if p.num_sites() > flip_cap {
        return Err(Error::CapExceeded { needed: p.num_sites() as u128, cap: flip_cap as u128 });
    }
    let thetas = p.thetas()?;
    let mut points = vec![AbstractDistribution::default(); p.stmt_count() + 1];
    for (s, m) in &input.states {
        if s.len() != p.vars.len() {
            return Err(Error::Config(format!("input state has {} values, program has {} variables", s.len(), p.vars.len())));
        }
        explore(p, s, m, &thetas, &mut BTreeMap::new(), &mut points)?;
    }
    Ok(points)
}

fn explore(
    p: &BernProgram,
    start: &BernState,
    mass: &Prob,
    thetas: &BTreeMap<usize, Prob>,
    decided: &mut BTreeMap<usize, bool>,
    points: &mut [AbstractDistribution],
) -> Result<()> {
    let mut run = Run { decided, trace: vec![(0, start.clone())] };
    let mut state = start.clone();
    match run.block(&p.body, &mut state, &mut 0) {
        Ok(_) => {
            let weight = decided.iter().fold(mass.clone(), |acc, (site, &b)| {
                let theta = &thetas[site];
                if b {
                    acc * theta
                } else {
                    acc * (one() - theta)
                }
            });
            for (pt, s) in run.trace {
                points[pt].add(s, weight.clone());
            }
            Ok(())
        }
        Err(Stop::Need(site)) => {
            for b in [true, false] {
                decided.insert(site, b);
                explore(p, start, mass, thetas, decided, points)?;
            }
            decided.remove(&site);
            Ok(())
        }
        Err(Stop::Fail(e)) => Err(e),
    }
}

/// Exact output distribution.
pub fn interp_exact(p: &BernProgram, input: &AbstractDistribution) -> Result<AbstractDistribution> {
    let end = p.end_point();
    Ok(interp_exact_points(p, input, DEFAULT_FLIP_CAP)?.swap_remove(end))
}

/// Possible values `(can be true, can be false)` of `e` in `state`.
fn possible(e: &BernExpr, state: &[bool]) -> Result<(bool, bool)> {
    Ok(match e {
        BernExpr::Const(b) => (*b, !*b),
        BernExpr::Var(v) => (state[*v], !state[*v]),
        BernExpr::Not(a) => {
            let (t, f) = possible(a, state)?;
            (f, t)
        }
        BernExpr::And(a, b) => {
            let ((at, af), (bt, bf)) = (possible(a, state)?, possible(b, state)?);
            (at && bt, af || bf)
        }
        BernExpr::Or(a, b) => {
            let ((at, af), (bt, bf)) = (possible(a, state)?, possible(b, state)?);
            (at || bt, af && bf)
        }
        BernExpr::Implies(a, b) => {
            let ((at, af), (bt, bf)) = (possible(a, state)?, possible(b, state)?);
            (af || bt, at && bf)
        }
        BernExpr::Iff(a, b) => {
            let ((at, af), (bt, bf)) = (possible(a, state)?, possible(b, state)?);
            ((at && bt) || (af && bf), (at && bf) || (af && bt))
        }
        BernExpr::Star => (true, true),
        BernExpr::Choose(a, b) => {
            let ((at, af), (_, bf)) = (possible(a, state)?, possible(b, state)?);
            (at || bf, af)
        }
        BernExpr::Flip { .. } => return Err(Error::UnexpectedFlip),
    })
}

fn nondet_block(
    stmts: &[BernStmt],
    input: BTreeSet<BernState>,
    next: &mut usize,
    points: &mut [BTreeSet<BernState>],
) -> Result<BTreeSet<BernState>> {
    let mut cur = input;
    for s in stmts {
        *next += 1;
        let id = *next;
        cur = match s {
            BernStmt::Assign(items) => {
                let mut out = BTreeSet::new();
                for st in &cur {
                    let mut partial: Vec<BernState> = vec![st.clone()];
                    for (v, e) in items {
                        let (t, f) = possible(e, st)?;
                        let mut grown = Vec::new();
                        for q in partial {
                            for (ok, value) in [(t, true), (f, false)] {
                                if ok {
                                    let mut r = q.clone();
                                    r[*v] = value;
                                    grown.push(r);
                                }
                            }
                        }
                        partial = grown;
                    }
                    out.extend(partial);
                }
                out
            }
            BernStmt::Observe(e) | BernStmt::Assume(e) => {
                let mut out = BTreeSet::new();
                for st in cur {
                    if possible(e, &st)?.0 {
                        out.insert(st);
                    }
                }
                out
            }
            BernStmt::If(g, a, b) => {
                let (mut yes, mut no) = (BTreeSet::new(), BTreeSet::new());
                for st in &cur {
                    let (t, f) = possible(g, st)?;
                    if t {
                        yes.insert(st.clone());
                    }
                    if f {
                        no.insert(st.clone());
                    }
                }
                let mut out = nondet_block(a, yes, next, points)?;
                out.extend(nondet_block(b, no, next, points)?);
                out
            }
        };
        points[id].extend(cur.iter().cloned());
    }
    Ok(cur)
}

/// Reachable state sets at every program point, indexed as in
/// [`interp_exact_points`].
pub fn interp_nondet_points(p: &BernProgram, input: &BTreeSet<BernState>) -> Result<Vec<BTreeSet<BernState>>> {
    let mut points = vec![BTreeSet::new(); p.stmt_count() + 1];
    points[0] = input.clone();
    nondet_block(&p.body, input.clone(), &mut 0, &mut points)?;
    Ok(points)
}

/// All end states over every resolution of `*`.
pub fn interp_nondet(p: &BernProgram, input: &BTreeSet<BernState>) -> Result<BTreeSet<BernState>> {
    let end = p.end_point();
    Ok(interp_nondet_points(p, input)?.swap_remove(end))
}

/// Every Boolean state over `n` variables.
pub fn all_states(n: usize) -> BTreeSet<BernState> {
    (0u64..1 << n).map(|m| (0..n).map(|i| m >> i & 1 == 1).collect()).collect()
}
