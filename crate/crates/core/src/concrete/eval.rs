use std::collections::BTreeMap;

use num_traits::Zero;

use super::ast::{ConcreteProgram, ConcreteState, Cond, Stmt, StmtKind, VarDecl};
use crate::error::{Error, Result};
use crate::rational::{int, one, zero, Prob};

/// Default bound on the joint state space.
pub const DEFAULT_CAP: u128 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Done(ConcreteState),
    /// An `observe` failed.
    Blocked,
}

/// Sub-normalized distribution over concrete states.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConcreteDistribution {
    pub states: BTreeMap<ConcreteState, Prob>,
    pub survival: Prob,
}

impl ConcreteDistribution {
    pub fn point(z: ConcreteState) -> Self {
        let mut d = Self::default();
        d.add(z, one());
        d
    }

    /// Uniform over the given states.
    pub fn uniform(states: impl IntoIterator<Item = ConcreteState>) -> Self {
        let states: Vec<_> = states.into_iter().collect();
        let mut d = Self::default();
        if states.is_empty() {
            return d;
        }
        let w = one() / int(states.len() as i64);
        for z in states {
            d.add(z, w.clone());
        }
        d
    }

    pub fn add(&mut self, z: ConcreteState, mass: Prob) {
        if mass.is_zero() {
            return;
        }
        self.survival += &mass;
        *self.states.entry(z).or_insert_with(zero) += mass;
    }

    pub fn mass(&self, z: &ConcreteState) -> Prob {
        self.states.get(z).cloned().unwrap_or_else(zero)
    }

    /// Unnormalized mass of the states satisfying `c`.
    pub fn mass_where(&self, c: &Cond) -> Prob {
        self.states
            .iter()
            .filter(|(z, _)| c.eval(z.values()))
            .fold(zero(), |acc, (_, p)| acc + p)
    }

    /// Divides by the survival mass.
    pub fn normalized(&self) -> Result<ConcreteDistribution> {
        if self.survival.is_zero() {
            return Err(Error::ConditioningOnImpossible);
        }
        let mut d = ConcreteDistribution::default();
        for (z, p) in &self.states {
            d.add(z.clone(), p / &self.survival);
        }
        Ok(d)
    }
}

fn check_range(decl: &VarDecl, value: i64) -> Result<()> {
    if decl.contains(value) {
        Ok(())
    } else {
        Err(Error::RangeViolation { var: decl.name.clone(), value, lo: decl.lo, hi: decl.hi })
    }
}

/// Runs a draw-free program on one state.
pub fn eval_det(p: &ConcreteProgram, z: &ConcreteState) -> Result<Outcome> {
    fn go(stmts: &[Stmt], decls: &[VarDecl], state: &mut Vec<i64>) -> Result<bool> {
        for s in stmts {
            match &s.kind {
                StmtKind::Assign(v, e) => {
                    let value = e.eval(state);
                    check_range(&decls[*v], value)?;
                    state[*v] = value;
                }
                StmtKind::Uniform(v, ..) => {
                    return Err(Error::NotDeterministic(format!(
                        "draw for `{}` at line {}",
                        decls[*v].name, s.line
                    )))
                }
                StmtKind::Observe(c) => {
                    if !c.eval(state) {
                        return Ok(false);
                    }
                }
                StmtKind::If(c, a, b) => {
                    let live = if c.eval(state) { go(a, decls, state)? } else { go(b, decls, state)? };
                    if !live {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }
    if !p.is_deterministic() {
        return Err(Error::NotDeterministic("program contains a uniform draw".into()));
    }
    let mut state = z.0.clone();
    Ok(if go(&p.body, &p.decls, &mut state)? { Outcome::Done(ConcreteState(state)) } else { Outcome::Blocked })
}

fn check_cap(p: &ConcreteProgram, cap: u128) -> Result<()> {
    let needed = p.joint_size();
    if needed > cap {
        return Err(Error::CapExceeded { needed, cap });
    }
    Ok(())
}

struct Probe {
    id: usize,
    seen: ConcreteDistribution,
}

fn step_block(
    stmts: &[Stmt],
    decls: &[VarDecl],
    input: ConcreteDistribution,
    probe: &mut Option<Probe>,
) -> Result<ConcreteDistribution> {
    let mut d = input;
    for s in stmts {
        d = step(s, decls, d, probe)?;
    }
    Ok(d)
}

fn step(
    s: &Stmt,
    decls: &[VarDecl],
    input: ConcreteDistribution,
    probe: &mut Option<Probe>,
) -> Result<ConcreteDistribution> {
    if let Some(pr) = probe.as_mut() {
        if pr.id == s.id {
            for (z, m) in &input.states {
                pr.seen.add(z.clone(), m.clone());
            }
        }
    }
    let mut out = ConcreteDistribution::default();
    match &s.kind {
        StmtKind::Assign(v, e) => {
            for (z, m) in input.states {
                let value = e.eval(z.values());
                check_range(&decls[*v], value)?;
                let mut next = z.0;
                next[*v] = value;
                out.add(ConcreteState(next), m);
            }
        }
        StmtKind::Uniform(v, lo, hi) => {
            let share = one() / int(hi - lo);
            for (z, m) in input.states {
                let each = &m * &share;
                for value in *lo..*hi {
                    let mut next = z.0.clone();
                    next[*v] = value;
                    out.add(ConcreteState(next), each.clone());
                }
            }
        }
        StmtKind::Observe(c) => {
            for (z, m) in input.states {
                if c.eval(z.values()) {
                    out.add(z, m);
                }
            }
        }
        StmtKind::If(c, a, b) => {
            let mut yes = ConcreteDistribution::default();
            let mut no = ConcreteDistribution::default();
            for (z, m) in input.states {
                if c.eval(z.values()) {
                    yes.add(z, m);
                } else {
                    no.add(z, m);
                }
            }
            for part in [step_block(a, decls, yes, probe)?, step_block(b, decls, no, probe)?] {
                for (z, m) in part.states {
                    out.add(z, m);
                }
            }
        }
    }
    Ok(out)
}

/// Pushes `input` through the program. Mass of executions failing an
/// `observe` is dropped, so `survival` falls below the input mass.
pub fn eval_dist(p: &ConcreteProgram, input: &ConcreteDistribution, cap: u128) -> Result<ConcreteDistribution> {
    check_cap(p, cap)?;
    let mut probe = None;
    step_block(&p.body, &p.decls, input.clone(), &mut probe)
}

/// Like [`eval_dist`], also returning the (unnormalized) distribution that
/// reaches statement `stmt_id` just before it runs.
pub fn eval_dist_probe(
    p: &ConcreteProgram,
    input: &ConcreteDistribution,
    stmt_id: usize,
    cap: u128,
) -> Result<(ConcreteDistribution, ConcreteDistribution)> {
    check_cap(p, cap)?;
    if p.stmt(stmt_id).is_none() {
        return Err(Error::UnknownPoint(format!("statement {stmt_id}")));
    }
    let mut probe = Some(Probe { id: stmt_id, seen: ConcreteDistribution::default() });
    let out = step_block(&p.body, &p.decls, input.clone(), &mut probe)?;
    Ok((out, probe.expect("probe kept").seen))
}

/// `Pr(c)` after conditioning on survival.
pub fn query_prob(d: &ConcreteDistribution, c: &Cond) -> Result<Prob> {
    if d.survival.is_zero() {
        return Err(Error::ConditioningOnImpossible);
    }
    Ok(d.mass_where(c) / &d.survival)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concrete::parse::{parse_concrete, parse_cond};
    use crate::rational::ratio;

    const STEP: &str = "var x in [-2, 3)\nif (x < 0) {\n  x = 0\n} else {\n  x = x + 1\n}\n";
    const NET: &str = "var a in [0, 10)\nvar b in [0, 20)\nvar c in [0, 20)\n\
        a = unif [0, 10)\n\
        if (a < 5) { b = unif [0, 10) } else { b = unif [0, 20) }\n\
        if (b < 5) { c = unif [0, 10) } else { c = unif [0, 20) }\n";

    fn run(src: &str) -> (ConcreteProgram, ConcreteDistribution) {
        let p = parse_concrete(src).unwrap();
        let d = eval_dist(&p, &ConcreteDistribution::point(p.initial_state()), DEFAULT_CAP).unwrap();
        (p, d)
    }

    #[test]
    fn deterministic_branches() {
        let p = parse_concrete(STEP).unwrap();
        let at = |x| eval_det(&p, &ConcreteState(vec![x])).unwrap();
        assert_eq!(at(-1), Outcome::Done(ConcreteState(vec![0])));
        assert_eq!(at(1), Outcome::Done(ConcreteState(vec![2])));
        assert!(matches!(
            eval_det(&p, &ConcreteState(vec![2])),
            Err(Error::RangeViolation { value: 3, .. })
        ));
    }

    #[test]
    fn empty_program_is_identity() {
        let p = parse_concrete("var x in [0, 3)").unwrap();
        assert_eq!(eval_det(&p, &ConcreteState(vec![2])).unwrap(), Outcome::Done(ConcreteState(vec![2])));
    }

    #[test]
    fn network_query() {
        let (p, d) = run(NET);
        assert_eq!(d.survival, one());
        let q = |s| query_prob(&d, &parse_cond(s, &p.decls).unwrap()).unwrap();
        assert_eq!(q("c < 5"), ratio(11, 32));
        assert_eq!(q("a < 5"), ratio(1, 2));
        assert_eq!(q("true"), one());
        assert_eq!(q("false"), zero());
    }

    #[test]
    fn uniform_and_observe() {
        let (_, d) = run("var x in [0, 2)\nx = unif [0, 2)");
        assert_eq!(d.mass(&ConcreteState(vec![0])), ratio(1, 2));
        assert_eq!(d.mass(&ConcreteState(vec![1])), ratio(1, 2));
        let (_, d) = run("var x in [0, 2)\nx = unif [0, 2); observe(x < 1)");
        assert_eq!(d.states.len(), 1);
        assert_eq!(d.mass(&ConcreteState(vec![0])), ratio(1, 2));
        assert_eq!(d.survival, ratio(1, 2));
    }

    #[test]
    fn impossible_conditioning() {
        let (p, d) = run("var x in [0, 2)\nobserve(x > 5)");
        assert!(matches!(
            query_prob(&d, &parse_cond("true", &p.decls).unwrap()),
            Err(Error::ConditioningOnImpossible)
        ));
    }

    #[test]
    fn cap_is_enforced() {
        let p = parse_concrete("var a in [0, 2000)\nvar b in [0, 2000)").unwrap();
        let d = ConcreteDistribution::point(p.initial_state());
        assert!(matches!(eval_dist(&p, &d, DEFAULT_CAP), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn probe_sees_branch_mass() {
        let p = parse_concrete(NET).unwrap();
        let d = ConcreteDistribution::point(p.initial_state());
        // statement 3 is the draw for `b` in the else-branch
        let (_, seen) = eval_dist_probe(&p, &d, 3, DEFAULT_CAP).unwrap();
        assert_eq!(seen.survival, ratio(1, 2));
    }
}
