//! Randomized property suites shared by the acceptance tests and `selftest`.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use num_traits::Zero;
use rand::Rng;
use serde_json::{json, Value};

use crate::bern::{interp_exact_points, interp_nondet, AbstractDistribution, BernState, DEFAULT_FLIP_CAP};
use crate::builder::{abstract_program, AbstractionConfig, InvariantStyle, ParamPolicy};
use crate::concrete::{eval_dist, states_of, ConcreteDistribution, DEFAULT_CAP};
use crate::error::{Error, Result};
use crate::gen::{self, GenParams};
use crate::inference::run_symbolic;
use crate::logic::{BoolFormula, VarId};
use crate::predicates::{alpha, feasible_minterms, gamma_lower};
use crate::rational::{ratio, zero};
use crate::soundness::{
    check_sound_nondet, check_sound_prob, check_sound_prob_direct, concrete_semantics, concrete_semantics_collapsed, lower,
    Concretization, GammaFamily,
};
use crate::theory::TheoryContext;

#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub cases: usize,
    /// Generated cases discarded before checking, e.g. over a cap.
    pub skipped: usize,
    pub failures: Vec<String>,
    pub elapsed: Duration,
    pub notes: Vec<(String, usize)>,
}

impl SuiteOutcome {
    fn new(name: &'static str) -> Self {
        SuiteOutcome { name, cases: 0, skipped: 0, failures: Vec::new(), elapsed: Duration::ZERO, notes: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn note(&mut self, key: &str) {
        match self.notes.iter_mut().find(|(k, _)| k == key) {
            Some((_, n)) => *n += 1,
            None => self.notes.push((key.to_string(), 1)),
        }
    }

    pub fn count(&self, key: &str) -> usize {
        self.notes.iter().find(|(k, _)| k == key).map_or(0, |(_, n)| *n)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "suite": self.name,
            "status": if self.passed() { "pass" } else { "fail" },
            "cases": self.cases,
            "skipped": self.skipped,
            "failures": self.failures.iter().take(10).collect::<Vec<_>>(),
            "notes": self.notes.iter().map(|(k, n)| json!({k: n})).collect::<Vec<_>>(),
            "millis": self.elapsed.as_millis() as u64,
        })
    }
}

fn too_big(e: &Error) -> bool {
    matches!(e, Error::CapExceeded { .. })
}

/// Runs `case` until `n` cases were checked, skipping cap overruns.
fn drive(name: &'static str, n: usize, seed: u64, mut case: impl FnMut(&mut gen::Rng8, &mut SuiteOutcome) -> Result<()>) -> SuiteOutcome {
    let start = Instant::now();
    let mut out = SuiteOutcome::new(name);
    let mut r = gen::rng(seed);
    while out.cases < n && out.skipped < 10 * n {
        match case(&mut r, &mut out) {
            Ok(()) => out.cases += 1,
            Err(e) if too_big(&e) => out.skipped += 1,
            Err(e) => {
                out.cases += 1;
                out.failures.push(format!("case {}: {e}", out.cases));
            }
        }
    }
    out.elapsed = start.elapsed();
    out
}

fn style(r: &mut gen::Rng8) -> InvariantStyle {
    [InvariantStyle::None, InvariantStyle::Observe, InvariantStyle::Structural][r.gen_range(0..3)]
}

/// Direct probabilistic soundness agrees with soundness of the lowering.
pub fn lowering_agreement(seed: u64, n: usize) -> SuiteOutcome {
    let g = GenParams { draws: true, ..GenParams::default() };
    drive("lowering-agreement", n, seed, |r, out| {
        let c = gen::concrete_program(r, &g);
        let preds = gen::predicates(r, &c.decls, g.max_preds);
        let ctx = TheoryContext::new(c.decls.clone());
        let a = if r.gen_bool(0.6) {
            let cfg = AbstractionConfig::probabilistic(ParamPolicy::Fixed(ratio(1, 2))).with_invariants(style(r));
            let abs = abstract_program(&ctx, &c, &preds, &cfg)?;
            gen::randomize_thetas(r, &abs.program, true)
        } else {
            gen::bern_over(r, &preds, 4, 4)
        };
        let direct = check_sound_prob_direct(&c, &a, &preds, DEFAULT_CAP)?;
        let lowered = check_sound_nondet(&c, &lower(&a), &preds, DEFAULT_CAP)?;
        out.note(if direct.passed { "sound" } else { "unsound" });
        let key = |r: &crate::soundness::Report| -> BTreeSet<_> {
            r.counterexamples.iter().map(|cx| (cx.z.clone(), cx.expected.clone())).collect()
        };
        if direct.passed != lowered.passed || key(&direct) != key(&lowered) {
            out.failures.push(format!("verdicts differ on\n{c}\n{a}"));
        }
        Ok(())
    })
}

/// Abstract-event marginals do not depend on the concretization.
pub fn marginal_invariance(seed: u64, n: usize) -> SuiteOutcome {
    let g = GenParams { max_vars: 2, max_range: 6, max_stmts: 4, draws: true, ..GenParams::default() };
    drive("marginal-invariance", n, seed, |r, out| {
        let c = gen::concrete_program(r, &g);
        let preds = gen::predicates(r, &c.decls, g.max_preds);
        let ctx = TheoryContext::new(c.decls.clone());
        let st = if r.gen_bool(0.5) { InvariantStyle::Observe } else { InvariantStyle::Structural };
        let cfg = AbstractionConfig::probabilistic(ParamPolicy::Fixed(ratio(1, 2))).with_invariants(st);
        let a = gen::randomize_thetas(r, &abstract_program(&ctx, &c, &preds, &cfg)?.program, false);
        let gammas: Vec<Concretization> =
            GammaFamily::COMPATIBLE.iter().map(|&f| Concretization::family(&ctx, &preds, f)).collect::<Result<_>>()?;
        for gm in &gammas {
            gm.check_compatible(&ctx, &preds)?;
        }
        let cells = feasible_minterms(&ctx, &preds)?;
        for z in states_of(&c.decls) {
            let post = crate::bern::interp_exact(&a, &AbstractDistribution::point(alpha(&preds, &z)))?;
            if post.survival.is_zero() {
                out.note("zero-survival inputs");
                continue;
            }
            for (k, gm) in gammas.iter().enumerate() {
                let full = concrete_semantics(&ctx, &a, &preds, gm, &z)?;
                if k == 0 && full != concrete_semantics_collapsed(&ctx, &a, &preds, gm, &z)? {
                    out.failures.push(format!("collapsed semantics differs at {:?}", z.values()));
                }
                for ao in &cells {
                    let concrete = full.states.iter().filter(|(zo, _)| alpha(&preds, zo) == *ao).fold(zero(), |s, (_, p)| s + p);
                    let abstract_ = post.mass(ao) / &post.survival;
                    if concrete != abstract_ {
                        out.failures.push(format!("marginal differs at {:?} -> {:?}\n{a}", z.values(), ao));
                    }
                }
            }
            out.note("pairs");
        }
        Ok(())
    })
}

type Holds = Box<dyn Fn(&[bool]) -> bool>;

fn uniform_over(models: &[BernState]) -> AbstractDistribution {
    let mut d = AbstractDistribution::default();
    for m in models {
        d.add(m.clone(), ratio(1, models.len() as i64));
    }
    d
}

/// Symbolic queries equal flip enumeration at every program point.
pub fn engine_equivalence(seed: u64, n: usize) -> SuiteOutcome {
    drive("engine-equivalence", n, seed, |r, out| {
        let nv = r.gen_range(1..=3);
        let p = gen::bern_program(r, nv, 6, 6, true);
        let vars: Vec<VarId> = (0..nv as u32).map(VarId).collect();
        let all: Vec<BernState> = crate::bern::all_states(nv).into_iter().collect();
        let (init, models) = if r.gen_bool(0.5) {
            (BoolFormula::TRUE, all)
        } else {
            let s: BernState = (0..nv).map(|_| r.gen_bool(0.5)).collect();
            (BoolFormula::cube(&vars, &s), vec![s])
        };
        let exact = interp_exact_points(&p, &uniform_over(&models), DEFAULT_FLIP_CAP)?;
        let mut run = run_symbolic(&p, &init)?;
        let mut events: Vec<(BoolFormula, Holds)> = vec![(BoolFormula::TRUE, Box::new(|_| true))];
        for v in 0..nv {
            events.push((BoolFormula::var(v as u32), Box::new(move |s: &[bool]| s[v])));
        }
        if nv > 1 {
            events.push((
                BoolFormula::or(BoolFormula::var(0), BoolFormula::not(BoolFormula::var(1))),
                Box::new(|s: &[bool]| s[0] || !s[1]),
            ));
        }
        for (pt, d) in exact.iter().enumerate() {
            for (f, holds) in &events {
                let sym = run.query_unnormalized(f, pt)?;
                if sym.probability != d.mass_where(holds) || sym.survival != d.survival {
                    out.failures.push(format!("point {pt}: symbolic {} vs exact {}\n{p}", sym.probability, d.mass_where(holds)));
                }
                if !d.survival.is_zero() && run.query(f, pt)?.probability != d.prob_where(holds)? {
                    out.failures.push(format!("point {pt}: conditional mismatch\n{p}"));
                }
            }
        }
        out.note(if exact[p.end_point()].survival.is_zero() { "blocked" } else { "live" });
        Ok(())
    })
}

/// Observe-style and structural abstractions of one statement have the
/// same lowered support.
pub fn invariant_styles(seed: u64, n: usize) -> SuiteOutcome {
    let g = GenParams { draws: true, ..GenParams::default() };
    drive("invariant-styles", n, seed, |r, out| {
        let c = gen::single_statement(r, &g);
        let preds = gen::predicates(r, &c.decls, g.max_preds);
        let ctx = TheoryContext::new(c.decls.clone());
        let base = AbstractionConfig::probabilistic(ParamPolicy::Fixed(ratio(1, 2)));
        let obs = abstract_program(&ctx, &c, &preds, &base.clone().with_invariants(InvariantStyle::Observe))?;
        let st = abstract_program(&ctx, &c, &preds, &base.with_invariants(InvariantStyle::Structural))?;
        let nd = abstract_program(&ctx, &c, &preds, &AbstractionConfig::nondeterministic())?;
        let (lo, ls) = (lower(&obs.program), lower(&st.program));
        for a in feasible_minterms(&ctx, &preds)? {
            let runs = gamma_lower(&ctx, &preds, &a)?
                .into_iter()
                .any(|z| eval_dist(&c, &ConcreteDistribution::point(z), DEFAULT_CAP).is_ok());
            if !runs {
                out.note("error-only inputs");
                continue;
            }
            let input = BTreeSet::from([a.clone()]);
            let (x, y, z) = (interp_nondet(&lo, &input)?, interp_nondet(&ls, &input)?, interp_nondet(&nd.program, &input)?);
            if x != y || x != z {
                out.failures.push(format!("supports differ from {a:?}\n{c}\n{}\n{}\n{}", obs.program, st.program, nd.program));
            }
        }
        let multi = st.program.body.len() > 1 || matches!(st.program.body.first(), Some(crate::bern::BernStmt::If(..)));
        out.note(if multi { "sequential" } else { "single-update" });
        Ok(())
    })
}

/// Generated probabilistic abstractions with θ = 1/2 are sound.
pub fn generated_soundness(seed: u64, n: usize) -> SuiteOutcome {
    let g = GenParams::default();
    drive("generated-soundness", n, seed, |r, out| {
        let c = gen::concrete_program(r, &g);
        let preds = gen::predicates(r, &c.decls, g.max_preds);
        let ctx = TheoryContext::new(c.decls.clone());
        let cfg = AbstractionConfig::probabilistic(ParamPolicy::Fixed(ratio(1, 2))).with_invariants(style(r));
        let abs = abstract_program(&ctx, &c, &preds, &cfg)?;
        let rep = check_sound_prob(&c, &abs.program, &preds, DEFAULT_CAP)?;
        if !rep.passed {
            out.failures.push(format!("unsound abstraction\n{c}\n{}", abs.program));
        }
        out.note(&format!("sites={}", abs.sites.len().min(5)));
        Ok(())
    })
}

/// Oracle entailment verdicts agree with evaluation over every state.
pub fn oracle_crosscheck(seed: u64, n: usize) -> SuiteOutcome {
    let g = GenParams::default();
    drive("oracle-crosscheck", n, seed, |r, out| {
        let decls = gen::decls(r, &g);
        let ctx = TheoryContext::new(decls.clone());
        let (a, b) = (gen::cond(r, &decls, 2), gen::cond(r, &decls, 2));
        let brute = states_of(&decls).all(|z| !a.eval(z.values()) || b.eval(z.values()));
        if ctx.entails(&a, &b)? != brute {
            out.failures.push(format!("{} |= {}", a.show(&decls), b.show(&decls)));
        }
        out.note(if brute { "entailed" } else { "not-entailed" });
        Ok(())
    })
}

/// Every suite with its acceptance size.
pub fn all(seed: u64) -> Vec<SuiteOutcome> {
    vec![
        lowering_agreement(seed, 200),
        marginal_invariance(seed, 100),
        engine_equivalence(seed, 200),
        invariant_styles(seed, 100),
        generated_soundness(seed, 100),
        oracle_crosscheck(seed, 500),
    ]
}
