use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use proptest::prelude::*;

use probabs_core::bern::{
    all_states, interp_exact, interp_exact_points, interp_nondet, parse_bern, AbstractDistribution, BernExpr, BernProgram,
    BernStmt, Param, DEFAULT_FLIP_CAP,
};
use probabs_core::builder::{abstract_program, AbstractionConfig, InvariantStyle, ParamPolicy};
use probabs_core::concrete::{
    eval_det, eval_dist, parse_concrete, states_of, ConcreteDistribution, ConcreteProgram, ConcreteState, Outcome, Stmt,
    StmtKind, DEFAULT_CAP,
};
use probabs_core::gen::{self, GenParams};
use probabs_core::inference::run_symbolic;
use probabs_core::logic::{wmc, BddManager, BoolFormula, VarId, VarKind, WeightMap};
use probabs_core::predicates::{alpha, feasible_minterms, gamma_lower, strongest_implied, weakest_sufficient, PredicateList};
use probabs_core::rational::{ratio, Prob};
use probabs_core::soundness::{check_sound_nondet, check_sound_prob, lower};
use probabs_core::theory::{wp_subst, TheoryContext};
use probabs_core::Error;

fn formula(nvars: u32) -> impl Strategy<Value = BoolFormula> {
    let leaf = prop_oneof![
        any::<bool>().prop_map(BoolFormula::Const),
        (0..nvars).prop_map(|v| BoolFormula::Var(VarId(v))),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| BoolFormula::Not(Box::new(a))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| BoolFormula::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| BoolFormula::Or(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| BoolFormula::Implies(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| BoolFormula::Iff(Box::new(a), Box::new(b))),
        ]
    })
}

fn truth(f: &BoolFormula, bits: &[bool]) -> bool {
    match f {
        BoolFormula::Const(b) => *b,
        BoolFormula::Var(v) => bits[v.0 as usize],
        BoolFormula::Not(a) => !truth(a, bits),
        BoolFormula::And(a, b) => truth(a, bits) && truth(b, bits),
        BoolFormula::Or(a, b) => truth(a, bits) || truth(b, bits),
        BoolFormula::Implies(a, b) => !truth(a, bits) || truth(b, bits),
        BoolFormula::Iff(a, b) => truth(a, bits) == truth(b, bits),
    }
}

fn assignments(n: usize) -> impl Iterator<Item = Vec<bool>> {
    (0..1u32 << n).map(move |k| (0..n).map(|i| k >> i & 1 == 1).collect())
}

fn manager(n: u32) -> BddManager {
    BddManager::with_vars((0..n).map(|i| (VarKind::Predicate, format!("v{i}"))))
}

fn setup(seed: u64, g: &GenParams) -> (ConcreteProgram, PredicateList, TheoryContext) {
    let mut r = gen::rng(seed);
    let c = gen::concrete_program(&mut r, g);
    let preds = gen::predicates(&mut r, &c.decls, g.max_preds);
    let ctx = TheoryContext::new(c.decls.clone());
    (c, preds, ctx)
}

/// Recursive path enumeration, independent of the library evaluator.
fn paths(stmts: &[Stmt], p: &ConcreteProgram, z: Vec<i64>, mass: Prob, out: &mut BTreeMap<Vec<i64>, Prob>) -> Result<(), ()> {
    let Some((s, rest)) = stmts.split_first() else {
        *out.entry(z).or_insert_with(Prob::zero) += mass;
        return Ok(());
    };
    let in_range = |x: usize, v: i64| p.decls[x].lo <= v && v < p.decls[x].hi;
    match &s.kind {
        StmtKind::Assign(x, e) => {
            let v = e.eval(&z);
            if !in_range(*x, v) {
                return Err(());
            }
            let mut z = z;
            z[*x] = v;
            paths(rest, p, z, mass, out)
        }
        StmtKind::Uniform(x, lo, hi) => {
            let w = &mass / Prob::from_integer((hi - lo).into());
            for v in *lo..*hi {
                let mut z2 = z.clone();
                z2[*x] = v;
                paths(rest, p, z2, w.clone(), out)?;
            }
            Ok(())
        }
        StmtKind::Observe(c) => {
            if c.eval(&z) {
                paths(rest, p, z, mass, out)
            } else {
                Ok(())
            }
        }
        StmtKind::If(c, a, b) => {
            let branch = if c.eval(&z) { a } else { b };
            let mut joined: Vec<Stmt> = branch.clone();
            joined.extend(rest.iter().cloned());
            paths(&joined, p, z, mass, out)
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn bdd_canonicity(f in formula(6), g in formula(6)) {
        let mut m = manager(6);
        let (a, b) = (m.build(&f).unwrap(), m.build(&g).unwrap());
        let equiv = assignments(6).all(|s| truth(&f, &s) == truth(&g, &s));
        prop_assert_eq!(equiv, a == b);
    }

    #[test]
    fn wmc_matches_brute_force(f in formula(10), ws in prop::collection::vec((0i64..=8, 1i64..=8), 10)) {
        let mut m = manager(10);
        let d = m.build(&f).unwrap();
        let mut w = WeightMap::new();
        let mut pairs = Vec::new();
        for (i, &(n, k)) in ws.iter().enumerate() {
            let t = ratio(n.min(k), k);
            pairs.push((t.clone(), Prob::one() - &t));
            w.set(VarId(i as u32), t.clone(), Prob::one() - t);
        }
        let brute = assignments(10).filter(|s| truth(&f, s)).fold(Prob::zero(), |acc, s| {
            acc + s.iter().zip(&pairs).fold(Prob::one(), |p, (&b, (t, e))| p * if b { t } else { e })
        });
        prop_assert_eq!(wmc(&m, d, &w).unwrap(), brute);
    }

    #[test]
    fn unit_wmc_counts_models(f in formula(6)) {
        let mut m = manager(6);
        let d = m.build(&f).unwrap();
        let count = assignments(6).filter(|s| truth(&f, s)).count() as i64;
        prop_assert_eq!(wmc(&m, d, &WeightMap::unit(&m)).unwrap(), ratio(count, 1));
    }

    #[test]
    fn exists_is_disjoined_restriction(f in formula(5), v in 0u32..5) {
        let mut m = manager(5);
        let d = m.build(&f).unwrap();
        let e = m.exists(&[VarId(v)], d).unwrap();
        let (hi, lo) = (m.restrict(d, VarId(v), true).unwrap(), m.restrict(d, VarId(v), false).unwrap());
        prop_assert_eq!(e, m.or(hi, lo).unwrap());
        prop_assert!(!m.support(e).unwrap().contains(&VarId(v)));
    }

    #[test]
    fn rename_round_trip(f in formula(3)) {
        let mut m = manager(6);
        let d = m.build(&f).unwrap();
        let there: BTreeMap<VarId, VarId> = (0..3).map(|i| (VarId(i), VarId(i + 3))).collect();
        let back: BTreeMap<VarId, VarId> = there.iter().map(|(a, b)| (*b, *a)).collect();
        let r = m.rename(d, &there).unwrap();
        prop_assert_eq!(m.rename(r, &back).unwrap(), d);
    }

    #[test]
    fn point_dist_matches_eval_det(seed in any::<u64>()) {
        let (c, _, _) = setup(seed, &GenParams { observes: true, ..GenParams::default() });
        for z in states_of(&c.decls) {
            let det = eval_det(&c, &z);
            prop_assert_eq!(&det, &eval_det(&c, &z));
            let dist = eval_dist(&c, &ConcreteDistribution::point(z.clone()), DEFAULT_CAP);
            match (det, dist) {
                (Ok(Outcome::Done(out)), Ok(d)) => {
                    prop_assert!(d.survival.is_one());
                    prop_assert!(d.mass(&out).is_one());
                }
                (Ok(Outcome::Blocked), Ok(d)) => prop_assert!(d.survival.is_zero()),
                (Err(a), Err(b)) => prop_assert_eq!(a, b),
                (a, b) => prop_assert!(false, "eval_det {:?} vs eval_dist {:?}", a, b),
            }
        }
    }

    #[test]
    fn eval_dist_matches_path_enumeration(seed in any::<u64>()) {
        let (c, _, _) = setup(seed, &GenParams { draws: true, observes: true, ..GenParams::default() });
        let mut r = gen::rng(seed ^ 1);
        let z: Vec<i64> = c.decls.iter().map(|d| rand::Rng::gen_range(&mut r, d.lo..d.hi)).collect();
        let mut naive = BTreeMap::new();
        let naive_ok = paths(&c.body, &c, z.clone(), Prob::one(), &mut naive);
        let lib = eval_dist(&c, &ConcreteDistribution::point(ConcreteState(z)), DEFAULT_CAP);
        match (naive_ok, lib) {
            (Ok(()), Ok(d)) => {
                let got: BTreeMap<Vec<i64>, Prob> = d.states.iter().map(|(s, p)| (s.0.clone(), p.clone())).collect();
                let survival = naive.values().fold(Prob::zero(), |a, b| a + b);
                prop_assert_eq!(got, naive);
                prop_assert_eq!(d.survival, survival);
            }
            (Err(()), Err(Error::RangeViolation { .. })) => {}
            (a, b) => prop_assert!(false, "naive {:?} vs library {:?}", a, b),
        }
    }

    #[test]
    fn mass_conserved_without_observe(seed in any::<u64>()) {
        let (c, _, _) = setup(seed, &GenParams { draws: true, ..GenParams::default() });
        let input = ConcreteDistribution::point(c.initial_state());
        if let Ok(d) = eval_dist(&c, &input, DEFAULT_CAP) {
            prop_assert!(d.survival.is_one());
        }
    }

    #[test]
    fn entails_is_unsat_of_difference(seed in any::<u64>()) {
        let mut r = gen::rng(seed);
        let decls = gen::decls(&mut r, &GenParams::default());
        let ctx = TheoryContext::new(decls.clone());
        let (a, b) = (gen::cond(&mut r, &decls, 2), gen::cond(&mut r, &decls, 2));
        let sat = ctx.satisfiable(&probabs_core::concrete::Cond::and(a.clone(), probabs_core::concrete::Cond::not(b.clone()))).unwrap();
        prop_assert_eq!(ctx.entails(&a, &b).unwrap(), !sat);
    }

    #[test]
    fn wp_subst_is_sound(seed in any::<u64>()) {
        let mut r = gen::rng(seed);
        let decls = gen::decls(&mut r, &GenParams::default());
        let x = rand::Rng::gen_range(&mut r, 0..decls.len());
        let e = gen::int_expr(&mut r, &decls, x);
        let c = gen::cond(&mut r, &decls, 2);
        let wp = wp_subst(x, &e, &c);
        for z in states_of(&decls) {
            let mut post = z.0.clone();
            post[x] = e.eval(&post);
            prop_assert_eq!(c.eval(&post), wp.eval(z.values()));
        }
    }

    #[test]
    fn concretization_partitions(seed in any::<u64>()) {
        let (c, preds, ctx) = setup(seed, &GenParams::default());
        let mut seen = BTreeSet::new();
        for a in preds.minterms() {
            for z in gamma_lower(&ctx, &preds, &a).unwrap() {
                prop_assert_eq!(alpha(&preds, &z), a.clone());
                prop_assert!(seen.insert(z));
            }
        }
        prop_assert_eq!(seen.len() as u128, c.joint_size());
    }

    #[test]
    fn strongest_and_weakest_are_tight(seed in any::<u64>()) {
        let (c, preds, ctx) = setup(seed, &GenParams::default());
        let mut r = gen::rng(seed ^ 2);
        let t = gen::cond(&mut r, &c.decls, 2);
        let feasible = feasible_minterms(&ctx, &preds).unwrap();
        let holds = |f: &BoolFormula, a: &[bool]| truth(f, a);
        let si = strongest_implied(&ctx, &preds, &t).unwrap();
        let ws = weakest_sufficient(&ctx, &preds, &t).unwrap();
        let si_not = strongest_implied(&ctx, &preds, &probabs_core::concrete::Cond::not(t.clone())).unwrap();
        for a in &feasible {
            let cell = gamma_lower(&ctx, &preds, a).unwrap();
            let some = cell.iter().any(|z| t.eval(z.values()));
            let all = cell.iter().all(|z| t.eval(z.values()));
            prop_assert_eq!(holds(&si, a), some);
            prop_assert_eq!(holds(&ws, a), all);
            prop_assert_eq!(holds(&ws, a), !holds(&si_not, a));
        }
    }

    #[test]
    fn lowering_preserves_support(seed in any::<u64>()) {
        let mut r = gen::rng(seed);
        let n = rand::Rng::gen_range(&mut r, 1..=3);
        let base = gen::bern_program(&mut r, n, 6, 4, true);
        let p = gen::randomize_thetas(&mut r, &base, false);
        let input: BTreeSet<_> = all_states(n);
        let mut dist = AbstractDistribution::default();
        for s in &input {
            dist.add(s.clone(), ratio(1, input.len() as i64));
        }
        let exact = interp_exact(&p, &dist).unwrap();
        prop_assert_eq!(exact.support(), interp_nondet(&lower(&p), &input).unwrap());
    }

    #[test]
    fn extreme_thetas_are_deterministic(seed in any::<u64>()) {
        let mut r = gen::rng(seed);
        let n = rand::Rng::gen_range(&mut r, 1..=3);
        let mut p = gen::bern_program(&mut r, n, 6, 4, false);
        p.walk_exprs_mut(&mut |e| {
            if let BernExpr::Flip { param, .. } = e {
                *param = Param::Value(if rand::Rng::gen_bool(&mut r, 0.5) { Prob::one() } else { Prob::zero() });
            }
        });
        for s in all_states(n) {
            let out = interp_exact(&p, &AbstractDistribution::point(s)).unwrap();
            prop_assert_eq!(out.support().len(), 1);
            prop_assert!(out.survival.is_one());
        }
    }

    #[test]
    fn survival_never_increases(seed in any::<u64>()) {
        let mut r = gen::rng(seed);
        let n = rand::Rng::gen_range(&mut r, 1..=3);
        let p = gen::bern_program(&mut r, n, 8, 6, true);
        let pts = interp_exact_points(&p, &AbstractDistribution::point(vec![false; n]), DEFAULT_FLIP_CAP).unwrap();
        let top: BTreeSet<*const BernStmt> = p.body.iter().map(|s| s as *const _).collect();
        let mut seq = vec![0];
        probabs_core::bern::walk_stmts(&p.body, &mut |id, s| {
            if top.contains(&(s as *const _)) {
                seq.push(id);
            }
        });
        for w in seq.windows(2) {
            prop_assert!(pts[w[1]].survival <= pts[w[0]].survival);
        }
    }

    #[test]
    fn flips_determine_state(seed in any::<u64>()) {
        let mut r = gen::rng(seed);
        let n = rand::Rng::gen_range(&mut r, 1..=3);
        let p = gen::bern_program(&mut r, n, 6, 6, true);
        let mut run = run_symbolic(&p, &BoolFormula::TRUE).unwrap();
        let cur: Vec<VarId> = run.engine.state_vars().to_vec();
        let unit = WeightMap::unit(&run.engine.mgr);
        let scale = ratio(1 << cur.len(), 1);
        for pt in 0..run.points.len() {
            let d = run.points[pt];
            let proj = run.engine.mgr.exists(&cur, d).unwrap();
            let (a, b) = (wmc(&run.engine.mgr, d, &unit).unwrap(), wmc(&run.engine.mgr, proj, &unit).unwrap());
            prop_assert_eq!(a * &scale, b);
        }
    }

    #[test]
    fn builder_guards_cover_and_chooses_are_disjoint(seed in any::<u64>()) {
        let (c, preds, ctx) = setup(seed, &GenParams::default());
        let abs = abstract_program(&ctx, &c, &preds, &AbstractionConfig::nondeterministic()).unwrap();
        let n = preds.len();
        let mut m = manager(n as u32 + 1);
        let inv = m.build(&abs.invariant).unwrap();
        let to = |e: &BernExpr| e.to_formula(&|v| VarId(v as u32), &|_| Ok(VarId(n as u32))).unwrap();
        let mut problems = Vec::new();
        probabs_core::bern::walk_stmts(&abs.program.body, &mut |_, s| match s {
            BernStmt::If(BernExpr::Star, a, b) => {
                if let (Some(BernStmt::Assume(t)), Some(BernStmt::Assume(f))) = (a.first(), b.first()) {
                    let cover = BoolFormula::or(to(t), to(f));
                    let d = m.build(&cover).unwrap();
                    if m.and(d, inv).unwrap() != inv {
                        problems.push("guard cover");
                    }
                }
            }
            BernStmt::Assign(items) => {
                for (_, e) in items {
                    if let BernExpr::Choose(t, f) = e {
                        let both = BoolFormula::and(to(t), to(f));
                        let d = m.build(&both).unwrap();
                        if !m.and(d, inv).unwrap().is_false() {
                            problems.push("choose overlap");
                        }
                    }
                }
            }
            _ => {}
        });
        prop_assert!(problems.is_empty(), "{:?}\n{}", problems, abs.program);
    }

    #[test]
    fn builder_output_is_sound(seed in any::<u64>()) {
        let (c, preds, ctx) = setup(seed, &GenParams::default());
        let nd = abstract_program(&ctx, &c, &preds, &AbstractionConfig::nondeterministic()).unwrap();
        prop_assert!(check_sound_nondet(&c, &nd.program, &preds, DEFAULT_CAP).unwrap().passed);
        for style in [InvariantStyle::None, InvariantStyle::Observe, InvariantStyle::Structural] {
            let cfg = AbstractionConfig::probabilistic(ParamPolicy::Fixed(ratio(1, 3))).with_invariants(style);
            let pa = abstract_program(&ctx, &c, &preds, &cfg).unwrap();
            prop_assert!(check_sound_prob(&c, &pa.program, &preds, DEFAULT_CAP).unwrap().passed, "{}", pa.program);
        }
    }

    #[test]
    fn printed_programs_reparse(seed in any::<u64>()) {
        let (c, _, _) = setup(seed, &GenParams { draws: true, observes: true, ..GenParams::default() });
        let text = c.to_string();
        let back = parse_concrete(&text).unwrap();
        prop_assert_eq!(&back.to_string(), &text);
        prop_assert_eq!(parse_concrete(&text).unwrap(), back);
        let mut r = gen::rng(seed);
        let b = gen::bern_program(&mut r, 3, 6, 6, true);
        let btext = b.to_string();
        let bback = parse_bern(&btext).unwrap();
        prop_assert_eq!(&bback, &b);
    }
}

#[test]
fn parallel_assignment_swaps() {
    let p: BernProgram = parse_bern("a, b = b, a").unwrap();
    let out = interp_exact(&p, &AbstractDistribution::point(vec![true, false])).unwrap();
    assert!(out.mass(&[false, true]).is_one());
}
