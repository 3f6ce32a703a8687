use std::collections::BTreeSet;
use std::io::Write;
use std::process::{Command, ExitCode, Stdio};
use std::time::{Duration, Instant};

use probabs_core::bern::{interp_nondet, parse_bern, parse_bern_expr, BernExpr, BernProgram, BernStmt};
use probabs_core::builder::{abstract_program, Abstraction, AbstractionConfig, ParamPolicy};
use probabs_core::concrete::{
    eval_dist, parse_concrete, parse_cond, CmpOp, ConcreteDistribution, ConcreteProgram, Cond, IntExpr, VarDecl, DEFAULT_CAP,
};
use probabs_core::gen::{self, GenParams};
use probabs_core::inference::{run_symbolic, SymbolicEngine};
use probabs_core::logic::{BddManager, BoolFormula, VarId, VarKind};
use probabs_core::predicates::{feasible_minterms, PredicateList};
use probabs_core::rational::{ratio, Prob};
use probabs_core::suites::{self, SuiteOutcome};
use probabs_core::theory::{emit_smtlib, Query, TheoryContext};

const STEP: &str = include_str!("../../../fixtures/step.cp");
const STEP_PREDS: &str = include_str!("../../../fixtures/step.preds");
const STEP_LISTING: &str = include_str!("../../../fixtures/step_nondet.bern");
const CHAIN: &str = include_str!("../../../fixtures/chain.cp");
const CHAIN_PREDS: &str = include_str!("../../../fixtures/chain.preds");
const CHAIN_FITTED: &str = include_str!("../../../fixtures/chain_fitted.bern");

const SEED: u64 = 20;

type Outcome = Result<String, String>;

/// Name, time bound in seconds, check.
type Criterion = (&'static str, u64, fn() -> Outcome);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn step() -> (ConcreteProgram, PredicateList, TheoryContext) {
    let p = parse_concrete(STEP).unwrap();
    let preds = PredicateList::parse(STEP_PREDS, &p.decls).unwrap();
    let ctx = TheoryContext::new(p.decls.clone());
    (p, preds, ctx)
}

/// BDD equality of two expressions, optionally modulo the invariant.
fn same(abs: &Abstraction, a: &BernExpr, b: &str, modulo_inv: bool) -> Result<bool, String> {
    let b = parse_bern_expr(b, &abs.program).map_err(err)?;
    let n = abs.program.vars.len();
    let mut m = BddManager::with_vars((0..=n).map(|i| (VarKind::Predicate, format!("p{i}"))));
    let to = |e: &BernExpr| e.to_formula(&|v| VarId(v as u32), &|_| Ok(VarId(n as u32)));
    let (x, y) = (m.build(&to(a).map_err(err)?).map_err(err)?, m.build(&to(&b).map_err(err)?).map_err(err)?);
    if !modulo_inv {
        return Ok(x == y);
    }
    let inv = m.build(&abs.invariant).map_err(err)?;
    Ok(m.and(x, inv).map_err(err)? == m.and(y, inv).map_err(err)?)
}

fn criterion1() -> Outcome {
    let (p, preds, ctx) = step();
    let abs = abstract_program(&ctx, &p, &preds, &AbstractionConfig::nondeterministic()).map_err(err)?;
    let BernStmt::If(BernExpr::Star, then_b, else_b) = &abs.program.body[0] else {
        return Err(format!("unexpected shape\n{}", abs.program));
    };
    let (BernStmt::Assume(gt), BernStmt::Assume(gf)) = (&then_b[0], &else_b[0]) else {
        return Err("branches do not open with assumes".into());
    };
    ensure(same(&abs, gt, "{x<3}", false)?, "then assume differs from {x<3}")?;
    ensure(same(&abs, gf, "!{x<-4}", false)?, "else assume differs from !{x<-4}")?;
    let BernStmt::Assign(items) = &else_b[1] else { return Err("missing x = x + 1 update".into()) };
    let lookup = |label: &str| items.iter().find(|(v, _)| abs.program.vars[*v] == label).map(|(_, e)| e.clone());
    let (Some(BernExpr::Choose(t0, f0)), Some(BernExpr::Choose(t1, f1))) = (lookup("{x<-4}"), lookup("{x<3}")) else {
        return Err("updates are not choose expressions".into());
    };
    let mut exact = true;
    for (e, want) in [(&t0, "F"), (&f0, "!{x<3} || !{x<-4}"), (&t1, "{x<-4}"), (&f1, "!{x<3}")] {
        ensure(same(&abs, e, want, true)?, format!("update part differs from {want}"))?;
        exact &= same(&abs, e, want, false)?;
    }
    let fixture = parse_bern(STEP_LISTING).map_err(err)?;
    let lowered_eq = {
        let input: BTreeSet<_> = feasible_minterms(&ctx, &preds).map_err(err)?.into_iter().collect();
        interp_nondet(&abs.program, &input).map_err(err)? == interp_nondet(&fixture, &input).map_err(err)?
    };
    ensure(lowered_eq, "reachable set differs from the hand-written listing")?;
    Ok(format!("assumes exact; updates equal modulo I (syntactically exact: {exact})"))
}

fn x_ge0_claim(p: &BernProgram, ctx: &TheoryContext, preds: &PredicateList) -> Result<BTreeSet<Vec<bool>>, String> {
    let input: BTreeSet<_> = feasible_minterms(ctx, preds).map_err(err)?.into_iter().collect();
    let explicit = interp_nondet(p, &input).map_err(err)?;
    let n = p.vars.len();
    let vars: Vec<VarId> = (0..n as u32).map(VarId).collect();
    let init = BoolFormula::disj(input.iter().map(|s| BoolFormula::cube(&vars, s)));
    let mut run = run_symbolic(p, &init).map_err(err)?;
    let end = run.end();
    let symbolic = run.reachable(end).map_err(err)?;
    ensure(explicit == symbolic, "explicit and symbolic reachable sets differ")?;
    Ok(explicit)
}

fn criterion2() -> Outcome {
    let (p, preds, ctx) = step();
    let abs = abstract_program(&ctx, &p, &preds, &AbstractionConfig::nondeterministic()).map_err(err)?;
    let mut reports = Vec::new();
    for prog in [abs.program.clone(), parse_bern(STEP_LISTING).map_err(err)?] {
        let lt4 = prog.var_index("{x<-4}").ok_or("no {x<-4}")?;
        let lt3 = prog.var_index("{x<3}").ok_or("no {x<3}")?;
        let fin = x_ge0_claim(&prog, &ctx, &preds)?;
        ensure(!fin.is_empty(), "no final states")?;
        ensure(fin.iter().all(|s| !s[lt4]), "a final state has {x<-4}")?;
        ensure(fin.iter().any(|s| !s[lt3]), "every final state has {x<3}")?;
        reports.push(fin.len());
    }
    Ok(format!("final states {:?}; all satisfy !{{x<-4}}; some satisfy !{{x<3}}", reports))
}

fn program_query(p: &BernProgram, label: &str) -> Result<Prob, String> {
    let v = p.var_index(label).ok_or(format!("no {label}"))? as u32;
    let mut run = run_symbolic(p, &BoolFormula::TRUE).map_err(err)?;
    let end = run.end();
    Ok(run.query(&BoolFormula::var(v), end).map_err(err)?.probability)
}

fn timed_under(bound: Duration, f: impl FnOnce() -> Result<Prob, String>) -> Result<Prob, String> {
    let t = Instant::now();
    let v = f()?;
    ensure(t.elapsed() < bound, format!("took {:?}", t.elapsed()))?;
    Ok(v)
}

fn criterion3() -> Outcome {
    let bound = Duration::from_secs(1);
    let want = ratio(11, 32);
    let a = timed_under(bound, || program_query(&parse_bern(CHAIN_FITTED).map_err(err)?, "{c<5}"))?;
    let b = timed_under(bound, || {
        let c = parse_concrete(CHAIN).map_err(err)?;
        let preds = PredicateList::parse(CHAIN_PREDS, &c.decls).map_err(err)?;
        let ctx = TheoryContext::new(c.decls.clone());
        let abs = abstract_program(&ctx, &c, &preds, &AbstractionConfig::probabilistic(ParamPolicy::Fitted)).map_err(err)?;
        program_query(&abs.program, "{c<5}")
    })?;
    let c = timed_under(bound, || {
        let c = parse_concrete(CHAIN).map_err(err)?;
        let out = eval_dist(&c, &ConcreteDistribution::point(c.initial_state()), DEFAULT_CAP).map_err(err)?;
        let ev = parse_cond("c < 5", &c.decls).map_err(err)?;
        let idx = c.var_index("c").ok_or("no c")?;
        // Summed here rather than through query_prob.
        let num = out.states.iter().filter(|(z, _)| z.values()[idx] < 5).fold(ratio(0, 1), |s, (_, m)| s + m);
        let via_lib = probabs_core::concrete::query_prob(&out, &ev).map_err(err)?;
        ensure(via_lib == &num / &out.survival, "query_prob disagrees with direct sum")?;
        Ok(num / &out.survival)
    })?;
    ensure(a == want && b == want && c == want, format!("got {a}, {b}, {c}"))?;
    Ok("hand-written, fitted and brute force all give 11/32".into())
}

fn criterion4() -> Outcome {
    let p = parse_bern("{x<4} = {x<4} && flip(1/3)").map_err(err)?;
    let mut eng = SymbolicEngine::new(&p);
    let x = eng.state_var(0);
    let f = eng.flip_var(0).ok_or("no flip variable")?;
    let delta = eng.mgr.var_bdd(x).map_err(err)?;
    let out = eng.transfer(delta, &p.body[0]).map_err(err)?;
    let (xv, fv) = (BoolFormula::Var(x), BoolFormula::Var(f));
    let want = BoolFormula::or(
        BoolFormula::and(xv.clone(), fv.clone()),
        BoolFormula::and(BoolFormula::not(xv), BoolFormula::not(fv)),
    );
    let want = eng.mgr.build(&want).map_err(err)?;
    ensure(out == want, "transfer result differs")?;
    Ok("delta' is ({x<4} && f) || (!{x<4} && !f)".into())
}

fn suite(s: SuiteOutcome, n: usize) -> Outcome {
    ensure(s.cases == n, format!("ran {} of {n} cases", s.cases))?;
    if let Some(f) = s.failures.first() {
        return Err(format!("{} failures, first:\n{f}", s.failures.len()));
    }
    let notes: Vec<String> = s.notes.iter().map(|(k, v)| format!("{k}={v}")).collect();
    Ok(format!("{} cases, {} skipped, {}", s.cases, s.skipped, notes.join(" ")))
}

fn criterion5() -> Outcome {
    let s = suites::lowering_agreement(SEED, 200);
    ensure(s.count("sound") > 0 && s.count("unsound") > 0, "suite did not exercise both verdicts")?;
    suite(s, 200)
}

fn criterion6() -> Outcome {
    suite(suites::marginal_invariance(SEED, 100), 100)
}

fn criterion7() -> Outcome {
    suite(suites::engine_equivalence(SEED, 200), 200)
}

fn criterion8() -> Outcome {
    let s = suites::invariant_styles(SEED, 100);
    ensure(s.count("sequential") > 0, "no case exercised a sequential update")?;
    suite(s, 100)
}

fn criterion9() -> Outcome {
    suite(suites::generated_soundness(SEED, 100), 100)
}

fn int_value(e: &IntExpr, z: &[i64]) -> i64 {
    match e {
        IntExpr::Const(c) => *c,
        IntExpr::Var(v) => z[*v],
        IntExpr::Add(a, b) => int_value(a, z) + int_value(b, z),
        IntExpr::Sub(a, b) => int_value(a, z) - int_value(b, z),
        IntExpr::Scale(k, a) => k * int_value(a, z),
    }
}

fn truth(c: &Cond, z: &[i64]) -> bool {
    match c {
        Cond::Const(b) => *b,
        Cond::Cmp(op, a, b) => {
            let (x, y) = (int_value(a, z), int_value(b, z));
            match op {
                CmpOp::Lt => x < y,
                CmpOp::Le => x <= y,
                CmpOp::Eq => x == y,
                CmpOp::Ne => x != y,
                CmpOp::Gt => x > y,
                CmpOp::Ge => x >= y,
            }
        }
        Cond::Not(a) => !truth(a, z),
        Cond::And(a, b) => truth(a, z) && truth(b, z),
        Cond::Or(a, b) => truth(a, z) || truth(b, z),
    }
}

/// Visits every point of the box spanned by `decls`.
fn table(decls: &[VarDecl], z: &mut Vec<i64>, f: &mut impl FnMut(&[i64]) -> bool) -> bool {
    if z.len() == decls.len() {
        return f(z);
    }
    let d = &decls[z.len()];
    for v in d.lo..d.hi {
        z.push(v);
        let go_on = table(decls, z, f);
        z.pop();
        if !go_on {
            return false;
        }
    }
    true
}

fn solver() -> Option<&'static str> {
    ["z3", "cvc5"].into_iter().find(|s| Command::new(s).arg("--version").stdout(Stdio::null()).status().is_ok())
}

fn run_solver(bin: &str, script: &str) -> Result<bool, String> {
    let mut args = vec!["-in"];
    if bin == "cvc5" {
        args = vec!["--lang", "smt2"];
    }
    let mut ch = Command::new(bin).args(args).stdin(Stdio::piped()).stdout(Stdio::piped()).spawn().map_err(err)?;
    ch.stdin.take().ok_or("no stdin")?.write_all(script.as_bytes()).map_err(err)?;
    let out = String::from_utf8_lossy(&ch.wait_with_output().map_err(err)?.stdout).trim().to_string();
    match out.as_str() {
        "sat" => Ok(true),
        "unsat" => Ok(false),
        other => Err(format!("solver said {other}")),
    }
}

fn criterion10() -> Outcome {
    let g = GenParams::default();
    let mut r = gen::rng(SEED);
    let bin = solver();
    let (mut yes, mut smt) = (0, 0);
    for i in 0..500 {
        let decls = gen::decls(&mut r, &g);
        let ctx = TheoryContext::new(decls.clone());
        let (a, b) = (gen::cond(&mut r, &decls, 2), gen::cond(&mut r, &decls, 2));
        let mut holds = true;
        table(&decls, &mut Vec::new(), &mut |z| {
            holds = !truth(&a, z) || truth(&b, z);
            holds
        });
        let got = ctx.entails(&a, &b).map_err(err)?;
        ensure(got == holds, format!("query {i}: oracle says {got}, truth table says {holds}"))?;
        yes += holds as usize;
        if let Some(bin) = bin {
            let script = emit_smtlib(&ctx, &Query::Entails(a, b));
            ensure(run_solver(bin, &script)? != holds, format!("query {i}: solver disagrees"))?;
            smt += 1;
        }
    }
    let solver_note = match bin {
        Some(b) => format!("{smt} scripts confirmed by {b}"),
        None => "SMT round-trip skipped (no solver found)".into(),
    };
    Ok(format!("500 queries agree ({yes} entailed); {solver_note}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("step golden abstraction", 1, criterion1),
        ("step reachability claim", 1, criterion2),
        ("11/32 three ways", 3, criterion3),
        ("single-assignment transfer", 1, criterion4),
        ("lowering agreement (200 pairs)", 60, criterion5),
        ("marginal invariance (100 x 3 gammas)", 60, criterion6),
        ("engine equivalence (200 programs)", 60, criterion7),
        ("invariant-style equivalence (100 cases)", 30, criterion8),
        ("generated abstraction soundness (100 programs)", 60, criterion9),
        ("oracle cross-check (500 queries)", 30, criterion10),
    ];
    let mut failed = 0;
    for (i, (name, secs, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let res = f();
        let el = t.elapsed();
        let res = res.and_then(|m| if el < Duration::from_secs(*secs) { Ok(m) } else { Err(format!("over the {secs}s bound")) });
        match res {
            Ok(m) => println!("criterion {:>2} PASS  {name}  [{:.3}s < {secs}s]  {m}", i + 1, el.as_secs_f64()),
            Err(m) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}  [{:.3}s, bound {secs}s]  {m}", i + 1, el.as_secs_f64());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
