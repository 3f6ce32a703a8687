use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use probabs_core::bern::{parse_bern, parse_bern_expr, BernExpr, BernProgram, Mode, Param};
use probabs_core::builder::{abstract_program, Abstraction, AbstractionConfig, InvariantStyle, ParamPolicy};
use probabs_core::concrete::{parse_concrete, ConcreteDistribution, ConcreteProgram, DEFAULT_CAP};
use probabs_core::inference::run_symbolic;
use probabs_core::logic::{BoolFormula, VarId};
use probabs_core::predicates::PredicateList;
use probabs_core::rational::{self, Prob};
use probabs_core::soundness::{check_sound_nondet, check_sound_prob, fit_parameters};
use probabs_core::theory::TheoryContext;
use probabs_core::{suites, Error};

#[derive(Parser)]
#[command(name = "probabs", version, about = "Probabilistic predicate abstraction of loop-free programs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a Boolean program from a concrete program and predicates.
    Abstract(AbstractArgs),
    /// Exact marginal of an event at a program point.
    Infer(InferArgs),
    /// Check an abstraction for soundness against the concrete program.
    Check(CheckArgs),
    /// Build an abstraction whose flip parameters are fitted.
    Fit(FitArgs),
    /// Run the randomized property suites.
    Selftest(SelftestArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Prob,
    Nondet,
}

#[derive(Clone, Copy, ValueEnum)]
enum InvArg {
    None,
    Observe,
    Structural,
}

impl From<InvArg> for InvariantStyle {
    fn from(a: InvArg) -> Self {
        match a {
            InvArg::None => InvariantStyle::None,
            InvArg::Observe => InvariantStyle::Observe,
            InvArg::Structural => InvariantStyle::Structural,
        }
    }
}

#[derive(Args)]
struct Common {
    /// Emit JSON instead of text.
    #[arg(long)]
    json: bool,
    /// Upper bound on enumerated concrete states.
    #[arg(long, default_value_t = DEFAULT_CAP, value_parser = positive)]
    cap: u128,
}

#[derive(Args)]
struct AbstractArgs {
    program: PathBuf,
    preds: PathBuf,
    #[arg(long, value_enum, default_value = "prob")]
    mode: ModeArg,
    /// Defaults to observe in nondet mode and structural in prob mode.
    #[arg(long, value_enum)]
    invariants: Option<InvArg>,
    /// symbolic, fixed=<r> or fit.
    #[arg(long, default_value = "symbolic", value_parser = param_policy)]
    params: ParamPolicy,
    /// Write the flip-site table as JSON to this file.
    #[arg(long)]
    sites: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct InferArgs {
    program: PathBuf,
    /// Boolean expression over the program variables.
    #[arg(long, default_value = "T")]
    event: String,
    /// entry, end, or a statement number.
    #[arg(long, default_value = "end")]
    point: String,
    /// Value for every symbolic parameter: fixed=<r>.
    #[arg(long, value_parser = param_policy)]
    params: Option<ParamPolicy>,
    /// Report mass without conditioning on observe survival.
    #[arg(long)]
    unnormalized: bool,
    /// Write the point's knowledge base as Graphviz to this file.
    #[arg(long)]
    dot: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CheckArgs {
    program: PathBuf,
    abstraction: PathBuf,
    preds: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct FitArgs {
    program: PathBuf,
    preds: PathBuf,
    #[arg(long, value_enum, default_value = "structural")]
    invariants: InvArg,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

fn positive(s: &str) -> Result<u128, String> {
    match s.parse::<u128>() {
        Ok(0) => Err("cap must be positive".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn param_policy(s: &str) -> Result<ParamPolicy, String> {
    match s {
        "symbolic" => Ok(ParamPolicy::Symbolic),
        "fit" => Ok(ParamPolicy::Fitted),
        _ => {
            let r = s.strip_prefix("fixed=").ok_or_else(|| format!("expected symbolic, fixed=<r> or fit, got `{s}`"))?;
            let v = rational::parse(r).ok_or_else(|| format!("`{r}` is not a rational"))?;
            if !rational::is_probability(&v) {
                return Err(format!("{r} is outside [0, 1]"));
            }
            Ok(ParamPolicy::Fixed(v))
        }
    }
}

enum Fail {
    Check,
    Input(anyhow::Error),
    Query(anyhow::Error),
}

impl From<anyhow::Error> for Fail {
    fn from(e: anyhow::Error) -> Self {
        Fail::Input(e)
    }
}

fn is_input_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Syntax(_)
            | Error::UndeclaredVariable(_)
            | Error::DuplicateVariable(_)
            | Error::Unsupported(_)
            | Error::InvalidDeclaration(_)
            | Error::MixedMode
            | Error::DuplicateTarget(_)
            | Error::TooManyPredicates(..)
            | Error::DuplicateLabel(_)
            | Error::MissingPredicateVariable(_)
            | Error::Config(_)
            | Error::UnknownPoint(_)
            | Error::ParameterRange(_)
    )
}

/// Input errors exit 2, everything else counts as a query error.
fn classify(e: Error, what: &str) -> Fail {
    if is_input_error(&e) {
        Fail::Input(anyhow!(e).context(what.to_string()))
    } else {
        Fail::Query(anyhow!(e).context(what.to_string()))
    }
}

fn input<T>(r: probabs_core::Result<T>, what: impl FnOnce() -> String) -> Result<T, Fail> {
    r.map_err(|e| Fail::Input(anyhow!(e).context(what())))
}

fn read(path: &Path) -> Result<String, Fail> {
    Ok(fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?)
}

fn load_concrete(path: &Path) -> Result<ConcreteProgram, Fail> {
    input(parse_concrete(&read(path)?), || format!("in {}", path.display()))
}

fn load_preds(path: &Path, c: &ConcreteProgram) -> Result<PredicateList, Fail> {
    input(PredicateList::parse(&read(path)?, &c.decls), || format!("in {}", path.display()))
}

fn load_bern(path: &Path) -> Result<BernProgram, Fail> {
    input(parse_bern(&read(path)?), || format!("in {}", path.display()))
}

fn emit(json: bool, value: &Value, text: &str) {
    if json {
        println!("{}", serde_json::to_string_pretty(value).expect("json"));
    } else {
        print!("{text}");
    }
}

fn abstraction_json(abs: &Abstraction, preds: &PredicateList) -> Value {
    json!({
        "program": abs.program.to_string(),
        "mode": match abs.program.mode { Mode::Probabilistic => "prob", Mode::Nondeterministic => "nondet" },
        "sites": abs.sites.to_json(preds),
    })
}

fn cmd_abstract(a: AbstractArgs) -> Result<(), Fail> {
    let c = load_concrete(&a.program)?;
    let preds = load_preds(&a.preds, &c)?;
    let ctx = TheoryContext::with_cap(c.decls.clone(), a.common.cap);
    let cfg = match a.mode {
        ModeArg::Nondet => AbstractionConfig::nondeterministic(),
        ModeArg::Prob => AbstractionConfig::probabilistic(a.params.clone()),
    };
    let cfg = match a.invariants {
        Some(s) => cfg.with_invariants(s.into()),
        None => cfg,
    };
    let cfg = AbstractionConfig { params: a.params, ..cfg };
    let abs = abstract_program(&ctx, &c, &preds, &cfg).map_err(|e| classify(e, "abstraction failed"))?;
    if let Some(path) = &a.sites {
        let table = serde_json::to_string_pretty(&abs.sites.to_json(&preds)).expect("json");
        fs::write(path, table + "\n").with_context(|| format!("cannot write {}", path.display()))?;
    }
    emit(a.common.json, &abstraction_json(&abs, &preds), &abs.program.to_string());
    Ok(())
}

fn event_formula(p: &BernProgram, text: &str) -> Result<BoolFormula, Fail> {
    let e = input(parse_bern_expr(text, p), || format!("in event `{text}`"))?;
    let f = e
        .to_formula(&|v| VarId(v as u32), &|_| Err(Error::Unsupported("flip inside an event".into())))
        .map_err(|e| Fail::Input(anyhow!(e).context(format!("in event `{text}`"))))?;
    Ok(f)
}

fn bind_symbols(p: &BernProgram, policy: &ParamPolicy) -> Result<BernProgram, Fail> {
    let ParamPolicy::Fixed(v) = policy else {
        return Err(Fail::Input(anyhow!("infer accepts only --params fixed=<r>")));
    };
    let mut q = p.clone();
    q.walk_exprs_mut(&mut |e| {
        if let BernExpr::Flip { param: param @ Param::Symbol(_), .. } = e {
            *param = Param::Value(v.clone());
        }
    });
    Ok(q)
}

fn show(p: &Prob) -> String {
    rational::format(p)
}

fn cmd_infer(a: InferArgs) -> Result<(), Fail> {
    let mut p = load_bern(&a.program)?;
    if let Some(policy) = &a.params {
        p = bind_symbols(&p, policy)?;
    }
    let event = event_formula(&p, &a.event)?;
    let point = input(p.point(&a.point), || "bad --point".into())?;
    let mut run = run_symbolic(&p, &BoolFormula::TRUE).map_err(|e| classify(e, "inference failed"))?;
    if let Some(path) = &a.dot {
        let dot = run.engine.mgr.to_dot(run.points[point]).map_err(|e| classify(e, "dot export failed"))?;
        fs::write(path, dot).with_context(|| format!("cannot write {}", path.display()))?;
    }
    let r = if a.unnormalized { run.query_unnormalized(&event, point) } else { run.query(&event, point) };
    let mut r = r.map_err(|e| classify(e, "query failed"))?;
    r.event = a.event.trim().to_string();
    r.point = a.point.trim().to_string();
    let text = format!("Pr[{} @ {}] = {}  (survival {})\n", r.event, r.point, show(&r.probability), show(&r.survival));
    emit(a.json, &r.to_json(), &text);
    Ok(())
}

fn cmd_check(a: CheckArgs) -> Result<(), Fail> {
    let c = load_concrete(&a.program)?;
    let abs = load_bern(&a.abstraction)?;
    let preds = load_preds(&a.preds, &c)?;
    let rep = match abs.mode {
        Mode::Probabilistic => check_sound_prob(&c, &abs, &preds, a.common.cap),
        Mode::Nondeterministic => check_sound_nondet(&c, &abs, &preds, a.common.cap),
    };
    let rep = rep.map_err(|e| classify(e, "check failed to run"))?;
    let mut text = format!("{}: {}\n", rep.check, if rep.passed { "pass" } else { "fail" });
    for cx in rep.counterexamples.iter().take(10) {
        text.push_str(&format!("  z = {}: abstraction misses {:?}\n", cx.z.show(&c.decls), cx.expected));
    }
    emit(a.common.json, &rep.to_json(&c), &text);
    if rep.passed {
        Ok(())
    } else {
        Err(Fail::Check)
    }
}

fn cmd_fit(a: FitArgs) -> Result<(), Fail> {
    let c = load_concrete(&a.program)?;
    let preds = load_preds(&a.preds, &c)?;
    let ctx = TheoryContext::with_cap(c.decls.clone(), a.common.cap);
    let cfg = AbstractionConfig::probabilistic(ParamPolicy::Symbolic).with_invariants(a.invariants.into());
    let mut abs = abstract_program(&ctx, &c, &preds, &cfg).map_err(|e| classify(e, "abstraction failed"))?;
    let from = ConcreteDistribution::point(c.initial_state());
    let fit = fit_parameters(&ctx, &c, &preds, &mut abs, &from).map_err(|e| classify(e, "fitting failed"))?;
    for s in fit.defaulted() {
        eprintln!("warning: flip site {s} has a zero-mass context; theta defaulted to 1/2");
    }
    let mut out = abstraction_json(&abs, &preds);
    out["fit"] = fit.to_json();
    emit(a.common.json, &out, &abs.program.to_string());
    Ok(())
}

fn cmd_selftest(a: SelftestArgs) -> Result<(), Fail> {
    let results = suites::all(a.seed);
    let ok = results.iter().all(|s| s.passed());
    if a.json {
        let v = json!({"seed": a.seed, "status": if ok { "pass" } else { "fail" }, "suites": results.iter().map(|s| s.to_json()).collect::<Vec<_>>()});
        emit(true, &v, "");
    } else {
        for s in &results {
            println!(
                "{:<20} {}  {} cases, {} skipped, {} failures  {:.2}s",
                s.name,
                if s.passed() { "pass" } else { "FAIL" },
                s.cases,
                s.skipped,
                s.failures.len(),
                s.elapsed.as_secs_f64()
            );
            if let Some(f) = s.failures.first() {
                println!("{f}");
            }
        }
    }
    if ok {
        Ok(())
    } else {
        Err(Fail::Check)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let res = match cli.cmd {
        Cmd::Abstract(a) => cmd_abstract(a),
        Cmd::Infer(a) => cmd_infer(a),
        Cmd::Check(a) => cmd_check(a),
        Cmd::Fit(a) => cmd_fit(a),
        Cmd::Selftest(a) => cmd_selftest(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Check) => ExitCode::from(1),
        Err(Fail::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Fail::Query(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
