use std::collections::BTreeSet;
use std::fmt;

/// Index into [`ConcreteProgram::decls`].
pub type VarIdx = usize;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VarDecl {
    pub name: String,
    /// Inclusive lower bound.
    pub lo: i64,
    /// Exclusive upper bound.
    pub hi: i64,
}

impl VarDecl {
    pub fn size(&self) -> u128 {
        (self.hi - self.lo) as u128
    }

    pub fn contains(&self, v: i64) -> bool {
        self.lo <= v && v < self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IntExpr {
    Const(i64),
    Var(VarIdx),
    Add(Box<IntExpr>, Box<IntExpr>),
    Sub(Box<IntExpr>, Box<IntExpr>),
    /// Multiplication by a constant.
    Scale(i64, Box<IntExpr>),
}

impl IntExpr {
    pub fn eval(&self, state: &[i64]) -> i64 {
        match self {
            IntExpr::Const(c) => *c,
            IntExpr::Var(v) => state[*v],
            IntExpr::Add(a, b) => a.eval(state) + b.eval(state),
            IntExpr::Sub(a, b) => a.eval(state) - b.eval(state),
            IntExpr::Scale(k, a) => k * a.eval(state),
        }
    }

    pub fn substitute(&self, var: VarIdx, replacement: &IntExpr) -> IntExpr {
        match self {
            IntExpr::Var(v) if *v == var => replacement.clone(),
            IntExpr::Const(_) | IntExpr::Var(_) => self.clone(),
            IntExpr::Add(a, b) => IntExpr::Add(
                Box::new(a.substitute(var, replacement)),
                Box::new(b.substitute(var, replacement)),
            ),
            IntExpr::Sub(a, b) => IntExpr::Sub(
                Box::new(a.substitute(var, replacement)),
                Box::new(b.substitute(var, replacement)),
            ),
            IntExpr::Scale(k, a) => IntExpr::Scale(*k, Box::new(a.substitute(var, replacement))),
        }
    }

    fn collect_vars(&self, out: &mut BTreeSet<VarIdx>) {
        match self {
            IntExpr::Const(_) => {}
            IntExpr::Var(v) => {
                out.insert(*v);
            }
            IntExpr::Add(a, b) | IntExpr::Sub(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            IntExpr::Scale(_, a) => a.collect_vars(out),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ne,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn holds(self, a: i64, b: i64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cond {
    Const(bool),
    Cmp(CmpOp, IntExpr, IntExpr),
    Not(Box<Cond>),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
}

impl Cond {
    pub fn cmp(op: CmpOp, a: IntExpr, b: IntExpr) -> Cond {
        Cond::Cmp(op, a, b)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(c: Cond) -> Cond {
        match c {
            Cond::Const(b) => Cond::Const(!b),
            Cond::Not(inner) => *inner,
            other => Cond::Not(Box::new(other)),
        }
    }

    pub fn and(a: Cond, b: Cond) -> Cond {
        match (a, b) {
            (Cond::Const(false), _) | (_, Cond::Const(false)) => Cond::Const(false),
            (Cond::Const(true), x) | (x, Cond::Const(true)) => x,
            (a, b) => Cond::And(Box::new(a), Box::new(b)),
        }
    }

    pub fn or(a: Cond, b: Cond) -> Cond {
        match (a, b) {
            (Cond::Const(true), _) | (_, Cond::Const(true)) => Cond::Const(true),
            (Cond::Const(false), x) | (x, Cond::Const(false)) => x,
            (a, b) => Cond::Or(Box::new(a), Box::new(b)),
        }
    }

    pub fn conj(items: impl IntoIterator<Item = Cond>) -> Cond {
        items.into_iter().fold(Cond::Const(true), Cond::and)
    }

    pub fn eval(&self, state: &[i64]) -> bool {
        match self {
            Cond::Const(b) => *b,
            Cond::Cmp(op, a, b) => op.holds(a.eval(state), b.eval(state)),
            Cond::Not(c) => !c.eval(state),
            Cond::And(a, b) => a.eval(state) && b.eval(state),
            Cond::Or(a, b) => a.eval(state) || b.eval(state),
        }
    }

    /// Replaces `var` by `replacement` everywhere.
    pub fn substitute(&self, var: VarIdx, replacement: &IntExpr) -> Cond {
        match self {
            Cond::Const(b) => Cond::Const(*b),
            Cond::Cmp(op, a, b) => Cond::Cmp(*op, a.substitute(var, replacement), b.substitute(var, replacement)),
            Cond::Not(c) => Cond::Not(Box::new(c.substitute(var, replacement))),
            Cond::And(a, b) => Cond::And(
                Box::new(a.substitute(var, replacement)),
                Box::new(b.substitute(var, replacement)),
            ),
            Cond::Or(a, b) => Cond::Or(
                Box::new(a.substitute(var, replacement)),
                Box::new(b.substitute(var, replacement)),
            ),
        }
    }

    pub fn vars(&self) -> BTreeSet<VarIdx> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<VarIdx>) {
        match self {
            Cond::Const(_) => {}
            Cond::Cmp(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Cond::Not(c) => c.collect_vars(out),
            Cond::And(a, b) | Cond::Or(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn mentions(&self, var: VarIdx) -> bool {
        self.vars().contains(&var)
    }

    /// Renders with the variable names of `decls`.
    pub fn show<'a>(&'a self, decls: &'a [VarDecl]) -> impl fmt::Display + 'a {
        Shown { item: Item::Cond(self), decls }
    }
}

impl IntExpr {
    pub fn show<'a>(&'a self, decls: &'a [VarDecl]) -> impl fmt::Display + 'a {
        Shown { item: Item::Expr(self), decls }
    }
}

enum Item<'a> {
    Cond(&'a Cond),
    Expr(&'a IntExpr),
}

struct Shown<'a> {
    item: Item<'a>,
    decls: &'a [VarDecl],
}

impl Shown<'_> {
    fn expr_prec(e: &IntExpr) -> u8 {
        match e {
            IntExpr::Const(c) if *c < 0 => 2,
            IntExpr::Const(_) | IntExpr::Var(_) => 3,
            IntExpr::Scale(..) => 2,
            IntExpr::Add(..) | IntExpr::Sub(..) => 1,
        }
    }

    fn expr(&self, e: &IntExpr, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let p = Self::expr_prec(e);
        if p < min {
            f.write_str("(")?;
        }
        match e {
            IntExpr::Const(c) => write!(f, "{c}")?,
            IntExpr::Var(v) => f.write_str(&self.decls[*v].name)?,
            IntExpr::Add(a, b) => {
                self.expr(a, f, 1)?;
                f.write_str(" + ")?;
                self.expr(b, f, 2)?;
            }
            IntExpr::Sub(a, b) => {
                self.expr(a, f, 1)?;
                f.write_str(" - ")?;
                self.expr(b, f, 2)?;
            }
            IntExpr::Scale(k, a) => {
                if *k < 0 {
                    write!(f, "({k})")?;
                } else {
                    write!(f, "{k}")?;
                }
                f.write_str(" * ")?;
                self.expr(a, f, 3)?;
            }
        }
        if p < min {
            f.write_str(")")?;
        }
        Ok(())
    }

    fn cond_prec(c: &Cond) -> u8 {
        match c {
            Cond::Or(..) => 1,
            Cond::And(..) => 2,
            _ => 3,
        }
    }

    fn cond(&self, c: &Cond, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let p = Self::cond_prec(c);
        if p < min {
            f.write_str("(")?;
        }
        match c {
            Cond::Const(true) => f.write_str("true")?,
            Cond::Const(false) => f.write_str("false")?,
            Cond::Cmp(op, a, b) => {
                self.expr(a, f, 1)?;
                write!(f, " {} ", op.symbol())?;
                self.expr(b, f, 1)?;
            }
            Cond::Not(inner) => {
                f.write_str("!(")?;
                self.cond(inner, f, 0)?;
                f.write_str(")")?;
            }
            Cond::And(a, b) => {
                self.cond(a, f, 2)?;
                f.write_str(" && ")?;
                self.cond(b, f, 2)?;
            }
            Cond::Or(a, b) => {
                self.cond(a, f, 1)?;
                f.write_str(" || ")?;
                self.cond(b, f, 1)?;
            }
        }
        if p < min {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Shown<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.item {
            Item::Cond(c) => self.cond(c, f, 0),
            Item::Expr(e) => self.expr(e, f, 0),
        }
    }
}

#[derive(Debug, Clone, Eq)]
pub struct Stmt {
    /// Pre-order index within the program, starting at 0.
    pub id: usize,
    /// Source line (1-based), or 0 for synthesized statements.
    pub line: usize,
    pub kind: StmtKind,
}

/// Statements compare by id and shape; source lines are ignored.
impl PartialEq for Stmt {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && self.kind == other.kind
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Assign(VarIdx, IntExpr),
    /// Uniform draw over the integers `lo..hi`.
    Uniform(VarIdx, i64, i64),
    Observe(Cond),
    If(Cond, Vec<Stmt>, Vec<Stmt>),
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Self {
        Stmt { id: 0, line: 0, kind }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConcreteProgram {
    pub decls: Vec<VarDecl>,
    pub body: Vec<Stmt>,
}

/// Total assignment of the declared variables, in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConcreteState(pub Vec<i64>);

impl ConcreteState {
    pub fn values(&self) -> &[i64] {
        &self.0
    }

    pub fn show(&self, decls: &[VarDecl]) -> String {
        decls
            .iter()
            .zip(&self.0)
            .map(|(d, v)| format!("{}={}", d.name, v))
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl ConcreteProgram {
    /// Builds a program and numbers its statements in pre-order.
    pub fn new(decls: Vec<VarDecl>, body: Vec<Stmt>) -> Self {
        let mut p = ConcreteProgram { decls, body };
        p.renumber();
        p
    }

    pub fn renumber(&mut self) {
        fn go(stmts: &mut [Stmt], next: &mut usize) {
            for s in stmts {
                s.id = *next;
                *next += 1;
                if let StmtKind::If(_, a, b) = &mut s.kind {
                    go(a, next);
                    go(b, next);
                }
            }
        }
        let mut next = 0;
        go(&mut self.body, &mut next);
    }

    pub fn var_index(&self, name: &str) -> Option<VarIdx> {
        self.decls.iter().position(|d| d.name == name)
    }

    /// Size of the joint state space.
    pub fn joint_size(&self) -> u128 {
        self.decls.iter().fold(1u128, |acc, d| acc.saturating_mul(d.size()))
    }

    /// All joint states in lexicographic order.
    pub fn states(&self) -> impl Iterator<Item = ConcreteState> + '_ {
        states_of(&self.decls)
    }

    /// Each variable at 0 when its range contains 0, otherwise at its lower bound.
    pub fn initial_state(&self) -> ConcreteState {
        ConcreteState(
            self.decls
                .iter()
                .map(|d| if d.contains(0) { 0 } else { d.lo })
                .collect(),
        )
    }

    pub fn is_deterministic(&self) -> bool {
        fn go(stmts: &[Stmt]) -> bool {
            stmts.iter().all(|s| match &s.kind {
                StmtKind::Uniform(..) => false,
                StmtKind::If(_, a, b) => go(a) && go(b),
                _ => true,
            })
        }
        go(&self.body)
    }

    pub fn stmt(&self, id: usize) -> Option<&Stmt> {
        fn go(stmts: &[Stmt], id: usize) -> Option<&Stmt> {
            for s in stmts {
                if s.id == id {
                    return Some(s);
                }
                if let StmtKind::If(_, a, b) = &s.kind {
                    if let Some(found) = go(a, id).or_else(|| go(b, id)) {
                        return Some(found);
                    }
                }
            }
            None
        }
        go(&self.body, id)
    }

    pub fn stmt_count(&self) -> usize {
        fn go(stmts: &[Stmt]) -> usize {
            stmts
                .iter()
                .map(|s| match &s.kind {
                    StmtKind::If(_, a, b) => 1 + go(a) + go(b),
                    _ => 1,
                })
                .sum()
        }
        go(&self.body)
    }
}

/// Enumerates the joint states of `decls` (over a subset of variables when
/// only some declarations are passed).
pub fn states_of(decls: &[VarDecl]) -> impl Iterator<Item = ConcreteState> + '_ {
    let empty = decls.iter().any(|d| d.lo >= d.hi);
    let mut current: Option<Vec<i64>> = if empty {
        None
    } else {
        Some(decls.iter().map(|d| d.lo).collect())
    };
    std::iter::from_fn(move || {
        let out = current.clone()?;
        let mut next = out.clone();
        let mut i = decls.len();
        loop {
            if i == 0 {
                current = None;
                break;
            }
            i -= 1;
            next[i] += 1;
            if next[i] < decls[i].hi {
                current = Some(next);
                break;
            }
            next[i] = decls[i].lo;
        }
        Some(ConcreteState(out))
    })
}

impl fmt::Display for ConcreteProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.decls {
            writeln!(f, "var {} in [{}, {})", d.name, d.lo, d.hi)?;
        }
        write_block(f, &self.body, &self.decls, 0)
    }
}

fn write_block(f: &mut fmt::Formatter<'_>, stmts: &[Stmt], decls: &[VarDecl], depth: usize) -> fmt::Result {
    let pad = "  ".repeat(depth);
    for s in stmts {
        match &s.kind {
            StmtKind::Assign(v, e) => writeln!(f, "{pad}{} = {}", decls[*v].name, e.show(decls))?,
            StmtKind::Uniform(v, lo, hi) => writeln!(f, "{pad}{} = unif [{lo}, {hi})", decls[*v].name)?,
            StmtKind::Observe(c) => writeln!(f, "{pad}observe({})", c.show(decls))?,
            StmtKind::If(c, a, b) => {
                writeln!(f, "{pad}if ({}) {{", c.show(decls))?;
                write_block(f, a, decls, depth + 1)?;
                if b.is_empty() {
                    writeln!(f, "{pad}}}")?;
                } else {
                    writeln!(f, "{pad}}} else {{")?;
                    write_block(f, b, decls, depth + 1)?;
                    writeln!(f, "{pad}}}")?;
                }
            }
        }
    }
    Ok(())
}
