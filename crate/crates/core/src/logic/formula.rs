use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

/// Index of a Boolean variable inside one variable universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct VarId(pub u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarKind {
    Predicate,
    Flip,
    Auxiliary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BoolVar {
    pub id: VarId,
    pub kind: VarKind,
    pub label: String,
}

/// Propositional formula over [`VarId`]s.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoolFormula {
    Const(bool),
    Var(VarId),
    Not(Box<BoolFormula>),
    And(Box<BoolFormula>, Box<BoolFormula>),
    Or(Box<BoolFormula>, Box<BoolFormula>),
    Implies(Box<BoolFormula>, Box<BoolFormula>),
    Iff(Box<BoolFormula>, Box<BoolFormula>),
}

impl BoolFormula {
    pub const TRUE: BoolFormula = BoolFormula::Const(true);
    pub const FALSE: BoolFormula = BoolFormula::Const(false);

    pub fn var(id: u32) -> Self {
        BoolFormula::Var(VarId(id))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: BoolFormula) -> Self {
        match f {
            BoolFormula::Const(b) => BoolFormula::Const(!b),
            BoolFormula::Not(inner) => *inner,
            other => BoolFormula::Not(Box::new(other)),
        }
    }

    pub fn and(a: BoolFormula, b: BoolFormula) -> Self {
        match (a, b) {
            (BoolFormula::Const(false), _) | (_, BoolFormula::Const(false)) => BoolFormula::FALSE,
            (BoolFormula::Const(true), x) | (x, BoolFormula::Const(true)) => x,
            (a, b) => BoolFormula::And(Box::new(a), Box::new(b)),
        }
    }

    pub fn or(a: BoolFormula, b: BoolFormula) -> Self {
        match (a, b) {
            (BoolFormula::Const(true), _) | (_, BoolFormula::Const(true)) => BoolFormula::TRUE,
            (BoolFormula::Const(false), x) | (x, BoolFormula::Const(false)) => x,
            (a, b) => BoolFormula::Or(Box::new(a), Box::new(b)),
        }
    }

    pub fn implies(a: BoolFormula, b: BoolFormula) -> Self {
        BoolFormula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: BoolFormula, b: BoolFormula) -> Self {
        BoolFormula::Iff(Box::new(a), Box::new(b))
    }

    pub fn conj(items: impl IntoIterator<Item = BoolFormula>) -> Self {
        items.into_iter().fold(BoolFormula::TRUE, BoolFormula::and)
    }

    pub fn disj(items: impl IntoIterator<Item = BoolFormula>) -> Self {
        items.into_iter().fold(BoolFormula::FALSE, BoolFormula::or)
    }

    /// Conjunction of literals: `bits[i]` gives the polarity of `vars[i]`.
    pub fn cube(vars: &[VarId], bits: &[bool]) -> Self {
        BoolFormula::conj(vars.iter().zip(bits).map(|(&v, &b)| {
            if b {
                BoolFormula::Var(v)
            } else {
                BoolFormula::not(BoolFormula::Var(v))
            }
        }))
    }

    pub fn eval(&self, value: &impl Fn(VarId) -> bool) -> bool {
        match self {
            BoolFormula::Const(b) => *b,
            BoolFormula::Var(v) => value(*v),
            BoolFormula::Not(a) => !a.eval(value),
            BoolFormula::And(a, b) => a.eval(value) && b.eval(value),
            BoolFormula::Or(a, b) => a.eval(value) || b.eval(value),
            BoolFormula::Implies(a, b) => !a.eval(value) || b.eval(value),
            BoolFormula::Iff(a, b) => a.eval(value) == b.eval(value),
        }
    }

    pub fn vars(&self) -> BTreeSet<VarId> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<VarId>) {
        match self {
            BoolFormula::Const(_) => {}
            BoolFormula::Var(v) => {
                out.insert(*v);
            }
            BoolFormula::Not(a) => a.collect_vars(out),
            BoolFormula::And(a, b)
            | BoolFormula::Or(a, b)
            | BoolFormula::Implies(a, b)
            | BoolFormula::Iff(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn map_vars(&self, f: &impl Fn(VarId) -> VarId) -> BoolFormula {
        self.substitute(&|v| BoolFormula::Var(f(v)))
    }

    /// Replaces every variable by a formula.
    pub fn substitute(&self, f: &impl Fn(VarId) -> BoolFormula) -> BoolFormula {
        let bin = |a: &BoolFormula, b: &BoolFormula| (Box::new(a.substitute(f)), Box::new(b.substitute(f)));
        match self {
            BoolFormula::Const(b) => BoolFormula::Const(*b),
            BoolFormula::Var(v) => f(*v),
            BoolFormula::Not(a) => BoolFormula::Not(Box::new(a.substitute(f))),
            BoolFormula::And(a, b) => {
                let (a, b) = bin(a, b);
                BoolFormula::And(a, b)
            }
            BoolFormula::Or(a, b) => {
                let (a, b) = bin(a, b);
                BoolFormula::Or(a, b)
            }
            BoolFormula::Implies(a, b) => {
                let (a, b) = bin(a, b);
                BoolFormula::Implies(a, b)
            }
            BoolFormula::Iff(a, b) => {
                let (a, b) = bin(a, b);
                BoolFormula::Iff(a, b)
            }
        }
    }

    /// Renders with a label function, e.g. `{x<3} && !{x<-4}`.
    pub fn display_with<'a>(&'a self, label: &'a dyn Fn(VarId) -> String) -> impl fmt::Display + 'a {
        Labeled { formula: self, label }
    }
}

struct Labeled<'a> {
    formula: &'a BoolFormula,
    label: &'a dyn Fn(VarId) -> String,
}

impl Labeled<'_> {
    fn prec(f: &BoolFormula) -> u8 {
        match f {
            BoolFormula::Const(_) | BoolFormula::Var(_) | BoolFormula::Not(_) => 4,
            BoolFormula::And(..) => 3,
            BoolFormula::Or(..) => 2,
            BoolFormula::Implies(..) | BoolFormula::Iff(..) => 1,
        }
    }

    fn write(&self, f: &BoolFormula, out: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let p = Self::prec(f);
        if p < min {
            out.write_str("(")?;
        }
        match f {
            BoolFormula::Const(true) => out.write_str("T")?,
            BoolFormula::Const(false) => out.write_str("F")?,
            BoolFormula::Var(v) => out.write_str(&(self.label)(*v))?,
            BoolFormula::Not(a) => {
                out.write_str("!")?;
                self.write(a, out, 4)?;
            }
            BoolFormula::And(a, b) => {
                self.write(a, out, 3)?;
                out.write_str(" && ")?;
                self.write(b, out, 3)?;
            }
            BoolFormula::Or(a, b) => {
                self.write(a, out, 2)?;
                out.write_str(" || ")?;
                self.write(b, out, 2)?;
            }
            BoolFormula::Implies(a, b) => {
                self.write(a, out, 2)?;
                out.write_str(" => ")?;
                self.write(b, out, 2)?;
            }
            BoolFormula::Iff(a, b) => {
                self.write(a, out, 2)?;
                out.write_str(" <=> ")?;
                self.write(b, out, 2)?;
            }
        }
        if p < min {
            out.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Labeled<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.formula, f, 0)
    }
}

impl fmt::Display for BoolFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = |v: VarId| format!("v{}", v.0);
        let shown = Labeled { formula: self, label: &label };
        write!(f, "{shown}")
    }
}
