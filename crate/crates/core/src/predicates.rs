//! Predicate domains: abstraction, concretization and the two formula
//! approximation operators over minterms.

use std::collections::BTreeSet;

use crate::concrete::{parse_cond, ConcreteState, Cond, VarDecl};
use crate::error::{Error, Result, SyntaxError};
use crate::logic::{BoolFormula, VarId};
use crate::theory::TheoryContext;

pub const DEFAULT_MAX_PREDICATES: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Predicate {
    /// Display label without braces, e.g. `x<3`.
    pub label: String,
    pub cond: Cond,
}

impl Predicate {
    /// The Boolean variable name, e.g. `{x<3}`.
    pub fn var_name(&self) -> String {
        format!("{{{}}}", self.label)
    }
}

/// Truth assignment to the predicates, index-aligned with the list.
pub type AbstractState = Vec<bool>;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PredicateList {
    preds: Vec<Predicate>,
}

fn normalize_label(text: &str) -> String {
    text.chars().filter(|c| !c.is_whitespace()).collect()
}

impl PredicateList {
    pub fn new(preds: Vec<Predicate>) -> Result<Self> {
        Self::with_limit(preds, DEFAULT_MAX_PREDICATES)
    }

    pub fn with_limit(preds: Vec<Predicate>, limit: usize) -> Result<Self> {
        if preds.len() > limit {
            return Err(Error::TooManyPredicates(preds.len(), limit));
        }
        let mut seen = BTreeSet::new();
        for p in &preds {
            if p.label.is_empty() || p.label.contains(['{', '}']) {
                return Err(Error::InvalidDeclaration(format!("bad predicate label `{}`", p.label)));
            }
            if !seen.insert(p.label.clone()) {
                return Err(Error::DuplicateLabel(p.label.clone()));
            }
        }
        Ok(PredicateList { preds })
    }

    /// Builds predicates from condition texts, labelling each by its text.
    pub fn from_conds(texts: &[&str], decls: &[VarDecl]) -> Result<Self> {
        let preds = texts
            .iter()
            .map(|t| Ok(Predicate { label: normalize_label(t), cond: parse_cond(t, decls)? }))
            .collect::<Result<Vec<_>>>()?;
        Self::new(preds)
    }

    /// Parses the `.preds` format: one `label: cond` per line, `#` comments.
    /// A line without a colon uses the condition text as its label.
    pub fn parse(text: &str, decls: &[VarDecl]) -> Result<Self> {
        let mut preds = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (label, cond) = match line.split_once(':') {
                Some((l, c)) => (normalize_label(l), c.trim()),
                None => (normalize_label(line), line),
            };
            let cond = parse_cond(cond, decls).map_err(|e| match e {
                Error::Syntax(s) => Error::Syntax(SyntaxError::new(n + 1, s.location.column, s.message)),
                other => other,
            })?;
            preds.push(Predicate { label, cond });
        }
        Self::new(preds)
    }

    pub fn len(&self) -> usize {
        self.preds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.preds.is_empty()
    }

    pub fn get(&self, i: usize) -> &Predicate {
        &self.preds[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Predicate> {
        self.preds.iter()
    }

    pub fn labels(&self) -> Vec<String> {
        self.preds.iter().map(|p| p.label.clone()).collect()
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.preds.iter().position(|p| p.label == label)
    }

    /// Predicate variables `VarId(0..n)`.
    pub fn var_ids(&self) -> Vec<VarId> {
        (0..self.len() as u32).map(VarId).collect()
    }

    /// Serializes in the `.preds` format.
    pub fn to_text(&self, decls: &[VarDecl]) -> String {
        self.preds
            .iter()
            .map(|p| format!("{}: {}\n", p.label, p.cond.show(decls)))
            .collect()
    }

    /// The condition of a full minterm, bit `i` giving predicate `i`.
    pub fn minterm_cond(&self, bits: &[bool]) -> Cond {
        Cond::conj(self.preds.iter().zip(bits).map(|(p, &b)| {
            if b {
                p.cond.clone()
            } else {
                Cond::not(p.cond.clone())
            }
        }))
    }

    /// All `2^n` abstract states, in index order.
    pub fn minterms(&self) -> impl Iterator<Item = AbstractState> + '_ {
        (0u32..1 << self.len()).map(move |m| bits_of(m, self.len()))
    }
}

pub fn bits_of(index: u32, n: usize) -> AbstractState {
    (0..n).map(|i| index >> i & 1 == 1).collect()
}

pub fn index_of(bits: &[bool]) -> u32 {
    bits.iter().enumerate().fold(0, |acc, (i, &b)| acc | (b as u32) << i)
}

pub fn cube_formula(bits: &[bool]) -> BoolFormula {
    let vars: Vec<VarId> = (0..bits.len() as u32).map(VarId).collect();
    BoolFormula::cube(&vars, bits)
}

pub fn alpha(preds: &PredicateList, z: &ConcreteState) -> AbstractState {
    preds.iter().map(|p| p.cond.eval(z.values())).collect()
}

/// Every concrete state whose abstraction is `a`.
pub fn gamma_lower(ctx: &TheoryContext, preds: &PredicateList, a: &[bool]) -> Result<Vec<ConcreteState>> {
    let decls = ctx.decls();
    let needed = decls.iter().fold(1u128, |acc, d| acc.saturating_mul(d.size()));
    if needed > ctx.cap() {
        return Err(Error::CapExceeded { needed, cap: ctx.cap() });
    }
    Ok(crate::concrete::states_of(decls).filter(|z| alpha(preds, z) == a).collect())
}

pub fn feasible(ctx: &TheoryContext, preds: &PredicateList, bits: &[bool]) -> Result<bool> {
    ctx.satisfiable(&preds.minterm_cond(bits))
}

pub fn feasible_minterms(ctx: &TheoryContext, preds: &PredicateList) -> Result<Vec<AbstractState>> {
    let mut out = Vec::new();
    for m in preds.minterms() {
        if feasible(ctx, preds, &m)? {
            out.push(m);
        }
    }
    Ok(out)
}

/// Disjunction of the minterms consistent with `c`.
pub fn strongest_implied(ctx: &TheoryContext, preds: &PredicateList, c: &Cond) -> Result<BoolFormula> {
    let mut out = Vec::new();
    for m in preds.minterms() {
        if ctx.satisfiable(&Cond::and(preds.minterm_cond(&m), c.clone()))? {
            out.push(cube_formula(&m));
        }
    }
    Ok(BoolFormula::disj(out))
}

/// Disjunction of the feasible minterms that guarantee `target`.
pub fn weakest_sufficient(ctx: &TheoryContext, preds: &PredicateList, target: &Cond) -> Result<BoolFormula> {
    let mut out = Vec::new();
    for m in feasible_minterms(ctx, preds)? {
        if ctx.entails(&preds.minterm_cond(&m), target)? {
            out.push(cube_formula(&m));
        }
    }
    Ok(BoolFormula::disj(out))
}

/// The disjunction of all feasible minterms.
pub fn invariant_formula(ctx: &TheoryContext, preds: &PredicateList) -> Result<BoolFormula> {
    Ok(BoolFormula::disj(feasible_minterms(ctx, preds)?.iter().map(|m| cube_formula(m))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{BddManager, VarKind};

    fn setup(lo: i64, hi: i64, preds: &[&str]) -> (TheoryContext, PredicateList) {
        let decls = vec![VarDecl { name: "x".into(), lo, hi }];
        let p = PredicateList::from_conds(preds, &decls).unwrap();
        (TheoryContext::new(decls), p)
    }

    fn equiv(n: usize, a: &BoolFormula, b: &BoolFormula) -> bool {
        let mut m = BddManager::with_vars((0..n).map(|i| (VarKind::Predicate, format!("p{i}"))));
        let (x, y) = (m.build(a).unwrap(), m.build(b).unwrap());
        x == y
    }

    fn parse(t: &TheoryContext, s: &str) -> Cond {
        parse_cond(s, t.decls()).unwrap()
    }

    #[test]
    fn alpha_and_gamma() {
        let (t, p) = setup(-2, 3, &["x < 0"]);
        assert_eq!(alpha(&p, &ConcreteState(vec![-1])), vec![true]);
        let cell = gamma_lower(&t, &p, &[true]).unwrap();
        assert_eq!(cell, vec![ConcreteState(vec![-2]), ConcreteState(vec![-1])]);
        let (t, p) = setup(-2, 3, &["x < -4", "x < 3"]);
        assert_eq!(alpha(&p, &ConcreteState(vec![0])), vec![false, true]);
        assert!(gamma_lower(&t, &p, &[true, false]).unwrap().is_empty());
        let (t, p) = setup(-2, 3, &[]);
        assert_eq!(alpha(&p, &ConcreteState(vec![0])), Vec::<bool>::new());
        assert_eq!(gamma_lower(&t, &p, &[]).unwrap().len(), 5);
    }

    #[test]
    fn branch_approximations() {
        let (t, p) = setup(-8, 8, &["x < -4", "x < 3"]);
        let x3 = BoolFormula::var(1);
        let x4 = BoolFormula::var(0);
        let si = strongest_implied(&t, &p, &parse(&t, "x < 0")).unwrap();
        assert!(equiv(2, &si, &x3));
        let si = strongest_implied(&t, &p, &parse(&t, "!(x < 0)")).unwrap();
        assert!(equiv(2, &si, &BoolFormula::not(x4.clone())));
        assert_eq!(strongest_implied(&t, &p, &Cond::Const(false)).unwrap(), BoolFormula::FALSE);
    }

    #[test]
    fn assignment_approximations() {
        let (t, p) = setup(-8, 8, &["x < -4", "x < 3"]);
        let i = invariant_formula(&t, &p).unwrap();
        let ws = weakest_sufficient(&t, &p, &parse(&t, "x + 1 < 3")).unwrap();
        assert!(equiv(2, &BoolFormula::and(ws, i.clone()), &BoolFormula::and(BoolFormula::var(0), i.clone())));
        let ws = weakest_sufficient(&t, &p, &parse(&t, "!(x + 1 < 3)")).unwrap();
        let expected = BoolFormula::and(BoolFormula::not(BoolFormula::var(1)), i.clone());
        assert!(equiv(2, &BoolFormula::and(ws, i.clone()), &expected));
        let all = weakest_sufficient(&t, &p, &Cond::Const(true)).unwrap();
        assert!(equiv(2, &all, &invariant_formula(&t, &p).unwrap()));
    }

    #[test]
    fn invariants() {
        let (t, p) = setup(-8, 8, &["x < -4", "x < 3"]);
        let i = invariant_formula(&t, &p).unwrap();
        assert!(equiv(2, &i, &BoolFormula::implies(BoolFormula::var(0), BoolFormula::var(1))));
        let (t, p) = setup(-8, 8, &["x < 0"]);
        assert!(equiv(1, &invariant_formula(&t, &p).unwrap(), &BoolFormula::TRUE));
        let decls = vec![VarDecl { name: "x".into(), lo: -8, hi: 8 }];
        let p = PredicateList::new(vec![
            Predicate { label: "a".into(), cond: parse_cond("x < 0", &decls).unwrap() },
            Predicate { label: "b".into(), cond: parse_cond("x < 0", &decls).unwrap() },
        ])
        .unwrap();
        let t = TheoryContext::new(decls);
        assert!(equiv(2, &invariant_formula(&t, &p).unwrap(), &BoolFormula::iff(BoolFormula::var(0), BoolFormula::var(1))));
    }

    #[test]
    fn preds_file() {
        let decls = vec![VarDecl { name: "x".into(), lo: -8, hi: 8 }];
        let p = PredicateList::parse("# predicates\nx<-4: x < -4\nx < 3\n", &decls).unwrap();
        assert_eq!(p.labels(), vec!["x<-4", "x<3"]);
        assert_eq!(p.get(0).var_name(), "{x<-4}");
        assert_eq!(PredicateList::parse(&p.to_text(&decls), &decls).unwrap(), p);
        assert!(matches!(PredicateList::parse("a: x<1\na: x<2", &decls), Err(Error::DuplicateLabel(_))));
        let many: Vec<String> = (0..17).map(|i| format!("x < {i}")).collect();
        let refs: Vec<&str> = many.iter().map(|s| s.as_str()).collect();
        assert!(matches!(PredicateList::from_conds(&refs, &decls), Err(Error::TooManyPredicates(17, 16))));
    }
}
