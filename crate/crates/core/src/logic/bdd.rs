//! Reduced ordered binary decision diagrams over a single shared node store.
//!
//! Variable order is creation order: the variable with id `k` sits at level
//! `k`. Handles ([`Bdd`]) carry the id of the store that made them, and every
//! operation rejects handles from a different store.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::sync::atomic::{AtomicU32, Ordering};

use super::formula::{BoolFormula, BoolVar, VarId, VarKind};
use crate::error::{Error, Result};

static NEXT_STORE: AtomicU32 = AtomicU32::new(1);

const TERMINAL_LEVEL: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(u32);

impl NodeId {
    pub const FALSE: NodeId = NodeId(0);
    pub const TRUE: NodeId = NodeId(1);

    pub fn raw(self) -> u32 {
        self.0
    }
}

/// A handle to a node of one [`BddManager`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bdd {
    store: u32,
    node: NodeId,
}

impl Bdd {
    pub fn node(self) -> NodeId {
        self.node
    }

    pub fn is_true(self) -> bool {
        self.node == NodeId::TRUE
    }

    pub fn is_false(self) -> bool {
        self.node == NodeId::FALSE
    }

    pub fn is_const(self) -> bool {
        self.is_true() || self.is_false()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Node {
    level: u32,
    low: NodeId,
    high: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoolOp {
    And,
    Or,
    Xor,
    Implies,
    Iff,
}

impl BoolOp {
    fn eval(self, a: bool, b: bool) -> bool {
        match self {
            BoolOp::And => a && b,
            BoolOp::Or => a || b,
            BoolOp::Xor => a != b,
            BoolOp::Implies => !a || b,
            BoolOp::Iff => a == b,
        }
    }

    fn commutative(self) -> bool {
        !matches!(self, BoolOp::Implies)
    }
}

pub struct BddManager {
    store: u32,
    vars: Vec<BoolVar>,
    by_label: HashMap<String, VarId>,
    nodes: Vec<Node>,
    unique: HashMap<Node, NodeId>,
    apply_cache: HashMap<(BoolOp, NodeId, NodeId), NodeId>,
    not_cache: HashMap<NodeId, NodeId>,
}

impl Default for BddManager {
    fn default() -> Self {
        Self::new()
    }
}

impl BddManager {
    pub fn new() -> Self {
        let terminal = Node {
            level: TERMINAL_LEVEL,
            low: NodeId::FALSE,
            high: NodeId::FALSE,
        };
        BddManager {
            store: NEXT_STORE.fetch_add(1, Ordering::Relaxed),
            vars: Vec::new(),
            by_label: HashMap::new(),
            nodes: vec![terminal, terminal],
            unique: HashMap::new(),
            apply_cache: HashMap::new(),
            not_cache: HashMap::new(),
        }
    }

    /// A store whose order is exactly `vars`.
    pub fn with_vars<S: Into<String>>(vars: impl IntoIterator<Item = (VarKind, S)>) -> Self {
        let mut m = Self::new();
        for (kind, label) in vars {
            m.add_var(kind, label);
        }
        m
    }

    /// Appends a variable at the bottom of the order. Labels must be unique.
    pub fn add_var(&mut self, kind: VarKind, label: impl Into<String>) -> VarId {
        let label = label.into();
        assert!(!self.by_label.contains_key(&label), "duplicate variable label {label}");
        let id = VarId(self.vars.len() as u32);
        self.by_label.insert(label.clone(), id);
        self.vars.push(BoolVar { id, kind, label });
        id
    }

    pub fn vars(&self) -> &[BoolVar] {
        &self.vars
    }

    pub fn var(&self, id: VarId) -> &BoolVar {
        &self.vars[id.index()]
    }

    pub fn lookup(&self, label: &str) -> Option<VarId> {
        self.by_label.get(label).copied()
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    fn handle(&self, node: NodeId) -> Bdd {
        Bdd {
            store: self.store,
            node,
        }
    }

    fn check(&self, d: Bdd) -> Result<NodeId> {
        if d.store == self.store {
            Ok(d.node)
        } else {
            Err(Error::StoreMismatch)
        }
    }

    fn check_var(&self, v: VarId) -> Result<()> {
        if v.index() < self.vars.len() {
            Ok(())
        } else {
            Err(Error::UnknownVariable(format!("v{}", v.0)))
        }
    }

    pub fn constant(&self, value: bool) -> Bdd {
        self.handle(if value { NodeId::TRUE } else { NodeId::FALSE })
    }

    pub fn t(&self) -> Bdd {
        self.constant(true)
    }

    pub fn f(&self) -> Bdd {
        self.constant(false)
    }

    pub fn literal(&mut self, v: VarId, polarity: bool) -> Result<Bdd> {
        self.check_var(v)?;
        let node = if polarity {
            self.mk(v.0, NodeId::FALSE, NodeId::TRUE)
        } else {
            self.mk(v.0, NodeId::TRUE, NodeId::FALSE)
        };
        Ok(self.handle(node))
    }

    pub fn var_bdd(&mut self, v: VarId) -> Result<Bdd> {
        self.literal(v, true)
    }

    fn level(&self, n: NodeId) -> u32 {
        self.nodes[n.0 as usize].level
    }

    fn low(&self, n: NodeId) -> NodeId {
        self.nodes[n.0 as usize].low
    }

    fn high(&self, n: NodeId) -> NodeId {
        self.nodes[n.0 as usize].high
    }

    fn is_terminal(n: NodeId) -> bool {
        n == NodeId::FALSE || n == NodeId::TRUE
    }

    fn mk(&mut self, level: u32, low: NodeId, high: NodeId) -> NodeId {
        if low == high {
            return low;
        }
        let node = Node { level, low, high };
        if let Some(&id) = self.unique.get(&node) {
            return id;
        }
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(node);
        self.unique.insert(node, id);
        id
    }

    fn cofactors(&self, n: NodeId, level: u32) -> (NodeId, NodeId) {
        if self.level(n) == level {
            (self.low(n), self.high(n))
        } else {
            (n, n)
        }
    }

    /// Compiles a formula. Fails if it mentions a variable outside the order.
    pub fn build(&mut self, formula: &BoolFormula) -> Result<Bdd> {
        for v in formula.vars() {
            self.check_var(v)?;
        }
        let node = self.build_rec(formula);
        Ok(self.handle(node))
    }

    fn build_rec(&mut self, f: &BoolFormula) -> NodeId {
        match f {
            BoolFormula::Const(true) => NodeId::TRUE,
            BoolFormula::Const(false) => NodeId::FALSE,
            BoolFormula::Var(v) => self.mk(v.0, NodeId::FALSE, NodeId::TRUE),
            BoolFormula::Not(a) => {
                let a = self.build_rec(a);
                self.not_rec(a)
            }
            BoolFormula::And(a, b) => self.build_bin(BoolOp::And, a, b),
            BoolFormula::Or(a, b) => self.build_bin(BoolOp::Or, a, b),
            BoolFormula::Implies(a, b) => self.build_bin(BoolOp::Implies, a, b),
            BoolFormula::Iff(a, b) => self.build_bin(BoolOp::Iff, a, b),
        }
    }

    fn build_bin(&mut self, op: BoolOp, a: &BoolFormula, b: &BoolFormula) -> NodeId {
        let a = self.build_rec(a);
        let b = self.build_rec(b);
        self.apply_rec(op, a, b)
    }

    pub fn not(&mut self, d: Bdd) -> Result<Bdd> {
        let n = self.check(d)?;
        let r = self.not_rec(n);
        Ok(self.handle(r))
    }

    fn not_rec(&mut self, n: NodeId) -> NodeId {
        match n {
            NodeId::TRUE => return NodeId::FALSE,
            NodeId::FALSE => return NodeId::TRUE,
            _ => {}
        }
        if let Some(&r) = self.not_cache.get(&n) {
            return r;
        }
        let Node { level, low, high } = self.nodes[n.0 as usize];
        let lo = self.not_rec(low);
        let hi = self.not_rec(high);
        let r = self.mk(level, lo, hi);
        self.not_cache.insert(n, r);
        r
    }

    pub fn apply(&mut self, op: BoolOp, a: Bdd, b: Bdd) -> Result<Bdd> {
        let a = self.check(a)?;
        let b = self.check(b)?;
        let r = self.apply_rec(op, a, b);
        Ok(self.handle(r))
    }

    pub fn and(&mut self, a: Bdd, b: Bdd) -> Result<Bdd> {
        self.apply(BoolOp::And, a, b)
    }

    pub fn or(&mut self, a: Bdd, b: Bdd) -> Result<Bdd> {
        self.apply(BoolOp::Or, a, b)
    }

    pub fn iff(&mut self, a: Bdd, b: Bdd) -> Result<Bdd> {
        self.apply(BoolOp::Iff, a, b)
    }

    fn terminal_case(&mut self, op: BoolOp, a: NodeId, b: NodeId) -> Option<NodeId> {
        const F: NodeId = NodeId::FALSE;
        const T: NodeId = NodeId::TRUE;
        if Self::is_terminal(a) && Self::is_terminal(b) {
            return Some(if op.eval(a == T, b == T) { T } else { F });
        }
        match op {
            BoolOp::And => {
                if a == F || b == F {
                    Some(F)
                } else if a == T {
                    Some(b)
                } else if b == T || a == b {
                    Some(a)
                } else {
                    None
                }
            }
            BoolOp::Or => {
                if a == T || b == T {
                    Some(T)
                } else if a == F {
                    Some(b)
                } else if b == F || a == b {
                    Some(a)
                } else {
                    None
                }
            }
            BoolOp::Xor => {
                if a == b {
                    Some(F)
                } else if a == F {
                    Some(b)
                } else if b == F {
                    Some(a)
                } else if a == T {
                    Some(self.not_rec(b))
                } else if b == T {
                    Some(self.not_rec(a))
                } else {
                    None
                }
            }
            BoolOp::Implies => {
                if a == F || b == T || a == b {
                    Some(T)
                } else if a == T {
                    Some(b)
                } else if b == F {
                    Some(self.not_rec(a))
                } else {
                    None
                }
            }
            BoolOp::Iff => {
                if a == b {
                    Some(T)
                } else if a == T {
                    Some(b)
                } else if b == T {
                    Some(a)
                } else if a == F {
                    Some(self.not_rec(b))
                } else if b == F {
                    Some(self.not_rec(a))
                } else {
                    None
                }
            }
        }
    }

    fn apply_rec(&mut self, op: BoolOp, a: NodeId, b: NodeId) -> NodeId {
        if let Some(r) = self.terminal_case(op, a, b) {
            return r;
        }
        let key = if op.commutative() && b < a { (op, b, a) } else { (op, a, b) };
        if let Some(&r) = self.apply_cache.get(&key) {
            return r;
        }
        let level = self.level(a).min(self.level(b));
        let (a0, a1) = self.cofactors(a, level);
        let (b0, b1) = self.cofactors(b, level);
        let lo = self.apply_rec(op, a0, b0);
        let hi = self.apply_rec(op, a1, b1);
        let r = self.mk(level, lo, hi);
        self.apply_cache.insert(key, r);
        r
    }

    pub fn and_all(&mut self, items: impl IntoIterator<Item = Bdd>) -> Result<Bdd> {
        let mut acc = self.t();
        for d in items {
            acc = self.and(acc, d)?;
        }
        Ok(acc)
    }

    pub fn or_all(&mut self, items: impl IntoIterator<Item = Bdd>) -> Result<Bdd> {
        let mut acc = self.f();
        for d in items {
            acc = self.or(acc, d)?;
        }
        Ok(acc)
    }

    /// Cofactor of `d` with `v` fixed to `value`.
    pub fn restrict(&mut self, d: Bdd, v: VarId, value: bool) -> Result<Bdd> {
        let n = self.check(d)?;
        self.check_var(v)?;
        let mut memo = HashMap::new();
        let r = self.restrict_rec(n, v.0, value, &mut memo);
        Ok(self.handle(r))
    }

    fn restrict_rec(&mut self, n: NodeId, level: u32, value: bool, memo: &mut HashMap<NodeId, NodeId>) -> NodeId {
        let l = self.level(n);
        if l > level {
            return n;
        }
        if l == level {
            return if value { self.high(n) } else { self.low(n) };
        }
        if let Some(&r) = memo.get(&n) {
            return r;
        }
        let (lo, hi) = (self.low(n), self.high(n));
        let lo = self.restrict_rec(lo, level, value, memo);
        let hi = self.restrict_rec(hi, level, value, memo);
        let r = self.mk(l, lo, hi);
        memo.insert(n, r);
        r
    }

    /// Restricts `d` to a cube given as `(var, value)` pairs.
    pub fn restrict_cube(&mut self, d: Bdd, cube: &[(VarId, bool)]) -> Result<Bdd> {
        let mut acc = d;
        for &(v, b) in cube {
            acc = self.restrict(acc, v, b)?;
        }
        Ok(acc)
    }

    /// Existential quantification of `vars`.
    pub fn exists(&mut self, vars: &[VarId], d: Bdd) -> Result<Bdd> {
        let n = self.check(d)?;
        for &v in vars {
            self.check_var(v)?;
        }
        let levels: BTreeSet<u32> = vars.iter().map(|v| v.0).collect();
        let Some(&max) = levels.iter().next_back() else {
            return Ok(d);
        };
        let mut memo = HashMap::new();
        let r = self.exists_rec(n, &levels, max, &mut memo);
        Ok(self.handle(r))
    }

    fn exists_rec(&mut self, n: NodeId, levels: &BTreeSet<u32>, max: u32, memo: &mut HashMap<NodeId, NodeId>) -> NodeId {
        let l = self.level(n);
        if l == TERMINAL_LEVEL || l > max {
            return n;
        }
        if let Some(&r) = memo.get(&n) {
            return r;
        }
        let (lo, hi) = (self.low(n), self.high(n));
        let lo = self.exists_rec(lo, levels, max, memo);
        let hi = self.exists_rec(hi, levels, max, memo);
        let r = if levels.contains(&l) {
            self.apply_rec(BoolOp::Or, lo, hi)
        } else {
            self.mk(l, lo, hi)
        };
        memo.insert(n, r);
        r
    }

    /// Simultaneous substitution of variables by variables.
    pub fn rename(&mut self, d: Bdd, mapping: &BTreeMap<VarId, VarId>) -> Result<Bdd> {
        let n = self.check(d)?;
        let mut targets = BTreeSet::new();
        for (&from, &to) in mapping {
            self.check_var(from)?;
            self.check_var(to)?;
            if !targets.insert(to) {
                return Err(Error::NonInjectiveMapping);
            }
        }
        let mut memo = HashMap::new();
        let r = self.rename_rec(n, mapping, &mut memo);
        Ok(self.handle(r))
    }

    fn rename_rec(&mut self, n: NodeId, mapping: &BTreeMap<VarId, VarId>, memo: &mut HashMap<NodeId, NodeId>) -> NodeId {
        if Self::is_terminal(n) {
            return n;
        }
        if let Some(&r) = memo.get(&n) {
            return r;
        }
        let Node { level, low, high } = self.nodes[n.0 as usize];
        let lo = self.rename_rec(low, mapping, memo);
        let hi = self.rename_rec(high, mapping, memo);
        let target = mapping.get(&VarId(level)).map_or(level, |v| v.0);
        let x = self.mk(target, NodeId::FALSE, NodeId::TRUE);
        let nx = self.mk(target, NodeId::TRUE, NodeId::FALSE);
        let a = self.apply_rec(BoolOp::And, x, hi);
        let b = self.apply_rec(BoolOp::And, nx, lo);
        let r = self.apply_rec(BoolOp::Or, a, b);
        memo.insert(n, r);
        r
    }

    /// Generalized cofactor (Coudert–Madre restrict): a diagram that agrees
    /// with `f` wherever `care` holds, usually smaller than `f`.
    pub fn simplify_under(&mut self, f: Bdd, care: Bdd) -> Result<Bdd> {
        let f = self.check(f)?;
        let c = self.check(care)?;
        let mut memo = HashMap::new();
        let r = self.care_rec(f, c, &mut memo);
        Ok(self.handle(r))
    }

    fn care_rec(&mut self, f: NodeId, c: NodeId, memo: &mut HashMap<(NodeId, NodeId), NodeId>) -> NodeId {
        if c == NodeId::FALSE {
            return NodeId::FALSE;
        }
        if c == NodeId::TRUE || Self::is_terminal(f) {
            return f;
        }
        if f == c {
            return NodeId::TRUE;
        }
        if let Some(&r) = memo.get(&(f, c)) {
            return r;
        }
        let lf = self.level(f);
        let lc = self.level(c);
        let r = if lc < lf {
            let (c0, c1) = (self.low(c), self.high(c));
            let merged = self.apply_rec(BoolOp::Or, c0, c1);
            self.care_rec(f, merged, memo)
        } else {
            let (f0, f1) = self.cofactors(f, lf);
            let (c0, c1) = self.cofactors(c, lf);
            if c0 == NodeId::FALSE {
                self.care_rec(f1, c1, memo)
            } else if c1 == NodeId::FALSE {
                self.care_rec(f0, c0, memo)
            } else {
                let lo = self.care_rec(f0, c0, memo);
                let hi = self.care_rec(f1, c1, memo);
                self.mk(lf, lo, hi)
            }
        };
        memo.insert((f, c), r);
        r
    }

    pub fn support(&self, d: Bdd) -> Result<BTreeSet<VarId>> {
        let n = self.check(d)?;
        let mut seen = BTreeSet::new();
        let mut out = BTreeSet::new();
        let mut stack = vec![n];
        while let Some(n) = stack.pop() {
            if Self::is_terminal(n) || !seen.insert(n) {
                continue;
            }
            out.insert(VarId(self.level(n)));
            stack.push(self.low(n));
            stack.push(self.high(n));
        }
        Ok(out)
    }

    /// Number of internal nodes reachable from `d`.
    pub fn size(&self, d: Bdd) -> Result<usize> {
        let n = self.check(d)?;
        let mut seen = BTreeSet::new();
        let mut stack = vec![n];
        while let Some(n) = stack.pop() {
            if Self::is_terminal(n) || !seen.insert(n) {
                continue;
            }
            stack.push(self.low(n));
            stack.push(self.high(n));
        }
        Ok(seen.len())
    }

    pub fn eval(&self, d: Bdd, value: impl Fn(VarId) -> bool) -> Result<bool> {
        let mut n = self.check(d)?;
        while !Self::is_terminal(n) {
            n = if value(VarId(self.level(n))) { self.high(n) } else { self.low(n) };
        }
        Ok(n == NodeId::TRUE)
    }

    /// Every satisfying assignment over `vars`, each exactly once. Each model
    /// is a vector aligned with `vars`; models come in lexicographic order
    /// with `true` before `false`.
    pub fn enumerate_models(&self, d: Bdd, vars: &[VarId]) -> Result<Vec<Vec<bool>>> {
        let n = self.check(d)?;
        let support = self.support(d)?;
        let listed: BTreeSet<VarId> = vars.iter().copied().collect();
        if let Some(missing) = support.difference(&listed).next() {
            return Err(Error::UnknownVariable(self.var(*missing).label.clone()));
        }
        let mut order: Vec<(usize, VarId)> = vars.iter().copied().enumerate().collect();
        order.sort_by_key(|&(_, v)| v);
        let mut out = Vec::new();
        let mut current = vec![false; vars.len()];
        self.models_rec(n, &order, 0, &mut current, &mut out);
        // Re-sort into lexicographic order on the caller's variable order.
        out.sort_by(|a, b| b.cmp(a));
        Ok(out)
    }

    fn models_rec(&self, n: NodeId, order: &[(usize, VarId)], pos: usize, current: &mut Vec<bool>, out: &mut Vec<Vec<bool>>) {
        if n == NodeId::FALSE {
            return;
        }
        if pos == order.len() {
            debug_assert!(n == NodeId::TRUE);
            out.push(current.clone());
            return;
        }
        let (slot, var) = order[pos];
        let (lo, hi) = self.cofactors(n, var.0);
        current[slot] = true;
        self.models_rec(hi, order, pos + 1, current, out);
        current[slot] = false;
        self.models_rec(lo, order, pos + 1, current, out);
    }

    /// Reads a diagram back as an if-then-else shaped formula.
    pub fn to_formula(&self, d: Bdd) -> Result<BoolFormula> {
        let n = self.check(d)?;
        let mut memo = HashMap::new();
        Ok(self.formula_rec(n, &mut memo))
    }

    fn formula_rec(&self, n: NodeId, memo: &mut HashMap<NodeId, BoolFormula>) -> BoolFormula {
        match n {
            NodeId::TRUE => return BoolFormula::TRUE,
            NodeId::FALSE => return BoolFormula::FALSE,
            _ => {}
        }
        if let Some(f) = memo.get(&n) {
            return f.clone();
        }
        let Node { level, low, high } = self.nodes[n.0 as usize];
        let v = BoolFormula::Var(VarId(level));
        let nv = BoolFormula::not(v.clone());
        let f = match (low, high) {
            (NodeId::FALSE, NodeId::TRUE) => v,
            (NodeId::TRUE, NodeId::FALSE) => nv,
            (lo, NodeId::TRUE) => BoolFormula::or(v, self.formula_rec(lo, memo)),
            (NodeId::TRUE, hi) => BoolFormula::or(nv, self.formula_rec(hi, memo)),
            (lo, NodeId::FALSE) => BoolFormula::and(nv, self.formula_rec(lo, memo)),
            (NodeId::FALSE, hi) => BoolFormula::and(v, self.formula_rec(hi, memo)),
            (lo, hi) => BoolFormula::or(
                BoolFormula::and(v, self.formula_rec(hi, memo)),
                BoolFormula::and(nv, self.formula_rec(lo, memo)),
            ),
        };
        memo.insert(n, f.clone());
        f
    }

    /// Graphviz rendering: one line per node, dashed low edges, solid high edges.
    pub fn to_dot(&self, d: Bdd) -> Result<String> {
        let root = self.check(d)?;
        let mut out = String::from("digraph bdd {\n");
        out.push_str("  0 [label=\"F\", shape=box]\n  1 [label=\"T\", shape=box]\n");
        let mut seen = BTreeSet::new();
        let mut stack = vec![root];
        while let Some(n) = stack.pop() {
            if Self::is_terminal(n) || !seen.insert(n) {
                continue;
            }
            stack.push(self.low(n));
            stack.push(self.high(n));
        }
        for n in &seen {
            let label = self.vars[self.level(*n) as usize].label.replace('"', "\\\"");
            let _ = writeln!(out, "  {} [label=\"{}\"]", n.0, label);
        }
        for n in &seen {
            let _ = writeln!(out, "  {} -> {} [style=dashed]", n.0, self.low(*n).0);
            let _ = writeln!(out, "  {} -> {} [style=solid]", n.0, self.high(*n).0);
        }
        out.push_str("}\n");
        Ok(out)
    }

    pub(crate) fn wmc_parts(&self, d: Bdd) -> Result<NodeId> {
        self.check(d)
    }

    pub(crate) fn node_parts(&self, n: NodeId) -> (u32, NodeId, NodeId) {
        let node = self.nodes[n.0 as usize];
        (node.level, node.low, node.high)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mgr(n: usize) -> BddManager {
        BddManager::with_vars((0..n).map(|i| (VarKind::Predicate, format!("v{i}"))))
    }

    #[test]
    fn contradiction_and_tautology_are_terminals() {
        let mut m = mgr(1);
        let a = BoolFormula::var(0);
        let c = m.build(&BoolFormula::and(a.clone(), BoolFormula::not(a.clone()))).unwrap();
        let t = m.build(&BoolFormula::or(a.clone(), BoolFormula::not(a))).unwrap();
        assert!(c.is_false());
        assert!(t.is_true());
    }

    #[test]
    fn agreement_formula_has_two_nodes() {
        // ({x<4} ∧ f) ∨ (¬{x<4} ∧ ¬f): truth table {TT, FF}.
        let mut m = mgr(2);
        let (p, f) = (BoolFormula::var(0), BoolFormula::var(1));
        let d = m
            .build(&BoolFormula::or(
                BoolFormula::and(p.clone(), f.clone()),
                BoolFormula::and(BoolFormula::not(p), BoolFormula::not(f)),
            ))
            .unwrap();
        let models = m.enumerate_models(d, &[VarId(0), VarId(1)]).unwrap();
        assert_eq!(models, vec![vec![true, true], vec![false, false]]);
        // No complement edges: one node on p and two on f.
        assert_eq!(m.size(d).unwrap(), 3);
    }

    #[test]
    fn unknown_variable_is_an_error() {
        let mut m = mgr(1);
        assert!(matches!(m.build(&BoolFormula::var(3)), Err(Error::UnknownVariable(_))));
    }

    #[test]
    fn apply_identities() {
        let mut m = mgr(2);
        let x = m.var_bdd(VarId(0)).unwrap();
        let t = m.t();
        assert_eq!(m.and(t, x).unwrap(), x);
        let nx = m.not(x).unwrap();
        assert!(m.or(x, nx).unwrap().is_true());
        let y = m.var_bdd(VarId(1)).unwrap();
        let xy = m.and(x, y).unwrap();
        assert_eq!(m.enumerate_models(xy, &[VarId(0), VarId(1)]).unwrap(), vec![vec![true, true]]);
    }

    #[test]
    fn stores_do_not_mix() {
        let mut a = mgr(1);
        let b = mgr(1);
        let x = b.t();
        let y = a.t();
        assert_eq!(a.and(x, y), Err(Error::StoreMismatch));
    }

    #[test]
    fn exists_projects() {
        let mut m = mgr(2);
        let (a, b) = (m.var_bdd(VarId(0)).unwrap(), m.var_bdd(VarId(1)).unwrap());
        let ab = m.and(a, b).unwrap();
        assert_eq!(m.exists(&[VarId(0)], ab).unwrap(), b);
        let f = m.f();
        assert!(m.exists(&[VarId(0)], f).unwrap().is_false());
        let agree = m.iff(a, b).unwrap();
        assert!(m.exists(&[VarId(1)], agree).unwrap().is_true());
    }

    #[test]
    fn rename_moves_variables() {
        let mut m = mgr(2);
        let a = m.var_bdd(VarId(0)).unwrap();
        let b = m.var_bdd(VarId(1)).unwrap();
        let map = BTreeMap::from([(VarId(0), VarId(1))]);
        assert_eq!(m.rename(a, &map).unwrap(), b);
        let t = m.t();
        assert!(m.rename(t, &map).unwrap().is_true());
        let bad = BTreeMap::from([(VarId(0), VarId(1)), (VarId(1), VarId(1))]);
        assert_eq!(m.rename(a, &bad), Err(Error::NonInjectiveMapping));
    }

    #[test]
    fn enumerate_trivial_cases() {
        let m = mgr(2);
        assert!(m.enumerate_models(m.f(), &[VarId(0)]).unwrap().is_empty());
        assert_eq!(m.enumerate_models(m.t(), &[VarId(0)]).unwrap(), vec![vec![true], vec![false]]);
        let mut m = mgr(2);
        let d = m.build(&BoolFormula::or(BoolFormula::var(0), BoolFormula::var(1))).unwrap();
        assert_eq!(m.enumerate_models(d, &[VarId(0), VarId(1)]).unwrap().len(), 3);
    }

    #[test]
    fn simplify_under_care_set() {
        // f = a ∧ b, care = a ⇒ b: simplifies to a.
        let mut m = mgr(2);
        let f = m.build(&BoolFormula::and(BoolFormula::var(0), BoolFormula::var(1))).unwrap();
        let care = m.build(&BoolFormula::implies(BoolFormula::var(0), BoolFormula::var(1))).unwrap();
        let a = m.var_bdd(VarId(0)).unwrap();
        assert_eq!(m.simplify_under(f, care).unwrap(), a);
    }

    #[test]
    fn dot_lists_nodes_and_edges() {
        let mut m = mgr(1);
        let a = m.var_bdd(VarId(0)).unwrap();
        let dot = m.to_dot(a).unwrap();
        assert!(dot.contains("[label=\"v0\"]"));
        assert!(dot.contains("style=dashed"));
        assert!(dot.contains("style=solid"));
    }
}
