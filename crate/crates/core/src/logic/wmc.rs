use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Zero};

use super::bdd::{Bdd, BddManager, NodeId};
use super::formula::{VarId, VarKind};
use crate::error::{Error, Result};
use crate::rational::Prob;

/// Literal weights `(if true, if false)`. The keys are the counting universe:
/// a variable skipped on a path contributes `true + false` of its weights.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightMap {
    weights: BTreeMap<VarId, (Prob, Prob)>,
}

impl WeightMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every variable of `m` with weight `(1, 1)`; plain model counting.
    pub fn unit(m: &BddManager) -> Self {
        let mut w = Self::new();
        for v in m.vars() {
            w.set(v.id, Prob::one(), Prob::one());
        }
        w
    }

    /// `(θ, 1 − θ)` for each flip in `thetas`, `(1, 1)` for everything else.
    pub fn from_flips(m: &BddManager, thetas: &BTreeMap<VarId, Prob>) -> Result<Self> {
        let mut w = Self::new();
        for v in m.vars() {
            match (v.kind, thetas.get(&v.id)) {
                (VarKind::Flip, Some(theta)) => w.set(v.id, theta.clone(), Prob::one() - theta),
                (VarKind::Flip, None) => return Err(Error::MissingWeight(v.label.clone())),
                _ => w.set(v.id, Prob::one(), Prob::one()),
            }
        }
        Ok(w)
    }

    pub fn set(&mut self, v: VarId, if_true: Prob, if_false: Prob) {
        self.weights.insert(v, (if_true, if_false));
    }

    pub fn get(&self, v: VarId) -> Option<&(Prob, Prob)> {
        self.weights.get(&v)
    }

    fn skip_factor(&self, above: Option<u32>, below: Option<u32>) -> Prob {
        use std::ops::Bound::{Excluded, Unbounded};
        let lo = above.map_or(Unbounded, |l| Excluded(VarId(l)));
        let hi = below.map_or(Unbounded, |l| Excluded(VarId(l)));
        self.weights
            .range((lo, hi))
            .fold(Prob::one(), |acc, (_, (t, f))| acc * (t + f))
    }
}

/// Weighted model count of `d` over the universe of `w`.
pub fn wmc(m: &BddManager, d: Bdd, w: &WeightMap) -> Result<Prob> {
    let root = m.wmc_parts(d)?;
    for v in m.support(d)? {
        if w.get(v).is_none() {
            return Err(Error::MissingWeight(m.var(v).label.clone()));
        }
    }
    let mut memo = HashMap::new();
    let inner = wmc_rec(m, root, w, &mut memo);
    let top = level_of(m, root);
    Ok(w.skip_factor(None, top) * inner)
}

fn level_of(m: &BddManager, n: NodeId) -> Option<u32> {
    if n == NodeId::TRUE || n == NodeId::FALSE {
        None
    } else {
        Some(m.node_parts(n).0)
    }
}

/// Count of the sub-diagram rooted at `n`, over variables strictly below
/// `n`'s level plus `n`'s own variable.
fn wmc_rec(m: &BddManager, n: NodeId, w: &WeightMap, memo: &mut HashMap<NodeId, Prob>) -> Prob {
    if n == NodeId::FALSE {
        return Prob::zero();
    }
    if n == NodeId::TRUE {
        return Prob::one();
    }
    if let Some(r) = memo.get(&n) {
        return r.clone();
    }
    let (level, low, high) = m.node_parts(n);
    let (wt, wf) = w.get(VarId(level)).expect("support checked").clone();
    let lo = wmc_rec(m, low, w, memo) * w.skip_factor(Some(level), level_of(m, low));
    let hi = wmc_rec(m, high, w, memo) * w.skip_factor(Some(level), level_of(m, high));
    let r = wf * lo + wt * hi;
    memo.insert(n, r.clone());
    r
}
