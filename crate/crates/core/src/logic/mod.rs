//! Propositional formulas, decision diagrams and weighted model counting.

mod bdd;
mod formula;
mod wmc;

pub use bdd::{Bdd, BddManager, BoolOp, NodeId};
pub use formula::{BoolFormula, BoolVar, VarId, VarKind};
pub use wmc::{wmc, WeightMap};
