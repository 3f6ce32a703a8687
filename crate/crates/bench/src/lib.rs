//! Benchmark inputs shared by the criterion targets.

use probabs_core::concrete::{parse_concrete, ConcreteProgram};
use probabs_core::predicates::PredicateList;
use probabs_core::theory::TheoryContext;

pub const STEP: &str = include_str!("../../../fixtures/step.cp");
pub const STEP_PREDS: &str = include_str!("../../../fixtures/step.preds");
pub const CHAIN: &str = include_str!("../../../fixtures/chain.cp");
pub const CHAIN_PREDS: &str = include_str!("../../../fixtures/chain.preds");
pub const CHAIN_FITTED: &str = include_str!("../../../fixtures/chain_fitted.bern");

pub fn load(src: &str, preds: &str) -> (ConcreteProgram, PredicateList, TheoryContext) {
    let p = parse_concrete(src).expect("fixture parses");
    let preds = PredicateList::parse(preds, &p.decls).expect("fixture predicates parse");
    let ctx = TheoryContext::new(p.decls.clone());
    (p, preds, ctx)
}
