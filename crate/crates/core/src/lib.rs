pub mod bern;
pub mod builder;
pub mod concrete;
pub mod error;
pub mod gen;
pub mod inference;
pub mod logic;
pub mod predicates;
pub mod rational;
pub mod soundness;
pub mod suites;
pub mod theory;

pub use error::{Error, Result};
