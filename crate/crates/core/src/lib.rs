pub mod algebra;
pub mod bmodel;
pub mod chamber;
pub mod cli;
pub mod error;
pub mod invariants;
pub mod scalar;
pub mod spin;
pub mod wallcross;

pub use error::{Error, Result};
pub use scalar::{Rational, Scalar, ScalarText};
