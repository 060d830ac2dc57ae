//! Truncated coefficient rings `A_I`, `A_{I,sym}` and the series built over them.

mod hbar;
mod monomial;
mod psi;
mod ring;
mod series;

pub use hbar::HbarSeries;
pub use monomial::{Monomial, TMonomial, TVar, UMonomial};
pub use psi::Psi;
pub use ring::{Element, Ring};
pub use series::{Grading, PotentialSeries, UNBOUNDED};
