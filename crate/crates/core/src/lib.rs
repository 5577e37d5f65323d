//! Computable Radon-Nikodym approximation over the dyadic ring of `[0,1)`.

pub mod dyadic;
pub mod ec;
pub mod error;
#[doc(hidden)]
pub mod fuzz_checks;
pub mod l1;
pub mod lowerbound;
pub mod measures;
pub mod radon_nikodym;
pub mod rational;
pub mod stepfn;

pub use error::{Error, Result};
pub use rational::Rational;
