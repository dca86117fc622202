//! Multicalibration-based analysis of k-sample distinguishability for
//! explicit finite distributions.
//!
//! Given two distributions `X0`, `X1` over a finite domain and a family of
//! `[0,1]`-valued test functions, the library builds a multicalibrated
//! partition of the domain for the Bayes posterior, the intermediate
//! distributions that share per-part conditionals, and a rounded
//! likelihood-ratio distinguisher; it then evaluates the two-sided Hellinger
//! characterization of how many samples are needed to tell `X0` from `X1`.
//!
//! Every linear quantity is generic over [`Scalar`], so the same code runs in
//! exact rational arithmetic ([`Rational`]) or in floating point.

pub mod analysis;
pub mod combinatorics;
pub mod config;
pub mod constructions;
pub mod distinguisher;
pub mod distributions;
pub mod error;
pub mod function_families;
pub mod generators;
pub mod io;
pub mod multicalibration;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{Rational, Scalar};

pub type ExactDist = distributions::ProbDist<Rational>;
pub type RealDist = distributions::ProbDist<f64>;
pub type ExactFamily = function_families::Family<Rational>;
pub type RealFamily = function_families::Family<f64>;
pub type ExactPartition = multicalibration::Partition<Rational>;
pub type RealPartition = multicalibration::Partition<f64>;
