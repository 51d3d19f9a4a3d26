//! Exact normal ordering of boson operators and the combinatorics around it.
//!
//! * [`series`]: truncated formal power series over the rationals.
//! * [`algebra`]: boson expressions, the rewrite oracle, normal forms.
//! * [`stirling`]: generalized Stirling and Bell numbers, Dobiński sums.
//! * [`sheffer`]: Sheffer pairs, ladder operators, flows for `exp(λ(q(a†)a + v(a†)))`.
//! * [`deformed`]: Stirling polynomials of deformed bosons.
//! * [`coherent`]: coherent states built on generalized Bell numbers (double precision).

pub mod algebra;
pub mod coherent;
pub mod deformed;
pub mod poly;
pub mod series;
pub mod sheffer;
pub mod stirling;

pub use algebra::{BosonExpr, Gen, Limits, NormalForm, StringSpec};
pub use poly::Polynomial;
pub use series::{BivariateSeries, FormalPowerSeries, Rational};
