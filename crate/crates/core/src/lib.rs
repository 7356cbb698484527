//! Analytic and Monte Carlo laboratory for matching under noisy AI clones.
//!
//! Personalities are uniform in the `k`-dimensional unit ball with the
//! subject at the origin. In person, the subject meets `m` people and keeps
//! the closest. On the platform, each candidate's clone and the subject's
//! clone carry Gaussian noise, and the platform picks the candidate whose
//! clone is closest to the subject's clone among `n`.
//!
//! * [`specfun`]: special functions used by every formula.
//! * [`sampler`]: reproducible streams and clone draws.
//! * [`analytic`]: closed forms and quadratures.
//! * [`density`]: joint law of true and clone distance, MLRP checks.
//! * [`simulate`]: Monte Carlo estimators.
//! * [`cli`]: experiment harness behind the `mirrormatch` binary.

// `!(x > 0.0)` rejects NaN along with nonpositive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod cli;
pub mod density;
pub mod error;
pub mod quadrature;
pub mod sampler;
pub mod simulate;
pub mod specfun;

pub use error::{Error, Result};
