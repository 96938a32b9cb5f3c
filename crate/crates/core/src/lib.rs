//! Posterior sampling for linear bandits and tabular MDPs warm-started by
//! offline preference data.
//!
//! The crate is organised by concern:
//!
//! * [`model`]: environments, raters and synthetic offline preference data.
//! * [`bandit_ps`]: conjugate baselines, particle warmPref-PS, information sets
//!   and a low-dimensional quadrature oracle.
//! * [`bootstrap`]: the perturbed-MAP approximation of warmPref-PS and
//!   rater-competence estimators.
//! * [`warmtsof`]: warmPref-PS with costly online preference queries.
//! * [`theory`]: closed-form sample-complexity and regret oracles.
//! * [`pspl`]: preference-based posterior sampling for tabular MDPs.
//! * [`harness`]: configuration, seeded experiment runs and summaries.
//!
//! Seeds and Monte Carlo trials are executed through [`exec`], which uses
//! rayon when the `parallel` feature is enabled and falls back to a plain loop
//! otherwise.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandit_ps;
pub mod bootstrap;
mod error;
pub mod exec;
pub mod harness;
pub mod model;
pub mod numeric;
pub mod optim;
pub mod pspl;
pub mod rng;
pub mod theory;
pub mod warmtsof;

pub use error::{Error, Result};
