//! Bootstrapped warmPref-PS.
//!
//! Posterior samples are replaced by minimisers of a randomly perturbed MAP
//! objective over the joint `(θ, ϑ)`: Gaussian noise on rewards, Bernoulli
//! weights on offline comparisons, and random shifts of both prior terms.

mod competence;
mod loss;
mod perturb;
mod step;

pub use competence::{estimate_beta_entropy, estimate_beta_mle, EntropyEstimate};
pub use loss::{surrogate_loss, surrogate_loss_multi, LossParams, RaterData};
pub use perturb::{perturb, PerturbationSet, RaterPerturbation};
pub use step::{bootstrapped_step, map_estimate, perturbed_map, perturbed_map_from, BootStep, MapEstimate};

pub(crate) use loss::{PrefBlock, Surrogate};
