//! Posterior-sampling learners for the linear bandit.
//!
//! Conjugate Gaussian baselines (vanilla PS, LinTS), the particle
//! representation of warmPref-PS, information sets built from offline
//! comparisons, and a quadrature oracle for `d ≤ 2`.

mod gaussian;
mod grid;
mod info_set;
mod particles;

pub use gaussian::{conjugate_update, lin_ts_step, vanilla_ps_step, GaussianBelief};
pub use grid::{exact_posterior_grid, GridPosterior, GridSpec};
pub use info_set::{build_info_set, build_info_set_with, InfoSet, InfoSetRule};
pub use particles::{informed_prior_particles, sir_resample, warmpref_ps_step, ParticleBelief};

use serde::{Deserialize, Serialize};

/// Online observations `(A_t, R_t)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    pub steps: Vec<(usize, f64)>,
}

impl History {
    pub fn push(&mut self, arm: usize, reward: f64) {
        debug_assert!(reward.is_finite());
        self.steps.push((arm, reward));
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Arm played and reward observed in one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub arm: usize,
    pub reward: f64,
}
