//! Preference-based posterior sampling for finite-horizon tabular MDPs.
//!
//! Rewards are a table `θ ∈ R^{SA}` scored through the normalised visit
//! embedding `φ(τ)`; dynamics `η` carry a Dirichlet prior. Top-two PSPL draws
//! two posterior samples per episode, rolls out both greedy policies and asks
//! the rater which trajectory it prefers.

mod dirichlet;
mod learner;
mod loss;
mod mdp;
mod offline;
mod prefs;

pub use dirichlet::{informed_prior_eta, DirichletBelief};
pub use learner::{pspl_episode, EpisodeOutcome, PsplParams, PsplSample, PsplState, PsplVariant};
pub use loss::{eta_map, pspl_surrogate_loss, DirichletPrefactor, PsplPerturbation};
pub use mdp::{
    finite_horizon_plan, policy_value, random_mdp, riverswim_env, rollout, state_distribution, trajectory_embedding,
    visitation_diagnostics, Plan, PolicyTable, TabularMDP, Trajectory, VisitationDiagnostics,
};
pub use offline::{estimate_optimal_policy_offline, OfflinePolicyEstimate};
pub use prefs::{generate_offline_trajectories, traj_preference_prob, TrajPref, TrajPrefDataset};

use rand::Rng;

use crate::numeric::mean_se;

/// Exact and sampled simple regret of a policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimpleRegret {
    /// `V^{π*}(ρ) − V^{π}(ρ)` by dynamic programming.
    pub exact: f64,
    /// Mean and standard error of `r(τ*) − r(τ)` over sampled rollout pairs.
    pub sampled: (f64, f64),
}

/// Simple regret of `policy`; `trials` rollouts of each policy feed the
/// sampled cross-check.
pub fn simple_regret<R: Rng + ?Sized>(mdp: &TabularMDP, policy: &PolicyTable, trials: usize, rng: &mut R) -> SimpleRegret {
    assert!(trials >= 1, "simple regret needs at least one trial");
    let opt = mdp.optimal_plan();
    let exact = (policy_value(mdp, &opt.policy) - policy_value(mdp, policy)).max(0.0);
    let diffs: Vec<f64> = (0..trials)
        .map(|_| {
            let star = rollout(mdp, &opt.policy, rng);
            let mine = rollout(mdp, policy, rng);
            mdp.trajectory_return(&star) - mdp.trajectory_return(&mine)
        })
        .collect();
    SimpleRegret { exact, sampled: mean_se(&diffs) }
}

/// Exact simple regret only.
pub fn simple_regret_exact(mdp: &TabularMDP, policy: &PolicyTable) -> f64 {
    (policy_value(mdp, &mdp.optimal_plan().policy) - policy_value(mdp, policy)).max(0.0)
}
