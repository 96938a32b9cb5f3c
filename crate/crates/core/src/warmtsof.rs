//! warmPref-PS with the option of buying online preference feedback.
//!
//! When the two best arms under the sampled `θ̂` are within `ε_t` of each
//! other the learner pays `c` to ask the offline rater to compare them, adds
//! the answer to its preference data and re-solves before acting.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{perturb, perturbed_map, LossParams};
use crate::error::{config, domain};
use crate::model::{query_preference, Environment, Rater};
use crate::numeric::{argmax, top_two};
use crate::optim::OptimizerSpec;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackConfig {
    /// Cost charged per query.
    pub cost: f64,
    /// `c0` in the threshold schedule.
    pub eps_scale: f64,
}

impl FeedbackConfig {
    pub fn new(cost: f64, eps_scale: f64) -> Result<Self> {
        if !(cost >= 0.0) {
            return domain("feedback cost must be nonnegative");
        }
        if !(eps_scale > 0.0 && eps_scale.is_finite()) {
            return domain("feedback eps scale must be positive");
        }
        Ok(Self { cost, eps_scale })
    }
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self { cost: 0.0, eps_scale: 1.0 }
    }
}

/// `ε_t = c0 √(ln(t+1)/(t+1)) / (1 + c)`.
///
/// `lambda` and `beta` are accepted for interface stability; this schedule
/// does not use them.
pub fn get_epsilon(cfg: &FeedbackConfig, t: usize, _lambda: f64, _beta: f64) -> f64 {
    assert!(t >= 1, "steps are counted from 1");
    if cfg.cost.is_infinite() {
        return 0.0;
    }
    let tf = (t + 1) as f64;
    cfg.eps_scale * (tf.ln() / tf).sqrt() / (1.0 + cfg.cost)
}

#[derive(Debug, Clone)]
pub struct TsofStep {
    pub arm: usize,
    pub reward: f64,
    /// `reward − c_t`.
    pub net_reward: f64,
    pub queried: bool,
    pub converged: bool,
    pub theta_hat: DVector<f64>,
}

/// One round. Without a query the random draws match
/// [`crate::bootstrap::bootstrapped_step`] exactly.
pub fn warmtsof_step<R: Rng + ?Sized>(
    p: &mut LossParams,
    env: &Environment,
    rater: &Rater,
    cfg: &FeedbackConfig,
    opt: &OptimizerSpec,
    rng: &mut R,
) -> Result<TsofStep> {
    if p.actions.nrows() < 2 {
        return config("feedback needs at least two arms");
    }
    let t = p.history.len() + 1;
    let eps = get_epsilon(cfg, t, p.lambda(), p.beta());
    let mut pert = perturb(p, rng);
    let mut est = perturbed_map(p, &pert, opt);
    let scores: Vec<f64> = (&p.actions * &est.theta).iter().copied().collect();
    let (a1, a2) = top_two(&scores);
    let queried = (scores[a1] - scores[a2]).abs() < eps;
    let mut converged = est.converged;
    let arm = if queried {
        let entry = query_preference(env, rater, a1, a2, rng);
        p.d0_mut().push(entry);
        pert.raters[0].omega.push(rng.random_bool(0.5));
        est = perturbed_map(p, &pert, opt);
        converged &= est.converged;
        argmax((&p.actions * &est.theta).iter().copied())
    } else {
        a1
    };
    let reward = env.reward_sample(arm, rng)?;
    p.history.push(arm, reward);
    let cost = if queried { cfg.cost } else { 0.0 };
    Ok(TsofStep { arm, reward, net_reward: reward - cost, queried, converged, theta_hat: est.theta })
}
