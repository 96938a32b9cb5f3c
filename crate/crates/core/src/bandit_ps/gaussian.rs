use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::StepResult;
use crate::error::domain;
use crate::model::{Environment, PriorSpec};
use crate::numeric::{argmax, cholesky_lower, gaussian_from_factor, symmetrize};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianBelief {
    pub fn from_prior(prior: &PriorSpec) -> Self {
        Self { mean: prior.mean().clone(), cov: prior.cov().clone() }
    }

    /// Draw from `N(mean, inflation · cov)`.
    pub fn sample<R: Rng + ?Sized>(&self, inflation: f64, rng: &mut R) -> Result<DVector<f64>> {
        let lower = cholesky_lower(&self.cov)?;
        Ok(gaussian_from_factor(&self.mean, &(lower * inflation.sqrt()), rng))
    }
}

/// Rank-one linear-Gaussian update: precision gains `a aᵀ/σ²`.
pub fn conjugate_update(belief: &GaussianBelief, arm: &DVector<f64>, reward: f64, sigma: f64) -> Result<GaussianBelief> {
    if !(sigma > 0.0) {
        return domain("noise scale must be positive for the conjugate update");
    }
    let sa = &belief.cov * arm;
    let denom = sigma * sigma + arm.dot(&sa);
    if !(denom.is_finite() && denom > 0.0) {
        return Err(Error::Numerical("singular predictive variance in conjugate update".into()));
    }
    let resid = reward - arm.dot(&belief.mean);
    let mean = &belief.mean + &sa * (resid / denom);
    let mut cov = &belief.cov - (&sa * sa.transpose()) / denom;
    symmetrize(&mut cov);
    Ok(GaussianBelief { mean, cov })
}

fn sampled_step<R: Rng + ?Sized>(belief: &mut GaussianBelief, env: &Environment, inflation: f64, rng: &mut R) -> Result<StepResult> {
    let theta_hat = belief.sample(inflation, rng)?;
    let arm = argmax((env.actions() * theta_hat).iter().copied());
    let reward = env.reward_sample(arm, rng)?;
    *belief = conjugate_update(belief, &env.arm(arm), reward, env.noise_sigma())?;
    Ok(StepResult { arm, reward })
}

/// Posterior sampling on the conjugate Gaussian belief.
pub fn vanilla_ps_step<R: Rng + ?Sized>(belief: &mut GaussianBelief, env: &Environment, rng: &mut R) -> Result<StepResult> {
    sampled_step(belief, env, 1.0, rng)
}

/// Thompson sampling from the covariance scaled by `inflation`.
pub fn lin_ts_step<R: Rng + ?Sized>(
    belief: &mut GaussianBelief,
    env: &Environment,
    rng: &mut R,
    inflation: f64,
) -> Result<StepResult> {
    if !(inflation > 0.0) {
        return domain("LinTS inflation must be positive");
    }
    sampled_step(belief, env, inflation, rng)
}
