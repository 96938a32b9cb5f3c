use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::StepResult;
use crate::error::domain;
use crate::model::{Environment, OfflinePrefDataset, PriorSpec};
use crate::numeric::{argmax, log_logistic, std_normal_vec};
use crate::Result;

/// Smallest log-likelihood whose exponential is a normal f64.
const LOG_UNDERFLOW: f64 = -708.0;

/// Weighted joint particles `(θ_m, ϑ_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleBelief {
    /// One particle per row.
    pub thetas: DMatrix<f64>,
    pub varthetas: DMatrix<f64>,
    pub weights: Vec<f64>,
    /// Set once the informed prior had to be tempered.
    pub tempered: bool,
}

impl ParticleBelief {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn ess(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    pub fn mean_theta(&self) -> DVector<f64> {
        self.thetas.tr_mul(&DVector::from_column_slice(&self.weights))
    }

    pub fn theta(&self, m: usize) -> DVector<f64> {
        self.thetas.row(m).transpose()
    }

    /// Index drawn with probability proportional to weight.
    pub fn draw_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (m, &w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return m;
            }
        }
        self.weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    }

    /// Multiplies weights by `exp(loglik)` and renormalises in log space.
    fn reweight(&mut self, loglik: &[f64]) {
        let logw: Vec<f64> = self
            .weights
            .iter()
            .zip(loglik)
            .map(|(&w, &l)| if w > 0.0 && !l.is_nan() { w.ln() + l } else { f64::NEG_INFINITY })
            .collect();
        match normalize_log(&logw) {
            Some(w) => self.weights = w,
            None => self.weights = uniform(self.len()),
        }
    }
}

fn uniform(m: usize) -> Vec<f64> {
    vec![1.0 / m as f64; m]
}

fn normalize_log(logw: &[f64]) -> Option<Vec<f64>> {
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let w: Vec<f64> = logw.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    Some(w.into_iter().map(|x| x / total).collect())
}

/// Importance-weighted particles for `ν1(θ) ∝ P(D0 | θ) ν0(θ)`.
///
/// The pair-sampling factors `P(Ā | θ)` do not depend on `θ` and are dropped.
/// If every raw likelihood would underflow, the log-likelihood is halved until
/// it does not and the belief is flagged as tempered.
pub fn informed_prior_particles<R: Rng + ?Sized>(
    prior: &PriorSpec,
    lambda: f64,
    beta: f64,
    d0: &OfflinePrefDataset,
    actions: &DMatrix<f64>,
    m: usize,
    rng: &mut R,
) -> Result<ParticleBelief> {
    if m == 0 {
        return domain("particle count must be at least 1");
    }
    if !(lambda > 0.0) {
        return domain("lambda must be positive");
    }
    let d = prior.dim();
    let mut thetas = DMatrix::zeros(m, d);
    let mut varthetas = DMatrix::zeros(m, d);
    for i in 0..m {
        let th = prior.sample(rng);
        let vt = &th + std_normal_vec(d, rng) / lambda;
        thetas.set_row(i, &th.transpose());
        varthetas.set_row(i, &vt.transpose());
    }
    let mut belief = ParticleBelief { thetas, varthetas, weights: uniform(m), tempered: false };
    if d0.is_empty() {
        return Ok(belief);
    }
    let diffs = winner_minus_loser(d0, actions);
    let margins = &belief.varthetas * diffs.transpose();
    let mut loglik: Vec<f64> = margins
        .row_iter()
        .map(|row| row.iter().map(|&x| pref_log_prob(beta, x)).sum())
        .collect();
    let mut max = loglik.iter().copied().filter(|l| !l.is_nan()).fold(f64::NEG_INFINITY, f64::max);
    while max.is_finite() && max < LOG_UNDERFLOW {
        loglik.iter_mut().for_each(|l| *l *= 0.5);
        max *= 0.5;
        belief.tempered = true;
    }
    if !max.is_finite() {
        belief.tempered = true;
    }
    belief.reweight(&loglik);
    Ok(belief)
}

/// `log σ(β x)`, with `x = 0` giving `log ½` even for infinite `β`.
fn pref_log_prob(beta: f64, x: f64) -> f64 {
    if x == 0.0 || beta == 0.0 {
        return -std::f64::consts::LN_2;
    }
    log_logistic(beta * x)
}

/// Rows `a_W − a_L` for every comparison.
pub(crate) fn winner_minus_loser(d0: &OfflinePrefDataset, actions: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(d0.len(), actions.ncols());
    for (n, e) in d0.entries.iter().enumerate() {
        out.set_row(n, &(actions.row(e.winner()) - actions.row(e.loser())));
    }
    out
}

/// Systematic resampling to uniform weights.
pub fn sir_resample<R: Rng + ?Sized>(belief: &ParticleBelief, rng: &mut R) -> ParticleBelief {
    let m = belief.len();
    let u0: f64 = rng.random::<f64>() / m as f64;
    let mut idx = Vec::with_capacity(m);
    let mut acc = belief.weights[0];
    let mut j = 0;
    for i in 0..m {
        let u = u0 + i as f64 / m as f64;
        while u >= acc && j + 1 < m {
            j += 1;
            acc += belief.weights[j];
        }
        idx.push(j);
    }
    let d = belief.thetas.ncols();
    let mut thetas = DMatrix::zeros(m, d);
    let mut varthetas = DMatrix::zeros(m, d);
    for (i, &j) in idx.iter().enumerate() {
        thetas.set_row(i, &belief.thetas.row(j));
        varthetas.set_row(i, &belief.varthetas.row(j));
    }
    ParticleBelief { thetas, varthetas, weights: uniform(m), tempered: belief.tempered }
}

/// One round of Algorithm 1 on the particle belief: draw a particle, act
/// greedily for it, reweight by the Gaussian reward likelihood, and resample
/// when the effective sample size drops below `M/2`.
pub fn warmpref_ps_step<R: Rng + ?Sized>(
    belief: &mut ParticleBelief,
    env: &Environment,
    sigma: f64,
    rng: &mut R,
) -> Result<StepResult> {
    if !(sigma > 0.0) {
        return domain("noise scale must be positive");
    }
    let m = belief.draw_index(rng);
    let arm = argmax((env.actions() * belief.theta(m)).iter().copied());
    let reward = env.reward_sample(arm, rng)?;
    let a = env.arm(arm);
    let preds = &belief.thetas * &a;
    let inv2s2 = 0.5 / (sigma * sigma);
    let loglik: Vec<f64> = preds.iter().map(|&p| -(reward - p).powi(2) * inv2s2).collect();
    belief.reweight(&loglik);
    if belief.ess() < 0.5 * belief.len() as f64 {
        *belief = sir_resample(belief, rng);
    }
    Ok(StepResult { arm, reward })
}
