//! Offline preference fit with online ε-greedy refinement.

use nalgebra::DVector;
use rand::Rng;

use crate::model::{Environment, OfflinePrefDataset};
use crate::numeric::{argmax, log_sum_exp, logistic, softplus};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpoParams {
    /// Exploration probability.
    pub eps: f64,
    /// Regularisation strength `τ`.
    pub tau: f64,
    pub max_steps: usize,
    pub grad_tol: f64,
}

impl Default for DpoParams {
    fn default() -> Self {
        Self { eps: 0.16, tau: 0.1, max_steps: 20_000, grad_tol: 1e-6 }
    }
}

#[derive(Debug, Clone)]
pub struct DpoFit {
    pub logits: DVector<f64>,
    pub loss: f64,
    pub steps: usize,
    pub converged: bool,
}

/// Softmax logits minimising `mean softplus(−τ(ψ_w − ψ_l))` against a uniform
/// reference, by full-batch gradient descent from zero.
pub fn fit_dpo_logits(d0: &OfflinePrefDataset, k: usize, p: &DpoParams) -> DpoFit {
    let pairs: Vec<(usize, usize)> = d0.entries.iter().map(|e| (e.winner(), e.loser())).filter(|(w, l)| w != l).collect();
    let mut psi = DVector::zeros(k);
    if pairs.is_empty() {
        return DpoFit { logits: psi, loss: 2f64.ln() * f64::from(u8::from(!d0.is_empty())), steps: 0, converged: true };
    }
    let n = d0.len() as f64;
    let mut degree = vec![0usize; k];
    for &(w, l) in &pairs {
        degree[w] += 1;
        degree[l] += 1;
    }
    let max_deg = *degree.iter().max().unwrap_or(&1) as f64;
    // Hessian ≤ (τ²/4N)·Laplacian and the Laplacian's spectrum is ≤ 2·max degree.
    let lr = 2.0 * n / (p.tau * p.tau * max_deg);
    let value_grad = |psi: &DVector<f64>, g: &mut DVector<f64>| {
        g.fill(0.0);
        let mut f = 0.0;
        for &(w, l) in &pairs {
            let z = -p.tau * (psi[w] - psi[l]);
            f += softplus(z);
            let s = logistic(z) * p.tau / n;
            g[w] -= s;
            g[l] += s;
        }
        f / n
    };
    let mut g = DVector::zeros(k);
    let mut loss = value_grad(&psi, &mut g);
    for step in 0..p.max_steps {
        if g.norm() <= p.grad_tol {
            return DpoFit { logits: psi, loss, steps: step, converged: true };
        }
        psi -= lr * &g;
        loss = value_grad(&psi, &mut g);
    }
    let converged = g.norm() <= p.grad_tol;
    DpoFit { logits: psi, loss, steps: p.max_steps, converged }
}

/// `r(a) = τ ln(π(a)/π_ref(a))`, shifted so that `min_a r(a) = min_reward`.
pub fn dpo_rewards(logits: &DVector<f64>, tau: f64, min_reward: f64) -> Vec<f64> {
    let k = logits.len() as f64;
    let lse = log_sum_exp(logits.as_slice());
    let r: Vec<f64> = logits.iter().map(|&x| tau * (x - lse + k.ln())).collect();
    let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
    r.into_iter().map(|x| x - lo + min_reward).collect()
}

/// Per-step `(arm, reward)` of the ε-greedy learner seeded with the fitted
/// rewards. Each offline estimate counts as one pseudo-observation in the
/// running mean.
pub fn hybrid_dpo_baseline<R: Rng + ?Sized>(
    d0: &OfflinePrefDataset,
    env: &Environment,
    p: &DpoParams,
    t: usize,
    min_reward: f64,
    rng: &mut R,
) -> Result<Vec<(usize, f64)>> {
    let k = env.k();
    let fit = fit_dpo_logits(d0, k, p);
    let mut sums = dpo_rewards(&fit.logits, p.tau, min_reward);
    let mut counts = vec![1.0; k];
    let mut out = Vec::with_capacity(t);
    for _ in 0..t {
        let arm = if rng.random_bool(p.eps) {
            rng.random_range(0..k)
        } else {
            argmax(sums.iter().zip(&counts).map(|(s, c)| s / c))
        };
        let reward = env.reward_sample(arm, rng)?;
        sums[arm] += reward;
        counts[arm] += 1.0;
        out.push((arm, reward));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PrefEntry;
    use crate::numeric::mean_se;
    use crate::rng::from_seed;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn env(k: usize) -> Environment {
        let actions = DMatrix::from_fn(k, 1, |i, _| i as f64 / k as f64);
        Environment::new(DVector::from_vec(vec![1.0]), actions, 1.0).unwrap()
    }

    #[test]
    fn rewards_are_shifted_log_ratios() {
        let r = dpo_rewards(&DVector::from_vec(vec![0.0, 1.0, 3.0]), 0.5, -2.0);
        assert_abs_diff_eq!(r[0], -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r[1] - r[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r[2] - r[0], 1.5, epsilon = 1e-12);
    }

    #[test]
    fn empty_data_stays_uniform() {
        let fit = fit_dpo_logits(&OfflinePrefDataset::default(), 4, &DpoParams::default());
        assert!(fit.logits.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn greedy_on_a_strong_preference() {
        let d0 = OfflinePrefDataset::new(
            (0..5).flat_map(|j| (0..4).filter(move |&i| i != 2 && i != j % 5).map(move |i| PrefEntry { idx0: 2, idx1: i, y: 0 })).collect(),
        );
        let p = DpoParams { eps: 0.0, ..Default::default() };
        let steps = hybrid_dpo_baseline(&d0, &env(4), &p, 1, 0.0, &mut from_seed(1)).unwrap();
        assert_eq!(steps[0].0, 2);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let p = DpoParams { eps: 1.0, ..Default::default() };
        let t = 10_000;
        let steps = hybrid_dpo_baseline(&OfflinePrefDataset::default(), &env(4), &p, t, 0.0, &mut from_seed(2)).unwrap();
        for a in 0..4 {
            let hits: Vec<f64> = steps.iter().map(|s| f64::from(u8::from(s.0 == a))).collect();
            let (m, se) = mean_se(&hits);
            assert!((m - 0.25).abs() < 3.0 * se, "arm {a}: {m}");
        }
    }

    #[test]
    fn gradient_descent_lowers_the_loss() {
        let d0 = OfflinePrefDataset::new(vec![PrefEntry { idx0: 0, idx1: 1, y: 0 }, PrefEntry { idx0: 1, idx1: 0, y: 0 }, PrefEntry { idx0: 0, idx1: 2, y: 0 }]);
        let fit = fit_dpo_logits(&d0, 3, &DpoParams::default());
        assert!(fit.loss < 2f64.ln());
        assert!(fit.logits[0] > fit.logits[1] && fit.logits[1] > fit.logits[2]);
    }
}
