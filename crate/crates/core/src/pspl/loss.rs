use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::learner::PsplParams;
use super::mdp::trajectory_embedding;
use super::prefs::TrajPrefDataset;
use crate::bootstrap::{PrefBlock, Surrogate};
use crate::optim::Objective;

/// Multiplier on the Dirichlet log-prior term of the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DirichletPrefactor {
    /// `SA · Σ (α0 − 1) ln η`, as displayed.
    #[default]
    Displayed,
    /// `Σ (α0 − 1) ln η`, the conventional per-row prior.
    PerPair,
}

impl DirichletPrefactor {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "displayed" | "sa" => Some(Self::Displayed),
            "per-pair" | "conventional" => Some(Self::PerPair),
            _ => None,
        }
    }

    pub fn factor(self, s: usize, a: usize) -> f64 {
        match self {
            Self::Displayed => (s * a) as f64,
            Self::PerPair => 1.0,
        }
    }
}

/// Perturbation of the PSPL loss: Bernoulli keep-weights on offline and
/// online comparisons plus the two prior shifts.
#[derive(Debug, Clone, PartialEq)]
pub struct PsplPerturbation {
    pub omega: Vec<bool>,
    pub zeta: Vec<bool>,
    pub theta_prime: DVector<f64>,
    pub vartheta_prime: DVector<f64>,
}

impl PsplPerturbation {
    pub fn none(n_offline: usize, n_online: usize, dim: usize) -> Self {
        Self {
            omega: vec![true; n_offline],
            zeta: vec![true; n_online],
            theta_prime: DVector::zeros(dim),
            vartheta_prime: DVector::zeros(dim),
        }
    }
}

fn weights(bits: &[bool]) -> impl Iterator<Item = f64> + '_ {
    bits.iter().map(|&b| if b { 1.0 } else { 0.0 })
}

/// Rows `φ(τ_L) − φ(τ_W)`.
pub(crate) fn pref_diffs(data: &TrajPrefDataset, s: usize, a: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(data.len(), s * a);
    for (n, e) in data.entries.iter().enumerate() {
        let d = trajectory_embedding(e.loser(), s, a) - trajectory_embedding(e.winner(), s, a);
        out.set_row(n, &d.transpose());
    }
    out
}

/// The `(θ, ϑ)` part of the loss as a convex objective.
pub(crate) fn reward_objective(
    offline_diffs: &DMatrix<f64>,
    online_diffs: &DMatrix<f64>,
    params: &PsplParams,
    pert: &PsplPerturbation,
) -> Surrogate {
    let dim = params.prior.dim();
    let mut diffs = DMatrix::zeros(offline_diffs.nrows() + online_diffs.nrows(), dim);
    diffs.rows_mut(0, offline_diffs.nrows()).copy_from(offline_diffs);
    diffs.rows_mut(offline_diffs.nrows(), online_diffs.nrows()).copy_from(online_diffs);
    let w = weights(&pert.omega).chain(weights(&pert.zeta)).collect();
    Surrogate {
        d: dim,
        gram: DMatrix::zeros(dim, dim),
        lin: DVector::zeros(dim),
        constant: 0.0,
        prior_prec: params.prior.precision().clone(),
        prior_center: params.prior.mean() + &pert.theta_prime,
        blocks: vec![PrefBlock {
            lambda2: params.lambda * params.lambda,
            offset: pert.vartheta_prime.clone(),
            beta: params.beta,
            diffs,
            weights: w,
        }],
    }
}

/// Perturbation-weighted transition counts.
pub(crate) fn weighted_counts(
    offline: &TrajPrefDataset,
    online: &TrajPrefDataset,
    pert: &PsplPerturbation,
    s: usize,
    a: usize,
) -> Vec<f64> {
    let mut c = vec![0.0; s * a * s];
    let pairs = offline.entries.iter().zip(weights(&pert.omega)).chain(online.entries.iter().zip(weights(&pert.zeta)));
    for (e, w) in pairs {
        if w == 0.0 {
            continue;
        }
        for i in e.tau0.transitions(s, a).chain(e.tau1.transitions(s, a)) {
            c[i] += w;
        }
    }
    c
}

/// Closed-form minimiser over `η` of the transition terms:
/// `η(·|s,a) ∝ (counts + c(α0 − 1))⁺`, uniform for rows without mass.
pub fn eta_map(counts: &[f64], s: usize, a: usize, alpha0: f64, prefactor: DirichletPrefactor) -> Vec<f64> {
    let c = prefactor.factor(s, a);
    counts
        .chunks(s)
        .flat_map(|row| {
            let m: Vec<f64> = row.iter().map(|&x| (x + c * (alpha0 - 1.0)).max(0.0)).collect();
            let t: f64 = m.iter().sum();
            if t > 0.0 {
                m.into_iter().map(|x| x / t).collect::<Vec<_>>()
            } else {
                vec![1.0 / s as f64; s]
            }
        })
        .collect()
}

/// Value of the PSPL loss at `(θ, ϑ, η)` and its gradient over `(θ, ϑ)`.
///
/// `L1` holds online comparisons and online transitions, `L2` offline
/// comparisons (and offline transitions, weighted like their comparison),
/// `L3` the coupling, the Gaussian prior and the Dirichlet log-prior.
#[allow(clippy::too_many_arguments)]
pub fn pspl_surrogate_loss(
    theta: &DVector<f64>,
    vartheta: &DVector<f64>,
    eta: &[f64],
    offline: &TrajPrefDataset,
    online: &TrajPrefDataset,
    params: &PsplParams,
    s: usize,
    a: usize,
    pert: Option<&PsplPerturbation>,
) -> (f64, DVector<f64>) {
    let none;
    let pert = match pert {
        Some(p) => p,
        None => {
            none = PsplPerturbation::none(offline.len(), online.len(), s * a);
            &none
        }
    };
    let obj = reward_objective(&pref_diffs(offline, s, a), &pref_diffs(online, s, a), params, pert);
    let x = obj.to_internal(theta, std::slice::from_ref(vartheta));
    let mut g = DVector::zeros(obj.n_vars());
    let mut value = obj.value_grad(&x, &mut g);
    let counts = weighted_counts(offline, online, pert, s, a);
    let c = params.prefactor.factor(s, a);
    for (i, &e) in eta.iter().enumerate() {
        let w = counts[i] + c * (params.alpha0 - 1.0);
        if w != 0.0 {
            value -= w * e.ln();
        }
    }
    (value, obj.grad_to_original(&g))
}
