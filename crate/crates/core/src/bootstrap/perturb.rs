use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use super::loss::LossParams;
use crate::numeric::std_normal_vec;

/// Per-rater offline perturbation: bootstrap weights and the `ϑ'` shift.
#[derive(Debug, Clone, PartialEq)]
pub struct RaterPerturbation {
    pub omega: Vec<bool>,
    pub vartheta_prime: DVector<f64>,
}

/// One draw of all three perturbations.
///
/// `θ'` and `ϑ'` are centred at zero: they shift `θ − μ0` and `θ − ϑ`
/// respectively, so their means are already accounted for by the loss.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSet {
    pub zeta: Vec<f64>,
    pub theta_prime: DVector<f64>,
    pub raters: Vec<RaterPerturbation>,
}

impl PerturbationSet {
    /// `ζ = 0`, `ω = 1`, `θ' = ϑ' = 0`: reduces the perturbed loss to the MAP loss.
    pub fn none(p: &LossParams) -> Self {
        let d = p.dim();
        Self {
            zeta: vec![0.0; p.history.len()],
            theta_prime: DVector::zeros(d),
            raters: p
                .raters
                .iter()
                .map(|r| RaterPerturbation { omega: vec![true; r.d0.len()], vartheta_prime: DVector::zeros(d) })
                .collect(),
        }
    }

    /// Bootstrap weights of the primary rater.
    pub fn omega(&self) -> &[bool] {
        &self.raters[0].omega
    }

    pub fn vartheta_prime(&self) -> &DVector<f64> {
        &self.raters[0].vartheta_prime
    }
}

/// `ζ_s ~ N(0,1)`, `θ' ~ N(0, Σ0)`, and per rater `ω_n ~ Bern(½)`,
/// `ϑ' ~ N(0, I/λ²)`. Draws where every `ω` is zero are kept.
pub fn perturb<R: Rng + ?Sized>(p: &LossParams, rng: &mut R) -> PerturbationSet {
    let zeta = (0..p.history.len()).map(|_| rng.sample(StandardNormal)).collect();
    let theta_prime = p.prior.sample_centered(rng);
    let raters = p
        .raters
        .iter()
        .map(|r| {
            let omega = (0..r.d0.len()).map(|_| rng.random_bool(0.5)).collect();
            let vartheta_prime = std_normal_vec(p.dim(), rng) / r.lambda;
            RaterPerturbation { omega, vartheta_prime }
        })
        .collect();
    PerturbationSet { zeta, theta_prime, raters }
}
