use nalgebra::DVector;
use rand::Rng;

use super::loss::{LossParams, Surrogate};
use super::perturb::{perturb, PerturbationSet};
use crate::model::Environment;
use crate::numeric::argmax;
use crate::optim::{minimize, InitPolicy, OptimizerSpec, StopReason};
use crate::Result;

/// Minimiser of the (perturbed) surrogate loss.
#[derive(Debug, Clone)]
pub struct MapEstimate {
    pub theta: DVector<f64>,
    /// One per rater; the primary rater first.
    pub varthetas: Vec<DVector<f64>>,
    pub value: f64,
    pub converged: bool,
    pub iters: usize,
    pub stop: StopReason,
}

impl MapEstimate {
    pub fn vartheta(&self) -> &DVector<f64> {
        &self.varthetas[0]
    }
}

pub fn perturbed_map(p: &LossParams, pert: &PerturbationSet, opt: &OptimizerSpec) -> MapEstimate {
    let (theta0, vt0) = match opt.init {
        InitPolicy::Prior => (p.prior.mean().clone(), p.prior.mean().clone()),
        InitPolicy::Zero => (DVector::zeros(p.dim()), DVector::zeros(p.dim())),
    };
    perturbed_map_from(p, pert, opt, &theta0, &vec![vt0; p.raters.len()])
}

/// As [`perturbed_map`] from an explicit starting point.
pub fn perturbed_map_from(
    p: &LossParams,
    pert: &PerturbationSet,
    opt: &OptimizerSpec,
    theta0: &DVector<f64>,
    varthetas0: &[DVector<f64>],
) -> MapEstimate {
    let s = Surrogate::new(p, Some(pert));
    let out = minimize(&s, s.to_internal(theta0, varthetas0), opt);
    let (theta, varthetas) = s.from_internal(&out.x);
    MapEstimate { theta, varthetas, value: out.value, converged: out.converged, iters: out.iters, stop: out.stop }
}

/// Unperturbed MAP estimate.
pub fn map_estimate(p: &LossParams, opt: &OptimizerSpec) -> MapEstimate {
    perturbed_map(p, &PerturbationSet::none(p), opt)
}

#[derive(Debug, Clone)]
pub struct BootStep {
    pub arm: usize,
    pub reward: f64,
    pub converged: bool,
    pub theta_hat: DVector<f64>,
}

/// One round of Algorithm 2: perturb, solve, act greedily, record the reward.
pub fn bootstrapped_step<R: Rng + ?Sized>(
    p: &mut LossParams,
    env: &Environment,
    opt: &OptimizerSpec,
    rng: &mut R,
) -> Result<BootStep> {
    let pert = perturb(p, rng);
    let est = perturbed_map(p, &pert, opt);
    let arm = argmax((&p.actions * &est.theta).iter().copied());
    let reward = env.reward_sample(arm, rng)?;
    p.history.push(arm, reward);
    Ok(BootStep { arm, reward, converged: est.converged, theta_hat: est.theta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{OfflinePrefDataset, PrefEntry, PriorSpec};
    use crate::optim::Method;
    use crate::rng::from_seed;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn params(lambda: f64) -> LossParams {
        let actions = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, -0.6, 0.8]);
        let d0 = OfflinePrefDataset::new(vec![
            PrefEntry { idx0: 0, idx1: 1, y: 0 },
            PrefEntry { idx0: 2, idx1: 1, y: 1 },
            PrefEntry { idx0: 0, idx1: 2, y: 0 },
        ]);
        let mut p = LossParams::new(PriorSpec::standard(2), actions, 5.0, lambda, d0).unwrap();
        p.history.push(0, 0.7);
        p.history.push(1, -0.2);
        p
    }

    #[test]
    fn zero_perturbation_is_the_map() {
        let p = params(3.0);
        let est = map_estimate(&p, &OptimizerSpec::default());
        assert!(est.converged);
        let (_, g) = super::super::surrogate_loss(&est.theta, est.vartheta(), &p);
        assert!(g.norm() < 1e-8);
    }

    #[test]
    fn starting_point_does_not_matter() {
        let p = params(3.0);
        let pert = perturb(&p, &mut from_seed(3));
        let opt = OptimizerSpec::default();
        let a = perturbed_map(&p, &pert, &opt);
        let far = DVector::from_vec(vec![4.0, -3.0]);
        let b = perturbed_map_from(&p, &pert, &opt, &far, &[-far.clone()]);
        assert!((&a.theta - &b.theta).amax() < 1e-6);
        assert!((a.vartheta() - b.vartheta()).amax() < 1e-6);
    }

    #[test]
    fn gradient_descent_agrees_with_newton() {
        let p = params(3.0);
        let pert = perturb(&p, &mut from_seed(4));
        let a = perturbed_map(&p, &pert, &OptimizerSpec::default());
        let b = perturbed_map(&p, &pert, &OptimizerSpec { method: Method::GradientDescent, ..Default::default() });
        assert!(a.converged && b.converged);
        assert!((&a.theta - &b.theta).amax() < 1e-6);
    }

    #[test]
    fn knowledgeable_rater_ties_theta_to_vartheta() {
        let p = params(1e5);
        let est = map_estimate(&p, &OptimizerSpec::default());
        assert!(est.converged);
        assert!((&est.theta - est.vartheta()).amax() < 1e-6);
    }

    #[test]
    fn step_is_reproducible() {
        let p0 = params(3.0);
        let env = crate::model::Environment::new(DVector::from_vec(vec![0.5, -0.5]), p0.actions.clone(), 1.0).unwrap();
        let run = |seed| {
            let mut p = p0.clone();
            let mut rng = from_seed(seed);
            (0..10).map(|_| bootstrapped_step(&mut p, &env, &OptimizerSpec::default(), &mut rng).unwrap().arm).collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
        let mut p = p0.clone();
        bootstrapped_step(&mut p, &env, &OptimizerSpec::default(), &mut from_seed(1)).unwrap();
        assert_eq!(p.history.len(), 3);
        assert_abs_diff_eq!(p.sigma, 1.0);
    }
}
