use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mdp::{rollout, trajectory_embedding, PolicyTable, TabularMDP, Trajectory};
use crate::model::{pref_prob_from_scores, Rater};

/// A labelled trajectory pair; `y = 0` means `tau0` was preferred.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajPref {
    pub tau0: Trajectory,
    pub tau1: Trajectory,
    pub y: u8,
}

impl TrajPref {
    pub fn winner(&self) -> &Trajectory {
        if self.y == 0 { &self.tau0 } else { &self.tau1 }
    }

    pub fn loser(&self) -> &Trajectory {
        if self.y == 0 { &self.tau1 } else { &self.tau0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrajPrefDataset {
    pub entries: Vec<TrajPref>,
}

impl TrajPrefDataset {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `σ(β⟨φ(τ0) − φ(τ1), ϑ⟩)`.
pub fn traj_preference_prob(tau0: &Trajectory, tau1: &Trajectory, vartheta: &DVector<f64>, beta: f64, s: usize, a: usize) -> f64 {
    pref_prob_from_scores(
        trajectory_embedding(tau0, s, a).dot(vartheta),
        trajectory_embedding(tau1, s, a).dot(vartheta),
        beta,
    )
}

pub(crate) fn label<R: Rng + ?Sized>(tau0: Trajectory, tau1: Trajectory, rater: &Rater, s: usize, a: usize, rng: &mut R) -> TrajPref {
    let p0 = traj_preference_prob(&tau0, &tau1, &rater.vartheta, rater.beta, s, a);
    let u: f64 = rng.random();
    TrajPref { tau0, tau1, y: u8::from(u >= p0) }
}

/// `2N` rollouts of the behaviour policy, paired consecutively and labelled.
pub fn generate_offline_trajectories<R: Rng + ?Sized>(
    mdp: &TabularMDP,
    behavior: &PolicyTable,
    rater: &Rater,
    n: usize,
    rng: &mut R,
) -> TrajPrefDataset {
    let entries = (0..n)
        .map(|_| {
            let t0 = rollout(mdp, behavior, rng);
            let t1 = rollout(mdp, behavior, rng);
            label(t0, t1, rater, mdp.s, mdp.a, rng)
        })
        .collect();
    TrajPrefDataset { entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pspl::riverswim_env;
    use crate::rng::from_seed;
    use approx::assert_abs_diff_eq;

    #[test]
    fn logistic_examples() {
        let t0 = Trajectory { steps: vec![(0, 0)] };
        let t1 = Trajectory { steps: vec![(0, 1)] };
        let mut v = DVector::zeros(2);
        v[0] = 0.5;
        assert_eq!(traj_preference_prob(&t0, &t0, &v, 5.0, 1, 2), 0.5);
        assert_eq!(traj_preference_prob(&t0, &t1, &v, 0.0, 1, 2), 0.5);
        assert_abs_diff_eq!(traj_preference_prob(&t0, &t1, &v, 2.0, 1, 2), 0.731059, epsilon = 1e-6);
    }

    #[test]
    fn deterministic_world_gives_coin_flips() {
        let m = riverswim_env(3, 4).unwrap();
        let left = PolicyTable::deterministic(4, 3, 2, &[0; 12]);
        let rater = Rater::new(10.0, 1.0, DVector::from_element(6, 0.3)).unwrap();
        let d0 = generate_offline_trajectories(&m, &left, &rater, 2000, &mut from_seed(4));
        assert!(d0.entries.iter().all(|e| e.tau0 == e.tau1));
        let ones = d0.entries.iter().filter(|e| e.y == 1).count() as f64 / 2000.0;
        assert!((ones - 0.5).abs() < 3.0 * (0.25f64 / 2000.0).sqrt());
        assert!(generate_offline_trajectories(&m, &left, &rater, 0, &mut from_seed(4)).is_empty());
    }
}
