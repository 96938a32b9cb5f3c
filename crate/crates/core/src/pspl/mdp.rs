use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::config;
use crate::numeric::argmax;
use crate::Result;

/// Finite-horizon tabular MDP. `trans[(s·A + a)·S + s']`, `reward[s·A + a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularMDP {
    pub s: usize,
    pub a: usize,
    pub h: usize,
    pub trans: Vec<f64>,
    pub reward: Vec<f64>,
    pub rho: Vec<f64>,
}

impl TabularMDP {
    pub fn new(s: usize, a: usize, h: usize, trans: Vec<f64>, reward: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        if s == 0 || a == 0 || h == 0 {
            return config("S, A and H must be positive");
        }
        if trans.len() != s * a * s || reward.len() != s * a || rho.len() != s {
            return config("MDP table shapes disagree with S and A");
        }
        for row in trans.chunks(s) {
            if row.iter().any(|&p| p < 0.0) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return config("every transition row must be a probability vector");
            }
        }
        if reward.iter().any(|&r| !(0.0..=1.0).contains(&r)) {
            return config("rewards must lie in [0, 1]");
        }
        if rho.iter().any(|&p| p < 0.0) || (rho.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return config("initial distribution must sum to 1");
        }
        Ok(Self { s, a, h, trans, reward, rho })
    }

    pub fn p(&self, s: usize, a: usize, s2: usize) -> f64 {
        self.trans[(s * self.a + a) * self.s + s2]
    }

    pub fn r(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.a + a]
    }

    pub fn optimal_plan(&self) -> Plan {
        finite_horizon_plan(&self.reward, &self.trans, self.s, self.a, self.h)
    }

    pub fn trajectory_return(&self, tau: &Trajectory) -> f64 {
        tau.steps.iter().map(|&(s, a)| self.r(s, a)).sum()
    }
}

/// Chain of `S` states with actions left (0) and right (1).
///
/// Left moves deterministically towards state 0 and pays 0.005 there. Right
/// succeeds with 0.3, stays with 0.6 and slips back with 0.1; at state 0 a
/// slip stays put, at the top state success stays put, and right at the top
/// pays 1. Episodes start at state 0.
pub fn riverswim_env(s: usize, h: usize) -> Result<TabularMDP> {
    if s < 2 {
        return config("RiverSwim needs at least two states");
    }
    let a = 2;
    let mut trans = vec![0.0; s * a * s];
    let idx = |st: usize, act: usize, s2: usize| (st * a + act) * s + s2;
    for st in 0..s {
        trans[idx(st, 0, st.saturating_sub(1))] = 1.0;
        let up = (st + 1).min(s - 1);
        let down = st.saturating_sub(1);
        trans[idx(st, 1, up)] += 0.3;
        trans[idx(st, 1, st)] += 0.6;
        trans[idx(st, 1, down)] += 0.1;
    }
    let mut reward = vec![0.0; s * a];
    reward[0] = 0.005;
    reward[(s - 1) * a + 1] = 1.0;
    let mut rho = vec![0.0; s];
    rho[0] = 1.0;
    TabularMDP::new(s, a, h, trans, reward, rho)
}

/// Transitions from `Dir(1)`, rewards `U(0, 1)`, uniform initial state.
pub fn random_mdp<R: Rng + ?Sized>(s: usize, a: usize, h: usize, rng: &mut R) -> Result<TabularMDP> {
    if s == 0 || a == 0 || h == 0 {
        return config("S, A and H must be positive");
    }
    let gamma = Gamma::new(1.0, 1.0).expect("valid gamma");
    let mut trans = Vec::with_capacity(s * a * s);
    for _ in 0..s * a {
        let row: Vec<f64> = (0..s).map(|_| Distribution::<f64>::sample(&gamma, rng).max(1e-300)).collect();
        let total: f64 = row.iter().sum();
        trans.extend(row.into_iter().map(|x| x / total));
    }
    let reward = (0..s * a).map(|_| rng.random::<f64>()).collect();
    TabularMDP::new(s, a, h, trans, reward, vec![1.0 / s as f64; s])
}

/// `H` state-action pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<(usize, usize)>,
}

impl Trajectory {
    /// Indices `(s·A + a)·S + s'` of the `H − 1` observed transitions.
    pub fn transitions(&self, s: usize, a: usize) -> impl Iterator<Item = usize> + '_ {
        self.steps.windows(2).map(move |w| (w[0].0 * a + w[0].1) * s + w[1].0)
    }
}

/// `φ(τ) = (1/H) Σ_h e_{s_h·A + a_h}`, so `‖φ(τ)‖₁ = 1`.
pub fn trajectory_embedding(tau: &Trajectory, s: usize, a: usize) -> DVector<f64> {
    let mut phi = DVector::zeros(s * a);
    let w = 1.0 / tau.steps.len() as f64;
    for &(st, act) in &tau.steps {
        phi[st * a + act] += w;
    }
    phi
}

/// Time-dependent stochastic policy, `probs[(h·S + s)·A + a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTable {
    pub h: usize,
    pub s: usize,
    pub a: usize,
    pub probs: Vec<f64>,
}

impl PolicyTable {
    pub fn uniform(h: usize, s: usize, a: usize) -> Self {
        Self { h, s, a, probs: vec![1.0 / a as f64; h * s * a] }
    }

    /// Deterministic policy from `actions[h·S + s]`.
    pub fn deterministic(h: usize, s: usize, a: usize, actions: &[usize]) -> Self {
        let mut probs = vec![0.0; h * s * a];
        for (i, &act) in actions.iter().enumerate() {
            probs[i * a + act] = 1.0;
        }
        Self { h, s, a, probs }
    }

    pub fn row(&self, h: usize, s: usize) -> &[f64] {
        let i = (h * self.s + s) * self.a;
        &self.probs[i..i + self.a]
    }

    pub fn row_mut(&mut self, h: usize, s: usize) -> &mut [f64] {
        let i = (h * self.s + s) * self.a;
        &mut self.probs[i..i + self.a]
    }

    /// The action if the row is deterministic.
    pub fn action(&self, h: usize, s: usize) -> Option<usize> {
        self.row(h, s).iter().position(|&p| p == 1.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, h: usize, s: usize, rng: &mut R) -> usize {
        let row = self.row(h, s);
        if let Some(a) = row.iter().position(|&p| p == 1.0) {
            return a;
        }
        sample_categorical(row, rng)
    }
}

pub(crate) fn sample_categorical<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    p.iter().rposition(|&x| x > 0.0).unwrap_or(0)
}

/// Greedy policy and its values `V_h(s)` for `h = 0..=H` (`V_H = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub policy: PolicyTable,
    /// `values[h·S + s]`.
    pub values: Vec<f64>,
}

impl Plan {
    pub fn value(&self, h: usize, s: usize) -> f64 {
        self.values[h * self.policy.s + s]
    }
}

/// Backward induction on `(reward, trans)`; ties go to the lowest action.
pub fn finite_horizon_plan(reward: &[f64], trans: &[f64], s: usize, a: usize, h: usize) -> Plan {
    let mut values = vec![0.0; (h + 1) * s];
    let mut actions = vec![0; h * s];
    let mut q = vec![0.0; a];
    for step in (0..h).rev() {
        let (cur, next) = values.split_at_mut((step + 1) * s);
        for st in 0..s {
            for (act, qv) in q.iter_mut().enumerate() {
                let row = &trans[(st * a + act) * s..(st * a + act + 1) * s];
                *qv = reward[st * a + act] + row.iter().zip(&next[..s]).map(|(p, v)| p * v).sum::<f64>();
            }
            let best = argmax(q.iter().copied());
            actions[step * s + st] = best;
            cur[step * s + st] = q[best];
        }
    }
    Plan { policy: PolicyTable::deterministic(h, s, a, &actions), values }
}

/// `V^π(ρ)` by exact policy evaluation.
pub fn policy_value(mdp: &TabularMDP, policy: &PolicyTable) -> f64 {
    let (s, a) = (mdp.s, mdp.a);
    let mut v = vec![0.0; s];
    for step in (0..mdp.h).rev() {
        let next = v.clone();
        for st in 0..s {
            v[st] = policy
                .row(step, st)
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(act, &p)| {
                    let row = &mdp.trans[(st * a + act) * s..(st * a + act + 1) * s];
                    p * (mdp.r(st, act) + row.iter().zip(&next).map(|(q, v)| q * v).sum::<f64>())
                })
                .sum();
        }
    }
    mdp.rho.iter().zip(&v).map(|(p, v)| p * v).sum()
}

/// `P(s_h = s)` under `policy`, laid out `[h·S + s]`.
pub fn state_distribution(mdp: &TabularMDP, policy: &PolicyTable) -> Vec<f64> {
    let (s, a) = (mdp.s, mdp.a);
    let mut out = vec![0.0; mdp.h * s];
    out[..s].copy_from_slice(&mdp.rho);
    for step in 1..mdp.h {
        for st in 0..s {
            let mass = out[(step - 1) * s + st];
            if mass == 0.0 {
                continue;
            }
            for (act, &p) in policy.row(step - 1, st).iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for s2 in 0..s {
                    out[step * s + s2] += mass * p * mdp.trans[(st * a + act) * s + s2];
                }
            }
        }
    }
    out
}

/// Rolls out one trajectory.
pub fn rollout<R: Rng + ?Sized>(mdp: &TabularMDP, policy: &PolicyTable, rng: &mut R) -> Trajectory {
    let mut steps = Vec::with_capacity(mdp.h);
    let mut st = sample_categorical(&mdp.rho, rng);
    for step in 0..mdp.h {
        let act = policy.sample(step, st, rng);
        steps.push((st, act));
        if step + 1 < mdp.h {
            let i = (st * mdp.a + act) * mdp.s;
            st = sample_categorical(&mdp.trans[i..i + mdp.s], rng);
        }
    }
    Trajectory { steps }
}

/// Visitation infima used only by the analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisitationDiagnostics {
    /// `min_{h,s} max_π P^π(s_h = s)`.
    pub p_min: f64,
    /// `min` of `P^{π*}(s_h = s)` over pairs reachable under `π*`.
    pub p_star_min: f64,
}

pub fn visitation_diagnostics(mdp: &TabularMDP) -> VisitationDiagnostics {
    let (s, a) = (mdp.s, mdp.a);
    let mut p_min = f64::INFINITY;
    for target_h in 0..mdp.h {
        for target in 0..s {
            // maximise P(s_{target_h} = target) by backward induction
            let mut v: Vec<f64> = (0..s).map(|x| f64::from(u8::from(x == target))).collect();
            for _ in 0..target_h {
                let next = v.clone();
                for (st, vs) in v.iter_mut().enumerate() {
                    *vs = (0..a)
                        .map(|act| {
                            let row = &mdp.trans[(st * a + act) * s..(st * a + act + 1) * s];
                            row.iter().zip(&next).map(|(p, x)| p * x).sum::<f64>()
                        })
                        .fold(0.0, f64::max);
                }
            }
            let reach: f64 = mdp.rho.iter().zip(&v).map(|(p, x)| p * x).sum();
            p_min = p_min.min(reach);
        }
    }
    let dist = state_distribution(mdp, &mdp.optimal_plan().policy);
    let p_star_min = dist.iter().copied().filter(|&p| p > 0.0).fold(f64::INFINITY, f64::min);
    VisitationDiagnostics { p_min, p_star_min }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;
    use approx::assert_abs_diff_eq;

    #[test]
    fn riverswim_rows_are_stochastic() {
        let m = riverswim_env(6, 20).unwrap();
        for row in m.trans.chunks(6) {
            assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
        assert!(riverswim_env(1, 3).is_err());
    }

    #[test]
    fn always_left_value() {
        let m = riverswim_env(5, 7).unwrap();
        let left = PolicyTable::deterministic(7, 5, 2, &vec![0; 35]);
        // starts at 0 and stays there, collecting 0.005 every step
        assert_abs_diff_eq!(policy_value(&m, &left), 7.0 * 0.005, epsilon = 1e-15);
    }

    #[test]
    fn one_step_plan_is_reward_argmax() {
        let m = riverswim_env(4, 1).unwrap();
        let plan = m.optimal_plan();
        assert_eq!(plan.policy.action(0, 3), Some(1));
        assert_eq!(plan.policy.action(0, 0), Some(0));
        // tie at interior states goes to left
        assert_eq!(plan.policy.action(0, 1), Some(0));
    }

    #[test]
    fn embedding_properties() {
        let tau = Trajectory { steps: vec![(1, 0), (2, 1), (1, 0)] };
        let phi = trajectory_embedding(&tau, 3, 2);
        assert_abs_diff_eq!(phi.lp_norm(1), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(phi[2], 2.0 / 3.0);
        let perm = Trajectory { steps: vec![(1, 0), (1, 0), (2, 1)] };
        assert_eq!(phi, trajectory_embedding(&perm, 3, 2));
        let one = trajectory_embedding(&Trajectory { steps: vec![(2, 1)] }, 3, 2);
        assert_eq!(one[5], 1.0);
        assert_eq!(one.sum(), 1.0);
    }

    #[test]
    fn values_shrink_with_fewer_steps_left() {
        let m = random_mdp(4, 3, 6, &mut from_seed(2)).unwrap();
        let plan = m.optimal_plan();
        for h in 0..6 {
            for s in 0..4 {
                assert!(plan.value(h, s) >= plan.value(h + 1, s));
            }
        }
    }

    #[test]
    fn rollouts_have_length_h() {
        let m = riverswim_env(3, 9).unwrap();
        let tau = rollout(&m, &PolicyTable::uniform(9, 3, 2), &mut from_seed(1));
        assert_eq!(tau.steps.len(), 9);
        assert_eq!(tau.steps[0].0, 0);
        assert_eq!(tau.transitions(3, 2).count(), 8);
    }

    #[test]
    fn visitation_of_riverswim() {
        let diag = visitation_diagnostics(&riverswim_env(3, 4).unwrap());
        // the top state is unreachable at h = 0 and 1
        assert_eq!(diag.p_min, 0.0);
        assert!(diag.p_star_min > 0.0 && diag.p_star_min <= 1.0);
    }
}
