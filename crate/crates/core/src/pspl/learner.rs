use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dirichlet::{informed_prior_eta, DirichletBelief};
use super::loss::{eta_map, pref_diffs, reward_objective, weighted_counts, DirichletPrefactor, PsplPerturbation};
use super::mdp::{finite_horizon_plan, rollout, trajectory_embedding, PolicyTable, TabularMDP, Trajectory};
use super::prefs::{label, TrajPrefDataset};
use crate::model::{PriorSpec, Rater};
use crate::numeric::std_normal_vec;
use crate::optim::{minimize, InitPolicy, OptimizerSpec};
use crate::error::{config, domain};
use crate::Result;

/// How `η̂` is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PsplVariant {
    /// Exact Dirichlet draw.
    #[default]
    TopTwo,
    /// Closed-form minimiser of the perturbed transition terms.
    Bootstrapped,
}

impl PsplVariant {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "top-two" | "exact" => Some(Self::TopTwo),
            "bootstrapped" | "boot" => Some(Self::Bootstrapped),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsplParams {
    /// Prior on the reward table `θ ∈ R^{SA}`.
    pub prior: PriorSpec,
    pub beta: f64,
    pub lambda: f64,
    pub alpha0: f64,
    pub prefactor: DirichletPrefactor,
    pub variant: PsplVariant,
    /// Keep probability of each offline comparison.
    pub offline_keep: f64,
    /// Keep probability of each online comparison.
    pub online_keep: f64,
    pub optimizer: OptimizerSpec,
}

impl PsplParams {
    pub fn new(s: usize, a: usize, beta: f64, lambda: f64) -> Self {
        Self {
            prior: PriorSpec::standard(s * a),
            beta,
            lambda,
            alpha0: 1.0,
            prefactor: DirichletPrefactor::Displayed,
            variant: PsplVariant::TopTwo,
            offline_keep: 0.6,
            online_keep: 0.75,
            optimizer: OptimizerSpec::default(),
        }
    }

    fn validate(&self, s: usize, a: usize) -> Result<()> {
        if self.prior.dim() != s * a {
            return config("reward prior must have dimension S·A");
        }
        if !(self.beta >= 0.0 && self.lambda > 0.0 && self.alpha0 > 0.0) {
            return domain("need beta >= 0, lambda > 0 and alpha0 > 0");
        }
        for p in [self.offline_keep, self.online_keep] {
            if !(0.0..=1.0).contains(&p) {
                return domain("keep probabilities must lie in [0, 1]");
            }
        }
        Ok(())
    }
}

/// Offline data, online comparisons and the transition belief.
#[derive(Debug, Clone)]
pub struct PsplState {
    pub params: PsplParams,
    pub s: usize,
    pub a: usize,
    pub h: usize,
    pub offline: TrajPrefDataset,
    pub online: TrajPrefDataset,
    pub dirichlet: DirichletBelief,
    offline_diffs: DMatrix<f64>,
    online_diffs: DMatrix<f64>,
}

/// A posterior sample: reward table, dynamics, and the plan they induce.
#[derive(Debug, Clone)]
pub struct PsplSample {
    pub theta: DVector<f64>,
    pub eta: Vec<f64>,
    pub policy: PolicyTable,
    pub converged: bool,
}

impl PsplState {
    pub fn new(params: PsplParams, s: usize, a: usize, h: usize, offline: TrajPrefDataset) -> Result<Self> {
        params.validate(s, a)?;
        let dirichlet = informed_prior_eta(&offline, s, a, params.alpha0)?;
        let offline_diffs = pref_diffs(&offline, s, a);
        Ok(Self {
            params,
            s,
            a,
            h,
            offline,
            online: TrajPrefDataset::default(),
            dirichlet,
            offline_diffs,
            online_diffs: DMatrix::zeros(0, s * a),
        })
    }

    fn perturbation<R: Rng + ?Sized>(&self, rng: &mut R) -> PsplPerturbation {
        let p = &self.params;
        let omega = (0..self.offline.len()).map(|_| rng.random_bool(p.offline_keep)).collect();
        let zeta = (0..self.online.len()).map(|_| rng.random_bool(p.online_keep)).collect();
        let theta_prime = p.prior.sample_centered(rng);
        let vartheta_prime = std_normal_vec(self.s * self.a, rng) / p.lambda;
        PsplPerturbation { omega, zeta, theta_prime, vartheta_prime }
    }

    fn solve_theta(&self, pert: &PsplPerturbation) -> (DVector<f64>, bool) {
        let obj = reward_objective(&self.offline_diffs, &self.online_diffs, &self.params, pert);
        let x0 = match self.params.optimizer.init {
            InitPolicy::Prior => self.params.prior.mean().clone(),
            InitPolicy::Zero => DVector::zeros(self.s * self.a),
        };
        let out = minimize(&obj, obj.to_internal(&x0, std::slice::from_ref(&x0)), &self.params.optimizer);
        (obj.from_internal(&out.x).0, out.converged)
    }

    fn plan(&self, theta: DVector<f64>, eta: Vec<f64>, converged: bool) -> PsplSample {
        let policy = finite_horizon_plan(theta.as_slice(), &eta, self.s, self.a, self.h).policy;
        PsplSample { theta, eta, policy, converged }
    }

    /// One perturbed-MAP draw of `θ̂` and a draw of `η̂`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PsplSample {
        let pert = self.perturbation(rng);
        let (theta, converged) = self.solve_theta(&pert);
        let eta = match self.params.variant {
            PsplVariant::TopTwo => self.dirichlet.sample(rng),
            PsplVariant::Bootstrapped => self.eta_hat(&pert),
        };
        self.plan(theta, eta, converged)
    }

    fn eta_hat(&self, pert: &PsplPerturbation) -> Vec<f64> {
        let counts = weighted_counts(&self.offline, &self.online, pert, self.s, self.a);
        eta_map(&counts, self.s, self.a, self.params.alpha0, self.params.prefactor)
    }

    /// Output policy: unperturbed MAP reward with the Dirichlet mode (or the
    /// unperturbed closed-form `η` for the bootstrapped variant).
    pub fn map_sample(&self) -> PsplSample {
        let pert = PsplPerturbation::none(self.offline.len(), self.online.len(), self.s * self.a);
        let (theta, converged) = self.solve_theta(&pert);
        let eta = match self.params.variant {
            PsplVariant::TopTwo => self.dirichlet.mode(),
            PsplVariant::Bootstrapped => self.eta_hat(&pert),
        };
        self.plan(theta, eta, converged)
    }

    /// Appends an online comparison and its transitions.
    pub fn record(&mut self, pref: super::prefs::TrajPref) {
        self.dirichlet.observe(&pref.tau0);
        self.dirichlet.observe(&pref.tau1);
        let d = trajectory_embedding(pref.loser(), self.s, self.a) - trajectory_embedding(pref.winner(), self.s, self.a);
        let n = self.online_diffs.nrows();
        let diffs = std::mem::replace(&mut self.online_diffs, DMatrix::zeros(0, 0));
        self.online_diffs = diffs.insert_row(n, 0.0);
        self.online_diffs.set_row(n, &d.transpose());
        self.online.entries.push(pref);
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub tau0: Trajectory,
    pub tau1: Trajectory,
    pub y: u8,
    /// Both perturbed solves converged.
    pub converged: bool,
}

/// Draws two posterior samples, rolls out both greedy policies, asks the
/// rater and records the result.
pub fn pspl_episode<R: Rng + ?Sized>(state: &mut PsplState, mdp: &TabularMDP, rater: &Rater, rng: &mut R) -> Result<EpisodeOutcome> {
    if (mdp.s, mdp.a, mdp.h) != (state.s, state.a, state.h) {
        return config("MDP shape does not match the learner");
    }
    let first = state.sample(rng);
    let second = state.sample(rng);
    let tau0 = rollout(mdp, &first.policy, rng);
    let tau1 = rollout(mdp, &second.policy, rng);
    let pref = label(tau0, tau1, rater, state.s, state.a, rng);
    let out = EpisodeOutcome {
        tau0: pref.tau0.clone(),
        tau1: pref.tau1.clone(),
        y: pref.y,
        converged: first.converged && second.converged,
    };
    state.record(pref);
    Ok(out)
}
