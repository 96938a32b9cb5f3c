use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::config::{DpoMinReward, ExperimentConfig, MdpKind, Mode};
use super::dpo::{hybrid_dpo_baseline, DpoParams};
use super::records::{records_from_steps, RunRecord};
use crate::bandit_ps::{informed_prior_particles, lin_ts_step, vanilla_ps_step, warmpref_ps_step, GaussianBelief};
use crate::bootstrap::{bootstrapped_step, LossParams};
use crate::error::config;
use crate::exec::map_indexed;
use crate::model::{generate_offline_dataset, sample_environment, EnvSpec, Environment, OfflinePrefDataset, PriorSpec, Rater};
use crate::pspl::{
    generate_offline_trajectories, pspl_episode, random_mdp, riverswim_env, simple_regret_exact, PolicyTable, PsplParams,
    PsplState, PsplVariant, TabularMDP, TrajPrefDataset,
};
use crate::rng::stream;
use crate::theory::{info_constants_with, regret_bound, PsplConstants};
use crate::warmtsof::warmtsof_step;
use crate::Result;

/// Numerical trouble seen during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NumericFlags {
    /// MAP solves that stopped without meeting the gradient tolerance.
    pub nonconverged_solves: usize,
    /// Particle priors that had to be tempered.
    pub tempered_priors: usize,
}

impl NumericFlags {
    pub fn is_clean(&self) -> bool {
        self.nonconverged_solves == 0 && self.tempered_priors == 0
    }

    fn merge(&mut self, o: NumericFlags) {
        self.nonconverged_solves += o.nonconverged_solves;
        self.tempered_priors += o.tempered_priors;
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<RunRecord>,
    pub flags: NumericFlags,
}

/// Shared draws for one seed of a bandit experiment.
#[derive(Debug, Clone)]
pub struct BanditInstance {
    pub env: Environment,
    pub rater: Rater,
    pub d0: OfflinePrefDataset,
}

pub fn bandit_instance(cfg: &ExperimentConfig, seed: u64) -> Result<BanditInstance> {
    let mut rng = stream(cfg.master_seed, seed, "instance");
    let spec = EnvSpec {
        d: cfg.d,
        k: cfg.k,
        prior: PriorSpec::standard(cfg.d),
        noise_sigma: cfg.sigma,
        arm_norm: cfg.arm_norm,
    };
    let env = sample_environment(&spec, &mut rng)?;
    let rater = Rater::draw(env.theta(), cfg.beta, cfg.lambda, &mut rng)?;
    let d0 = generate_offline_dataset(&env, &rater, &cfg.sampling_dist()?, cfg.n, &mut rng);
    Ok(BanditInstance { env, rater, d0 })
}

/// Runs one bandit algorithm on a fixed instance.
pub fn run_bandit_algo(cfg: &ExperimentConfig, inst: &BanditInstance, algo: &str, seed: u64) -> Result<(Vec<RunRecord>, NumericFlags)> {
    let mut rng = stream(cfg.master_seed, seed, algo);
    let env = &inst.env;
    let prior = PriorSpec::standard(cfg.d);
    let best = env.mean_rewards().max();
    let gap = |arm: usize| best - env.mean_rewards()[arm];
    let mut flags = NumericFlags::default();
    let mut steps = Vec::with_capacity(cfg.t);
    match algo {
        "vanilla-ps" | "lints" => {
            let mut belief = GaussianBelief::from_prior(&prior);
            let inflation = cfg.lints_inflation();
            for _ in 0..cfg.t {
                let s = if algo == "lints" {
                    lin_ts_step(&mut belief, env, &mut rng, inflation)?
                } else {
                    vanilla_ps_step(&mut belief, env, &mut rng)?
                };
                steps.push((s.arm, s.reward, gap(s.arm)));
            }
        }
        "warmpref-exact" => {
            let mut belief =
                informed_prior_particles(&prior, cfg.lambda, cfg.beta, &inst.d0, env.actions(), cfg.particles, &mut rng)?;
            flags.tempered_priors += usize::from(belief.tempered);
            for _ in 0..cfg.t {
                let s = warmpref_ps_step(&mut belief, env, cfg.sigma, &mut rng)?;
                steps.push((s.arm, s.reward, gap(s.arm)));
            }
        }
        "warmpref-boot" | "warmtsof" => {
            let mut p = LossParams::new(prior, env.actions().clone(), cfg.beta, cfg.lambda, inst.d0.clone())?.with_sigma(cfg.sigma);
            for _ in 0..cfg.t {
                if algo == "warmtsof" {
                    let s = warmtsof_step(&mut p, env, &inst.rater, &cfg.feedback, &cfg.optimizer, &mut rng)?;
                    flags.nonconverged_solves += usize::from(!s.converged);
                    let cost = s.reward - s.net_reward;
                    steps.push((s.arm, s.reward, gap(s.arm) + cost));
                } else {
                    let s = bootstrapped_step(&mut p, env, &cfg.optimizer, &mut rng)?;
                    flags.nonconverged_solves += usize::from(!s.converged);
                    steps.push((s.arm, s.reward, gap(s.arm)));
                }
            }
        }
        "hybrid-dpo" => {
            let p = DpoParams { eps: cfg.dpo_eps, tau: cfg.dpo_tau, max_steps: cfg.dpo_steps, ..Default::default() };
            let min_reward = match cfg.dpo_min_reward {
                DpoMinReward::Oracle => env.mean_rewards().min(),
                DpoMinReward::Value(v) => v,
            };
            for (arm, reward) in hybrid_dpo_baseline(&inst.d0, env, &p, cfg.t, min_reward, &mut rng)? {
                steps.push((arm, reward, gap(arm)));
            }
        }
        other => return config(format!("unknown bandit algorithm {other:?}")),
    }
    Ok((records_from_steps(seed, algo, &steps), flags))
}

/// Shared draws for one seed of a PSPL experiment.
#[derive(Debug, Clone)]
pub struct PsplInstance {
    pub mdp: TabularMDP,
    pub rater: Rater,
    pub d0: TrajPrefDataset,
}

pub fn pspl_instance(cfg: &ExperimentConfig, seed: u64) -> Result<PsplInstance> {
    let mut rng = stream(cfg.master_seed, seed, "instance");
    let mdp = match cfg.env {
        MdpKind::RiverSwim => riverswim_env(cfg.s, cfg.h)?,
        MdpKind::Random => random_mdp(cfg.s, cfg.a, cfg.h, &mut rng)?,
    };
    let theta = DVector::from_vec(mdp.reward.clone());
    let rater = Rater::draw(&theta, cfg.beta, cfg.lambda, &mut rng)?;
    let behavior = PolicyTable::uniform(mdp.h, mdp.s, mdp.a);
    let d0 = generate_offline_trajectories(&mdp, &behavior, &rater, cfg.n, &mut rng);
    Ok(PsplInstance { mdp, rater, d0 })
}

/// Per episode: `action` is the output policy's choice at step 0 in the most
/// likely start state, `reward` the summed return of both rollouts, and
/// `inst_regret` the exact simple regret of the MAP output policy.
pub fn run_pspl_algo(cfg: &ExperimentConfig, inst: &PsplInstance, algo: &str, seed: u64) -> Result<(Vec<RunRecord>, NumericFlags)> {
    let variant = match algo {
        "pspl" => PsplVariant::TopTwo,
        "pspl-boot" => PsplVariant::Bootstrapped,
        other => return config(format!("unknown PSPL algorithm {other:?}")),
    };
    let mdp = &inst.mdp;
    let mut params = PsplParams::new(mdp.s, mdp.a, cfg.beta, cfg.lambda);
    params.alpha0 = cfg.alpha0;
    params.prefactor = cfg.prefactor;
    params.variant = variant;
    params.optimizer = cfg.optimizer;
    let mut state = PsplState::new(params, mdp.s, mdp.a, mdp.h, inst.d0.clone())?;
    let mut rng = stream(cfg.master_seed, seed, algo);
    let s0 = crate::numeric::argmax(mdp.rho.iter().copied());
    let mut flags = NumericFlags::default();
    let mut steps = Vec::with_capacity(cfg.episodes);
    for _ in 0..cfg.episodes {
        let ep = pspl_episode(&mut state, mdp, &inst.rater, &mut rng)?;
        flags.nonconverged_solves += usize::from(!ep.converged);
        let out = state.map_sample();
        flags.nonconverged_solves += usize::from(!out.converged);
        let action = crate::numeric::argmax(out.policy.row(0, s0).iter().copied());
        let reward = mdp.trajectory_return(&ep.tau0) + mdp.trajectory_return(&ep.tau1);
        steps.push((action, reward, simple_regret_exact(mdp, &out.policy)));
    }
    Ok((records_from_steps(seed, algo, &steps), flags))
}

/// Runs every configured algorithm on every seed, seeds in parallel when the
/// config asks for it. Records come back ordered by seed, then algorithm in
/// config order, then `t`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let per_seed = map_indexed(cfg.seeds, cfg.exec, |i| -> Result<(Vec<RunRecord>, NumericFlags)> {
        let seed = i as u64;
        let mut recs = Vec::new();
        let mut flags = NumericFlags::default();
        match cfg.mode {
            Mode::Bandit => {
                let inst = bandit_instance(cfg, seed)?;
                for algo in &cfg.algorithms {
                    let (r, f) = run_bandit_algo(cfg, &inst, algo, seed)?;
                    recs.extend(r);
                    flags.merge(f);
                }
            }
            Mode::Pspl => {
                let inst = pspl_instance(cfg, seed)?;
                for algo in &cfg.algorithms {
                    let (r, f) = run_pspl_algo(cfg, &inst, algo, seed)?;
                    recs.extend(r);
                    flags.merge(f);
                }
            }
            Mode::Theory => return config("theory mode has no runs; use theory_report"),
        }
        Ok((recs, flags))
    });
    let mut records = Vec::new();
    let mut flags = NumericFlags::default();
    for r in per_seed {
        let (recs, f) = r?;
        records.extend(recs);
        flags.merge(f);
    }
    Ok(RunOutput { records, flags })
}

/// Closed-form constants for the configured parameters, as `(name, value)`.
pub fn theory_report(cfg: &ExperimentConfig) -> Result<Vec<(String, f64)>> {
    let ic = info_constants_with(cfg.k, cfg.t, cfg.beta, cfg.lambda, cfg.d, cfg.mu_min_value(), cfg.n, cfg.f2_variant);
    let rb = regret_bound(&ic, cfg.k, cfg.t);
    let mut out: Vec<(String, f64)> = vec![
        ("f1_tilde".into(), ic.f1_tilde),
        ("f1".into(), ic.f1),
        ("f2".into(), ic.f2),
        ("delta_gap".into(), ic.delta_gap),
        ("alpha1".into(), ic.alpha1),
        ("alpha2".into(), ic.alpha2),
        ("ln_pref_term".into(), ic.ln_pref_term),
        ("regret_bound".into(), rb.total),
        ("regret_bound_main".into(), rb.main),
        ("regret_bound_second".into(), rb.second),
        ("regret_bound_clamped".into(), f64::from(u8::from(rb.clamped))),
    ];
    if cfg.n > 2 {
        let sa = cfg.s * cfg.a;
        let pc = PsplConstants::new(cfg.beta, cfg.lambda, cfg.n, 1.0, cfg.delta_min, sa)?;
        out.push(("pspl_gamma".into(), pc.gamma));
        out.push(("pspl_gamma_valid".into(), f64::from(u8::from(pc.valid))));
        out.push(("pspl_delta2".into(), pc.delta2));
        let bound = crate::theory::pspl_simple_regret_bound(cfg.s, cfg.a, cfg.h, cfg.episodes, cfg.delta1, &pc)?;
        out.push(("pspl_simple_regret_bound".into(), bound));
    }
    Ok(out)
}
