//! Self-checks of the numerical core against independent references:
//! quadrature, exhaustive policy search, Monte Carlo and finite differences.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bandit_ps::{exact_posterior_grid, informed_prior_particles, GridSpec, History};
use crate::bootstrap::{surrogate_loss, LossParams};
use crate::model::{generate_offline_dataset, Environment, PriorSpec, Rater, SamplingDist};
use crate::numeric::{normal_cdf, std_normal_vec};
use crate::pspl::{
    finite_horizon_plan, generate_offline_trajectories, policy_value, pspl_surrogate_loss, random_mdp, riverswim_env,
    simple_regret, PolicyTable, PsplParams, TabularMDP, TrajPrefDataset,
};
use crate::rng::{from_seed, stream};
use crate::theory::sample_complexity_two_actions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> OracleCheck {
    OracleCheck { name: name.to_string(), passed, detail }
}

/// Best value over every deterministic step-dependent policy, or `None` when
/// there are more than `10^5` of them.
pub fn brute_force_best_value(mdp: &TabularMDP) -> Option<f64> {
    let cells = mdp.h * mdp.s;
    let count = (mdp.a as f64).powi(cells as i32);
    if count > 1e5 {
        return None;
    }
    let mut actions = vec![0usize; cells];
    let mut best = f64::NEG_INFINITY;
    loop {
        best = best.max(policy_value(mdp, &PolicyTable::deterministic(mdp.h, mdp.s, mdp.a, &actions)));
        // odometer increment
        let mut i = 0;
        loop {
            if i == cells {
                return Some(best);
            }
            actions[i] += 1;
            if actions[i] < mdp.a {
                break;
            }
            actions[i] = 0;
            i += 1;
        }
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

fn grid_vs_particles() -> OracleCheck {
    let mut rng = from_seed(11);
    let prior = PriorSpec::standard(1);
    let actions = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
    let env = Environment::new(DVector::from_vec(vec![1.0]), actions.clone(), 1.0).expect("valid");
    let rater = Rater::new(2.0, 3.0, DVector::from_vec(vec![0.8])).expect("valid");
    let d0 = generate_offline_dataset(&env, &rater, &SamplingDist::uniform(2), 5, &mut rng);
    let grid = exact_posterior_grid(&prior, 3.0, 2.0, &d0, &actions, &History::default(), 1.0, &GridSpec::default());
    let particles = informed_prior_particles(&prior, 3.0, 2.0, &d0, &actions, 20_000, &mut rng);
    match (grid, particles) {
        (Ok(g), Ok(p)) => {
            let (a, b) = (g.mean()[0], p.mean_theta()[0]);
            let e = (a - b).abs();
            check("grid-vs-particles", e < 0.05, format!("grid mean {a:.5}, particle mean {b:.5}, abs err {e:.2e}"))
        }
        (g, p) => check("grid-vs-particles", false, format!("{:?} / {:?}", g.err(), p.err())),
    }
}

fn planner_vs_brute_force() -> OracleCheck {
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let mdp = random_mdp(3, 2, 3, &mut from_seed(100 + seed)).expect("valid");
        let dp = policy_value(&mdp, &finite_horizon_plan(&mdp.reward, &mdp.trans, 3, 2, 3).policy);
        let bf = brute_force_best_value(&mdp).expect("small instance");
        worst = worst.max((dp - bf).abs());
    }
    check("planner-vs-brute-force", worst < 1e-9, format!("20 instances, max |DP − enumeration| = {worst:.2e}"))
}

fn simple_regret_mc() -> OracleCheck {
    let mdp = riverswim_env(4, 6).expect("valid");
    let uni = PolicyTable::uniform(6, 4, 2);
    let r = simple_regret(&mdp, &uni, 10_000, &mut from_seed(7));
    let z = (r.sampled.0 - r.exact).abs() / r.sampled.1.max(1e-300);
    check("simple-regret-mc", z < 3.0, format!("exact {:.5}, sampled {:.5} ± {:.5}", r.exact, r.sampled.0, r.sampled.1))
}

fn surrogate_gradient() -> OracleCheck {
    let mut rng = stream(3, 0, "grad");
    let d = 3;
    let actions = DMatrix::from_fn(6, d, |_, _| rng.random_range(-0.5..0.5));
    let env = Environment::new(std_normal_vec(d, &mut rng), actions.clone(), 1.0).expect("valid");
    let rater = Rater::draw(env.theta(), 3.0, 2.0, &mut rng).expect("valid");
    let d0 = generate_offline_dataset(&env, &rater, &SamplingDist::uniform(6), 15, &mut rng);
    let mut p = LossParams::new(PriorSpec::standard(d), actions, 3.0, 2.0, d0).expect("valid");
    for i in 0..8 {
        let r = env.reward_sample(i % 6, &mut rng).expect("arm");
        p.history.push(i % 6, r);
    }
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let th = std_normal_vec(d, &mut rng);
        let vt = std_normal_vec(d, &mut rng);
        let (_, g) = surrogate_loss(&th, &vt, &p);
        let mut x: Vec<f64> = th.iter().chain(vt.iter()).copied().collect();
        for j in 0..2 * d {
            let h = 1e-5 * x[j].abs().max(1.0);
            let orig = x[j];
            x[j] = orig + h;
            let fp = surrogate_loss(&DVector::from_column_slice(&x[..d]), &DVector::from_column_slice(&x[d..]), &p).0;
            x[j] = orig - h;
            let fm = surrogate_loss(&DVector::from_column_slice(&x[..d]), &DVector::from_column_slice(&x[d..]), &p).0;
            x[j] = orig;
            worst = worst.max(rel_err(g[j], (fp - fm) / (2.0 * h)));
        }
    }
    check("surrogate-gradient", worst <= 1e-5, format!("20 points, max relative error {worst:.2e}"))
}

fn pspl_gradient() -> OracleCheck {
    let mut rng = stream(3, 1, "grad");
    let mdp = riverswim_env(3, 4).expect("valid");
    let theta = DVector::from_vec(mdp.reward.clone());
    let rater = Rater::draw(&theta, 5.0, 4.0, &mut rng).expect("valid");
    let uni = PolicyTable::uniform(4, 3, 2);
    let off = generate_offline_trajectories(&mdp, &uni, &rater, 10, &mut rng);
    let on: TrajPrefDataset = generate_offline_trajectories(&mdp, &uni, &rater, 4, &mut rng);
    let params = PsplParams::new(3, 2, 5.0, 4.0);
    let eta = mdp.trans.clone();
    let dim = 6;
    let f = |x: &[f64]| {
        pspl_surrogate_loss(&DVector::from_column_slice(&x[..dim]), &DVector::from_column_slice(&x[dim..]), &eta, &off, &on, &params, 3, 2, None)
    };
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let mut x: Vec<f64> = std_normal_vec(2 * dim, &mut rng).iter().copied().collect();
        let (_, g) = f(&x);
        for j in 0..2 * dim {
            let h = 1e-5 * x[j].abs().max(1.0);
            let orig = x[j];
            x[j] = orig + h;
            let fp = f(&x).0;
            x[j] = orig - h;
            let fm = f(&x).0;
            x[j] = orig;
            worst = worst.max(rel_err(g[j], (fp - fm) / (2.0 * h)));
        }
    }
    check("pspl-gradient", worst <= 1e-5, format!("20 points, max relative error {worst:.2e}"))
}

#[allow(clippy::excessive_precision)]
fn closed_forms() -> OracleCheck {
    // reference values computed with 50-digit arithmetic
    let phi_err = [(-1.0, 0.15865525393145705), (0.5, 0.69146246127401312), (2.5, 0.99379033467422384)]
        .iter()
        .map(|&(x, v)| (normal_cdf(x) - v).abs())
        .fold(0.0, f64::max);
    let n0 = sample_complexity_two_actions(
        &DVector::from_vec(vec![1.0]),
        &DVector::from_vec(vec![0.0]),
        &DVector::from_vec(vec![1.0]),
        &PriorSpec::isotropic(DVector::from_vec(vec![1.0]), 1.0),
        1.0,
        0.1,
    );
    let n0_err = n0.map_or(f64::INFINITY, |v| (v - 0.528_956_711_350_405_8).abs());
    check("closed-forms", phi_err < 1e-12 && n0_err < 1e-9, format!("Φ max err {phi_err:.1e}, N0 err {n0_err:.1e}"))
}

/// Every check, in a fixed order.
pub fn run_oracle_checks() -> Vec<OracleCheck> {
    vec![closed_forms(), planner_vs_brute_force(), simple_regret_mc(), surrogate_gradient(), pspl_gradient(), grid_vs_particles()]
}
