//! Library outputs against independent references: statrs distributions,
//! exhaustive enumeration and Monte Carlo frequencies.

#![allow(clippy::excessive_precision)]

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

use prefwarm::bandit_ps::{
    build_info_set_with, informed_prior_particles, vanilla_ps_step, warmpref_ps_step, GaussianBelief, InfoSetRule,
};
use prefwarm::model::{
    generate_offline_dataset, Environment, OfflinePrefDataset, PrefEntry, PriorSpec, Rater, SamplingDist,
};
use prefwarm::numeric::{logistic, normal_cdf, softplus};
use prefwarm::pspl::{
    eta_map, generate_offline_trajectories, riverswim_env, simple_regret, trajectory_embedding, DirichletBelief,
    DirichletPrefactor, PolicyTable,
};
use prefwarm::rng::{from_seed, stream};
use prefwarm::theory::sample_complexity_two_actions;
use prefwarm::warmtsof::{warmtsof_step, FeedbackConfig};
use prefwarm::bootstrap::LossParams;
use prefwarm::optim::OptimizerSpec;

fn within(x: f64, target: f64, se: f64, z: f64) -> bool {
    (x - target).abs() <= z * se.max(1e-12)
}

/// `Φ(x)` to 17 significant digits from 40-digit arithmetic.
const PHI_TABLE: [(f64, f64); 20] = [
    (-8.0, 6.2209605742717841e-16),
    (-7.0, 1.279812543885835e-12),
    (-6.0, 9.8658764503769814e-10),
    (-5.0, 2.8665157187919391e-7),
    (-4.0, 3.1671241833119921e-5),
    (-3.5, 2.3262907903552504e-4),
    (-3.0, 1.3498980316300945e-3),
    (-2.5, 6.2096653257761352e-3),
    (-2.0, 0.022750131948179207),
    (-1.5, 0.066807201268858066),
    (-1.0, 0.15865525393145705),
    (-0.5, 0.3085375387259869),
    (0.0, 0.5),
    (0.3, 0.61791142218895264),
    (0.7, 0.75803634777692699),
    (1.25, 0.89435022633314474),
    (2.0, 0.97724986805182079),
    (3.0, 0.99865010196836991),
    (5.0, 0.99999971334842812),
    (8.0, 0.99999999999999938),
];

#[test]
fn normal_cdf_matches_tabulated_values() {
    for (x, p) in PHI_TABLE {
        assert!((normal_cdf(x) - p).abs() <= 1e-12, "x={x}");
    }
}

#[test]
fn normal_cdf_agrees_with_statrs() {
    // statrs' erfc is only good to a few 1e-12 near |x| = 1.4
    let n = Normal::new(0.0, 1.0).unwrap();
    for i in 0..=100 {
        let x = -10.0 + 0.2 * i as f64;
        assert!((normal_cdf(x) - n.cdf(x)).abs() <= 1e-10, "x={x}");
    }
}

#[test]
fn logistic_helpers_match_direct_formulas() {
    for i in 0..=40 {
        let x = -20.0 + i as f64;
        assert!((logistic(x) - 1.0 / (1.0 + (-x).exp())).abs() <= 1e-15);
        assert!((softplus(x) - (1.0 + x.exp()).ln()).abs() <= 1e-12);
    }
}

#[test]
fn two_action_sample_size_matches_statrs_closed_form() {
    let prior = PriorSpec::isotropic(DVector::from_element(1, 0.4), 2.0);
    let (a0, a1) = (DVector::from_element(1, 1.0), DVector::from_element(1, 0.0));
    let theta = DVector::from_element(1, 0.6);
    let (beta, eps) = (3.0, 0.05);
    let n = Normal::new(0.0, 1.0).unwrap();
    let phi = n.cdf(0.4 / 2f64.sqrt());
    let expected = ((1.0 / eps - 1.0) * (1.0 / phi - 1.0)).ln() / (beta * 0.6);
    let got = sample_complexity_two_actions(&a0, &a1, &theta, &prior, beta, eps).unwrap();
    assert!((got - expected).abs() <= 1e-12, "{got} vs {expected}");
}

fn scores_env() -> Environment {
    let actions = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, -0.6, 0.8]);
    Environment::new(DVector::from_vec(vec![0.5, 0.2]), actions, 1.0).unwrap()
}

#[test]
fn offline_label_rates_follow_the_logistic_model() {
    let env = scores_env();
    let rater = Rater::new(2.5, 10.0, DVector::from_vec(vec![0.5, 0.2])).unwrap();
    let d0 = generate_offline_dataset(&env, &rater, &SamplingDist::uniform(3), 60_000, &mut from_seed(5));
    let score = |i: usize| env.arm(i).dot(&rater.vartheta);
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let labels: Vec<f64> = d0
            .entries
            .iter()
            .filter(|e| e.idx0 == i && e.idx1 == j)
            .map(|e| f64::from(e.y == 0))
            .collect();
        let p = 1.0 / (1.0 + (-2.5 * (score(i) - score(j))).exp());
        let freq = labels.iter().sum::<f64>() / labels.len() as f64;
        let se = (p * (1.0 - p) / labels.len() as f64).sqrt();
        assert!(within(freq, p, se, 4.0), "pair ({i},{j}): {freq} vs {p}");
    }
}

#[test]
fn trajectory_label_rates_follow_the_logistic_model() {
    let mdp = riverswim_env(3, 4).unwrap();
    let theta = DVector::from_vec(mdp.reward.clone());
    let rater = Rater::new(30.0, 1e3, theta).unwrap();
    let behavior = PolicyTable::uniform(4, 3, 2);
    let d0 = generate_offline_trajectories(&mdp, &behavior, &rater, 40_000, &mut from_seed(9));
    let (mut expected, mut observed) = (0.0, 0.0);
    for e in &d0.entries {
        let gap = (trajectory_embedding(&e.tau0, 3, 2) - trajectory_embedding(&e.tau1, 3, 2)).dot(&rater.vartheta);
        expected += 1.0 / (1.0 + (-30.0 * gap).exp());
        observed += f64::from(e.y == 0);
    }
    let n = d0.len() as f64;
    let se = (0.25 / n).sqrt();
    assert!(within(observed / n, expected / n, se, 4.0), "{} vs {}", observed / n, expected / n);
}

/// Exact `E|U|` and `P(A* ∈ U)` for K = 3 and a fixed rater by enumerating
/// every dataset of `n` comparisons.
fn enumerate_info_set(env: &Environment, rater: &Rater, n: usize, rule: InfoSetRule) -> (f64, f64) {
    let k = env.k();
    let score = |i: usize| env.arm(i).dot(&rater.vartheta);
    let mut outcomes = Vec::new();
    for i in 0..k {
        for j in 0..k {
            let p0 = 1.0 / (1.0 + (-rater.beta * (score(i) - score(j))).exp());
            for (y, p) in [(0u8, p0), (1u8, 1.0 - p0)] {
                outcomes.push((PrefEntry { idx0: i, idx1: j, y }, p / (k * k) as f64));
            }
        }
    }
    let best = env.optimal_arm();
    let (mut size, mut hit) = (0.0, 0.0);
    let m = outcomes.len();
    for code in 0..m.pow(n as u32) {
        let mut c = code;
        let mut prob = 1.0;
        let mut entries = Vec::with_capacity(n);
        for _ in 0..n {
            let (e, p) = outcomes[c % m];
            c /= m;
            prob *= p;
            entries.push(e);
        }
        let u = build_info_set_with(&OfflinePrefDataset::new(entries), k, rule);
        size += prob * u.len() as f64;
        hit += prob * f64::from(u8::from(u.contains(best)));
    }
    (size, hit)
}

#[test]
fn info_set_monte_carlo_matches_enumeration() {
    let env = scores_env();
    for (beta, rule) in [(0.0, InfoSetRule::WonAtLeastOnce), (4.0, InfoSetRule::WonAtLeastOnce), (4.0, InfoSetRule::NeverLost)] {
        let rater = Rater::new(beta, 10.0, env.theta().clone()).unwrap();
        let n = 3;
        let (size, hit) = enumerate_info_set(&env, &rater, n, rule);
        let trials = 40_000;
        let mut rng = from_seed(17);
        let (mut sizes, mut hits) = (Vec::with_capacity(trials), Vec::with_capacity(trials));
        for _ in 0..trials {
            let d0 = generate_offline_dataset(&env, &rater, &SamplingDist::uniform(3), n, &mut rng);
            let u = build_info_set_with(&d0, 3, rule);
            sizes.push(u.len() as f64);
            hits.push(f64::from(u8::from(u.contains(env.optimal_arm()))));
        }
        let (ms, ss) = prefwarm::numeric::mean_se(&sizes);
        let (mh, sh) = prefwarm::numeric::mean_se(&hits);
        assert!(within(ms, size, ss, 4.0), "beta={beta} {rule:?}: E|U| {ms} vs {size}");
        assert!(within(mh, hit, sh, 4.0), "beta={beta} {rule:?}: P {mh} vs {hit}");
    }
}

#[test]
fn empty_data_particles_choose_like_vanilla_ps() {
    // d = 1, arms ±1, prior N(0.3, 1): the first arm is chosen iff θ̃ > 0.
    let prior = PriorSpec::isotropic(DVector::from_element(1, 0.3), 1.0);
    let actions = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
    let env = Environment::new(DVector::from_element(1, 0.1), actions.clone(), 1.0).unwrap();
    let exact = Normal::new(0.0, 1.0).unwrap().cdf(0.3);
    let runs = 4000;
    let (mut particle, mut vanilla) = (0.0, 0.0);
    for i in 0..runs {
        let mut rng = stream(3, i, "first-arm");
        let mut b = informed_prior_particles(&prior, 4.0, 2.0, &OfflinePrefDataset::default(), &actions, 2000, &mut rng).unwrap();
        particle += f64::from(warmpref_ps_step(&mut b, &env, 1.0, &mut rng).unwrap().arm == 0);
        let mut g = GaussianBelief::from_prior(&prior);
        vanilla += f64::from(vanilla_ps_step(&mut g, &env, &mut rng).unwrap().arm == 0);
    }
    let se = (exact * (1.0 - exact) / runs as f64).sqrt();
    assert!(within(particle / runs as f64, exact, se, 4.0), "particles {}", particle / runs as f64);
    assert!(within(vanilla / runs as f64, exact, se, 4.0), "vanilla {}", vanilla / runs as f64);
}

#[test]
fn grid_density_matches_statrs_for_gaussian_rewards() {
    // No comparisons: the quadrature posterior is the conjugate Gaussian.
    let prior = PriorSpec::isotropic(DVector::from_element(1, 0.2), 1.5);
    let actions = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
    let mut history = prefwarm::bandit_ps::History::default();
    for (a, r) in [(0, 0.9), (1, -0.1), (0, 0.4), (0, 1.3)] {
        history.push(a, r);
    }
    let sigma = 0.8;
    let grid = prefwarm::bandit_ps::exact_posterior_grid(
        &prior,
        5.0,
        1.0,
        &OfflinePrefDataset::default(),
        &actions,
        &history,
        sigma,
        &Default::default(),
    )
    .unwrap();
    let precision = 1.0 / 1.5 + 4.0 / (sigma * sigma);
    let num = 0.2 / 1.5 + (0.9 + 0.1 + 0.4 + 1.3) / (sigma * sigma);
    let post = Normal::new(num / precision, precision.powf(-0.5)).unwrap();
    assert!((grid.mean()[0] - num / precision).abs() <= 1e-4);
    for x in [-0.5, 0.0, 0.3, 0.6, 1.0] {
        assert!((grid.marginal_cdf(x) - post.cdf(x)).abs() <= 1e-3, "x={x}");
    }
}

#[test]
fn dirichlet_draws_have_the_right_mean() {
    let mut b = DirichletBelief::new(3, 1, 1.0).unwrap();
    b.alpha = vec![2.0, 5.0, 0.5];
    let mut rng = from_seed(4);
    let draws = 20_000;
    let mut acc = [0.0; 3];
    for _ in 0..draws {
        for (a, x) in acc.iter_mut().zip(b.sample(&mut rng)) {
            *a += x;
        }
    }
    let total: f64 = b.alpha.iter().sum();
    for (i, a) in acc.iter().enumerate() {
        let m = b.alpha[i] / total;
        let var = m * (1.0 - m) / (total + 1.0);
        assert!(within(a / draws as f64, m, (var / draws as f64).sqrt(), 4.0));
    }
}

#[test]
fn eta_map_is_the_dirichlet_mode() {
    let counts = [3.0, 0.0, 1.0, 0.0, 0.0, 0.0];
    let alpha0 = 2.0;
    let eta = eta_map(&counts, 3, 2, alpha0, DirichletPrefactor::PerPair);
    let expected = [4.0 / 7.0, 1.0 / 7.0, 2.0 / 7.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
    for (e, x) in eta.iter().zip(expected) {
        assert!((e - x).abs() <= 1e-12);
    }
}

#[test]
fn sampled_simple_regret_agrees_with_dynamic_programming() {
    let mdp = riverswim_env(4, 6).unwrap();
    let policy = PolicyTable::uniform(6, 4, 2);
    let sr = simple_regret(&mdp, &policy, 40_000, &mut from_seed(12));
    assert!(sr.exact > 0.0);
    assert!(within(sr.sampled.0, sr.exact, sr.sampled.1, 4.0), "{:?}", sr);
}

#[test]
fn queries_do_not_increase_with_cost() {
    let costs = [0.0, 0.05, 0.5, 5.0, f64::INFINITY];
    let (t, seeds) = (80, 30);
    let mut totals = Vec::new();
    for &cost in &costs {
        let fb = FeedbackConfig::new(cost, 1.0).unwrap();
        let mut queries = 0usize;
        for seed in 0..seeds {
            let mut rng = stream(21, seed, "instance");
            let env = prefwarm::model::sample_environment(&prefwarm::model::EnvSpec::standard(3, 10), &mut rng).unwrap();
            let rater = Rater::draw(env.theta(), 10.0, 100.0, &mut rng).unwrap();
            let d0 = generate_offline_dataset(&env, &rater, &SamplingDist::uniform(10), 10, &mut rng);
            let mut p = LossParams::new(PriorSpec::standard(3), env.actions().clone(), 10.0, 100.0, d0).unwrap();
            let mut rng = stream(21, seed, "warmtsof");
            for _ in 0..t {
                let step = warmtsof_step(&mut p, &env, &rater, &fb, &OptimizerSpec::default(), &mut rng).unwrap();
                let charged = if step.queried { cost } else { 0.0 };
                assert_eq!(step.net_reward, step.reward - charged);
                queries += usize::from(step.queried);
            }
        }
        totals.push(queries);
    }
    assert!(totals.windows(2).all(|w| w[1] <= w[0]), "{totals:?}");
    assert_eq!(*totals.last().unwrap(), 0);
    assert!(totals[0] > 0);
}
