use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use prefwarm::bandit_ps::{build_info_set_with, informed_prior_particles, warmpref_ps_step, InfoSetRule};
use prefwarm::bootstrap::{map_estimate, perturb, perturbed_map, surrogate_loss, LossParams};
use prefwarm::harness::{run_experiment, ExperimentConfig, Mode};
use prefwarm::model::{
    generate_offline_dataset, preference_prob, Environment, OfflinePrefDataset, PrefEntry, PriorSpec, Rater,
    SamplingDist,
};
use prefwarm::optim::OptimizerSpec;
use prefwarm::pspl::{
    estimate_optimal_policy_offline, eta_map, generate_offline_trajectories, informed_prior_eta, random_mdp,
    rollout, simple_regret_exact, trajectory_embedding, DirichletPrefactor, PolicyTable,
};
use prefwarm::rng::from_seed;
use prefwarm::theory::sample_complexity_two_actions;

fn vec_strategy(d: usize, r: f64) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-r..r, d).prop_map(DVector::from_vec)
}

fn entries(k: usize, max: usize) -> impl Strategy<Value = Vec<PrefEntry>> {
    prop::collection::vec((0..k, 0..k, 0u8..2), 0..max)
        .prop_map(|v| v.into_iter().map(|(idx0, idx1, y)| PrefEntry { idx0, idx1, y }).collect())
}

/// A small bandit loss problem: arms, comparisons and a short history.
fn loss_params() -> impl Strategy<Value = LossParams> {
    (1usize..4, 2usize..6).prop_flat_map(|(d, k)| {
        (
            prop::collection::vec(-1.0..1.0f64, d * k),
            entries(k, 10),
            0.5..8.0f64,
            0.5..8.0f64,
            prop::collection::vec((0..k, -2.0..2.0f64), 0..6),
        )
            .prop_map(move |(arms, es, beta, lambda, hist)| {
                let actions = DMatrix::from_row_slice(k, d, &arms);
                let mut p =
                    LossParams::new(PriorSpec::standard(d), actions, beta, lambda, OfflinePrefDataset::new(es)).unwrap();
                for (a, r) in hist {
                    p.history.push(a, r);
                }
                p
            })
    })
}

proptest! {
    #[test]
    fn preference_probabilities_are_complementary(
        a0 in vec_strategy(4, 1.0), a1 in vec_strategy(4, 1.0), v in vec_strategy(4, 3.0), beta in 0.0..50.0f64,
    ) {
        let p = preference_prob(&a0, &a1, &v, beta) + preference_prob(&a1, &a0, &v, beta);
        prop_assert!((p - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn preference_sharpens_with_beta(
        a0 in vec_strategy(3, 1.0), a1 in vec_strategy(3, 1.0), v in vec_strategy(3, 3.0),
        b1 in 0.0..20.0f64, extra in 0.01..20.0f64,
    ) {
        prop_assume!((&a0 - &a1).dot(&v) > 1e-6);
        prop_assert!(preference_prob(&a0, &a1, &v, b1 + extra) >= preference_prob(&a0, &a1, &v, b1));
    }

    #[test]
    fn info_sets_keep_absent_arms_and_nest(k in 2usize..12, es in entries(12, 20)) {
        let es: Vec<PrefEntry> = es.into_iter().filter(|e| e.idx0 < k && e.idx1 < k).collect();
        let d0 = OfflinePrefDataset::new(es);
        let won = build_info_set_with(&d0, k, InfoSetRule::WonAtLeastOnce);
        let never_lost = build_info_set_with(&d0, k, InfoSetRule::NeverLost);
        for arm in 0..k {
            let present = d0.entries.iter().any(|e| e.idx0 == arm || e.idx1 == arm);
            if !present {
                prop_assert!(won.contains(arm) && never_lost.contains(arm));
            }
            if never_lost.contains(arm) {
                prop_assert!(won.contains(arm));
            }
        }
        if !d0.is_empty() {
            prop_assert!(!won.is_empty());
        }
    }

    #[test]
    fn offline_pairs_respect_the_sampling_support(
        raw in prop::collection::vec(0.05..1.0f64, 2..8), seed in any::<u64>(), n in 0usize..50,
    ) {
        let total: f64 = raw.iter().sum();
        let mu = SamplingDist::new(raw.iter().map(|w| w / total).collect()).unwrap();
        let k = raw.len();
        let mut rng = from_seed(seed);
        let actions = DMatrix::from_fn(k, 2, |i, j| 0.7 * ((i * 2 + j) as f64).sin());
        let env = Environment::new(DVector::from_vec(vec![0.3, -0.7]), actions, 1.0).unwrap();
        let rater = Rater::draw(env.theta(), 3.0, 2.0, &mut rng).unwrap();
        let a = generate_offline_dataset(&env, &rater, &mu, n, &mut from_seed(seed ^ 1));
        let b = generate_offline_dataset(&env, &rater, &mu, n, &mut from_seed(seed ^ 1));
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.len(), n);
        prop_assert!(a.entries.iter().all(|e| e.idx0 < k && e.idx1 < k && e.y < 2));
    }

    #[test]
    fn particle_weights_stay_normalised(seed in any::<u64>(), es in entries(3, 15), beta in 0.0..30.0f64) {
        let actions = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, -0.6, 0.8]);
        let env = Environment::new(DVector::from_vec(vec![0.4, 0.1]), actions.clone(), 1.0).unwrap();
        let mut rng = from_seed(seed);
        let d0 = OfflinePrefDataset::new(es);
        let mut b = informed_prior_particles(&PriorSpec::standard(2), 5.0, beta, &d0, &actions, 300, &mut rng).unwrap();
        prop_assert!((b.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        for _ in 0..10 {
            let step = warmpref_ps_step(&mut b, &env, 1.0, &mut rng).unwrap();
            prop_assert!(step.arm < 3);
            prop_assert!((b.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            prop_assert!(b.weights.iter().all(|&w| w >= 0.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn surrogate_loss_is_jointly_convex(p in loss_params(), seed in any::<u64>()) {
        let d = p.dim();
        let mut rng = from_seed(seed);
        for _ in 0..16 {
            let x: Vec<DVector<f64>> = (0..2).map(|_| prefwarm::numeric::std_normal_vec(2 * d, &mut rng) * 2.0).collect();
            let f = |z: &DVector<f64>| surrogate_loss(&z.rows(0, d).into_owned(), &z.rows(d, d).into_owned(), &p).0;
            for t in [0.25, 0.5, 0.75] {
                let mid = &x[0] * t + &x[1] * (1.0 - t);
                prop_assert!(f(&mid) <= t * f(&x[0]) + (1.0 - t) * f(&x[1]) + 1e-9);
            }
        }
    }

    #[test]
    fn offline_term_is_the_logistic_nll(p in loss_params(), seed in any::<u64>()) {
        let d = p.dim();
        let mut rng = from_seed(seed);
        let theta = prefwarm::numeric::std_normal_vec(d, &mut rng);
        let vt = prefwarm::numeric::std_normal_vec(d, &mut rng);
        let mut empty = p.clone();
        *empty.d0_mut() = OfflinePrefDataset::default();
        let base = surrogate_loss(&theta, &vt, &empty).0;
        for e in &p.d0().entries {
            let mut one = empty.clone();
            one.d0_mut().push(*e);
            let contribution = surrogate_loss(&theta, &vt, &one).0 - base;
            let prob = preference_prob(&p.actions.row(e.winner()).transpose(), &p.actions.row(e.loser()).transpose(), &vt, p.beta());
            prop_assert!(((-contribution).exp() - prob).abs() <= 1e-9);
        }
    }

    #[test]
    fn perturbed_map_is_deterministic(p in loss_params(), seed in any::<u64>()) {
        let pert = perturb(&p, &mut from_seed(seed));
        let opt = OptimizerSpec::default();
        let a = perturbed_map(&p, &pert, &opt);
        let b = perturbed_map(&p, &pert, &opt);
        prop_assert!(a.converged);
        prop_assert_eq!(a.theta, b.theta);
        prop_assert_eq!(a.varthetas, b.varthetas);
    }

    #[test]
    fn knowledgeable_rater_pins_theta_to_vartheta(p in loss_params()) {
        let mut sharp = p.clone();
        sharp.raters[0].lambda = 1e6;
        let est = map_estimate(&sharp, &OptimizerSpec::default());
        prop_assert!(est.converged);
        prop_assert!((&est.theta - est.vartheta()).amax() <= 1e-6);
    }

    #[test]
    fn tabular_objects_stay_normalised(seed in any::<u64>(), s in 2usize..5, a in 2usize..4, h in 1usize..6, n in 0usize..30) {
        let mut rng = from_seed(seed);
        let mdp = random_mdp(s, a, h, &mut rng).unwrap();
        let rater = Rater::draw(&DVector::from_vec(mdp.reward.clone()), 5.0, 5.0, &mut rng).unwrap();
        let behavior = PolicyTable::uniform(h, s, a);
        let d0 = generate_offline_trajectories(&mdp, &behavior, &rater, n, &mut rng);

        for e in &d0.entries {
            for tau in [&e.tau0, &e.tau1] {
                prop_assert_eq!(tau.steps.len(), h);
                prop_assert!((trajectory_embedding(tau, s, a).lp_norm(1) - 1.0).abs() <= 1e-12);
            }
        }

        let mut belief = informed_prior_eta(&d0, s, a, 1.0).unwrap();
        for _ in 0..5 {
            belief.observe(&rollout(&mdp, &behavior, &mut rng));
            prop_assert!(belief.alpha.iter().all(|&x| x > 0.0));
        }
        for probs in [belief.sample(&mut rng), belief.mean(), belief.mode()] {
            for row in probs.chunks(s) {
                prop_assert!(row.iter().all(|&x| x >= 0.0));
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            }
        }
        for prefactor in [DirichletPrefactor::Displayed, DirichletPrefactor::PerPair] {
            for row in eta_map(&belief.alpha, s, a, 1.0, prefactor).chunks(s) {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            }
        }

        let est = estimate_optimal_policy_offline(&d0, s, a, h, 0.1).unwrap();
        for step in 0..h {
            for st in 0..s {
                let row = est.policy.row(step, st);
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
        prop_assert!(simple_regret_exact(&mdp, &est.policy) >= 0.0);
        prop_assert!(simple_regret_exact(&mdp, &mdp.optimal_plan().policy).abs() <= 1e-12);
    }

    #[test]
    fn two_action_sample_size_shrinks_with_tolerance_and_beta(
        gap in 0.05..2.0f64, mu in -1.0..1.0f64, e1 in 0.01..0.98f64, e2 in 0.01..0.98f64, b1 in 0.1..20.0f64, b2 in 0.1..20.0f64,
    ) {
        let prior = PriorSpec::isotropic(DVector::from_element(1, mu), 1.0);
        let (a0, a1) = (DVector::from_element(1, 1.0), DVector::from_element(1, 0.0));
        let theta = DVector::from_element(1, gap);
        let n = |beta: f64, eps: f64| sample_complexity_two_actions(&a0, &a1, &theta, &prior, beta, eps).unwrap();
        let (lo, hi) = (e1.min(e2), e1.max(e2));
        prop_assert!(n(b1, hi) <= n(b1, lo) + 1e-12);
        let (bl, bh) = (b1.min(b2), b1.max(b2));
        prop_assert!(n(bh, lo) <= n(bl, lo) + 1e-12);
        prop_assert!(n(b1, lo) >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn records_are_well_formed(seed in any::<u64>(), k in 2usize..8, d in 1usize..4, t in 1usize..30) {
        let mut cfg = ExperimentConfig::for_mode(Mode::Bandit);
        for (key, v) in [("K", k.to_string()), ("d", d.to_string()), ("T", t.to_string()), ("seeds", "2".into()),
                         ("master_seed", seed.to_string()), ("particles", "128".into()), ("N", "5".into())] {
            cfg.set(key, &v).unwrap();
        }
        cfg.algorithms = prefwarm::harness::BANDIT_ALGOS.iter().map(|s| s.to_string()).collect();
        let out = run_experiment(&cfg).unwrap();
        prop_assert_eq!(out.records.len(), 2 * cfg.algorithms.len() * t);
        for run in out.records.chunks(t) {
            let mut cum = 0.0;
            for (i, r) in run.iter().enumerate() {
                prop_assert_eq!(r.t, i + 1);
                prop_assert!(r.action < k);
                // warmtsof adds its query cost, the rest are pure expected regret
                prop_assert!(r.inst_regret >= -1e-12);
                cum += r.inst_regret;
                prop_assert!((r.cum_regret - cum).abs() <= 1e-9 * cum.abs().max(1.0));
            }
        }
    }
}
