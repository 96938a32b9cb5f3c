//! Closed-form oracles: sample complexity of informative offline data, the
//! information-set constants `f1`/`f2`, regret bounds for warmPref-PS and
//! PSPL, and a Monte Carlo check of the information-set lemma.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bandit_ps::{build_info_set_with, InfoSetRule};
use crate::error::domain;
use crate::exec::{map_indexed, ExecMode};
use crate::model::{generate_offline_dataset, sample_environment, EnvSpec, PriorSpec, Rater, SamplingDist};
use crate::numeric::{mean_se, normal_cdf, softplus};
use crate::rng::stream;
use crate::{Error, Result};

pub use crate::numeric::normal_cdf as phi;

/// Standardised prior margin `x = dᵀμ0 / √(dᵀΣ0 d)` for `d = a_i − a_j`.
fn prior_margin(diff: &DVector<f64>, prior: &PriorSpec) -> f64 {
    diff.dot(prior.mean()) / diff.dot(&(prior.cov() * diff)).sqrt()
}

/// Offline sample size after which `{a0}` or `{a1}` is (1−ε)-informative.
///
/// The pair is oriented so that the gap is positive. The result is clamped
/// below at zero.
pub fn sample_complexity_two_actions(
    a0: &DVector<f64>,
    a1: &DVector<f64>,
    theta0: &DVector<f64>,
    prior: &PriorSpec,
    beta: f64,
    eps: f64,
) -> Result<f64> {
    if !(beta > 0.0) {
        return domain("beta must be positive");
    }
    if !(eps > 0.0 && eps < 1.0) {
        return domain("eps must lie in (0, 1)");
    }
    let mut diff = a0 - a1;
    let mut gap = diff.dot(theta0);
    if gap == 0.0 {
        return Err(Error::DegenerateGap);
    }
    if gap < 0.0 {
        diff = -diff;
        gap = -gap;
    }
    let x = prior_margin(&diff, prior);
    let n0 = ((1.0 / eps - 1.0) * (1.0 / normal_cdf(x) - 1.0)).ln() / (beta * gap);
    Ok(if n0.is_nan() { 0.0 } else { n0.max(0.0) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralSampleComplexity {
    pub n0: f64,
    /// `None` when the two-action corollary was used instead.
    pub k_max: Option<f64>,
    pub fell_back: bool,
}

/// Sample complexity for `K ≥ 3` arms; `K < 3` falls back to the two-action
/// corollary and sets `fell_back`.
pub fn sample_complexity_general(
    actions: &DMatrix<f64>,
    theta0: &DVector<f64>,
    prior: &PriorSpec,
    beta: f64,
    eps: f64,
    mu_min: f64,
) -> Result<GeneralSampleComplexity> {
    let k = actions.nrows();
    if !(mu_min > 0.0 && mu_min < 1.0) {
        return domain("mu_min must lie in (0, 1)");
    }
    if k < 3 {
        let n0 = sample_complexity_two_actions(
            &actions.row(0).transpose(),
            &actions.row(1).transpose(),
            theta0,
            prior,
            beta,
            eps,
        )?;
        return Ok(GeneralSampleComplexity { n0, k_max: None, fell_back: true });
    }
    if !(beta > 0.0) {
        return domain("beta must be positive");
    }
    if !(eps > 0.0 && eps < 1.0) {
        return domain("eps must lie in (0, 1)");
    }
    let kf = k as f64;
    let mut k_max = f64::NEG_INFINITY;
    for i in 0..k {
        for j in 0..k {
            let diff = (actions.row(i) - actions.row(j)).transpose();
            let gap = diff.dot(theta0);
            if gap > 0.0 {
                let x = prior_margin(&diff, prior);
                let kij = ((2.0 * kf * kf / eps - 1.0) * (1.0 / normal_cdf(x) - 1.0)).ln() / (beta * gap);
                k_max = k_max.max(kij);
            }
        }
    }
    if !k_max.is_finite() {
        return Err(Error::DegenerateGap);
    }
    let n0 = (kf.ln() + (k_max - 1.0) * kf.ln().ln()) / (mu_min * mu_min * eps);
    Ok(GeneralSampleComplexity { n0, k_max: Some(k_max), fell_back: false })
}

/// Which display of `f2` to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum F2Variant {
    /// `(α1)² + (NK/(Tβ))(1 + e^{−βα2 + α1})^{−N} + 2/T`, capped at `K`.
    #[default]
    MainText,
    /// `K·min(1, Δ²/2) + (NK/(Tβ))(1 + e^{−β(α2 + (K−1)min(1,Δ))})^{−N} + 1/T`,
    /// capped at `K`.
    Appendix,
}

impl F2Variant {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "main" => Some(Self::MainText),
            "appendix" => Some(Self::Appendix),
            _ => None,
        }
    }
}

/// Information-set constants of the offline dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoConstants {
    pub f1_tilde: f64,
    pub f1: f64,
    pub f2: f64,
    pub delta_gap: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// `N · log(1 − 1/(1 + e^{β(min(1,Δ) + α2 − α1)}))`, the log of the
    /// preference-error term of `f̃1`. Kept separately because it can be far
    /// below the resolution of `f1` itself.
    pub ln_pref_term: f64,
    /// `(1 − μ_min)^{2N}`.
    pub coverage_term: f64,
    /// `1/T`.
    pub horizon_term: f64,
}

impl InfoConstants {
    /// Orders two constant sets by `f1` exactly, comparing the preference
    /// terms in log space when the remaining terms coincide.
    pub fn f1_cmp(&self, other: &Self) -> std::cmp::Ordering {
        if self.coverage_term == other.coverage_term && self.horizon_term == other.horizon_term {
            self.ln_pref_term.total_cmp(&other.ln_pref_term)
        } else {
            self.f1.total_cmp(&other.f1)
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn info_constants(k: usize, t: usize, beta: f64, lambda: f64, d: usize, mu_min: f64, n: usize) -> InfoConstants {
    info_constants_with(k, t, beta, lambda, d, mu_min, n, F2Variant::MainText)
}

#[allow(clippy::too_many_arguments)]
pub fn info_constants_with(
    k: usize,
    t: usize,
    beta: f64,
    lambda: f64,
    d: usize,
    mu_min: f64,
    n: usize,
    variant: F2Variant,
) -> InfoConstants {
    let (kf, tf, nf) = (k as f64, t as f64, n as f64);
    let delta_gap = (tf * beta).ln() / beta;
    let m = delta_gap.min(1.0);
    let alpha1 = kf * m;
    let alpha2 = (2.0 * (2.0 * (d as f64).sqrt() * tf).ln()).sqrt() / lambda;
    // 1 − 1/(1 + e^x) = σ(x)
    let ln_pref_term = -nf * softplus(-(beta * (m + alpha2 - alpha1)));
    let coverage_term = (1.0 - mu_min).powf(2.0 * nf);
    let horizon_term = 1.0 / tf;
    let f1_tilde = ln_pref_term.exp() + coverage_term;
    let f1 = f1_tilde + horizon_term;
    let scale = nf * kf / (tf * beta);
    let f2 = match variant {
        F2Variant::MainText => alpha1 * alpha1 + scale * (-nf * softplus(-beta * alpha2 + alpha1)).exp() + 2.0 / tf,
        F2Variant::Appendix => {
            kf * (0.5 * delta_gap * delta_gap).min(1.0)
                + scale * (-nf * softplus(-beta * (alpha2 + (kf - 1.0) * m))).exp()
                + 1.0 / tf
        }
    };
    InfoConstants {
        f1_tilde,
        f1,
        f2: f2.min(kf),
        delta_gap,
        alpha1,
        alpha2,
        ln_pref_term,
        coverage_term,
        horizon_term,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretBound {
    pub total: f64,
    pub main: f64,
    pub second: f64,
    /// A negative argument under the square root was clamped to 0.
    pub clamped: bool,
}

/// `√(T f2 (ln f2 + f1 ln(K/f1))) + 2√(2 ln K)·T·(f̃1 + 1/T)`.
pub fn regret_bound(ic: &InfoConstants, k: usize, t: usize) -> RegretBound {
    let (kf, tf) = (k as f64, t as f64);
    let inner = tf * ic.f2 * (ic.f2.ln() + ic.f1 * (kf / ic.f1).ln());
    let clamped = !(inner >= 0.0);
    let main = if clamped { 0.0 } else { inner.sqrt() };
    let second = 2.0 * (2.0 * kf.ln()).max(0.0).sqrt() * tf * (ic.f1_tilde + 1.0 / tf);
    RegretBound { total: main + second, main, second, clamped }
}

/// Constants of the PSPL simple-regret bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsplConstants {
    pub gamma: f64,
    pub delta2: f64,
    pub b: f64,
    pub delta_min: f64,
    pub n: usize,
    /// Whether `β` exceeds the threshold under which `γ` is established.
    pub valid: bool,
}

impl PsplConstants {
    #[allow(clippy::too_many_arguments)]
    pub fn new(beta: f64, lambda: f64, n: usize, b: f64, delta_min: f64, d: usize) -> Result<Self> {
        let (gamma, valid) = pspl_gamma(beta, lambda, n, b, delta_min, d)?;
        Ok(Self { gamma, delta2: delta2(gamma, n), b, delta_min, n, valid })
    }
}

/// `γ = exp(−βB√(2 ln(2√d N))/λ − βΔ_min) + 1/N` and its validity flag.
pub fn pspl_gamma(beta: f64, lambda: f64, n: usize, b: f64, delta_min: f64, d: usize) -> Result<(f64, bool)> {
    if n <= 2 {
        return domain("gamma needs N > 2");
    }
    let nf = n as f64;
    let sd = (d as f64).sqrt();
    let gamma = (-beta * b * (2.0 * (2.0 * sd * nf).ln()).sqrt() / lambda - beta * delta_min).exp() + 1.0 / nf;
    let threshold = 2.0 * (2.0 * sd).ln() / (b * lambda * lambda - 2.0 * delta_min).abs();
    Ok((gamma, beta > threshold))
}

/// `δ2 = 2 e^{−N(1+γ)²} + e^{−(N/4)(1−γ)³}`.
pub fn delta2(gamma: f64, n: usize) -> f64 {
    let nf = n as f64;
    2.0 * (-nf * (1.0 + gamma).powi(2)).exp() + (-0.25 * nf * (1.0 - gamma).powi(3)).exp()
}

/// Simple Bayesian regret bound after `k_episodes` episodes.
pub fn pspl_simple_regret_bound(s: usize, a: usize, h: usize, k_episodes: usize, delta1: f64, pc: &PsplConstants) -> Result<f64> {
    if !(delta1 > 0.0 && delta1 < 1.0 / 3.0) {
        return domain("delta1 must lie in (0, 1/3)");
    }
    let (sf, af, hf, kf) = (s as f64, a as f64, h as f64, k_episodes as f64);
    let l = (sf * af * hf / delta1).ln();
    let den = 2.0 * kf * (1.0 + l) - l;
    if !(den > 0.0) {
        return domain("simple-regret bound denominator is not positive");
    }
    let num = 20.0 * pc.delta2 * sf * sf * af * hf.powi(3) * (2.0 * kf * sf * af / delta1).ln();
    Ok((num.max(0.0) / den).sqrt())
}

/// Monte Carlo estimate of the information-set lemma's two quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InformativenessEstimate {
    pub p_contains: f64,
    pub se_p: f64,
    pub mean_size: f64,
    pub se_size: f64,
    pub trials: usize,
}

/// Draws `trials` independent `(environment, rater, D0)` triples and records
/// whether `A* ∈ U_D0` and `|U_D0|`.
#[allow(clippy::too_many_arguments)]
pub fn mc_verify_informativeness(
    family: &EnvSpec,
    beta: f64,
    lambda: f64,
    mu: &SamplingDist,
    n: usize,
    trials: usize,
    master_seed: u64,
    rule: InfoSetRule,
    mode: ExecMode,
) -> Result<InformativenessEstimate> {
    if trials < 1000 {
        return domain("at least 1000 trials are required");
    }
    let outcomes = map_indexed(trials, mode, |i| -> Result<(f64, f64)> {
        let mut rng = stream(master_seed, i as u64, "informativeness");
        let env = sample_environment(family, &mut rng)?;
        let rater = Rater::draw(env.theta(), beta, lambda, &mut rng)?;
        let d0 = generate_offline_dataset(&env, &rater, mu, n, &mut rng);
        let u = build_info_set_with(&d0, env.k(), rule);
        Ok((f64::from(u8::from(u.contains(env.optimal_arm()))), u.len() as f64))
    });
    let outcomes: Vec<(f64, f64)> = outcomes.into_iter().collect::<Result<_>>()?;
    let (hits, sizes): (Vec<f64>, Vec<f64>) = outcomes.into_iter().unzip();
    let (p_contains, se_p) = mean_se(&hits);
    let (mean_size, se_size) = mean_se(&sizes);
    Ok(InformativenessEstimate { p_contains, se_p, mean_size, se_size, trials })
}
