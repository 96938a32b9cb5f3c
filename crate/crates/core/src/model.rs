//! Ground truth shared by every learner: environments, raters and synthetic
//! offline preference datasets.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{config, domain};
use crate::numeric::{argmax, gaussian_from_factor, logistic, std_normal_vec};
use crate::{Error, Result};

/// Gaussian prior `N(μ0, Σ0)` with cached precision and Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    mu0: DVector<f64>,
    sigma0: DMatrix<f64>,
    precision: DMatrix<f64>,
    lower: DMatrix<f64>,
}

impl PriorSpec {
    pub fn new(mu0: DVector<f64>, sigma0: DMatrix<f64>) -> Result<Self> {
        let d = mu0.len();
        if d == 0 || sigma0.nrows() != d || sigma0.ncols() != d {
            return config("prior mean and covariance dimensions disagree");
        }
        if (&sigma0 - sigma0.transpose()).amax() > 1e-12 * sigma0.amax().max(1.0) {
            return config("prior covariance is not symmetric");
        }
        let chol = sigma0
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Config("prior covariance is not positive definite".into()))?;
        let precision = chol.inverse();
        let lower = chol.l();
        Ok(Self { mu0, sigma0, precision, lower })
    }

    /// `N(0, I_d)`.
    pub fn standard(d: usize) -> Self {
        Self::isotropic(DVector::zeros(d), 1.0)
    }

    pub fn isotropic(mu0: DVector<f64>, variance: f64) -> Self {
        let d = mu0.len();
        Self::new(mu0, DMatrix::identity(d, d) * variance).expect("isotropic prior is valid")
    }

    pub fn dim(&self) -> usize {
        self.mu0.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mu0
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.sigma0
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn cov_lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        gaussian_from_factor(&self.mu0, &self.lower, rng)
    }

    /// Draw from `N(0, Σ0)`.
    pub fn sample_centered<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        &self.lower * std_normal_vec(self.dim(), rng)
    }

    /// Log density up to the normalising constant.
    pub fn log_density_unnorm(&self, theta: &DVector<f64>) -> f64 {
        let r = theta - &self.mu0;
        -0.5 * r.dot(&(&self.precision * &r))
    }
}

/// Scale convention for arm features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ArmNorm {
    /// Arms on the unit Euclidean sphere.
    #[default]
    Unit,
    /// Unit-sphere arms scaled by `1/√d`, so that `‖a‖₁ ≤ 1`.
    L1Bounded,
}

impl ArmNorm {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "unit" | "l2" => Some(Self::Unit),
            "l1" | "l1-bounded" => Some(Self::L1Bounded),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Unit => "unit",
            Self::L1Bounded => "l1",
        }
    }
}

/// True reward parameter, arm features and reward noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    theta: DVector<f64>,
    /// One arm per row.
    actions: DMatrix<f64>,
    noise_sigma: f64,
    means: DVector<f64>,
    best: usize,
}

impl Environment {
    pub fn new(theta: DVector<f64>, actions: DMatrix<f64>, noise_sigma: f64) -> Result<Self> {
        let (k, d) = actions.shape();
        if k < 2 {
            return config(format!("need at least two arms, got {k}"));
        }
        if d == 0 || theta.len() != d {
            return config("arm and parameter dimensions disagree");
        }
        if actions.row_iter().any(|r| r.norm() > 1.0 + 1e-12) {
            return config("every arm must have Euclidean norm at most 1");
        }
        if !(noise_sigma >= 0.0) {
            return config("noise scale must be nonnegative");
        }
        let means = &actions * &theta;
        let best = argmax(means.iter().copied());
        Ok(Self { theta, actions, noise_sigma, means, best })
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn actions(&self) -> &DMatrix<f64> {
        &self.actions
    }

    pub fn arm(&self, i: usize) -> DVector<f64> {
        self.actions.row(i).transpose()
    }

    pub fn k(&self) -> usize {
        self.actions.nrows()
    }

    pub fn dim(&self) -> usize {
        self.actions.ncols()
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    /// `⟨a_i, θ⟩` for every arm.
    pub fn mean_rewards(&self) -> &DVector<f64> {
        &self.means
    }

    /// `A*` (lowest index among ties).
    pub fn optimal_arm(&self) -> usize {
        self.best
    }

    /// `⟨A* − a_i, θ⟩ ≥ 0`.
    pub fn gap(&self, i: usize) -> f64 {
        self.means[self.best] - self.means[i]
    }

    pub fn reward_sample<R: Rng + ?Sized>(&self, arm: usize, rng: &mut R) -> Result<f64> {
        if arm >= self.k() {
            return domain(format!("arm index {arm} out of range for K={}", self.k()));
        }
        let noise: f64 = rng.sample(StandardNormal);
        Ok(self.means[arm] + self.noise_sigma * noise)
    }
}

/// Recipe for drawing environments.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub d: usize,
    pub k: usize,
    pub prior: PriorSpec,
    pub noise_sigma: f64,
    pub arm_norm: ArmNorm,
}

impl EnvSpec {
    /// Standard normal prior, unit noise, unit-sphere arms.
    pub fn standard(d: usize, k: usize) -> Self {
        Self { d, k, prior: PriorSpec::standard(d.max(1)), noise_sigma: 1.0, arm_norm: ArmNorm::Unit }
    }
}

/// Arms uniform on the unit sphere (optionally rescaled), `θ ~ ν0`.
pub fn sample_environment<R: Rng + ?Sized>(spec: &EnvSpec, rng: &mut R) -> Result<Environment> {
    if spec.d == 0 {
        return config("dimension d must be at least 1");
    }
    if spec.k < 2 {
        return config(format!("need at least two arms, got K={}", spec.k));
    }
    if spec.prior.dim() != spec.d {
        return config("prior dimension disagrees with d");
    }
    let scale = match spec.arm_norm {
        ArmNorm::Unit => 1.0,
        ArmNorm::L1Bounded => 1.0 / (spec.d as f64).sqrt(),
    };
    let mut actions = DMatrix::zeros(spec.k, spec.d);
    for i in 0..spec.k {
        let v = loop {
            let v = std_normal_vec(spec.d, rng);
            let n = v.norm();
            if n > 1e-12 {
                break v / n;
            }
        };
        actions.set_row(i, &(v * scale).transpose());
    }
    let theta = spec.prior.sample(rng);
    Environment::new(theta, actions, spec.noise_sigma)
}

/// Offline rater: competence `(β, λ)` and its realised estimate `ϑ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rater {
    pub beta: f64,
    pub lambda: f64,
    pub vartheta: DVector<f64>,
}

impl Rater {
    pub fn new(beta: f64, lambda: f64, vartheta: DVector<f64>) -> Result<Self> {
        if !(beta >= 0.0) {
            return domain("beta must be nonnegative");
        }
        if !(lambda > 0.0) {
            return domain("lambda must be positive");
        }
        Ok(Self { beta, lambda, vartheta })
    }

    /// Draws `ϑ ~ N(θ, I/λ²)` and builds the rater.
    pub fn draw<R: Rng + ?Sized>(theta: &DVector<f64>, beta: f64, lambda: f64, rng: &mut R) -> Result<Self> {
        let vartheta = rater_estimate(theta, lambda, rng)?;
        Self::new(beta, lambda, vartheta)
    }

    /// Probability that `a0` is preferred to `a1`.
    pub fn prob_first(&self, a0: &DVector<f64>, a1: &DVector<f64>) -> f64 {
        preference_prob(a0, a1, &self.vartheta, self.beta)
    }
}

/// One draw `ϑ ~ N(θ, I/λ²)`.
pub fn rater_estimate<R: Rng + ?Sized>(theta: &DVector<f64>, lambda: f64, rng: &mut R) -> Result<DVector<f64>> {
    if !(lambda > 0.0) {
        return domain("lambda must be positive");
    }
    Ok(theta + std_normal_vec(theta.len(), rng) / lambda)
}

/// Bradley–Terry probability that the rater prefers `a0` over `a1`.
pub fn preference_prob(a0: &DVector<f64>, a1: &DVector<f64>, vartheta: &DVector<f64>, beta: f64) -> f64 {
    pref_prob_from_scores(a0.dot(vartheta), a1.dot(vartheta), beta)
}

/// `σ(β(s0 − s1))`, the two-term softmax with max shift. Equal scores give
/// exactly 1/2 for any `β`, including `β = ∞`.
pub fn pref_prob_from_scores(s0: f64, s1: f64, beta: f64) -> f64 {
    let diff = s0 - s1;
    if diff == 0.0 || beta == 0.0 {
        return 0.5;
    }
    logistic(beta * diff)
}

/// Distribution `μ` over arms used to draw comparison pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingDist {
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl SamplingDist {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return config("sampling distribution needs at least two arms");
        }
        if weights.iter().any(|&w| !(w > 0.0 && w < 1.0)) {
            return config("every sampling weight must lie in (0, 1)");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return config(format!("sampling weights sum to {total}, not 1"));
        }
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        Ok(Self { weights, cumulative })
    }

    pub fn uniform(k: usize) -> Self {
        Self::new(vec![1.0 / k as f64; k]).expect("uniform distribution over K >= 2 arms")
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn mu_min(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mu_max(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cumulative.partition_point(|&c| c <= u).min(self.weights.len() - 1)
    }
}

/// One offline comparison. `y = 0` means `idx0` was preferred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefEntry {
    pub idx0: usize,
    pub idx1: usize,
    pub y: u8,
}

impl PrefEntry {
    pub fn winner(&self) -> usize {
        if self.y == 0 { self.idx0 } else { self.idx1 }
    }

    pub fn loser(&self) -> usize {
        if self.y == 0 { self.idx1 } else { self.idx0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OfflinePrefDataset {
    pub entries: Vec<PrefEntry>,
}

impl OfflinePrefDataset {
    pub fn new(entries: Vec<PrefEntry>) -> Self {
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, e: PrefEntry) {
        self.entries.push(e);
    }

    /// Occurrence count of every arm across both positions.
    pub fn arm_counts(&self, k: usize) -> Vec<f64> {
        let mut c = vec![0.0; k];
        for e in &self.entries {
            c[e.idx0] += 1.0;
            c[e.idx1] += 1.0;
        }
        c
    }
}

/// Draws a label for the pair `(i, j)` from the rater.
pub fn query_preference<R: Rng + ?Sized>(env: &Environment, rater: &Rater, i: usize, j: usize, rng: &mut R) -> PrefEntry {
    let scores = env.actions() * &rater.vartheta;
    label_pair(&scores, rater.beta, i, j, rng)
}

fn label_pair<R: Rng + ?Sized>(scores: &DVector<f64>, beta: f64, i: usize, j: usize, rng: &mut R) -> PrefEntry {
    let p0 = pref_prob_from_scores(scores[i], scores[j], beta);
    let u: f64 = rng.random();
    PrefEntry { idx0: i, idx1: j, y: u8::from(u >= p0) }
}

/// `N` i.i.d. pairs from `μ`, each labelled by the rater.
pub fn generate_offline_dataset<R: Rng + ?Sized>(
    env: &Environment,
    rater: &Rater,
    mu: &SamplingDist,
    n: usize,
    rng: &mut R,
) -> OfflinePrefDataset {
    assert_eq!(mu.k(), env.k(), "sampling distribution must cover every arm");
    let scores = env.actions() * &rater.vartheta;
    let entries = (0..n)
        .map(|_| {
            let i = mu.sample(rng);
            let j = mu.sample(rng);
            label_pair(&scores, rater.beta, i, j, rng)
        })
        .collect();
    OfflinePrefDataset { entries }
}
