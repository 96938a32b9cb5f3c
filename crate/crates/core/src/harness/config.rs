//! Flat `key = value` experiment configuration.
//!
//! One assignment per line; `#` starts a comment; blank lines are ignored.
//! Later assignments win, and command-line overrides are applied last with
//! [`ExperimentConfig::set`].

use std::fmt::Write as _;

use crate::bandit_ps::InfoSetRule;
use crate::error::config;
use crate::exec::ExecMode;
use crate::model::{ArmNorm, SamplingDist};
use crate::optim::{InitPolicy, Method, OptimizerSpec};
use crate::pspl::DirichletPrefactor;
use crate::theory::F2Variant;
use crate::warmtsof::FeedbackConfig;
use crate::Result;

pub const BANDIT_ALGOS: &[&str] = &["vanilla-ps", "lints", "warmpref-exact", "warmpref-boot", "hybrid-dpo", "warmtsof"];
pub const PSPL_ALGOS: &[&str] = &["pspl", "pspl-boot"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Bandit,
    Pspl,
    Theory,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bandit" => Some(Self::Bandit),
            "pspl" => Some(Self::Pspl),
            "theory" => Some(Self::Theory),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Bandit => "bandit",
            Self::Pspl => "pspl",
            Self::Theory => "theory",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdpKind {
    RiverSwim,
    Random,
}

/// Lower end of the Hybrid-DPO reward shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DpoMinReward {
    /// `min_a ⟨a, θ⟩` of the true environment.
    Oracle,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub algorithms: Vec<String>,
    pub k: usize,
    pub d: usize,
    pub t: usize,
    pub n: usize,
    pub beta: f64,
    pub lambda: f64,
    pub sigma: f64,
    /// `None` means uniform over arms.
    pub mu_min: Option<f64>,
    pub arm_norm: ArmNorm,
    pub seeds: usize,
    pub master_seed: u64,
    pub exec: ExecMode,
    pub optimizer: OptimizerSpec,
    pub feedback: FeedbackConfig,
    pub particles: usize,
    /// `None` means `σ √(d ln T)`.
    pub lints_v: Option<f64>,
    pub dpo_eps: f64,
    pub dpo_tau: f64,
    pub dpo_steps: usize,
    pub dpo_min_reward: DpoMinReward,
    pub info_rule: InfoSetRule,
    pub f2_variant: F2Variant,
    pub env: MdpKind,
    pub s: usize,
    pub a: usize,
    pub h: usize,
    pub episodes: usize,
    pub alpha0: f64,
    pub prefactor: DirichletPrefactor,
    pub delta: f64,
    /// `Δ_min` in the PSPL constants.
    pub delta_min: f64,
    /// Confidence parameter of the simple-regret bound.
    pub delta1: f64,
    pub output: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Bandit,
            algorithms: ["vanilla-ps", "lints", "warmpref-exact", "warmpref-boot", "hybrid-dpo"].map(String::from).to_vec(),
            k: 50,
            d: 6,
            t: 300,
            n: 20,
            beta: 10.0,
            lambda: 100.0,
            sigma: 1.0,
            mu_min: None,
            arm_norm: ArmNorm::Unit,
            seeds: 20,
            master_seed: 0,
            exec: ExecMode::Parallel,
            optimizer: OptimizerSpec::default(),
            feedback: FeedbackConfig::default(),
            particles: 4096,
            lints_v: None,
            dpo_eps: 0.16,
            dpo_tau: 0.1,
            dpo_steps: 20_000,
            dpo_min_reward: DpoMinReward::Oracle,
            info_rule: InfoSetRule::WonAtLeastOnce,
            f2_variant: F2Variant::MainText,
            env: MdpKind::RiverSwim,
            s: 6,
            a: 2,
            h: 20,
            episodes: 200,
            alpha0: 1.0,
            prefactor: DirichletPrefactor::Displayed,
            delta: 0.1,
            delta_min: 0.0,
            delta1: 0.1,
            output: None,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().or_else(|_| config(format!("bad value for {key}: {v:?}")))
}

fn real(key: &str, v: &str) -> Result<f64> {
    let x: f64 = num(key, v)?;
    if x.is_nan() {
        return config(format!("{key} must not be NaN"));
    }
    Ok(x)
}

fn choice<T>(key: &str, v: &str, parsed: Option<T>) -> Result<T> {
    parsed.map_or_else(|| config(format!("bad value for {key}: {v:?}")), Ok)
}

impl ExperimentConfig {
    /// Defaults for a mode: PSPL runs use the RiverSwim settings.
    pub fn for_mode(mode: Mode) -> Self {
        let mut c = Self { mode, ..Self::default() };
        if mode == Mode::Pspl {
            c.algorithms = PSPL_ALGOS.iter().map(|s| s.to_string()).collect();
            c.n = 1000;
            c.beta = 10.0;
            c.lambda = 50.0;
        }
        c
    }

    pub fn parse(text: &str, mode: Mode) -> Result<Self> {
        let mut c = Self::for_mode(mode);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return config(format!("line {}: expected key = value", lineno + 1));
            };
            c.set(k.trim(), v.trim())?;
        }
        Ok(c)
    }

    /// Applies one assignment.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "mode" => self.mode = choice(key, v, Mode::parse(v))?,
            "algorithms" | "algos" => {
                self.algorithms = v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
            }
            "K" | "k" => self.k = num(key, v)?,
            "d" => self.d = num(key, v)?,
            "T" | "t" => self.t = num(key, v)?,
            "N" | "n" => self.n = num(key, v)?,
            "beta" => self.beta = real(key, v)?,
            "lambda" => self.lambda = real(key, v)?,
            "sigma" => self.sigma = real(key, v)?,
            "mu_min" => self.mu_min = if v == "uniform" { None } else { Some(real(key, v)?) },
            "arm_norm" => self.arm_norm = choice(key, v, ArmNorm::parse(v))?,
            "seeds" => self.seeds = num(key, v)?,
            "master_seed" | "seed" => self.master_seed = num(key, v)?,
            "exec" => self.exec = choice(key, v, ExecMode::parse(v))?,
            "optimizer" => {
                self.optimizer.method = match v {
                    "newton" => Method::Newton,
                    "gd" | "gradient-descent" => Method::GradientDescent,
                    _ => return config(format!("bad value for {key}: {v:?}")),
                }
            }
            "opt_max_iters" => self.optimizer.max_iters = num(key, v)?,
            "opt_grad_tol" => self.optimizer.grad_tol = real(key, v)?,
            "opt_init" => {
                self.optimizer.init = match v {
                    "prior" => InitPolicy::Prior,
                    "zero" => InitPolicy::Zero,
                    _ => return config(format!("bad value for {key}: {v:?}")),
                }
            }
            "feedback_cost" => self.feedback.cost = real(key, v)?,
            "feedback_eps_scale" => self.feedback.eps_scale = real(key, v)?,
            "particles" | "M" => self.particles = num(key, v)?,
            "lints_v" => self.lints_v = if v == "auto" { None } else { Some(real(key, v)?) },
            "dpo_eps" => self.dpo_eps = real(key, v)?,
            "dpo_tau" => self.dpo_tau = real(key, v)?,
            "dpo_steps" => self.dpo_steps = num(key, v)?,
            "dpo_min_reward" => {
                self.dpo_min_reward = if v == "oracle" { DpoMinReward::Oracle } else { DpoMinReward::Value(real(key, v)?) }
            }
            "info_rule" => self.info_rule = choice(key, v, InfoSetRule::parse(v))?,
            "f2_variant" => self.f2_variant = choice(key, v, F2Variant::parse(v))?,
            "env" => {
                self.env = match v {
                    "riverswim" => MdpKind::RiverSwim,
                    "random" => MdpKind::Random,
                    _ => return config(format!("bad value for {key}: {v:?}")),
                }
            }
            "S" | "s" => self.s = num(key, v)?,
            "A" | "a" => self.a = num(key, v)?,
            "H" | "h" => self.h = num(key, v)?,
            "episodes" => self.episodes = num(key, v)?,
            "alpha0" => self.alpha0 = real(key, v)?,
            "dirichlet_prefactor" => self.prefactor = choice(key, v, DirichletPrefactor::parse(v))?,
            "delta" => self.delta = real(key, v)?,
            "delta_min" => self.delta_min = real(key, v)?,
            "delta1" => self.delta1 = real(key, v)?,
            "output" | "out" => self.output = Some(v.to_string()),
            _ => return config(format!("unknown config key {key:?}")),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let Some((k, v)) = kv.split_once('=') else {
            return config(format!("override {kv:?} is not key=value"));
        };
        self.set(k.trim(), v.trim())
    }

    pub fn validate(&self) -> Result<()> {
        let valid: &[&str] = match self.mode {
            Mode::Bandit => BANDIT_ALGOS,
            Mode::Pspl => PSPL_ALGOS,
            Mode::Theory => &[],
        };
        for a in &self.algorithms {
            if self.mode != Mode::Theory && !valid.contains(&a.as_str()) {
                return config(format!("unknown algorithm {a:?}; valid tags: {}", valid.join(", ")));
            }
        }
        if self.mode != Mode::Theory && self.algorithms.is_empty() {
            return config("no algorithms selected");
        }
        if self.seeds == 0 {
            return config("seeds must be positive");
        }
        if !(self.beta >= 0.0 && self.lambda > 0.0 && self.sigma > 0.0) {
            return config("need beta >= 0, lambda > 0, sigma > 0");
        }
        match self.mode {
            Mode::Bandit | Mode::Theory => {
                if self.k < 2 || self.d == 0 || self.t == 0 {
                    return config("need K >= 2, d >= 1, T >= 1");
                }
                if self.mode == Mode::Bandit {
                    self.sampling_dist()?;
                }
                if self.algorithms.iter().any(|a| a == "warmpref-exact") && self.particles == 0 {
                    return config("particles must be positive");
                }
                if !(0.0..=1.0).contains(&self.dpo_eps) || !(self.dpo_tau > 0.0) {
                    return config("need dpo_eps in [0, 1] and dpo_tau > 0");
                }
                FeedbackConfig::new(self.feedback.cost, self.feedback.eps_scale).or_else(|e| config(e.to_string()))?;
            }
            Mode::Pspl => {
                if self.s < 2 || self.a == 0 || self.h == 0 || self.episodes == 0 {
                    return config("need S >= 2, A >= 1, H >= 1, episodes >= 1");
                }
                if self.env == MdpKind::RiverSwim && self.a != 2 {
                    return config("RiverSwim has exactly two actions");
                }
                if !(self.alpha0 > 0.0) || !(self.delta > 0.0 && self.delta < 1.0) {
                    return config("need alpha0 > 0 and delta in (0, 1)");
                }
            }
        }
        Ok(())
    }

    /// The offline arm distribution: uniform, or `mu_min` on every arm but
    /// the last, which takes the remaining mass.
    pub fn sampling_dist(&self) -> Result<SamplingDist> {
        match self.mu_min {
            None => Ok(SamplingDist::uniform(self.k)),
            Some(m) => {
                if !(m > 0.0 && m <= 1.0 / self.k as f64) {
                    return config("mu_min must lie in (0, 1/K]");
                }
                let mut w = vec![m; self.k];
                w[self.k - 1] = 1.0 - m * (self.k - 1) as f64;
                SamplingDist::new(w).or_else(|e| config(e.to_string()))
            }
        }
    }

    pub fn mu_min_value(&self) -> f64 {
        self.mu_min.unwrap_or(1.0 / self.k as f64)
    }

    pub fn lints_inflation(&self) -> f64 {
        let v = self.lints_v.unwrap_or_else(|| self.sigma * (self.d as f64 * (self.t.max(2) as f64).ln()).sqrt());
        v * v
    }

    /// Every setting as `(key, value)` in a fixed order.
    pub fn echo(&self) -> Vec<(String, String)> {
        let o = &self.optimizer;
        let method = match o.method {
            Method::Newton => "newton",
            Method::GradientDescent => "gd",
        };
        let init = match o.init {
            InitPolicy::Prior => "prior",
            InitPolicy::Zero => "zero",
        };
        let mut out = Vec::new();
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        put("mode", self.mode.as_str().into());
        put("algorithms", self.algorithms.join(","));
        put("K", self.k.to_string());
        put("d", self.d.to_string());
        put("T", self.t.to_string());
        put("N", self.n.to_string());
        put("beta", self.beta.to_string());
        put("lambda", self.lambda.to_string());
        put("sigma", self.sigma.to_string());
        put("mu_min", self.mu_min.map_or("uniform".into(), |m| m.to_string()));
        put("arm_norm", self.arm_norm.as_str().into());
        put("seeds", self.seeds.to_string());
        put("master_seed", self.master_seed.to_string());
        put("exec", self.exec.as_str().into());
        put("optimizer", method.into());
        put("opt_max_iters", o.max_iters.to_string());
        put("opt_grad_tol", o.grad_tol.to_string());
        put("opt_init", init.into());
        put("feedback_cost", self.feedback.cost.to_string());
        put("feedback_eps_scale", self.feedback.eps_scale.to_string());
        put("particles", self.particles.to_string());
        put("lints_v", self.lints_v.map_or("auto".into(), |v| v.to_string()));
        put("dpo_eps", self.dpo_eps.to_string());
        put("dpo_tau", self.dpo_tau.to_string());
        put("dpo_steps", self.dpo_steps.to_string());
        put(
            "dpo_min_reward",
            match self.dpo_min_reward {
                DpoMinReward::Oracle => "oracle".into(),
                DpoMinReward::Value(v) => v.to_string(),
            },
        );
        put(
            "info_rule",
            match self.info_rule {
                InfoSetRule::WonAtLeastOnce => "won-at-least-once",
                InfoSetRule::NeverLost => "never-lost",
            }
            .into(),
        );
        put(
            "f2_variant",
            match self.f2_variant {
                F2Variant::MainText => "main",
                F2Variant::Appendix => "appendix",
            }
            .into(),
        );
        put(
            "env",
            match self.env {
                MdpKind::RiverSwim => "riverswim",
                MdpKind::Random => "random",
            }
            .into(),
        );
        put("S", self.s.to_string());
        put("A", self.a.to_string());
        put("H", self.h.to_string());
        put("episodes", self.episodes.to_string());
        put("alpha0", self.alpha0.to_string());
        put(
            "dirichlet_prefactor",
            match self.prefactor {
                DirichletPrefactor::Displayed => "displayed",
                DirichletPrefactor::PerPair => "per-pair",
            }
            .into(),
        );
        put("delta", self.delta.to_string());
        put("delta_min", self.delta_min.to_string());
        put("delta1", self.delta1.to_string());
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.echo() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}
