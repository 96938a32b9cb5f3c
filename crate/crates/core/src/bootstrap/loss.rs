use nalgebra::{DMatrix, DVector};

use super::perturb::PerturbationSet;
use crate::bandit_ps::History;
use crate::error::domain;
use crate::model::{OfflinePrefDataset, PriorSpec};
use crate::numeric::{logistic, softplus};
use crate::optim::Objective;
use crate::Result;

/// Offline comparisons from one rater together with its competence.
#[derive(Debug, Clone, PartialEq)]
pub struct RaterData {
    pub beta: f64,
    pub lambda: f64,
    pub d0: OfflinePrefDataset,
}

/// Everything the surrogate loss depends on. The first rater is the primary
/// one; additional raters contribute their own `L2`/`L3` terms with a
/// separate `ϑ` each.
#[derive(Debug, Clone, PartialEq)]
pub struct LossParams {
    pub prior: PriorSpec,
    /// One arm per row.
    pub actions: DMatrix<f64>,
    /// Reward noise scale; `L1` is divided by `σ²` and `ζ` scaled by `σ`.
    pub sigma: f64,
    pub raters: Vec<RaterData>,
    pub history: History,
}

impl LossParams {
    pub fn new(prior: PriorSpec, actions: DMatrix<f64>, beta: f64, lambda: f64, d0: OfflinePrefDataset) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return domain("beta must be finite and nonnegative");
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return domain("lambda must be finite and positive");
        }
        if actions.ncols() != prior.dim() {
            return domain("arm dimension disagrees with the prior");
        }
        Ok(Self { prior, actions, sigma: 1.0, raters: vec![RaterData { beta, lambda, d0 }], history: History::default() })
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    /// Adds another rater (untested against any published number).
    pub fn add_rater(&mut self, beta: f64, lambda: f64, d0: OfflinePrefDataset) {
        self.raters.push(RaterData { beta, lambda, d0 });
    }

    pub fn dim(&self) -> usize {
        self.prior.dim()
    }

    pub fn beta(&self) -> f64 {
        self.raters[0].beta
    }

    pub fn lambda(&self) -> f64 {
        self.raters[0].lambda
    }

    pub fn d0(&self) -> &OfflinePrefDataset {
        &self.raters[0].d0
    }

    pub fn d0_mut(&mut self) -> &mut OfflinePrefDataset {
        &mut self.raters[0].d0
    }
}

/// Logistic terms attached to one rater's `ϑ`.
#[derive(Debug, Clone)]
pub(crate) struct PrefBlock {
    pub lambda2: f64,
    /// `ϑ'` shift inside the coupling term.
    pub offset: DVector<f64>,
    pub beta: f64,
    /// Rows `φ_L − φ_W`.
    pub diffs: DMatrix<f64>,
    pub weights: Vec<f64>,
}

/// The (perturbed) surrogate loss in coordinates `u = θ`, `v_r = ϑ_r − θ`.
///
/// In these coordinates the `λ²` coupling is diagonal, so the Hessian stays
/// well conditioned for very knowledgeable raters.
#[derive(Debug, Clone)]
pub(crate) struct Surrogate {
    pub d: usize,
    /// `Σ a aᵀ/σ²`.
    pub gram: DMatrix<f64>,
    /// `Σ (R + σζ) a/σ²`.
    pub lin: DVector<f64>,
    /// `½ Σ (R + σζ)²/σ²`.
    pub constant: f64,
    pub prior_prec: DMatrix<f64>,
    /// `μ0 + θ'`.
    pub prior_center: DVector<f64>,
    pub blocks: Vec<PrefBlock>,
}

impl Surrogate {
    pub fn new(p: &LossParams, pert: Option<&PerturbationSet>) -> Self {
        let d = p.dim();
        let inv_s2 = 1.0 / (p.sigma * p.sigma);
        let mut gram = DMatrix::zeros(d, d);
        let mut lin = DVector::zeros(d);
        let mut constant = 0.0;
        for (s, &(arm, r)) in p.history.steps.iter().enumerate() {
            let y = r + pert.map_or(0.0, |q| q.zeta[s] * p.sigma);
            let a = p.actions.row(arm);
            gram.ger(inv_s2, &a.transpose(), &a.transpose(), 1.0);
            lin.axpy(y * inv_s2, &a.transpose(), 1.0);
            constant += 0.5 * y * y * inv_s2;
        }
        let prior_center = match pert {
            Some(q) => p.prior.mean() + &q.theta_prime,
            None => p.prior.mean().clone(),
        };
        let blocks = p
            .raters
            .iter()
            .enumerate()
            .map(|(r, rd)| {
                let rp = pert.map(|q| &q.raters[r]);
                let mut diffs = DMatrix::zeros(rd.d0.len(), d);
                for (n, e) in rd.d0.entries.iter().enumerate() {
                    diffs.set_row(n, &(p.actions.row(e.loser()) - p.actions.row(e.winner())));
                }
                let weights = match rp {
                    Some(rp) => rp.omega.iter().map(|&w| if w { 1.0 } else { 0.0 }).collect(),
                    None => vec![1.0; rd.d0.len()],
                };
                PrefBlock {
                    lambda2: rd.lambda * rd.lambda,
                    offset: rp.map_or_else(|| DVector::zeros(d), |rp| rp.vartheta_prime.clone()),
                    beta: rd.beta,
                    diffs,
                    weights,
                }
            })
            .collect();
        Self { d, gram, lin, constant, prior_prec: p.prior.precision().clone(), prior_center, blocks }
    }

    pub fn n_vars(&self) -> usize {
        self.d * (1 + self.blocks.len())
    }

    /// Maps `(θ, ϑ_1..)` to `(u, v_1..)`.
    pub fn to_internal(&self, theta: &DVector<f64>, varthetas: &[DVector<f64>]) -> DVector<f64> {
        let d = self.d;
        let mut x = DVector::zeros(self.n_vars());
        x.rows_mut(0, d).copy_from(theta);
        for (r, v) in varthetas.iter().enumerate() {
            x.rows_mut(d * (r + 1), d).copy_from(&(v - theta));
        }
        x
    }

    #[allow(clippy::wrong_self_convention)]
    pub fn from_internal(&self, x: &DVector<f64>) -> (DVector<f64>, Vec<DVector<f64>>) {
        let d = self.d;
        let u = x.rows(0, d).into_owned();
        let vs = (0..self.blocks.len()).map(|r| &u + x.rows(d * (r + 1), d)).collect();
        (u, vs)
    }

    /// Gradient in `(θ, ϑ)` coordinates from the internal one.
    pub fn grad_to_original(&self, g: &DVector<f64>) -> DVector<f64> {
        let d = self.d;
        let mut out = g.clone();
        for r in 0..self.blocks.len() {
            let gv = g.rows(d * (r + 1), d).into_owned();
            let mut head = out.rows_mut(0, d);
            head -= gv;
        }
        out
    }

    fn eval(&self, x: &DVector<f64>, mut grad: Option<&mut DVector<f64>>, mut hess: Option<&mut DMatrix<f64>>) -> f64 {
        let d = self.d;
        let u = x.rows(0, d);
        let gu = &self.gram * u;
        let pr = u - &self.prior_center;
        let ppr = &self.prior_prec * &pr;
        let mut value = 0.5 * u.dot(&gu) - self.lin.dot(&u) + self.constant + 0.5 * pr.dot(&ppr);
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
            g.rows_mut(0, d).copy_from(&(gu - &self.lin + ppr));
        }
        if let Some(h) = hess.as_deref_mut() {
            h.fill(0.0);
            h.view_mut((0, 0), (d, d)).copy_from(&(&self.gram + &self.prior_prec));
        }
        for (r, b) in self.blocks.iter().enumerate() {
            let off = d * (r + 1);
            let v = x.rows(off, d);
            let vt = u + v;
            let c = v - &b.offset;
            value += 0.5 * b.lambda2 * c.norm_squared();
            let z = &b.diffs * &vt * b.beta;
            let mut gpref = DVector::zeros(d);
            let mut hpref = DMatrix::zeros(d, d);
            for (n, &w) in b.weights.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                value += w * softplus(z[n]);
                if grad.is_some() || hess.is_some() {
                    let s = logistic(z[n]);
                    let row = b.diffs.row(n).transpose();
                    gpref.axpy(w * b.beta * s, &row, 1.0);
                    if hess.is_some() {
                        hpref.ger(w * b.beta * b.beta * s * (1.0 - s), &row, &row, 1.0);
                    }
                }
            }
            if let Some(g) = grad.as_deref_mut() {
                let mut gu = g.rows_mut(0, d);
                gu += &gpref;
                g.rows_mut(off, d).copy_from(&(c * b.lambda2 + gpref));
            }
            if let Some(h) = hess.as_deref_mut() {
                let mut huu = h.view_mut((0, 0), (d, d));
                huu += &hpref;
                h.view_mut((0, off), (d, d)).copy_from(&hpref);
                h.view_mut((off, 0), (d, d)).copy_from(&hpref);
                let mut hvv = hpref;
                for i in 0..d {
                    hvv[(i, i)] += b.lambda2;
                }
                h.view_mut((off, off), (d, d)).copy_from(&hvv);
            }
        }
        value
    }
}

impl Objective for Surrogate {
    fn dim(&self) -> usize {
        self.n_vars()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.eval(x, None, None)
    }

    fn value_grad(&self, x: &DVector<f64>, g: &mut DVector<f64>) -> f64 {
        self.eval(x, Some(g), None)
    }

    fn hessian(&self, x: &DVector<f64>, h: &mut DMatrix<f64>) {
        self.eval(x, None, Some(h));
    }
}

/// `L1 + L2 + L3` for a single-rater problem and its gradient over `(θ, ϑ)`
/// (length `2d`).
pub fn surrogate_loss(theta: &DVector<f64>, vartheta: &DVector<f64>, p: &LossParams) -> (f64, DVector<f64>) {
    surrogate_loss_multi(theta, std::slice::from_ref(vartheta), p, None)
}

/// Surrogate loss with one `ϑ` per rater and an optional perturbation. The
/// gradient is ordered `(θ, ϑ_1, ϑ_2, ..)`.
pub fn surrogate_loss_multi(
    theta: &DVector<f64>,
    varthetas: &[DVector<f64>],
    p: &LossParams,
    pert: Option<&PerturbationSet>,
) -> (f64, DVector<f64>) {
    assert_eq!(varthetas.len(), p.raters.len(), "one vartheta per rater");
    let s = Surrogate::new(p, pert);
    let x = s.to_internal(theta, varthetas);
    let mut g = DVector::zeros(s.n_vars());
    let v = s.value_grad(&x, &mut g);
    (v, s.grad_to_original(&g))
}
