use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::mdp::Trajectory;
use super::prefs::TrajPrefDataset;
use crate::error::domain;
use crate::Result;

/// Independent Dirichlet pseudo-counts for every `(s, a)` row,
/// `alpha[(s·A + a)·S + s']`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletBelief {
    pub s: usize,
    pub a: usize,
    pub alpha: Vec<f64>,
}

impl DirichletBelief {
    pub fn new(s: usize, a: usize, alpha0: f64) -> Result<Self> {
        if !(alpha0 > 0.0) {
            return domain("Dirichlet pseudo-counts must be positive");
        }
        Ok(Self { s, a, alpha: vec![alpha0; s * a * s] })
    }

    pub fn observe(&mut self, tau: &Trajectory) {
        for i in tau.transitions(self.s, self.a) {
            self.alpha[i] += 1.0;
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        self.alpha
            .chunks(self.s)
            .flat_map(|row| {
                let t: f64 = row.iter().sum();
                row.iter().map(move |x| x / t)
            })
            .collect()
    }

    /// Per-row mode `(α − 1)⁺ / Σ(α − 1)⁺`; rows without mass above one fall
    /// back to uniform.
    pub fn mode(&self) -> Vec<f64> {
        let s = self.s;
        self.alpha
            .chunks(s)
            .flat_map(|row| {
                let ex: Vec<f64> = row.iter().map(|x| (x - 1.0).max(0.0)).collect();
                let t: f64 = ex.iter().sum();
                if t > 0.0 {
                    ex.into_iter().map(|x| x / t).collect::<Vec<_>>()
                } else {
                    vec![1.0 / s as f64; s]
                }
            })
            .collect()
    }

    /// Exact draw of every row through normalised Gamma variates.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let s = self.s;
        let mut out = Vec::with_capacity(self.alpha.len());
        for row in self.alpha.chunks(s) {
            let g: Vec<f64> = row
                .iter()
                .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
                .collect();
            let t: f64 = g.iter().sum();
            if t > 0.0 && t.is_finite() {
                out.extend(g.into_iter().map(|x| x / t));
            } else {
                let m: f64 = row.iter().sum();
                out.extend(row.iter().map(|x| x / m));
            }
        }
        out
    }
}

/// `α0` plus transition counts from every offline trajectory (labels carry no
/// information about the dynamics).
pub fn informed_prior_eta(d0: &TrajPrefDataset, s: usize, a: usize, alpha0: f64) -> Result<DirichletBelief> {
    let mut b = DirichletBelief::new(s, a, alpha0)?;
    for e in &d0.entries {
        b.observe(&e.tau0);
        b.observe(&e.tau1);
    }
    Ok(b)
}
