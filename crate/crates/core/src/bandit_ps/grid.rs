use nalgebra::{DMatrix, DVector};

use super::History;
use crate::error::domain;
use crate::model::{OfflinePrefDataset, PriorSpec};
use crate::numeric::{argmax, log_logistic};
use crate::{Error, Result};

/// Lattice for the quadrature oracle: `points` midpoints per axis covering
/// `μ0_j ± half_width · sd_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub points: usize,
    pub half_width: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { points: 256, half_width: 8.0 }
    }
}

/// Normalised cell masses on the lattice and per-arm optimality probabilities.
#[derive(Debug, Clone)]
pub struct GridPosterior {
    pub axes: Vec<Vec<f64>>,
    /// Row-major over axes (the last axis varies fastest).
    pub mass: Vec<f64>,
    pub optimality: Vec<f64>,
    pitch: Vec<f64>,
}

impl GridPosterior {
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    fn point(&self, flat: usize) -> DVector<f64> {
        match self.dim() {
            1 => DVector::from_element(1, self.axes[0][flat]),
            _ => {
                let n = self.axes[1].len();
                DVector::from_vec(vec![self.axes[0][flat / n], self.axes[1][flat % n]])
            }
        }
    }

    pub fn mean(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.dim());
        for (i, &w) in self.mass.iter().enumerate() {
            if w > 0.0 {
                m += self.point(i) * w;
            }
        }
        m
    }

    /// CDF of the first coordinate, mass spread uniformly within each cell.
    pub fn marginal_cdf(&self, x: f64) -> f64 {
        let axis = &self.axes[0];
        let h = self.pitch[0];
        let stride = self.mass.len() / axis.len();
        let mut acc = 0.0;
        for (i, &c) in axis.iter().enumerate() {
            let w: f64 = self.mass[i * stride..(i + 1) * stride].iter().sum();
            let lo = c - 0.5 * h;
            if x >= lo + h {
                acc += w;
            } else if x > lo {
                acc += w * (x - lo) / h;
                break;
            } else {
                break;
            }
        }
        acc.min(1.0)
    }
}

fn axis(center: f64, sd: f64, spec: &GridSpec) -> (Vec<f64>, f64) {
    let lo = center - spec.half_width * sd;
    let h = 2.0 * spec.half_width * sd / spec.points as f64;
    ((0..spec.points).map(|i| lo + (i as f64 + 0.5) * h).collect(), h)
}

/// Row-normalised Gaussian kernel `N(ϑ_j | θ_i, 1/λ²)` on one axis.
fn kernel(xs: &[f64], lambda: f64) -> DMatrix<f64> {
    let n = xs.len();
    let mut k = DMatrix::from_fn(n, n, |i, j| (-0.5 * (lambda * (xs[i] - xs[j])).powi(2)).exp());
    for i in 0..n {
        let s: f64 = k.row(i).sum();
        k.row_mut(i).unscale_mut(s);
    }
    k
}

/// Quadrature posterior over `θ` for `d ≤ 2`.
///
/// Computes `ν0(θ) · ∫ N(ϑ | θ, I/λ²) P(D0 | ϑ) dϑ · P(H | θ)` on the lattice.
/// The inner integral runs over the same lattice with a discretely
/// normalised kernel, which stays well defined when `1/λ` is far below the
/// pitch.
#[allow(clippy::too_many_arguments)]
pub fn exact_posterior_grid(
    prior: &PriorSpec,
    lambda: f64,
    beta: f64,
    d0: &OfflinePrefDataset,
    actions: &DMatrix<f64>,
    history: &History,
    sigma: f64,
    grid: &GridSpec,
) -> Result<GridPosterior> {
    let d = prior.dim();
    if d > 2 {
        return Err(Error::UnsupportedDimension(d));
    }
    if grid.points < 256 {
        return domain("quadrature grid needs at least 256 points per axis");
    }
    if !(lambda > 0.0 && sigma > 0.0) {
        return domain("lambda and sigma must be positive");
    }
    let (axes, pitch): (Vec<Vec<f64>>, Vec<f64>) = (0..d)
        .map(|j| axis(prior.mean()[j], prior.cov()[(j, j)].sqrt(), grid))
        .unzip();
    let n = grid.points;
    let total = n.pow(d as u32);
    let point = |flat: usize| -> DVector<f64> {
        if d == 1 {
            DVector::from_element(1, axes[0][flat])
        } else {
            DVector::from_vec(vec![axes[0][flat / n], axes[1][flat % n]])
        }
    };

    let diffs = super::particles::winner_minus_loser(d0, actions);
    let pref_ll: Vec<f64> = (0..total)
        .map(|i| {
            let v = point(i);
            (&diffs * v).iter().map(|&x| if x == 0.0 { -std::f64::consts::LN_2 } else { log_logistic(beta * x) }).sum()
        })
        .collect();
    let pmax = pref_ll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lik: Vec<f64> = pref_ll.iter().map(|&l| (l - pmax).exp()).collect();
    let inner: Vec<f64> = if d == 1 {
        (kernel(&axes[0], lambda) * DVector::from_vec(lik)).iter().copied().collect()
    } else {
        let e = DMatrix::from_row_slice(n, n, &lik);
        let k0 = kernel(&axes[0], lambda);
        let k1 = kernel(&axes[1], lambda);
        let conv = k0 * e * k1.transpose();
        (0..total).map(|i| conv[(i / n, i % n)]).collect()
    };

    let mut gram = DMatrix::zeros(d, d);
    let mut lin = DVector::zeros(d);
    for &(arm, r) in &history.steps {
        let a = actions.row(arm).transpose();
        gram += &a * a.transpose();
        lin += a * r;
    }
    let inv_s2 = 1.0 / (sigma * sigma);
    let logpost: Vec<f64> = (0..total)
        .map(|i| {
            let th = point(i);
            let hist = inv_s2 * (lin.dot(&th) - 0.5 * th.dot(&(&gram * &th)));
            prior.log_density_unnorm(&th) + inner[i].max(0.0).ln() + hist
        })
        .collect();
    let lmax = logpost.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lmax.is_finite() {
        return Err(Error::Numerical("quadrature posterior vanished on the lattice".into()));
    }
    let mut mass: Vec<f64> = logpost.iter().map(|&l| (l - lmax).exp()).collect();
    let z: f64 = mass.iter().sum();
    mass.iter_mut().for_each(|m| *m /= z);

    let mut optimality = vec![0.0; actions.nrows()];
    for (i, &w) in mass.iter().enumerate() {
        if w > 0.0 {
            optimality[argmax((actions * point(i)).iter().copied())] += w;
        }
    }
    Ok(GridPosterior { axes, mass, optimality, pitch })
}
