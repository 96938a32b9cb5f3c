use nalgebra::{DMatrix, DVector};

use crate::model::OfflinePrefDataset;
use crate::numeric::{entropy_of_counts, logistic, softplus};
use crate::optim::{minimize, Objective, OptimizerSpec};
use crate::{Error, Result};

const RIDGE: f64 = 1e-6;

/// Logistic NLL of `v = βϑ` plus a small ridge.
struct BetaNll {
    /// Rows `a_L − a_W`.
    diffs: DMatrix<f64>,
}

impl Objective for BetaNll {
    fn dim(&self) -> usize {
        self.diffs.ncols()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        (&self.diffs * x).iter().map(|&z| softplus(z)).sum::<f64>() + RIDGE * x.norm_squared()
    }

    fn value_grad(&self, x: &DVector<f64>, g: &mut DVector<f64>) -> f64 {
        let z = &self.diffs * x;
        *g = self.diffs.tr_mul(&z.map(logistic)) + x * (2.0 * RIDGE);
        z.iter().map(|&z| softplus(z)).sum::<f64>() + RIDGE * x.norm_squared()
    }

    fn hessian(&self, x: &DVector<f64>, h: &mut DMatrix<f64>) {
        let z = &self.diffs * x;
        let w = z.map(|z| {
            let s = logistic(z);
            s * (1.0 - s)
        });
        let weighted = DMatrix::from_fn(self.diffs.nrows(), self.diffs.ncols(), |n, j| self.diffs[(n, j)] * w[n]);
        *h = self.diffs.tr_mul(&weighted);
        for i in 0..h.nrows() {
            h[(i, i)] += 2.0 * RIDGE;
        }
    }
}

/// `β̂ = ‖v̂‖` where `v̂` maximises the ridge-regularised preference
/// likelihood. Only `βϑ` is identifiable, so this assumes `‖ϑ‖ = 1`.
pub fn estimate_beta_mle(d0: &OfflinePrefDataset, actions: &DMatrix<f64>) -> Result<f64> {
    if d0.is_empty() {
        return Err(Error::InsufficientData("MLE of beta needs at least one comparison".into()));
    }
    let mut diffs = DMatrix::zeros(d0.len(), actions.ncols());
    for (n, e) in d0.entries.iter().enumerate() {
        diffs.set_row(n, &(actions.row(e.loser()) - actions.row(e.winner())));
    }
    let obj = BetaNll { diffs };
    let out = minimize(&obj, DVector::zeros(actions.ncols()), &OptimizerSpec::default());
    if !out.converged {
        return Err(Error::Numerical("beta MLE did not converge".into()));
    }
    Ok(out.x.norm())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyEstimate {
    pub beta: f64,
    /// The arm distribution had zero entropy and `beta_max` was returned.
    pub capped: bool,
}

/// `β̂ = c / H` with `H` the entropy (nats) of arm occurrences in `D0`.
pub fn estimate_beta_entropy(d0: &OfflinePrefDataset, k: usize, c: f64, beta_max: f64) -> Result<EntropyEstimate> {
    if d0.is_empty() {
        return Err(Error::InsufficientData("entropy estimate needs a nonempty dataset".into()));
    }
    if c == 0.0 {
        return Ok(EntropyEstimate { beta: 0.0, capped: false });
    }
    let h = entropy_of_counts(&d0.arm_counts(k));
    if h <= 0.0 {
        return Ok(EntropyEstimate { beta: beta_max, capped: true });
    }
    Ok(EntropyEstimate { beta: c / h, capped: false })
}
