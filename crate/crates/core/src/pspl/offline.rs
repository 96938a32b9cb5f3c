use super::mdp::PolicyTable;
use super::prefs::TrajPrefDataset;
use crate::error::domain;
use crate::numeric::argmax;
use crate::Result;

/// `π̂*` together with the net counts it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflinePolicyEstimate {
    pub policy: PolicyTable,
    /// `c_h(s, a) = w_h(s, a) − l_h(s, a)` at `[(h·S + s)·A + a]`.
    pub net_counts: Vec<f64>,
    /// Whether `(h, s)` met the `δN` threshold.
    pub decided: Vec<bool>,
}

/// Builds `π̂*` from winning and losing counts.
///
/// A step-state pair is decided when `Σ_a c_h(s, a) ≥ δN` and some action has
/// positive net count; it then plays the highest-count winning action (ties to
/// the lowest index). Otherwise it plays uniformly over the undecided actions
/// `{a : c_h(s, a) ≤ 0}`.
pub fn estimate_optimal_policy_offline(d0: &TrajPrefDataset, s: usize, a: usize, h: usize, delta: f64) -> Result<OfflinePolicyEstimate> {
    if !(delta > 0.0 && delta < 1.0) {
        return domain("delta must lie in (0, 1)");
    }
    let mut c = vec![0.0; h * s * a];
    for e in &d0.entries {
        for (step, &(st, act)) in e.winner().steps.iter().enumerate() {
            c[(step * s + st) * a + act] += 1.0;
        }
        for (step, &(st, act)) in e.loser().steps.iter().enumerate() {
            c[(step * s + st) * a + act] -= 1.0;
        }
    }
    let threshold = delta * d0.len() as f64;
    let mut policy = PolicyTable::uniform(h, s, a);
    let mut decided = vec![false; h * s];
    for step in 0..h {
        for st in 0..s {
            let row = &c[(step * s + st) * a..(step * s + st + 1) * a];
            let total: f64 = row.iter().sum();
            let probs = policy.row_mut(step, st);
            if total >= threshold && row.iter().any(|&x| x > 0.0) {
                let best = argmax(row.iter().map(|&x| if x > 0.0 { x } else { f64::NEG_INFINITY }));
                probs.fill(0.0);
                probs[best] = 1.0;
                decided[step * s + st] = true;
            } else {
                let undecided: Vec<usize> = (0..a).filter(|&i| row[i] <= 0.0).collect();
                if !undecided.is_empty() {
                    probs.fill(0.0);
                    let p = 1.0 / undecided.len() as f64;
                    undecided.iter().for_each(|&i| probs[i] = p);
                }
            }
        }
    }
    Ok(OfflinePolicyEstimate { policy, net_counts: c, decided })
}
