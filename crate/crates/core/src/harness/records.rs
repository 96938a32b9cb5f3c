use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::numeric::mean_std;

pub const CSV_HEADER: &str = "seed,t,algo,action,reward,inst_regret,cum_regret";

/// One step of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub t: usize,
    pub algo: String,
    pub action: usize,
    pub reward: f64,
    pub inst_regret: f64,
    pub cum_regret: f64,
}

/// Builds records from per-step `(action, reward, inst_regret)` with the
/// cumulative column as a running sum.
pub fn records_from_steps(seed: u64, algo: &str, steps: &[(usize, f64, f64)]) -> Vec<RunRecord> {
    let mut cum = 0.0;
    steps
        .iter()
        .enumerate()
        .map(|(i, &(action, reward, inst))| {
            cum += inst;
            RunRecord { seed, t: i + 1, algo: algo.to_string(), action, reward, inst_regret: inst, cum_regret: cum }
        })
        .collect()
}

/// CSV text with the fixed header; floats use the shortest round-trip form.
pub fn to_csv(records: &[RunRecord]) -> String {
    let mut s = String::with_capacity(64 * (records.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(s, "{},{},{},{},{},{},{}", r.seed, r.t, r.algo, r.action, r.reward, r.inst_regret, r.cum_regret);
    }
    s
}

/// Mean and spread of cumulative regret across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algo: String,
    pub t: usize,
    pub n_seeds: usize,
    pub mean_cum_regret: f64,
    pub std_cum_regret: f64,
    /// `1 − mean(algo)/mean(vanilla-ps)` on the final step only.
    pub reduction_vs_vanilla: Option<f64>,
}

pub const SUMMARY_HEADER: &str = "algo,t,n_seeds,mean_cum_regret,std_cum_regret,reduction_vs_vanilla";

/// Per `(algorithm, t)` statistics, algorithms in first-seen order.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for r in records {
        let ai = match order.iter().position(|a| *a == r.algo) {
            Some(i) => i,
            None => {
                order.push(&r.algo);
                order.len() - 1
            }
        };
        groups.entry((ai, r.t)).or_default().push(r.cum_regret);
    }
    let mut rows: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((ai, t), v)| {
            let (mean, std) = mean_std(&v);
            SummaryRow {
                algo: order[ai].to_string(),
                t,
                n_seeds: v.len(),
                mean_cum_regret: mean,
                std_cum_regret: std,
                reduction_vs_vanilla: None,
            }
        })
        .collect();
    let final_mean = |algo: &str, rows: &[SummaryRow]| {
        rows.iter().filter(|r| r.algo == algo).max_by_key(|r| r.t).map(|r| (r.t, r.mean_cum_regret))
    };
    if let Some((_, vanilla)) = final_mean("vanilla-ps", &rows) {
        for algo in &order {
            if let Some((t_last, mean)) = final_mean(algo, &rows) {
                if let Some(row) = rows.iter_mut().find(|r| r.algo == *algo && r.t == t_last) {
                    row.reduction_vs_vanilla = Some(1.0 - mean / vanilla);
                }
            }
        }
    }
    rows
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::new();
    s.push_str(SUMMARY_HEADER);
    s.push('\n');
    for r in rows {
        let red = r.reduction_vs_vanilla.map_or(String::new(), |x| x.to_string());
        let _ = writeln!(s, "{},{},{},{},{},{}", r.algo, r.t, r.n_seeds, r.mean_cum_regret, r.std_cum_regret, red);
    }
    s
}

/// Final cumulative regret of `algo` for every seed, ordered by seed.
pub fn final_regrets(records: &[RunRecord], algo: &str) -> Vec<f64> {
    let mut last: BTreeMap<u64, (usize, f64)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.algo == algo) {
        let e = last.entry(r.seed).or_insert((0, 0.0));
        if r.t >= e.0 {
            *e = (r.t, r.cum_regret);
        }
    }
    last.into_values().map(|(_, c)| c).collect()
}
