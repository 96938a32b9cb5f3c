//! Experiment orchestration: configuration, paired-seed runs, baselines,
//! regret records and the self-check suite behind `oracle-check`.

mod config;
mod dpo;
mod oracle_check;
mod records;
mod runner;

pub use config::{DpoMinReward, ExperimentConfig, MdpKind, Mode, BANDIT_ALGOS, PSPL_ALGOS};
pub use dpo::{dpo_rewards, fit_dpo_logits, hybrid_dpo_baseline, DpoFit, DpoParams};
pub use oracle_check::{brute_force_best_value, run_oracle_checks, OracleCheck};
pub use records::{final_regrets, records_from_steps, summarize, summary_csv, to_csv, RunRecord, SummaryRow, CSV_HEADER, SUMMARY_HEADER};
pub use runner::{
    bandit_instance, pspl_instance, run_bandit_algo, run_experiment, run_pspl_algo, theory_report, BanditInstance, NumericFlags,
    PsplInstance, RunOutput,
};

use serde::{Deserialize, Serialize};

/// Contents of the JSON file written next to each CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config: Vec<(String, String)>,
    pub wall_time_secs: f64,
    pub crate_version: String,
    pub parallel_feature: bool,
    pub flags: NumericFlags,
}

impl RunMetadata {
    pub fn new(cfg: &ExperimentConfig, wall_time_secs: f64, flags: NumericFlags) -> Self {
        Self {
            config: cfg.echo(),
            wall_time_secs,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            parallel_feature: cfg!(feature = "parallel"),
            flags,
        }
    }
}
