use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use prefwarm::harness::{
    run_experiment, run_oracle_checks, summarize, summary_csv, theory_report, to_csv, ExperimentConfig, Mode, RunMetadata,
};
use prefwarm::Error;

#[derive(Parser)]
#[command(name = "prefwarm", version, about = "Preference-warm-started posterior sampling experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Linear-bandit regret experiment.
    Bandit(RunArgs),
    /// Tabular PSPL experiment on RiverSwim or random MDPs.
    Pspl(RunArgs),
    /// Closed-form constants for the configured parameters.
    Theory(RunArgs),
    /// Quadrature, enumeration and finite-difference self-checks.
    OracleCheck,
}

#[derive(Args)]
struct RunArgs {
    /// Flat key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of seeds.
    #[arg(long)]
    seeds: Option<usize>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override one config key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

enum Failure {
    Config(String),
    Numerical(String),
    Other(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Domain(_) | Error::UnsupportedDimension(_) => Failure::Config(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn load_config(args: &RunArgs, mode: Mode) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ExperimentConfig::parse(&text, mode)?
        }
        None => ExperimentConfig::for_mode(mode),
    };
    cfg.mode = mode;
    for kv in &args.overrides {
        cfg.apply_override(kv)?;
    }
    if let Some(s) = args.seeds {
        cfg.seeds = s;
    }
    if let Some(o) = &args.out {
        cfg.output = Some(o.display().to_string());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_or_print(path: Option<&str>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {p}")),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(args: &RunArgs, mode: Mode) -> Result<(), Failure> {
    let cfg = load_config(args, mode)?;
    if mode == Mode::Theory {
        let mut text = String::from("name,value\n");
        for (k, v) in theory_report(&cfg)? {
            text.push_str(&format!("{k},{v}\n"));
        }
        write_or_print(cfg.output.as_deref(), &text)?;
        return Ok(());
    }
    let start = Instant::now();
    let out = run_experiment(&cfg)?;
    let wall = start.elapsed().as_secs_f64();
    write_or_print(cfg.output.as_deref(), &to_csv(&out.records))?;
    let summary = summary_csv(&summarize(&out.records));
    if let Some(p) = &cfg.output {
        let p = Path::new(p);
        std::fs::write(with_suffix(p, ".summary.csv"), &summary).context("writing summary")?;
        let meta = serde_json::to_string_pretty(&RunMetadata::new(&cfg, wall, out.flags)).context("serialising metadata")?;
        std::fs::write(with_suffix(p, ".json"), meta).context("writing metadata")?;
    }
    let t_last = out.records.iter().map(|r| r.t).max().unwrap_or(0);
    for row in summarize(&out.records).iter().filter(|r| r.t == t_last) {
        eprintln!(
            "{:<15} final mean {:>10.4}  sd {:>9.4}{}",
            row.algo,
            row.mean_cum_regret,
            row.std_cum_regret,
            row.reduction_vs_vanilla.map_or(String::new(), |r| format!("  reduction vs vanilla-ps {:.3}", r))
        );
    }
    eprintln!("wall time {wall:.2}s");
    if !out.flags.is_clean() {
        return Err(Failure::Numerical(format!(
            "{} unconverged solves, {} tempered priors",
            out.flags.nonconverged_solves, out.flags.tempered_priors
        )));
    }
    Ok(())
}

fn oracle_check() -> Result<(), Failure> {
    let checks = run_oracle_checks();
    let mut failed = 0;
    for c in &checks {
        println!("{} {:<24} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        return Err(Failure::Numerical(format!("{failed} oracle checks failed")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Bandit(a) => run(a, Mode::Bandit),
        Cmd::Pspl(a) => run(a, Mode::Pspl),
        Cmd::Theory(a) => run(a, Mode::Theory),
        Cmd::OracleCheck => oracle_check(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("{m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
