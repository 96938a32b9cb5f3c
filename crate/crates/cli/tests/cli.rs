use std::path::PathBuf;
use std::process::{Command, Output};

fn prefwarm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prefwarm")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("prefwarm-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

const SMALL: &[&str] = &["--seeds", "2", "--set", "T=25", "--set", "K=8", "--set", "particles=256"];

#[test]
fn bandit_run_writes_csv_summary_and_metadata() {
    let out = scratch("run.csv");
    let mut args = vec!["bandit", "--out", out.to_str().unwrap()];
    args.extend_from_slice(SMALL);
    let res = prefwarm(&args);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("seed,t,algo,action,reward,inst_regret,cum_regret\n"));
    // 2 seeds x 5 default algorithms x 25 rounds
    assert_eq!(csv.lines().count(), 1 + 2 * 5 * 25);
    let summary = std::fs::read_to_string(scratch("run.csv.summary.csv")).unwrap();
    assert!(summary.lines().count() > 1);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(scratch("run.csv.json")).unwrap()).unwrap();
    assert!(meta.get("wall_time_secs").is_some());
    assert!(String::from_utf8_lossy(&res.stderr).contains("final mean"));
}

#[test]
fn same_seed_gives_identical_stdout() {
    let mut args = vec!["bandit"];
    args.extend_from_slice(SMALL);
    let a = prefwarm(&args);
    let b = prefwarm(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    args.extend_from_slice(&["--set", "master_seed=99"]);
    assert_ne!(prefwarm(&args).stdout, a.stdout);
}

#[test]
fn config_errors_exit_with_two() {
    for bad in [
        vec!["bandit", "--set", "no_such_key=1"],
        vec!["bandit", "--set", "algorithms=vanilla-ps,nonsense"],
        vec!["bandit", "--set", "K=1"],
        vec!["pspl", "--set", "delta=1.5"],
    ] {
        let res = prefwarm(&bad);
        assert_eq!(res.status.code(), Some(2), "{bad:?}: {}", String::from_utf8_lossy(&res.stderr));
    }
}

#[test]
fn config_file_and_overrides_combine() {
    let cfg = scratch("small.cfg");
    std::fs::write(&cfg, "# tiny\nK = 6\nT = 10\nalgorithms = vanilla-ps, lints\n").unwrap();
    let res = prefwarm(&["bandit", "--config", cfg.to_str().unwrap(), "--seeds", "1", "--set", "T=12"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1 + 2 * 12);
    assert!(stdout.lines().skip(1).all(|l| l.contains(",vanilla-ps,") || l.contains(",lints,")));
}

#[test]
fn pspl_and_theory_modes_run() {
    let res = prefwarm(&["pspl", "--seeds", "1", "--set", "S=3", "--set", "H=4", "--set", "episodes=5", "--set", "N=20"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(String::from_utf8(res.stdout).unwrap().lines().count(), 1 + 2 * 5);

    let res = prefwarm(&["theory"]);
    assert!(res.status.success());
    let text = String::from_utf8(res.stdout).unwrap();
    assert!(text.starts_with("name,value\n"));
    assert!(text.contains("f1,"));
}

#[test]
fn oracle_checks_pass() {
    let res = prefwarm(&["oracle-check"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stdout));
    assert!(!String::from_utf8_lossy(&res.stdout).contains("FAIL"));
}
