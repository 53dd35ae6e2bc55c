use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
[experiment]
domain = "lightdark"
episodes = 3
seed = 5
particles = 30

[planner]
queries = 30
particles = 30
max_depth = 20
exploration = 10.0
dual_step = 5.0

[[arms]]
name = "cobets"
catalog = "base4"
rollout = "base4"

[[arms]]
name = "scripted"
catalog = "base4"
selector = "scripted:GoToGoal"

[anytime]
queries = [5, 20]
episodes = 2

[[anytime.arms]]
name = "feasible"
catalog = "feasible3"

[branching]
sizes = [4, 8]
episodes = 2
"#;

fn cobets(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cobets"))
        .current_dir(dir)
        .env_remove("COBETS_OUT")
        .args(args)
        .output()
        .expect("binary runs")
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    dir
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
        .lines()
        .map(String::from)
        .collect()
}

#[test]
fn run_writes_episode_and_summary_tables() {
    let dir = setup();
    let out = cobets(
        dir.path(),
        &["run", "--config", "tiny.toml", "--out", "res"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let res = dir.path().join("res");
    let ep = lines(&res.join("episodes_cobets.csv"));
    assert_eq!(
        ep[0],
        "episode,seed,V_R,V_C_1,steps,epochs,violations,wall_ms"
    );
    assert_eq!(ep.len(), 4);
    let seeds: Vec<&str> = ep[1..]
        .iter()
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(seeds, ["5", "4", "7"]);
    let summary = lines(&res.join("summary.csv"));
    assert!(summary[0]
        .starts_with("domain,arm,episodes,mean_V_R,se_V_R,mean_V_C_1,se_V_C_1,violation_rate"));
    assert_eq!(summary.len(), 3);
    assert!(summary[1].starts_with("lightdark,cobets,3,"));
    assert!(summary[2].starts_with("lightdark,scripted,3,"));
    assert!(res.join("config.toml").exists());
    assert!(String::from_utf8_lossy(&out.stdout).contains("cobets: V_R"));
}

#[test]
fn flags_and_overrides_take_effect() {
    let dir = setup();
    let out = cobets(
        dir.path(),
        &[
            "run",
            "--config",
            "tiny.toml",
            "--seed",
            "100",
            "--episodes",
            "2",
            "--workers",
            "2",
            "--set",
            "experiment.keep_logs=true",
            "--set",
            "arms.0.name=renamed",
            "--out",
            "res",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let res = dir.path().join("res");
    let ep = lines(&res.join("episodes_renamed.csv"));
    assert_eq!(ep.len(), 3);
    assert!(ep[1].starts_with("0,100,") && ep[2].starts_with("1,101,"));
    let log = lines(&res.join("log_renamed.jsonl"));
    assert!(!log.is_empty());
    for line in &log {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["arm"], "renamed");
        assert!(v["episode"].is_u64());
        assert!(v["kind"].is_string());
    }
    let resolved = fs::read_to_string(res.join("config.toml")).unwrap();
    assert!(resolved.contains("seed = 100"));
    assert!(resolved.contains("workers = 2"));
}

#[test]
fn output_directory_defaults_to_environment() {
    let dir = setup();
    let out = Command::new(env!("CARGO_BIN_EXE_cobets"))
        .current_dir(dir.path())
        .env("COBETS_OUT", "from-env")
        .args(["run", "--config", "tiny.toml", "--episodes", "1"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("from-env/summary.csv").exists());

    let out = cobets(
        dir.path(),
        &["run", "--config", "tiny.toml", "--episodes", "1"],
    );
    assert!(out.status.success());
    assert!(dir.path().join("results/summary.csv").exists());
}

#[test]
fn sweeps_write_long_tables() {
    let dir = setup();
    let out = cobets(
        dir.path(),
        &["anytime", "--config", "tiny.toml", "--out", "any"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let t = lines(&dir.path().join("any/anytime.csv"));
    assert!(t[0].starts_with("queries,arm,episodes,mean_V_R"));
    assert_eq!(t.len(), 3);
    assert!(t[1].starts_with("5,feasible,2,") && t[2].starts_with("20,feasible,2,"));

    let out = cobets(
        dir.path(),
        &["branching", "--config", "tiny.toml", "--out", "br"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let t = lines(&dir.path().join("br/branching.csv"));
    assert!(t[0].starts_with("strategy,size,arm,episodes"));
    assert!(t[1].starts_with("uncertainty,4,uncertainty:4,2,"));
    assert!(t[2].starts_with("uncertainty,8,uncertainty:8,2,"));
}

#[test]
fn report_merges_runs_and_rejects_mixed_domains() {
    let dir = setup();
    for (seed, name) in [("1", "a"), ("2", "b")] {
        let out = cobets(
            dir.path(),
            &[
                "run",
                "--config",
                "tiny.toml",
                "--episodes",
                "2",
                "--seed",
                seed,
                "--out",
                name,
            ],
        );
        assert!(out.status.success());
    }
    let out = cobets(
        dir.path(),
        &["report", "a", "b/summary.csv", "--out", "rep"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("domain: lightdark") && table.contains(" ± "));
    let rows = lines(&dir.path().join("rep/report.csv"));
    assert_eq!(rows.len(), 5);
    assert!(rows[0].starts_with("source,domain,arm,episodes,mean_V_R,se_V_R,mean_V_C_1,se_V_C_1"));

    let out = cobets(
        dir.path(),
        &[
            "run",
            "--config",
            "tiny.toml",
            "--episodes",
            "1",
            "--set",
            "experiment.domain=minichain",
            "--set",
            "arms=[{name = \"g\", catalog = \"gated\"}]",
            "--set",
            "planner.max_depth=6",
            "--out",
            "mc",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = cobets(dir.path(), &["report", "a", "mc", "--out", "rep2"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("domains"));
}

#[test]
fn errors_exit_nonzero() {
    let dir = setup();
    let cases: [&[&str]; 7] = [
        &["run", "--config", "missing.toml"],
        &[
            "run",
            "--config",
            "tiny.toml",
            "--set",
            "planner.nonsense=1",
        ],
        &["run", "--config", "tiny.toml", "--set", "no_equals_sign"],
        &["run", "--config", "tiny.toml", "--workers", "0"],
        &[
            "run",
            "--config",
            "tiny.toml",
            "--set",
            "arms.0.catalog=bogus",
        ],
        &["report", "nowhere"],
        &["frobnicate"],
    ];
    for args in cases {
        let out = cobets(dir.path(), args);
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(!out.stderr.is_empty(), "{args:?} should explain");
    }
}
