use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn swapbal(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swapbal"))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .env_remove("SWAPBAL_WORKERS")
        .env_remove("SWAPBAL_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = swapbal(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails_with(dir: &Path, args: &[&str], code: i32) -> String {
    let out = swapbal(dir, args);
    assert_eq!(out.status.code(), Some(code), "{args:?}");
    String::from_utf8(out.stderr).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn generate_is_reproducible_and_echoes_config() {
    let t = TempDir::new().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    ok(&a, &["--seed", "3", "generate", "--count", "12"]);
    ok(&b, &["--seed", "3", "generate", "--count", "12"]);
    let data = read(&a, "dataset.jsonl");
    assert_eq!(data.lines().count(), 12);
    assert_eq!(data, read(&b, "dataset.jsonl"));
    let echo = read(&a, "generate-config.toml");
    assert!(echo.contains("seed = 3"));
    assert!(echo.contains("count = 12"));
}

#[test]
fn worker_count_does_not_change_results() {
    let t = TempDir::new().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    ok(&a, &["--workers", "1", "generate", "--count", "16"]);
    ok(&b, &["--workers", "3", "generate", "--count", "16"]);
    assert_eq!(read(&a, "dataset.jsonl"), read(&b, "dataset.jsonl"));
    let data = a.join("dataset.jsonl");
    let data = data.to_str().unwrap();
    ok(&a, &["--workers", "1", "evaluate", "--policy", "random", "--dataset", data]);
    ok(&b, &["--workers", "3", "evaluate", "--policy", "random", "--dataset", data]);
    assert_eq!(read(&a, "eval-report.json"), read(&b, "eval-report.json"));
}

#[test]
fn config_errors_exit_with_2() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    let err = fails_with(d, &["generate", "--count", "0"], 2);
    assert!(err.contains("dataset.count"));
    let err = fails_with(d, &["train", "--repr", "swap-diagonal"], 2);
    for name in ["swap-narrow", "swap-turtle", "swap-wide"] {
        assert!(err.contains(name), "{err}");
    }
    fails_with(d, &["calibrate", "--n-max", "7"], 2);
    fails_with(d, &["--set", "env.no_such_key=1", "generate"], 2);
    fails_with(d, &["--set", "dataset.count=1", "generate", "--frobnicate"], 2);

    let cfg = d.join("bad.toml");
    fs::write(&cfg, "[env]\nn_sims = 3\n").unwrap();
    let err = fails_with(d, &["--config", cfg.to_str().unwrap(), "generate"], 2);
    assert!(err.contains("n_sims"));
}

#[test]
fn config_file_and_overrides_compose() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    let cfg = d.join("run.toml");
    fs::write(&cfg, "seed = 9\n[dataset]\ncount = 5\n[env]\nmax_steps = 30\n").unwrap();
    ok(
        d,
        &["--config", cfg.to_str().unwrap(), "--set", "env.max_changes=4", "generate"],
    );
    assert_eq!(read(d, "dataset.jsonl").lines().count(), 5);
    let echo = read(d, "generate-config.toml");
    assert!(echo.contains("seed = 9"));
    assert!(echo.contains("max_steps = 30"));
    assert!(echo.contains("max_changes = 4"));
}

#[test]
fn calibrate_with_loose_threshold_picks_four() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    let out = ok(d, &["calibrate", "--levels", "6", "--n-max", "8", "--threshold", "1.0"]);
    assert!(out.contains("chosen n = 4"), "{out}");
    let csv = read(d, "calibration.csv");
    assert_eq!(csv.lines().next().unwrap(), "n,mu,sigma,mu_plus_sigma");
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn never_swap_improves_nothing_and_random_matches_itself() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    ok(d, &["--seed", "1", "generate", "--count", "30"]);
    let data = d.join("dataset.jsonl");
    let data = data.to_str().unwrap();

    ok(d, &["evaluate", "--policy", "never", "--dataset", data]);
    let report: serde_json::Value = serde_json::from_str(&read(d, "eval-report.json")).unwrap();
    assert_eq!(report["improved_pct"], 0.0);
    assert_eq!(report["balanced_pct"], 0.0);
    assert_eq!(report["avg_changes"], 0.0);

    ok(d, &["analyze", "--policy", "random", "--dataset", data]);
    let rows: Vec<serde_json::Value> = serde_json::from_str(&read(d, "swap-frequency.json")).unwrap();
    assert_eq!(rows.len(), 10);
    for r in rows {
        assert_eq!(r["model_count"], r["baseline_count"]);
        assert!(r["relative_difference"].is_null() || r["relative_difference"] == 0.0);
    }
}

#[test]
fn train_balance_and_render() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    ok(d, &["generate", "--count", "20"]);
    let data = d.join("dataset.jsonl");
    let data = data.to_str().unwrap();
    let train = ["--seed", "5", "train", "--dataset", data, "--steps", "512"];
    ok(d, &train);
    let first = read(d, "checkpoint.json");
    ok(d, &train);
    assert_eq!(first, read(d, "checkpoint.json"));
    assert_eq!(read(d, "checkpoint-curve.csv").lines().count(), 3);

    let ck = d.join("checkpoint.json");
    let ck = ck.to_str().unwrap();

    // walled-off spawns are rejected before any policy runs
    let twin = d.join("twin.txt");
    fs::write(&twin, "GPSSPG\nGGSSGG\nSSSSSS\nSSSSSS\nSSSSSS\nSSSSSS\n").unwrap();
    let err = fails_with(d, &["balance", "--checkpoint", ck, "--level", twin.to_str().unwrap()], 2);
    assert!(err.contains("no passable path"), "{err}");

    let sym = d.join("sym.txt");
    fs::write(&sym, "GPGGPG\nGGGGGG\nSSSSSS\nSSSSSS\nSSSSSS\nSSSSSS\n").unwrap();
    let out = ok(d, &["balance", "--checkpoint", ck, "--level", sym.to_str().unwrap()]);
    assert!(out.contains("already balanced") || out.contains("swaps in"), "{out}");

    let small = d.join("small.txt");
    fs::write(&small, "GP\nPG\n").unwrap();
    let err = fails_with(d, &["balance", "--checkpoint", ck, "--level", small.to_str().unwrap()], 2);
    assert!(err.contains("trained on 6x6"), "{err}");

    let out = ok(d, &["render", "--level", sym.to_str().unwrap(), "--highlight", "0,1"]);
    assert_eq!(out.lines().next().unwrap(), " G [P] G  G  P  G ");
    fails_with(d, &["render", "--level", sym.to_str().unwrap(), "--highlight", "9,9"], 2);
}

#[test]
fn simulate_writes_outcome() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    let level = d.join("l.txt");
    fs::write(&level, "GPGFGW\nGGGGGG\nGFGGGG\nGGGGPG\nFGGGGG\nGGWGGG\n").unwrap();
    let out = ok(d, &["simulate", "--level", level.to_str().unwrap(), "--trace"]);
    assert!(out.lines().next().unwrap().starts_with("tick=1 "));
    assert!(out.contains("winners: "));
    let m: serde_json::Value = serde_json::from_str(&read(d, "match.json")).unwrap();
    assert!(m["ticks"].as_u64().unwrap() >= 1);
}
