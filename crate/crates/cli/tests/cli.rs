use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cobsim::presets::NAMES;

const SHORT: [&str; 4] = ["--set", "horizon=40000 events", "--set", "warmup=5000 events"];

fn cobsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cobsim")).args(args).output().expect("spawn cobsim")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn simulate(preset: &str, seed: &str, out: &Path) {
    let mut args = vec!["simulate", "--preset", preset, "--seed", seed, "--out", out.to_str().unwrap()];
    args.extend(SHORT);
    let o = cobsim(&args);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn simulate_writes_five_files_with_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    simulate("balanced", "11", &out);
    for f in ["events.ndjson", "trades.csv", "series.csv", "profiles.csv", "manifest.cfg"] {
        let text = fs::read_to_string(out.join(f)).unwrap();
        let first = text.lines().next().unwrap();
        assert!(first.contains("seed=11") && first.contains("preset=balanced"), "{f}: {first}");
    }
}

#[test]
fn same_seed_gives_identical_event_logs() {
    let dir = tempfile::tempdir().unwrap();
    simulate("high_market", "5", &dir.path().join("a"));
    simulate("high_market", "5", &dir.path().join("b"));
    let a = fs::read(dir.path().join("a/events.ndjson")).unwrap();
    let b = fs::read(dir.path().join("b/events.ndjson")).unwrap();
    assert!(a == b);
    simulate("high_market", "6", &dir.path().join("c"));
    assert!(fs::read(dir.path().join("c/events.ndjson")).unwrap() != a);
}

#[test]
fn missing_config_exits_2() {
    let o = cobsim(&["simulate", "--config", "definitely-missing.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("definitely-missing.cfg"));
}

#[test]
fn unknown_config_key_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "name = mine\nseed = 4\nrates.market_sideways = 3\n").unwrap();
    let o = cobsim(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 3") && err.contains("market_sideways"), "{err}");
}

#[test]
fn bad_override_and_usage_errors_exit_2() {
    let o = cobsim(&["simulate", "--preset", "balanced", "--set", "rates.limit_ask=-1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = cobsim(&["simulate", "--preset", "nonesuch"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("balanced"));
    let o = cobsim(&["simulate", "--preset", "balanced", "--seeds", "5..2"]);
    assert_eq!(o.status.code(), Some(2));
    let o = cobsim(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_round_trips_through_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    simulate("small_market", "2", &out);
    // the manifest is itself a valid configuration
    let again = dir.path().join("again");
    let o =
        cobsim(&["simulate", "--config", out.join("manifest.cfg").to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(fs::read(out.join("events.ndjson")).unwrap() == fs::read(again.join("events.ndjson")).unwrap());
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let out = blocker.join("run");
    let mut args = vec!["simulate", "--preset", "balanced", "--out", out.to_str().unwrap()];
    args.extend(SHORT);
    let o = cobsim(&args);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn analyze_rejects_truncated_log_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    simulate("balanced", "1", &out);
    let path = out.join("events.ndjson");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().take(20).collect();
    let cut = &lines[19][..lines[19].len() / 2];
    lines[19] = cut;
    fs::write(&path, lines.join("\n")).unwrap();
    let o = cobsim(&["analyze", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("events.ndjson: line 20:"), "{err}");
}

#[test]
fn analyze_missing_directory_exits_2() {
    let o = cobsim(&["analyze", "no/such/run"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn presets_lists_every_name() {
    let o = cobsim(&["presets"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let listed: Vec<&str> = text.lines().map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(listed, NAMES);
}

#[test]
fn version_flag() {
    let o = cobsim(&["--version"]);
    assert!(o.status.success());
    assert!(String::from_utf8(o.stdout).unwrap().contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn analyze_single_runs() {
    let dir = tempfile::tempdir().unwrap();
    for preset in ["no_market", "high_market"] {
        let out = dir.path().join(preset);
        simulate(preset, "9", &out);
        let tables = dir.path().join(format!("{preset}-tables"));
        let o = cobsim(&["analyze", out.to_str().unwrap(), "--out", tables.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        for f in [
            "profile_average.csv",
            "spread_response.csv",
            "drift.csv",
            "power_law_fit.csv",
            "inter_arrival.csv",
            "summary.txt",
        ] {
            let text = fs::read_to_string(tables.join(f)).unwrap();
            assert!(text.starts_with("# cobsim "), "{f}");
            assert!(text.contains(&format!("preset={preset}")), "{f}");
        }
        let summary = fs::read_to_string(tables.join("summary.txt")).unwrap();
        if preset == "no_market" {
            // no trades: the spread fit is refused, not faked
            assert!(summary.contains("unavailable"), "{summary}");
            assert!(summary.contains("market  no events"), "{summary}");
        } else {
            assert!(summary.contains("beta"), "{summary}");
        }
    }
}

#[test]
fn seed_batch_and_pooled_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("batch");
    let mut args =
        vec!["simulate", "--preset", "book_disbalance_up", "--seeds", "3..5", "--out", out.to_str().unwrap()];
    args.extend(SHORT);
    let o = cobsim(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    for s in 3..=5 {
        assert!(out.join(format!("seed-{s}/manifest.cfg")).is_file());
    }
    let o = cobsim(&["analyze", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let drift = fs::read_to_string(out.join("drift.csv")).unwrap();
    assert!(drift.lines().next().unwrap().contains("seed=3..5"));
    let seeds: Vec<&str> = drift.lines().skip(2).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(seeds, ["3", "4", "5"]);
    assert!(fs::read_to_string(out.join("summary.txt")).unwrap().contains("over 3 run(s)"));

    // a batch member matches the same seed run alone
    let single = dir.path().join("single");
    simulate("book_disbalance_up", "4", &single);
    assert!(fs::read(single.join("events.ndjson")).unwrap() == fs::read(out.join("seed-4/events.ndjson")).unwrap());
}

#[test]
fn diagnostics_reports_balance() {
    let o = cobsim(&["diagnostics", "--preset", "balanced"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("provisional") && text.contains("V_in"), "{text}");

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    simulate("balanced", "8", &out);
    let o = cobsim(&["diagnostics", "--preset", "balanced", "--from-run", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8(o.stdout).unwrap().contains("cancellations in"));
}
