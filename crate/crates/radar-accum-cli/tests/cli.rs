//! End-to-end checks of the installed binary: exit codes, the pipeline of
//! commands feeding each other, manifest replay, and thread-count invariance.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_radar-accum"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn radar-accum")
}

fn assert_status(out: &Output, want: i32, what: &str) {
    let got = out.status.code().expect("exit code");
    assert_eq!(
        got,
        want,
        "{what}: expected exit {want}, got {got}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Simulates a short builtin scene into `dir`.
fn simulate(dir: &Path, scenario: &str, duration: &str) {
    let out = run(&[
        "simulate",
        "--scenario",
        scenario,
        "--duration",
        duration,
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_status(&out, 0, "simulate");
}

/// All regular files under `root`, keyed by relative path.
fn tree_bytes(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).expect("read_dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).expect("read file"));
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

#[test]
fn usage_errors_exit_2() {
    let out = run(&["simulate", "--scenario", "straight-15kmh"]);
    assert_status(&out, 2, "simulate without --out");

    let out = run(&["estimate-ego", "--seq", "x", "--method", "warp", "--out", "y.csv"]);
    assert_status(&out, 2, "estimate-ego with unknown method value");

    let out = run(&["no-such-command"]);
    assert_status(&out, 2, "unknown subcommand");

    let out = run(&[]);
    assert_status(&out, 2, "no subcommand");
}

#[test]
fn runtime_failures_exit_1() {
    let tmp = TempDir::new().unwrap();
    let out = run(&[
        "simulate",
        "--scenario",
        "no-such-scene",
        "--out",
        tmp.path().join("seq").to_str().unwrap(),
    ]);
    assert_status(&out, 1, "simulate with unknown scenario");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("straight-15kmh"), "error should list known scenarios: {stderr}");

    let out = run(&[
        "estimate-ego",
        "--seq",
        tmp.path().join("missing").to_str().unwrap(),
        "--method",
        "pose",
        "--out",
        tmp.path().join("est.csv").to_str().unwrap(),
    ]);
    assert_status(&out, 1, "estimate-ego on a missing sequence");
}

#[test]
fn estimator_that_fails_every_pair_exits_1_but_records_rows() {
    let tmp = TempDir::new().unwrap();
    let seq = tmp.path().join("seq");
    simulate(&seq, "straight-15kmh", "1.0");

    // The straight scene has no static tracked objects, so every pair fails.
    let est = tmp.path().join("so.csv");
    let out = run(&[
        "estimate-ego",
        "--seq",
        seq.to_str().unwrap(),
        "--method",
        "static-objects",
        "--out",
        est.to_str().unwrap(),
    ]);
    assert_status(&out, 1, "static-objects with no static objects");

    let text = std::fs::read_to_string(&est).expect("rows are written before exiting");
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 10, "one row per frame pair");
    for row in rows {
        assert!(row.contains("error["), "each pair carries its failure tag: {row}");
    }
}

#[test]
fn pipeline_runs_end_to_end() {
    let tmp = TempDir::new().unwrap();
    let seq = tmp.path().join("seq");
    simulate(&seq, "oncoming-car", "1.5");

    let est = tmp.path().join("doppler.csv");
    let out = run(&[
        "estimate-ego",
        "--seq",
        seq.to_str().unwrap(),
        "--method",
        "doppler",
        "--out",
        est.to_str().unwrap(),
    ]);
    assert_status(&out, 0, "estimate-ego");

    let acc = tmp.path().join("acc");
    let out = run(&[
        "accumulate",
        "--seq",
        seq.to_str().unwrap(),
        "--frames",
        "3",
        "--ego",
        "doppler",
        "--dynamic",
        "vrr",
        "--out",
        acc.to_str().unwrap(),
    ]);
    assert_status(&out, 0, "accumulate");
    assert!(acc.join("frames").is_dir());
    assert!(acc.join("estimates.csv").is_file());

    let eval = tmp.path().join("eval.csv");
    let summary = tmp.path().join("summary.csv");
    let out = run(&[
        "evaluate",
        "--seq",
        seq.to_str().unwrap(),
        "--estimates",
        est.to_str().unwrap(),
        "--gt",
        "--out",
        eval.to_str().unwrap(),
        "--summary",
        summary.to_str().unwrap(),
    ]);
    assert_status(&out, 0, "evaluate");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("mean_scd_m"), "summary prints to stdout: {stdout}");
    let summary_text = std::fs::read_to_string(&summary).unwrap();
    assert!(summary_text.lines().any(|l| l.starts_with("doppler,")));
    let eval_text = std::fs::read_to_string(&eval).unwrap();
    assert_eq!(eval_text.lines().count(), 16, "header plus one row per pair");
}

#[test]
fn rerun_replays_each_manifest_byte_identically() {
    let tmp = TempDir::new().unwrap();
    let seq = tmp.path().join("seq");
    simulate(&seq, "turn", "1.0");

    let est = tmp.path().join("est.csv");
    let out = run(&[
        "estimate-ego",
        "--seq",
        seq.to_str().unwrap(),
        "--method",
        "pose",
        "--out",
        est.to_str().unwrap(),
    ]);
    assert_status(&out, 0, "estimate-ego");

    let seq2 = tmp.path().join("seq2");
    let out = run(&[
        "rerun",
        "--manifest",
        seq.join("manifest.json").to_str().unwrap(),
        "--out",
        seq2.to_str().unwrap(),
    ]);
    assert_status(&out, 0, "rerun simulate");
    assert_eq!(tree_bytes(&seq), tree_bytes(&seq2), "replayed sequence tree differs");

    let est2 = tmp.path().join("est2.csv");
    let mut manifest = est.clone().into_os_string();
    manifest.push(".manifest.json");
    let out = run(&["rerun", "--manifest", manifest.to_str().unwrap(), "--out", est2.to_str().unwrap()]);
    assert_status(&out, 0, "rerun estimate-ego");
    assert_eq!(std::fs::read(&est).unwrap(), std::fs::read(&est2).unwrap());
}

#[test]
fn thread_cap_never_changes_output_bytes() {
    let tmp = TempDir::new().unwrap();
    let seq = tmp.path().join("seq");
    simulate(&seq, "straight-15kmh", "1.0");

    let mut files = Vec::new();
    for threads in ["1", "4"] {
        let est = tmp.path().join(format!("est-{threads}.csv"));
        let out = bin()
            .env("RADAR_ACCUM_THREADS", threads)
            .args([
                "estimate-ego",
                "--seq",
                seq.to_str().unwrap(),
                "--method",
                "doppler",
                "--out",
                est.to_str().unwrap(),
            ])
            .output()
            .expect("spawn radar-accum");
        assert_status(&out, 0, "estimate-ego under a thread cap");
        files.push(std::fs::read(&est).unwrap());
    }
    assert_eq!(files[0], files[1], "worker count leaked into the results");
}

#[test]
fn list_scenarios_names_every_builtin() {
    let out = run(&["simulate", "--list-scenarios"]);
    assert_status(&out, 0, "simulate --list-scenarios");
    let stdout = String::from_utf8_lossy(&out.stdout);
    for name in ["straight-15kmh", "turn", "oncoming-car", "crossing-cyclist", "cluttered-urban"] {
        assert!(stdout.contains(name), "missing {name} in: {stdout}");
    }
}
