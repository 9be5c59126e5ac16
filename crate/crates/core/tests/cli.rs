// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn tool(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neutron-worlds"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    tool(args).status.code().expect("exit code")
}

fn report(args: &[&str]) -> Value {
    let out = tool(args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

/// Report text with the wall-clock line removed.
fn without_clock(text: &str) -> String {
    text.lines()
        .filter(|l| !l.trim_start().starts_with("\"wall_clock_seconds\""))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn exit_codes() {
    assert_eq!(code(&["list"]), 0);
    assert_eq!(code(&["--version"]), 0);
    assert_eq!(code(&["run", "fig5"]), 2);
    assert_eq!(code(&["run", "fig1_splitter", "--trials", "-1"]), 3);
    assert_eq!(
        code(&["run", "fig1_splitter", "--collapse-stage", "observer"]),
        3
    );
    assert_eq!(code(&["run", "steering", "--mu", "1.5"]), 3);
    assert_eq!(code(&["run", "steering", "--alpha", "0.5"]), 3);
    assert_eq!(code(&["run", "fig3_interferometer", "--no-such-flag"]), 3);
    assert_eq!(code(&["run", "bohm_crossing", "--x-init", "-17.6"]), 3);
    // a start in the far tail thins out below the floor as the packet spreads
    assert_eq!(
        code(&["run", "bohm_crossing", "--x-init", "-17", "--trials", "5"]),
        4
    );
}

#[test]
fn list_and_version() {
    let out = String::from_utf8(tool(&["list"]).stdout).unwrap();
    assert_eq!(out.lines().count(), 12);
    assert!(out.lines().any(|l| l.starts_with("spin_memory")));
    let version = String::from_utf8(tool(&["--version"]).stdout).unwrap();
    assert!(version.contains("report format 1"));
}

#[test]
fn undo_and_steering_examples() {
    let undo = report(&[
        "run", "undo", "--alpha", "0.7071", "--beta", "0.7071", "--mode", "mwi",
    ]);
    let p = undo["results"]["source_return_probability"]
        .as_f64()
        .unwrap();
    assert!((p - 1.0).abs() < 1e-12);

    let steering = report(&["run", "steering", "--mu", "0.9"]);
    assert_eq!(steering["spec"]["grid"], 10_000);
    let analysis = &steering["results"]["analysis"];
    assert!((analysis["p_min"].as_f64().unwrap() - 0.2).abs() < 1e-9);
    assert!((analysis["p_max"].as_f64().unwrap() - 0.8).abs() < 1e-9);
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.cfg");
    std::fs::write(&config, "# steering run\nscenario = steering\nmu = 0.9\n").unwrap();
    let cfg = config.to_str().unwrap();

    let from_file = report(&["run", "--config", cfg]);
    assert_eq!(from_file["spec"]["mu"], 0.9);
    let overridden = report(&["run", "--config", cfg, "--mu", "1"]);
    assert_eq!(overridden["spec"]["mu"], 1.0);
    assert_eq!(code(&["run", "undo", "--config", cfg]), 3);

    std::fs::write(
        &config,
        "scenario = fig1_splitter\nmode = collapse\ntrials = -1\n",
    )
    .unwrap();
    assert_eq!(code(&["run", "--config", cfg]), 3);
    std::fs::write(&config, "scenario = fig1_splitter\nthis is not a pair\n").unwrap();
    assert_eq!(code(&["run", "--config", cfg]), 3);
    assert_eq!(code(&["run", "--config", "/nonexistent/run.cfg"]), 3);
}

fn run_twice(args: &[&str], dir: &Path) -> (String, String) {
    let mut texts = Vec::new();
    // the output path is part of the resolved spec, so both runs share it
    let out = dir.join("report.json");
    for _ in 0..2 {
        let mut full: Vec<&str> = args.to_vec();
        let out_str = out.to_str().unwrap().to_string();
        full.extend(["--out", &out_str]);
        assert_eq!(code(&full), 0);
        texts.push(std::fs::read_to_string(&out).unwrap());
    }
    (texts.remove(0), texts.remove(0))
}

#[test]
fn reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = run_twice(
        &[
            "run",
            "fig1_splitter",
            "--mode",
            "collapse",
            "--alpha",
            "0.6",
            "--beta",
            "0.8",
            "--trials",
            "5000",
            "--seed",
            "42",
        ],
        dir.path(),
    );
    assert_eq!(without_clock(&a), without_clock(&b));

    let csv_dir = dir.path().join("csv");
    let csv = csv_dir.to_str().unwrap();
    let (a, b) = run_twice(
        &[
            "run",
            "bohm_bubble",
            "--trials",
            "20",
            "--seed",
            "9",
            "--csv-dir",
            csv,
        ],
        dir.path(),
    );
    assert_eq!(without_clock(&a), without_clock(&b));
    let table = std::fs::read_to_string(csv_dir.join("bohm_bubble_trajectory.csv")).unwrap();
    assert!(table.starts_with("t,x,v,density\n"));
    let parsed: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(parsed["files"].as_array().unwrap().len(), 1);
}

#[test]
fn different_seeds_differ() {
    let args = |seed: &'static str| {
        report(&[
            "run", "undo", "--mode", "collapse", "--trials", "2000", "--seed", seed,
        ])
    };
    let (a, b) = (args("1"), args("2"));
    assert_ne!(
        a["results"]["source_return_probability"],
        b["results"]["source_return_probability"]
    );
}
