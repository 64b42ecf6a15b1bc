//! End-to-end checks of the binary: exit codes, output files, and the text
//! surface scripts are expected to grep.

use std::process::{Command, Output};

fn spinbath(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinbath"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn ensemble_runs_a_tiny_config_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.cfg");
    std::fs::write(
        &cfg_path,
        "sites = 5\ndeltas = 1,4\nrealizations = 2\nseed = 3\nregion_sizes = 1,2\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = spinbath(&[
        "ensemble",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("failures recorded: 0"), "{text}");
    for name in ["curves.csv", "slopes.csv", "summary.json"] {
        assert!(out_dir.join(name).exists(), "missing {name}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["config"]["sites"], serde_json::json!(5));
    assert_eq!(summary["items_failed"], serde_json::json!(0));
}

#[test]
fn ensemble_rejects_bad_configs_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("bad.cfg");
    std::fs::write(&cfg_path, "sites = 5\nwat = 1\n").unwrap();
    let out = spinbath(&["ensemble", "--config", cfg_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("unknown key"));

    let missing = dir.path().join("nope.cfg");
    let out = spinbath(&["ensemble", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn print_config_shows_the_desk_defaults() {
    let out = spinbath(&["ensemble", "--print-config"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("sites = 10"), "{text}");
    assert!(text.contains("deltas = 0.5,1,2,3,4,5,6,8"), "{text}");
    assert!(text.contains("targets = both"), "{text}");
}

#[test]
fn esc_reports_the_equal_gap_collision() {
    let out = spinbath(&["esc", "--energies", "0,0.3,0.9,1.2", "--n-max", "2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("n = 1: no collision"), "{text}");
    assert!(text.contains("n = 2: COLLISION"), "{text}");
    assert!(text.contains("fails through n = 2"), "{text}");
}

#[test]
fn esc_exact_mode_flags_integer_collisions() {
    let out = spinbath(&["esc", "--exact", "0/1,1/1,2/1", "--n-max", "2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("COLLISION"), "{text}");

    // gaps 1 and 5/3: a collision needs 3|db| = 5|dc|, impossible below n = 8
    let out = spinbath(&["esc", "--exact", "0/1,1/1,5/3", "--n-max", "3"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("holds through n = 3"));
}

#[test]
fn convex_split_canonical_passes() {
    let out = spinbath(&["convex-split", "--canonical", "--n-max", "4"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("square-root bound holds for every n"));
}

#[test]
fn n_epsilon_canonical_reports_both_readings() {
    let out = spinbath(&[
        "n-epsilon",
        "--canonical",
        "--epsilon",
        "0.4",
        "--n-max",
        "8",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("per-copy reading): n = 3"), "{text}");
    assert!(text.contains("product-space reading): n = 4"), "{text}");
    assert!(text.contains("ceiling 2^dmax/eps^2 = 13"), "{text}");
}

#[test]
fn counterexample_uniform_beta_improves_by_an_eighth() {
    let out = spinbath(&["counterexample", "--beta", "0"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("improvement -0.125"), "{text}");
    assert!(
        text.contains("strict improvement below the channel optimum: true"),
        "{text}"
    );
}

#[test]
fn counterexample_cold_start_is_rejected() {
    let out = spinbath(&["counterexample", "--beta", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("p1"), "{}", stderr(&out));
}

#[test]
fn dynamics_check_agrees_across_integrators() {
    let out = spinbath(&[
        "dynamics-check",
        "--qubits",
        "2",
        "--seed",
        "1",
        "--trajectories",
        "20000",
        "--mc-tol",
        "0.02",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("series vs RK4"), "{text}");
    assert!(!text.contains("MISMATCH"), "{text}");
}

#[test]
fn unknown_flags_exit_two() {
    let out = spinbath(&["ensemble", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}
