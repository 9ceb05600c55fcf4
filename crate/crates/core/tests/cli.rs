//! End-to-end checks of the `rrbeam` binary: output formats and exit codes.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rrbeam"))
}

fn tmp_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rrbeam-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn tiny_scenario(mu: f64) -> String {
    format!(
        r#"{{
  "name": "tiny",
  "geometry": {{ "num_sensors": 8, "spacing_ratio": 0.5 }},
  "sources": {{
    "soi_doa_deg": 60.0,
    "soi_power": 1.0,
    "interferer_doas_deg": [120.0, 30.0],
    "interferer_powers": [1.0, 1.0],
    "noise_power": 0.1
  }},
  "mismatch": {{ "kind": "coherent_scattering", "num_paths": 4, "doa_stddev_deg": 2.0 }},
  "lognormal_interferer_db": 3.0,
  "num_snapshots": 40,
  "num_trials": 4,
  "master_seed": 7,
  "algorithms": [
    {{ "kind": "optimal" }},
    {{ "kind": "lcmv-sg", "mu": {mu} }},
    {{ "kind": "rjio-sg-auto", "d_min": 2, "d_max": 4 }}
  ]
}}"#
    )
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn run_emits_csv_and_manifest() {
    let dir = tmp_dir();
    let scenario_path = dir.join("tiny.json");
    std::fs::write(&scenario_path, tiny_scenario(1e-4)).unwrap();
    let csv_path = dir.join("tiny.csv");
    let manifest_path = dir.join("tiny.manifest.json");

    let out = bin()
        .args(["run", scenario_path.to_str().unwrap()])
        .args(["--seed", "11", "--trials", "3", "--workers", "2"])
        .args(["--avg-domain", "linear"])
        .args(["--out", csv_path.to_str().unwrap()])
        .args(["--manifest", manifest_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stdout_of(&out));

    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "snapshot,algorithm,mean_sinr_db,selected_rank"
    );
    // 3 algorithms x 40 snapshots
    assert_eq!(lines.count(), 3 * 40);
    assert!(csv.contains("rjio-sg-auto"));

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&manifest_path).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 11);
    assert_eq!(manifest["trials"], 3);
}

#[test]
fn run_without_rank_column_when_no_adaptive_rank() {
    let dir = tmp_dir();
    let scenario_path = dir.join("tiny_fixed.json");
    let json = tiny_scenario(1e-4).replace(
        r#"{ "kind": "rjio-sg-auto", "d_min": 2, "d_max": 4 }"#,
        r#"{ "kind": "rjio-sg", "rank": 3 }"#,
    );
    std::fs::write(&scenario_path, json).unwrap();

    let out = bin()
        .args(["run", scenario_path.to_str().unwrap(), "--trials", "2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = stdout_of(&out);
    assert_eq!(
        stdout.lines().next().unwrap(),
        "snapshot,algorithm,mean_sinr_db"
    );
}

#[test]
fn runs_are_reproducible_for_a_fixed_seed() {
    let run = || {
        let out = bin()
            .args(["run", "fig_rank", "--trials", "2", "--seed", "99"])
            .output()
            .unwrap();
        assert!(out.status.success());
        stdout_of(&out)
    };
    assert_eq!(run(), run());
}

#[test]
fn sweep_rank_lists_requested_ranks() {
    let dir = tmp_dir();
    let scenario_path = dir.join("tiny_sweep.json");
    std::fs::write(&scenario_path, tiny_scenario(1e-4)).unwrap();

    let out = bin()
        .args(["sweep-rank", scenario_path.to_str().unwrap()])
        .args(["--ranks", "2,4", "--trials", "2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = stdout_of(&out);
    let header = stdout.lines().next().unwrap();
    assert!(header.starts_with("rank,"), "header was {header}");
    assert!(stdout.lines().any(|l| l.starts_with("2,")));
    assert!(stdout.lines().any(|l| l.starts_with("4,")));
    assert!(!stdout.lines().any(|l| l.starts_with("3,")));
}

#[test]
fn grid_search_returns_a_candidate() {
    let dir = tmp_dir();
    let scenario_path = dir.join("tiny_grid.json");
    std::fs::write(&scenario_path, tiny_scenario(1e-4)).unwrap();
    let grid_path = dir.join("grid.json");
    std::fs::write(
        &grid_path,
        r#"{ "candidates": [
            [ { "kind": "lcmv-sg", "mu": 1e-4 } ],
            [ { "kind": "lcmv-sg", "mu": 3e-4 } ]
        ] }"#,
    )
    .unwrap();

    let out = bin()
        .args(["grid-search", scenario_path.to_str().unwrap()])
        .args(["--grid", grid_path.to_str().unwrap(), "--trials", "2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let best: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert!(best.to_string().contains("lcmv-sg"));
}

#[test]
fn complexity_prints_all_five_rows() {
    let out = bin()
        .args(["complexity", "--M", "32", "--D", "4"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = stdout_of(&out);
    assert_eq!(
        stdout.lines().next().unwrap(),
        "algorithm,M,D,additions,multiplications"
    );
    assert!(stdout.contains("lcmv-sg,32,4,97,98"));
    assert_eq!(stdout.lines().count(), 6);
}

#[test]
fn list_scenarios_names_all_builtins() {
    let out = bin().arg("list-scenarios").output().unwrap();
    assert!(out.status.success());
    let stdout = stdout_of(&out);
    for name in [
        "fig_rank",
        "fig_convergence",
        "fig_rank_adapt",
        "fig_nonstationary",
    ] {
        assert!(stdout.contains(name), "missing {name}");
    }
}

#[test]
fn config_errors_exit_2() {
    let out = bin().args(["run", "no_such_scenario"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let dir = tmp_dir();
    let bad = dir.join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let out = bin().args(["run", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn divergent_run_exits_3() {
    // an absurd step size makes every lcmv-sg trial blow up, tripping the
    // 5% exclusion threshold
    let dir = tmp_dir();
    let scenario_path = dir.join("tiny_divergent.json");
    std::fs::write(&scenario_path, tiny_scenario(1e9)).unwrap();

    let out = bin()
        .args(["run", scenario_path.to_str().unwrap(), "--trials", "4"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stdout_of(&out));
}
