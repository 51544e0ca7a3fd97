//! End-to-end tests of the binary: golden values through the JSON
//! surface, verdict-aware exit codes, and byte-level determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pnormflow"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write_file(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).expect("test file writes");
    path
}

/// Unit two-edge path 0 – 1 – 2.
const TWO_EDGE_PATH: &str = "3 2\n0 1 1\n1 2 1\n";

/// Unit 4-cycle.
const UNIT_C4: &str = "4 4\n0 1 1\n1 2 1\n2 3 1\n3 0 1\n";

fn unit_clique_text(n: usize) -> String {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            edges.push(format!("{u} {v} 1"));
        }
    }
    format!("{} {}\n{}\n", n, edges.len(), edges.join("\n"))
}

#[test]
fn dist_on_the_two_edge_path_matches_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let graph = write_file(dir.path(), "path.txt", TWO_EDGE_PATH);
    let out = run(&["dist", "--graph", graph.to_str().unwrap(), "--p", "3", "--pair", "0", "2",
        "--json"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["schema"], "pnormflow/dist/v1");
    let primal = v["primal"].as_f64().unwrap();
    let expected = 2.0_f64.powf(1.0 / 3.0);
    assert!((primal - expected).abs() / expected <= 1e-7, "primal {primal}");
    let dual = v["dual"].as_f64().unwrap();
    assert!((dual - expected).abs() / expected <= 1e-7, "dual {dual}");
}

#[test]
fn obstruction_verdict_flips_between_p2_and_p3() {
    let at_two = run(&["obstruction", "--p", "2", "--json"]);
    assert!(at_two.status.success());
    let v = stdout_json(&at_two);
    assert!(v["gap"].as_f64().unwrap() <= 1e-12);
    assert_eq!(v["transform_exists"], true);

    let at_three = run(&["obstruction", "--p", "3", "--json"]);
    assert_eq!(at_three.status.code(), Some(1));
    let v = stdout_json(&at_three);
    let gap = v["gap"].as_f64().unwrap();
    assert!((gap - 0.029).abs() <= 0.001, "gap {gap}");
}

#[test]
fn star_mesh_verdict_flips_between_k3_and_k4() {
    let feasible = run(&["star-mesh", "--k", "3", "--json"]);
    assert!(feasible.status.success());
    assert_eq!(stdout_json(&feasible)["feasible"], true);

    let infeasible = run(&["star-mesh", "--k", "4", "--json"]);
    assert_eq!(infeasible.status.code(), Some(1));
    let v = stdout_json(&infeasible);
    assert_eq!(v["feasible"], false);
    let violation = v["max_violation"].as_f64().unwrap();
    assert!((violation - 2.0 / 7.0).abs() <= 1e-6, "violation {violation}");
}

#[test]
fn all_pairs_csv_matches_shortest_paths_on_the_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let graph = write_file(dir.path(), "c4.txt", UNIT_C4);
    let out = run(&["all-pairs", "--graph", graph.to_str().unwrap(), "--p", "1", "--format",
        "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "0,1,2,1");
}

#[test]
fn sparsify_json_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let graph = write_file(dir.path(), "k8.txt", &unit_clique_text(8));
    let args = ["sparsify", "--graph", graph.to_str().unwrap(), "--p", "3", "--eps", "0.4",
        "--seed", "5", "--json"];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout, "same seed must give identical bytes");
    let v = stdout_json(&first);
    assert_eq!(v["schema"], "pnormflow/sparsify/v1");
    assert_eq!(v["route"], "row-sampling");
    assert_eq!(v["seed"], 5);
}

#[test]
fn sparsify_and_verify_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let graph = write_file(dir.path(), "k8.txt", &unit_clique_text(8));
    let sparsified = dir.path().join("sparse.txt");
    let build = run(&["sparsify", "--graph", graph.to_str().unwrap(), "--p", "3", "--eps",
        "0.4", "--seed", "5", "--out", sparsified.to_str().unwrap()]);
    assert!(build.status.success());

    let verify = run(&["verify", "--graph", graph.to_str().unwrap(), "--sparsifier",
        sparsified.to_str().unwrap(), "--p", "3", "--eps", "0.4", "--json"]);
    assert!(verify.status.success(), "verification exceeded eps");
    let v = stdout_json(&verify);
    assert_eq!(v["within_eps"], true);
    assert!(v["max_relative_error"].as_f64().unwrap() <= 0.4);
}

#[test]
fn verify_flags_a_doubled_graph() {
    let dir = tempfile::tempdir().unwrap();
    let graph = write_file(dir.path(), "c4.txt", UNIT_C4);
    let doubled = write_file(dir.path(), "c4x2.txt", "4 4\n0 1 2\n1 2 2\n2 3 2\n3 0 2\n");
    let out = run(&["verify", "--graph", graph.to_str().unwrap(), "--sparsifier",
        doubled.to_str().unwrap(), "--p", "2", "--eps", "0.1", "--json"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stdout_json(&out)["max_relative_error"].as_f64().unwrap();
    assert!((err - 0.5).abs() <= 1e-6, "doubling error {err}");
}

#[test]
fn reduce_deg2_writes_the_series_weight() {
    let dir = tempfile::tempdir().unwrap();
    let graph = write_file(dir.path(), "path.txt", TWO_EDGE_PATH);
    let reduced = dir.path().join("reduced.txt");
    let out = run(&["reduce", "--graph", graph.to_str().unwrap(), "--rule", "deg2", "--vertex",
        "1", "--p", "3", "--out", reduced.to_str().unwrap(), "--json"]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&reduced).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "2 1");
    let weight: f64 = lines.next().unwrap().split_whitespace().nth(2).unwrap().parse().unwrap();
    // Series rule: (1 + 1)^{-1/3} = 2^{-1/3}.
    let expected = 2.0_f64.powf(-1.0 / 3.0);
    assert!((weight - expected).abs() <= 1e-9, "series weight {weight}");
}

#[test]
fn wye_delta_demands_p_two() {
    let dir = tempfile::tempdir().unwrap();
    // Unit 3-star: center 3.
    let graph = write_file(dir.path(), "star.txt", "4 3\n0 3 1\n1 3 1\n2 3 1\n");
    let out = run(&["reduce", "--graph", graph.to_str().unwrap(), "--rule", "wye-delta",
        "--vertex", "3", "--p", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let ok = run(&["reduce", "--graph", graph.to_str().unwrap(), "--rule", "wye-delta",
        "--vertex", "3", "--p", "2", "--json"]);
    assert!(ok.status.success());
}

#[test]
fn experiments_report_their_verdicts() {
    let out = run(&["experiment", "symmetric-family", "--n", "5", "--json"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["schema"], "pnormflow/experiment-symmetric-family/v1");
    let r_st = v["r_st"].as_f64().unwrap();
    assert!((r_st - 2.0 / 3.0).abs() <= 1e-9);

    let out = run(&["experiment", "lower-bound-union", "--n", "10", "--eps", "0.25", "--json"]);
    assert!(out.status.success());
    assert_eq!(stdout_json(&out)["passed"], true);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let graph = write_file(dir.path(), "c4.txt", UNIT_C4);

    // Missing required flag (clap).
    let out = run(&["dist", "--graph", graph.to_str().unwrap(), "--p", "2"]);
    assert_eq!(out.status.code(), Some(2));

    // Tolerance outside (0, 1e-2].
    let out = run(&["foster", "--graph", graph.to_str().unwrap(), "--p", "2", "--tol", "0.5"]);
    assert_eq!(out.status.code(), Some(2));

    // Unreadable graph file.
    let out = run(&["dist", "--graph", "does-not-exist.txt", "--p", "2", "--pair", "0", "1"]);
    assert_eq!(out.status.code(), Some(2));

    // csv on a non-matrix subcommand.
    let out = run(&["foster", "--graph", graph.to_str().unwrap(), "--p", "2", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn huge_p_is_coerced_to_infinity_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let graph = write_file(dir.path(), "c4.txt", UNIT_C4);
    let out = run(&["dist", "--graph", graph.to_str().unwrap(), "--p", "2000000", "--pair", "0",
        "2", "--json"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("treating it as infinity"));
    // d_inf(0, 2) on the unit 4-cycle is 1/mincut = 1/2.
    let v = stdout_json(&out);
    assert_eq!(v["p"], "inf");
    assert!((v["primal"].as_f64().unwrap() - 0.5).abs() <= 1e-12);
}

#[test]
fn verdict_subcommands_pass_on_well_behaved_graphs() {
    let dir = tempfile::tempdir().unwrap();
    let graph = write_file(dir.path(), "c4.txt", UNIT_C4);
    for args in [
        vec!["foster", "--graph", graph.to_str().unwrap(), "--p", "2"],
        vec!["p-strong", "--graph", graph.to_str().unwrap(), "--p", "3"],
        vec!["monotonicity", "--graph", graph.to_str().unwrap(), "--pair", "0", "2"],
        vec!["commute", "--graph", graph.to_str().unwrap()],
        vec!["experiment", "clique-ratio", "--graph", graph.to_str().unwrap()],
    ] {
        let out = run(&args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        );
    }
}
