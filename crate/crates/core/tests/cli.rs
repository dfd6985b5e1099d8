use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use entswitch::cli::{AnalyticReport, RegionSummary, RunManifest, SimulateReport, SolveReport};
use tempfile::tempdir;

fn entswitch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_entswitch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json<T: serde::de::DeserializeOwned>(args: &[&str]) -> T {
    let mut full = vec!["--json"];
    full.extend_from_slice(args);
    let out = entswitch(&full);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid json")
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn analytic_examples() {
    let r: AnalyticReport = json(&["analytic", "--k", "3", "--mu", "1", "--r", "0,1,1"]);
    assert!(close(r.c2, 12.0 / 17.0, 1e-12));
    assert!(close(r.c3, 6.0 / 17.0, 1e-12));

    let r: AnalyticReport = json(&["analytic", "--k", "3", "--alpha", "0.1", "--r", "1,0,0", "--check"]);
    assert!(close(r.c2, 6.0 / 5.1, 1e-12));
    assert!(r.check.expect("requested").passed);
}

#[test]
fn validation_errors_exit_two() {
    let out = entswitch(&["analytic", "--k", "2", "--r", "0,1,1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("k >= 3"));

    let out = entswitch(&["analytic", "--k", "3", "--B", "2", "--r", "0,1,1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("use solve"));

    let out = entswitch(&["simulate", "--k", "3", "--reps", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("reps >= 2"));
}

#[test]
fn solve_examples() {
    let r: SolveReport = json(&["solve", "--k", "3", "--B", "1", "--r", "0,1,1"]);
    let pi: Vec<f64> = r.stationary.iter().map(|s| s.pi).collect();
    for (got, want) in pi.iter().zip([2.0 / 17.0, 9.0 / 17.0, 6.0 / 17.0]) {
        assert!(close(*got, want, 1e-12));
    }

    let r: SolveReport = json(&["solve", "--k", "3", "--B", "2", "--r", "0,1,1"]);
    assert_eq!(r.stationary.len(), 6);
    assert!(close(r.stationary.iter().map(|s| s.pi).sum(), 1.0, 1e-12));

    let noisy: SolveReport = json(&["solve", "--k", "10", "--B", "2", "--alpha", "0.5", "--r", "0,0.5,0.5"]);
    let clean: SolveReport = json(&["solve", "--k", "10", "--B", "2", "--r", "0,0.5,0.5"]);
    assert!(noisy.c2.is_finite() && noisy.c3.is_finite());
    assert!(noisy.c2 < clean.c2 && noisy.c3 < clean.c3);
}

#[test]
fn dump_lists_arcs() {
    let out = entswitch(&["solve", "--k", "3", "--r", "0,1,1", "--dump"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("(1,1) -> (0,0)  rate=1  bsm=0  ghz=1"), "{text}");
}

#[test]
fn simulate_matches_closed_form_and_is_deterministic() {
    let args = ["simulate", "--k", "3", "--B", "1", "--r", "0,1,1", "--duration", "1e6", "--seed", "7"];
    let r: SimulateReport = json(&args);
    assert!((r.estimate.c2_hat - 12.0 / 17.0).abs() <= 0.01 * 12.0 / 17.0);
    assert_eq!(r.estimate.replications, 10);

    let short = ["simulate", "--k", "3", "--r", "0,1,1", "--duration", "1e4", "--seed", "7"];
    let (a, b) = (entswitch(&short), entswitch(&short));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn trace_has_header_and_events() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    let out = entswitch(&[
        "simulate", "--k", "3", "--duration", "50", "--reps", "2",
        "--trace", path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("time,event_type,link,action"));
    assert!(lines.count() > 10);
}

fn read_csv(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn region_writes_files_through_anchor_points() {
    let dir = tempdir().unwrap();
    let out_dir = dir.path().join("fig2");
    let s: RegionSummary = json(&[
        "region", "--k", "3", "--B", "1", "--step", "0.05", "--out", out_dir.to_str().unwrap(),
    ]);
    for f in ["points.csv", "frontier.csv", "tdm.csv", "summary.json", "manifest.json"] {
        assert!(out_dir.join(f).exists(), "{f} missing");
    }
    assert_eq!(s.n_points, 21 * 21 * 21);
    let frontier = read_csv(&out_dir.join("frontier.csv"));
    let has = |c3: f64, c2: f64| {
        frontier
            .iter()
            .any(|row| close(row[3], c3, 1e-12) && close(row[4], c2, 1e-12))
    };
    assert!(has(0.0, 1.2));
    assert!(has(6.0 / 17.0, 12.0 / 17.0));
    assert!(has(6.0 / 11.0, 0.0));

    let on_disk: RegionSummary =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(on_disk, s);
}

#[test]
fn region_decoherence_and_buffer_comparison() {
    let dir = tempdir().unwrap();
    let clean: RegionSummary = json(&["region", "--k", "3", "--out", dir.path().join("a").to_str().unwrap()]);
    let noisy: RegionSummary = json(&[
        "region", "--k", "3", "--alpha", "0.5", "--out", dir.path().join("b").to_str().unwrap(),
    ]);
    assert!(noisy.frontier_area < clean.frontier_area);
    assert!(noisy.c2_max < clean.c2_max && noisy.c3_max < clean.c3_max);

    let cmp_dir = dir.path().join("fig7a");
    let b2: RegionSummary = json(&[
        "region", "--k", "3", "--B", "2", "--compare-b1", "--out", cmp_dir.to_str().unwrap(),
    ]);
    let cmp = b2.comparison.expect("comparison requested");
    assert!(cmp.dominates_b1);
    assert!(cmp.area_gain > 0.0);
    assert!(cmp_dir.join("b1_frontier.csv").exists());
}

#[test]
fn rerun_reproduces_outputs_bit_exactly() {
    let dir = tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let out = entswitch(&[
        "simulate", "--k", "5", "--B", "2", "--alpha", "0.2", "--r", "0,0.7,0.4",
        "--duration", "1e4", "--seed", "3", "--out", first.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let manifest: RunManifest =
        serde_json::from_str(&fs::read_to_string(first.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.command, "simulate");

    let out = entswitch(&[
        "rerun", first.join("manifest.json").to_str().unwrap(), "--out", second.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        fs::read(first.join("result.json")).unwrap(),
        fs::read(second.join("result.json")).unwrap()
    );
}

#[test]
fn unwritable_output_is_io_error() {
    let dir = tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = entswitch(&["region", "--k", "3", "--step", "0.5", "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
