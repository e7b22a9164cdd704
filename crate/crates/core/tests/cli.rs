use hybrid_volterra::cli::{run, EXIT_H7_VIOLATION, EXIT_INVALID_INPUT, EXIT_NOT_CONVERGED, EXIT_OK};
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::Command;

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn hv(args: &[&str]) -> Run {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut full = vec!["hvolterra"];
    full.extend_from_slice(args);
    let code = run(full, &mut out, &mut err);
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

const IMPULSIVE: &str = r#"
horizon = 1.0
x0 = "1"
f1 = "x"
G1 = "0.5*eta"
tau = [0.5]
sigma = ["t/2"]
h = 0.2
[lipschitz]
L1 = 1.0
LG1 = 0.5
[quadrature]
nodes_per_segment = 32
"#;

#[test]
fn solve_writes_csv_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "p.toml", IMPULSIVE);
    let (csv, report) = (dir.path().join("x.csv"), dir.path().join("r.json"));
    for method in ["picard", "segment"] {
        let r = hv(&[
            "solve",
            file.to_str().unwrap(),
            "--method",
            method,
            "--out",
            csv.to_str().unwrap(),
            "--report",
            report.to_str().unwrap(),
        ]);
        assert_eq!(r.code, EXIT_OK, "{}", r.err);
        assert!(r.err.contains("converged"));
        let text = std::fs::read_to_string(&csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,x_left,x_right"));
        // the breakpoint row carries both one-sided limits
        let row = lines
            .map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>())
            .find(|r| r[0] == 0.5)
            .unwrap();
        assert!((row[2] - 1.5 * row[1]).abs() < 1e-9);

        let doc: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
        assert_eq!(doc["solver"]["method"], method);
        assert_eq!(doc["solver"]["converged"], true);
        assert_eq!(doc["solver"]["mu_source"], "contraction");
        let jump = &doc["jumps"][0];
        assert_eq!(jump["alpha"], 0.5);
        assert!((jump["jump"].as_f64().unwrap() - jump["observed"].as_f64().unwrap()).abs() < 1e-8);
        assert!(doc["contraction"]["criterion"]["verdict"].is_string());
        assert!(doc["h7"]["verdict"].as_str().unwrap().contains("on grid"));
        assert!(!doc["interpretations"].as_array().unwrap().is_empty());
    }
}

#[test]
fn solve_to_stdout_without_out() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "p.toml", IMPULSIVE);
    let r = hv(&["solve", file.to_str().unwrap()]);
    assert_eq!(r.code, EXIT_OK);
    assert!(r.out.starts_with("t,x_left,x_right\n"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let syntax = write(dir.path(), "bad.toml", "horizon = 1.0\nf1 = \"x +* 2\"\n");
    let r = hv(&["solve", syntax.to_str().unwrap()]);
    assert_eq!(r.code, EXIT_INVALID_INPUT);
    assert!(r.err.contains("kernel f1") && r.err.contains("offset"), "{}", r.err);

    let missing = hv(&["solve", dir.path().join("nope.toml").to_str().unwrap()]);
    assert_eq!(missing.code, EXIT_INVALID_INPUT);
    assert_eq!(hv(&["frobnicate"]).code, EXIT_INVALID_INPUT);
    assert_eq!(hv(&["check-matrix", "1", "2"]).code, EXIT_INVALID_INPUT);
    assert_eq!(hv(&["--help"]).code, EXIT_OK);

    // fixed times 0.1 apart with a required separation of 0.3
    let crowded = write(
        dir.path(),
        "h7.toml",
        "horizon = 1.0\nx0 = \"1\"\ntau = [0.4, 0.5]\nh = 0.3\n[quadrature]\nnodes_per_segment = 8\n",
    );
    let r = hv(&["solve", crowded.to_str().unwrap(), "--require-h7"]);
    assert_eq!(r.code, EXIT_H7_VIOLATION);
    assert!(r.err.contains("τ-gap"), "{}", r.err);
    assert_eq!(hv(&["solve", crowded.to_str().unwrap()]).code, EXIT_OK);

    let slow = write(dir.path(), "slow.toml", "horizon = 1.0\nx0 = \"1\"\nf1 = \"x\"\n[solver]\nkmax = 2\n");
    assert_eq!(hv(&["solve", slow.to_str().unwrap()]).code, EXIT_NOT_CONVERGED);
}

#[test]
fn analyze_estimates_missing_constants() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(
        dir.path(),
        "p.toml",
        "horizon = 1.0\nx0 = \"1\"\nf1 = \"2*x\"\nG1 = \"0.5*eta\"\ntau = [0.5]\n",
    );
    let r = hv(&["analyze", file.to_str().unwrap(), "--samples", "200"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let doc: Value = serde_json::from_str(&r.out).unwrap();
    assert_eq!(doc["lipschitz"]["source"], "estimated");
    let l1 = doc["lipschitz"]["constants"]["L1"].as_f64().unwrap();
    assert!((l1 - 2.2).abs() < 1e-9, "{l1}");
    assert_eq!(doc["mu_search"]["status"], "found");
    assert_eq!(doc["contraction"]["criterion"]["contractive"], true);
    assert_eq!(doc["schedule"]["partition"], serde_json::json!([0.0, 0.5, 1.0]));
    assert!(doc["h_source"].as_str().unwrap().starts_with("default"));
}

#[test]
fn analyze_zero_problem_takes_smallest_weight() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "z.toml", "horizon = 1.0\nx0 = \"1\"\ntau = [0.5]\n");
    let r = hv(&["analyze", file.to_str().unwrap()]);
    assert_eq!(r.code, EXIT_OK);
    let doc: Value = serde_json::from_str(&r.out).unwrap();
    assert_eq!(doc["mu_search"]["mu"], 0.01);
    let zero: Vec<Vec<f64>> = serde_json::from_value(doc["contraction"]["matrix"].clone()).unwrap();
    assert!(zero.iter().flatten().all(|&a| a == 0.0));
}

#[test]
fn roots_and_check_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "r.toml", "horizon = 1.5\nsigma = [\"t^2\"]\ntau = [0.4]\n");
    let r = hv(&["roots", file.to_str().unwrap()]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let doc: Value = serde_json::from_str(&r.out).unwrap();
    let roots: Vec<f64> = serde_json::from_value(doc["sigma"][0]["roots"].clone()).unwrap();
    assert_eq!(roots.len(), 2);
    assert!(roots[0].abs() < 1e-12 && (roots[1] - 1.0).abs() < 1e-12);
    assert_eq!(doc["partition"].as_array().unwrap().len(), 4);

    let r = hv(&["check-matrix", "0.5", "0", "0", "0", "-0.2", "0", "0", "0", "1.2"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let doc: Value = serde_json::from_str(&r.out).unwrap();
    assert_eq!(doc["criterion"]["contractive"], false);
    assert!((doc["eigen"]["spectral_radius"].as_f64().unwrap() - 1.2).abs() < 1e-12);
}

#[test]
fn series_solve_and_order_guard() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(
        dir.path(),
        "s.toml",
        "horizon = 0.5\ny0 = \"1\"\nkernels = [\"x1\", \"x1*x2\"]\nlipschitz = [1, 1]\n[quadrature]\nnodes_per_segment = 64\n",
    );
    let report = dir.path().join("s.json");
    let r = hv(&["series-solve", file.to_str().unwrap(), "--report", report.to_str().unwrap()]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(doc["order"], 2);
    assert!(doc["contraction_coefficient"].as_f64().unwrap() < 1.0);

    let high = write(
        dir.path(),
        "h.toml",
        "horizon = 0.5\ny0 = \"1\"\nkernels = [\"x1\", \"0\", \"0\", \"0\"]\n[quadrature]\nnodes_per_segment = 4\n",
    );
    let r = hv(&["series-solve", high.to_str().unwrap()]);
    assert_eq!(r.code, EXIT_INVALID_INPUT);
    assert!(r.err.contains("order 4"), "{}", r.err);
    assert_eq!(hv(&["series-solve", high.to_str().unwrap(), "--allow-high-order"]).code, EXIT_OK);
}

#[test]
fn convergence_report_without_reference() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "c.toml", IMPULSIVE);
    let r = hv(&["convergence-report", file.to_str().unwrap(), "--resolutions", "16,32,64,128", "--method", "segment"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let doc: Value = serde_json::from_str(&r.out).unwrap();
    assert_eq!(doc["reference"], "finest resolution");
    let ratios: Vec<f64> = doc["rows"].as_array().unwrap().iter().filter_map(|r| r["ratio"].as_f64()).collect();
    assert_eq!(ratios.len(), 2);
    assert!(ratios.iter().all(|r| (3.5..=4.5).contains(r)), "{ratios:?}");
    assert_eq!(hv(&["convergence-report", file.to_str().unwrap(), "--resolutions", "16"]).code, EXIT_INVALID_INPUT);
}

#[test]
fn binary_exit_codes_and_seed() {
    let bin = env!("CARGO_BIN_EXE_hvolterra");
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "p.toml", "horizon = 1.0\nx0 = \"1\"\nf1 = \"sin(x)\"\n");
    let a = Command::new(bin).args(["analyze", file.to_str().unwrap()]).env("HV_SEED", "3").output().unwrap();
    let b = Command::new(bin).args(["analyze", file.to_str().unwrap()]).env("HV_SEED", "3").output().unwrap();
    assert_eq!(a.status.code(), Some(EXIT_OK));
    assert_eq!(a.stdout, b.stdout, "same seed, same report");
    let bad = Command::new(bin).args(["analyze", file.to_str().unwrap()]).env("HV_SEED", "abc").output().unwrap();
    assert_eq!(bad.status.code(), Some(EXIT_INVALID_INPUT));
    let usage = Command::new(bin).arg("solve").output().unwrap();
    assert_eq!(usage.status.code(), Some(EXIT_INVALID_INPUT));
}
