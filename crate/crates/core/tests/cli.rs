use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pacbayes_markov::io::format_kernel;
use pacbayes_markov::markov::build_benchmark_kernel;

const BIN: &str = env!("CARGO_BIN_EXE_pacbayes-markov");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("PACBAYES_THREADS").output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn gap_from_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "traj.txt", "1\n2\n1\n2\n1\n");
    let out = run(&["gap", "--trajectory", &f, "--d", "2"]);
    assert!(out.status.success());
    let v = json(&out);
    assert!((v["gamma_ps"].as_f64().unwrap() - 0.75).abs() < 1e-12);
}

#[test]
fn gap_from_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "k.txt", "2\n0.75 0.25\n0.25 0.75\n");
    let out = run(&["gap", "--kernel", &f, "--exact"]);
    assert!(out.status.success());
    assert!((json(&out)["gamma_ps"].as_f64().unwrap() - 0.75).abs() < 1e-10);
}

#[test]
fn gap_rejects_bad_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "k.txt", "2\n0.5 0.6\n0.5 0.5\n");
    let out = run(&["gap", "--kernel", &f]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 0"));
    let out = run(&["gap", "--kernel", "/nonexistent/k.txt"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bound_markov_prints_record() {
    let out = run(&[
        "bound",
        "--formula",
        "markov",
        "--n",
        "10000",
        "--delta",
        "0.05",
        "--gamma",
        "0.5",
        "--kl",
        "1",
        "--lambda",
        "100",
    ]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["formula"], "markov");
    let sum = v["term_emp"].as_f64().unwrap() + v["term_var"].as_f64().unwrap() + v["term_kl"].as_f64().unwrap();
    assert!((v["rhs"].as_f64().unwrap() - sum).abs() < 1e-12);
}

#[test]
fn bound_exit_codes() {
    // lambda at the n/10 limit
    let out =
        run(&["bound", "--formula", "markov", "--n", "1000", "--delta", "0.05", "--gamma", "0.5", "--lambda", "100"]);
    assert_eq!(out.status.code(), Some(2));
    // delta is mandatory
    let out = run(&["bound", "--formula", "markov", "--n", "1000", "--gamma", "0.5", "--lambda", "10"]);
    assert_eq!(out.status.code(), Some(2));
    // missing formula input
    let out = run(&["bound", "--formula", "finite-erm", "--n", "1000", "--delta", "0.05", "--gamma", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    // failed sample-size condition: printed, then exit 2 unless allowed
    let args = ["bound", "--formula", "finite-erm", "--n", "10000", "--delta", "0.05", "--gamma", "0.5", "--M", "100"];
    let out = run(&args);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["valid"], false);
    let mut allowed = args.to_vec();
    allowed.push("--allow-invalid");
    let out = run(&allowed);
    assert!(out.status.success());
    assert!(json(&out)["reason"].as_str().unwrap().contains("sample-size condition violated"));
}

#[test]
fn bound_rio_from_phi() {
    let out = run(&["bound", "--formula", "rio", "--n", "100", "--delta", "0.05", "--lambda", "5", "--phi", "0"]);
    assert!(out.status.success());
    let want = 5.0 / 800.0 + 20f64.ln() / 5.0;
    assert!((json(&out)["rhs"].as_f64().unwrap() - want).abs() < 1e-12);
    let out = run(&["bound", "--formula", "rio", "--n", "100", "--delta", "0.05", "--lambda", "5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_writes_expected_rows_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let o = out_dir.to_str().unwrap();
    let out = run(&[
        "--seed", "3", "-o", o, "--plot", "sweep", "--d", "5", "--n", "200,400", "--t", "0,0.5,1", "--seeds", "2",
        "--delta", "0.05",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["gap_sweep.csv", "bound_sweep.csv", "gap_sweep.svg", "bound_sweep.svg", "sweep_manifest.json"] {
        assert!(out_dir.join(f).exists(), "{f} missing");
    }
    let gap = fs::read_to_string(out_dir.join("gap_sweep.csv")).unwrap();
    assert_eq!(gap.lines().count(), 1 + 3 * 2 * 2);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("sweep_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "sweep");
    assert_eq!(manifest["master_seed"], 3);
}

#[test]
fn sweep_without_delta_fails_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&["-o", out_dir.to_str().unwrap(), "sweep", "--d", "4", "--n", "100"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists());
}

#[test]
fn manifest_rerun_is_byte_identical_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let out = run(&[
        "--seed",
        "11",
        "--threads",
        "1",
        "-o",
        a.to_str().unwrap(),
        "sweep",
        "--d",
        "6",
        "--n",
        "300,600",
        "--t",
        "0,0.3,0.9",
        "--seeds",
        "3",
        "--delta",
        "0.05",
    ]);
    assert!(out.status.success());
    let manifest = a.join("sweep_manifest.json");
    for threads in ["1", "8"] {
        let b = dir.path().join(format!("b{threads}"));
        let out = Command::new(BIN)
            .args(["--config", manifest.to_str().unwrap(), "-o", b.to_str().unwrap(), "sweep"])
            .env("PACBAYES_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success());
        for f in ["gap_sweep.csv", "bound_sweep.csv"] {
            assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} at {threads} threads");
        }
    }
}

#[test]
fn study_commands_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    let out = run(&["-o", o, "mse", "--d", "4", "--n", "500", "--t", "0,0.5", "--replications", "4"]);
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(dir.path().join("mse.csv")).unwrap().lines().count(), 3);

    let out =
        run(&["-o", o, "coverage", "--d", "4", "--n", "500", "--t", "0.5", "--replications", "100", "--delta", "0.05"]);
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(dir.path().join("coverage.csv")).unwrap().lines().count(), 3);

    let out = run(&["-o", o, "coverage", "--d", "4", "--n", "500", "--replications", "10", "--delta", "0.05"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["-o", o, "ar1", "--a", "0.3,0.6", "--n", "2000", "--seeds", "3", "--delta", "0.05"]);
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(dir.path().join("ar1.csv")).unwrap().lines().count(), 7);
}

#[test]
fn pair_check_passes() {
    let out = run(&["pair-check", "--count", "5"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["pairs"], 15);
    assert_eq!(v["ok"], true);
}

#[test]
fn benchmark_kernel_gap() {
    let dir = tempfile::tempdir().unwrap();
    let (p, _) = build_benchmark_kernel(4, 0.01, 0.001).unwrap();
    let f = write(dir.path(), "bench_d4.txt", &format_kernel(&p));
    let out = run(&["gap", "--kernel", &f, "--exact"]);
    assert!(out.status.success());
    let g = json(&out)["gamma_ps"].as_f64().unwrap();
    assert!((g - 0.0101747).abs() < 1e-6, "{g}");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
    assert_eq!(run(&["--threads", "0", "pair-check", "--count", "1"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
