use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use probfn::verify::hyperbolic_rejection_mc;
use serde_json::Value;

fn probfn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_probfn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn num(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or_else(|| panic!("missing {key}"))
}

const PHI_1: f64 = 0.841_344_746_068_542_9;
const PDF_1: f64 = 0.241_970_724_519_143_37;

#[test]
fn eval_halfspace_matches_normal_cdf() {
    let v = json(&probfn(&["eval", "--fixture", "halfspace", "--x", "1", "--n", "10000", "--seed", "7"]));
    assert!((num(&v, "value") - PHI_1).abs() < 1e-3);
    assert_eq!(v["seed"], 7);
    assert_eq!(v["method"], "qmc");
    assert!(v["std_error"].is_null(), "no standard error for QMC");
}

#[test]
fn mc_eval_reports_standard_error() {
    let v = json(&probfn(&["eval", "--x", "1", "--method", "mc"]));
    let se = num(&v, "std_error");
    assert!((num(&v, "value") - PHI_1).abs() < 4.0 * se);
}

#[test]
fn grad_halfspace_with_fd_check() {
    let v = json(&probfn(&["grad", "--fixture", "halfspace", "--x", "1", "--check-fd"]));
    assert!((v["gradient"][0].as_f64().unwrap() - PDF_1).abs() < 1e-3);
    assert!(num(&v["fd_check"], "fd_rel_err") <= 1e-6);
}

#[test]
fn grad_slab_matches_chain_rule() {
    let v = json(&probfn(&["grad", "--fixture", "slab", "--x", "-1"]));
    let e2 = std::f64::consts::E.powi(2);
    let tau = (e2 - 1.0).sqrt();
    let pdf = (-0.5 * tau * tau).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let exact = 2.0 * pdf * (-e2 / tau);
    assert!((v["gradient"][0].as_f64().unwrap() - exact).abs() < 1e-3);
}

#[test]
fn infinite_fixture_has_zero_gradient() {
    let v = json(&probfn(&["grad", "--fixture", "infinite"]));
    assert_eq!(v["gradient"][0].as_f64(), Some(0.0));
    assert_eq!(num(&v, "value"), 1.0);
}

#[test]
fn enlarged_hyperbolic_agrees_with_rejection_sampling() {
    let v = json(&probfn(&["eval", "--fixture", "hyperbolic", "--x", "1", "--eps", "0.01", "--method", "mc"]));
    let (p, se_mc) = hyperbolic_rejection_mc(1.0, 1_000_000, 11);
    let se = num(&v, "std_error");
    let gap = (num(&v, "value") - p).abs();
    assert!(gap <= 3.0 * se, "gap {gap} vs SE {se} (oracle SE {se_mc})");
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "fixture = \"halfspace\"\nsamples = 10\n").unwrap();
    let out = probfn(&["--config", path.to_str().unwrap(), "eval"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("samples"));
}

#[test]
fn bad_flags_exit_2() {
    for args in [
        &["eval", "--fixture", "torus"][..],
        &["eval", "--x", "1,,2"],
        &["eval", "--n", "0"],
        &["eval", "--fixture", "halfspace", "--eps", "0.1"],
        &["eval", "--fixture", "halfspace", "--x", "-1"],
        &["grad", "--tie-policy", "max"],
    ] {
        assert_eq!(probfn(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, "fixture = \"slab\"\nx = [-1.0]\nn = 500\n").unwrap();
    let cfg = path.to_str().unwrap();
    let v = json(&probfn(&["--config", cfg, "eval", "--n", "64"]));
    assert_eq!(v["fixture"], "slab");
    assert_eq!(v["n"], 64);
}

#[test]
fn unreachable_level_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tight.toml");
    fs::write(&path, "[energy]\np_level = 0.999\nwind_upper = 0.5\ngeneration_upper = 12.0\n").unwrap();
    let out = probfn(&["--config", path.to_str().unwrap(), "solve-energy"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no feasible start"));
}

#[test]
fn verify_quick_passes_and_failures_exit_5() {
    let out = probfn(&["verify", "--quick"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("chi-normalization") && table.contains("0 failed"));

    let out = probfn(&["verify", "--n", "4"]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn energy_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("energy");
    let v = json(&probfn(&["solve-energy", "--out", out_dir.to_str().unwrap()]));
    assert_eq!(v["status"], "converged");
    let val: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("validation.json")).unwrap()).unwrap();
    let p = num(&val, "value");
    assert!((0.79..=0.81).contains(&p), "validated probability {p}");
    let trace = fs::read_to_string(out_dir.join("trace.jsonl")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    let header: Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(header["seed"], 2024);
    assert_eq!(lines.len() - 1, v["iterations"].as_u64().unwrap() as usize);
    for l in &lines[1..] {
        let r: Value = serde_json::from_str(l).unwrap();
        assert!(r["phi"].is_f64());
    }
    let csv = fs::read_to_string(out_dir.join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some("iteration,cost,phi,accepted"));
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn every_command_is_byte_reproducible() {
    let commands: [&[&str]; 5] = [
        &["eval", "--fixture", "ball", "--eps", "0.1", "--n", "2000"],
        &["grad", "--fixture", "hyperbolic", "--check-fd", "--n", "2000"],
        &["grad", "--fixture", "energy", "--method", "mc", "--n", "2000"],
        &["solve-energy", "--n", "2000"],
        &["verify", "--quick"],
    ];
    for args in commands {
        let runs: Vec<_> = (0..2)
            .map(|_| {
                let dir = tempfile::tempdir().unwrap();
                let out = dir.path().join("out");
                let mut full = args.to_vec();
                full.extend(["--threads", "1", "--out", out.to_str().unwrap()]);
                let o = probfn(&full);
                assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
                let files = snapshot(&out);
                assert!(!files.is_empty(), "{args:?} wrote nothing");
                for (name, body) in &files {
                    let text = std::str::from_utf8(body).expect("UTF-8 output");
                    assert!(!text.contains('\r'), "{name} has CR line endings");
                    assert!(text.ends_with('\n'), "{name} lacks a final newline");
                }
                (o.stdout, files)
            })
            .collect();
        assert_eq!(runs[0], runs[1], "{args:?} differs between runs");
    }
}
