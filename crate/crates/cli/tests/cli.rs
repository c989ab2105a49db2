use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fbm_chaos(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbm-chaos"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn same_seed_gives_identical_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["simulate", "--samples", "2000", "--seed", "11", "--threads", "3"];
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(fbm_chaos(&args, &a).status.success());
    assert!(fbm_chaos(&args, &b).status.success());
    for table in ["path_covariance.csv", "path_sample.csv", "sheet_sample.csv"] {
        let x = fs::read(a.join("simulate").join(table)).unwrap();
        let y = fs::read(b.join("simulate").join(table)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{table}");
    }
}

#[test]
fn report_lists_judged_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fbm_chaos(&["exact-vs-chaos", "--samples", "10", "--mean-samples", "2000"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let r = report(&tmp.path().join("exact-vs-chaos"));
    assert_eq!(r["experiment"], "exact-vs-chaos");
    assert_eq!(r["passed"], true);
    let names: Vec<&str> = r["metrics"].as_array().unwrap().iter().map(|m| m["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"sup_node_error") && names.contains(&"terminal_mean"));
    let header = fs::read_to_string(tmp.path().join("exact-vs-chaos/chaos_norm_decay.csv")).unwrap();
    assert!(header.starts_with("n,norm,bound"));
}

#[test]
fn empty_region_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fbm_chaos(&["negativity", "--T", "1"], tmp.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no grid node"));
}

#[test]
fn first_order_truncation_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fbm_chaos(&["negativity", "--truncation", "1", "--samples", "200"], tmp.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("truncation too low"));
}

#[test]
fn regime_undefined_at_one_half() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fbm_chaos(&["girsanov-check", "--alpha", "0.5", "--samples", "10"], tmp.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("regime undefined"));
}

#[test]
fn euler_is_exact_without_noise() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fbm_chaos(&["euler-study", "--a", "0", "--samples", "50"], tmp.path());
    assert!(out.status.success());
    let r = report(&tmp.path().join("euler-study"));
    for m in r["metrics"].as_array().unwrap() {
        assert_eq!(m["value"], 0.0, "{}", m["name"]);
    }
}

#[test]
fn corrupted_grading_fails_the_operator_suite() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(fbm_chaos(&["operator-check"], &tmp.path().join("ok")).status.success());
    let out = fbm_chaos(&["operator-check", "--corrupt-grading"], &tmp.path().join("bad"));
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&tmp.path().join("bad/operator-check"))["passed"], false);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "alpha = 0.7\nsamples = 500\ngrid-n = 4\n").unwrap();
    let out = fbm_chaos(&["simulate", "--config", cfg.to_str().unwrap(), "--alpha", "0.3"], tmp.path());
    assert!(out.status.success());
    let r = report(&tmp.path().join("simulate"));
    assert_eq!(r["parameters"]["alpha"], 0.3);
    assert_eq!(r["parameters"]["samples"], 500);
    fs::write(&cfg, "alpah = 0.7\n").unwrap();
    assert!(!fbm_chaos(&["simulate", "--config", cfg.to_str().unwrap()], tmp.path()).status.success());
}
