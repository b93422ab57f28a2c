use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use subgraph_stein_cli::config::LoadedConfig;

const SMALL: &str = r#"{
  "schema": 1,
  "pattern": "triangle",
  "n_grid": [4, 5],
  "p": {"fixed": 0.5},
  "m": 5000,
  "seed": 1
}"#;

fn sgstein(dir: &Path, cfg: &str, args: &[&str]) -> (Output, PathBuf) {
    let path = dir.join("cfg.json");
    fs::write(&path, cfg).unwrap();
    let out = dir.join("out");
    let output = Command::new(env!("CARGO_BIN_EXE_sgstein"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    (output, out)
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn oracle_verify_small_triangle_passes() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = sgstein(dir.path(), SMALL, &["oracle-verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(out.join("oracle_verify.json"));
    assert_eq!(v["results"]["passed"], true);
    for pt in v["results"]["points"].as_array().unwrap() {
        for key in ["ht_residual_max", "w3_residual_max", "variance_residual"] {
            assert!(pt[key].as_f64().unwrap() <= 1e-9, "{key}");
        }
    }
    assert!(v["gaps"].as_array().unwrap().is_empty());
}

#[test]
fn bad_config_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = sgstein(dir.path(), &SMALL.replace("5000", "10"), &["mc-run"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 6"), "{err}");
}

#[test]
fn budget_gaps_keep_other_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = sgstein(dir.path(), SMALL, &["oracle-verify", "--budget-configs", "1024"]);
    // n = 4 has 6 edges, n = 5 has 10: both fit in 2^10
    assert_eq!(o.status.code(), Some(0));
    let (o, _) = sgstein(dir.path(), SMALL, &["oracle-verify", "--budget-configs", "512"]);
    assert_eq!(o.status.code(), Some(3));
    let v = json(out.join("oracle_verify.json"));
    let gaps = v["gaps"].as_array().unwrap();
    assert_eq!(gaps.len(), 1);
    assert_eq!(gaps[0]["n"], 5);
    assert_eq!(gaps[0]["budget"], true);
    let points = v["results"]["points"].as_array().unwrap();
    assert_eq!(points.len(), 1);
    assert_eq!(points[0]["n"], 4);
}

#[test]
fn csv_carries_provenance_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = sgstein(dir.path(), SMALL, &["mc-run"]);
    assert_eq!(o.status.code(), Some(0));
    let hash = LoadedConfig::from_path(&dir.path().join("cfg.json")).unwrap().hash();
    let text = fs::read_to_string(out.join("mc_run.csv")).unwrap();
    let mut lines = text.lines();
    let first = lines.next().unwrap();
    assert!(first.starts_with("# ") && first.contains(&hash), "{first}");
    assert_eq!(
        lines.next().unwrap(),
        "n,p,pattern,m,seed,d_hat,dkw_eps,sigma,psi,rate_dense,rate_sparse"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    let j = json(out.join("mc_run.json"));
    assert_eq!(j["config_sha256"], hash.as_str());
    for (row, rec) in rows.iter().zip(j["results"].as_array().unwrap()) {
        let d: f64 = row[5].parse().unwrap();
        assert_eq!(d.to_bits(), rec["d_hat"].as_f64().unwrap().to_bits());
    }
}

#[test]
fn seed_override_changes_samples_and_hash() {
    let dir = tempfile::tempdir().unwrap();
    let (_, out) = sgstein(dir.path(), SMALL, &["mc-run"]);
    let a = json(out.join("mc_run.json"));
    let (_, out) = sgstein(dir.path(), SMALL, &["mc-run", "--seed", "2"]);
    let b = json(out.join("mc_run.json"));
    assert_eq!(b["seed"], 2);
    assert_ne!(a["config_sha256"], b["config_sha256"]);
    assert_ne!(a["results"][0]["d_hat"], b["results"][0]["d_hat"]);
}

#[test]
fn catalog_lists_triangle_subgraphs() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = sgstein(dir.path(), SMALL, &["catalog"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(out.join("catalog.json"));
    // edge, path on 3 vertices, triangle
    assert_eq!(v["results"]["classes"].as_array().unwrap().len(), 3);
    let pt = &v["results"]["points"][0];
    assert_eq!(pt["copies"], 4);
    assert_eq!(pt["psi"]["psi_min"].as_f64().unwrap(), 8.0);
}

#[test]
fn rate_fit_reports_short_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = sgstein(dir.path(), SMALL, &["rate-fit"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(out.join("rate_fit.json"));
    assert!(v["results"]["inv_n_sqrt_1mp"]["error"].as_str().unwrap().contains("need 4"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}
