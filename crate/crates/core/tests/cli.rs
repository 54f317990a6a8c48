use std::fs;
use std::path::Path;
use std::process::Command;

use hetraffic::cli::{run, ExperimentConfig, RunOptions, Subcommand};

const BIN: &str = env!("CARGO_BIN_EXE_hetraffic");

fn quick() -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/quick.json");
    ExperimentConfig::load(&path).unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn worker_count_does_not_change_any_output() {
    let cfg = quick();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for sub in Subcommand::ALL {
        for (dir, workers) in [(a.path(), 1), (b.path(), 8)] {
            let opts = RunOptions {
                workers: Some(workers),
                out: Some(dir.to_path_buf()),
                ..Default::default()
            };
            run(sub, &cfg, &opts).unwrap();
        }
    }
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert_eq!(fa.len(), 12);
    assert_eq!(fa, fb);
}

#[test]
fn outputs_carry_hash_version_and_seed() {
    let cfg = quick();
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        seed: Some(99),
        out: Some(dir.path().to_path_buf()),
        ..Default::default()
    };
    let out = run(Subcommand::TelecomChf, &cfg, &opts).unwrap();
    let mut eff = cfg.clone();
    eff.seed = 99;
    let csv = fs::read_to_string(dir.path().join("telecom_chf.csv")).unwrap();
    let first = csv.lines().next().unwrap();
    assert_eq!(
        first,
        format!("# hetraffic {} telecom-chf config-sha256={} seed=99", hetraffic::cli::VERSION, eff.hash())
    );
    assert_eq!(csv.lines().nth(1).unwrap(), "x,theta,log_re,log_im,chf_re,chf_im");
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("telecom_chf.json")).unwrap()).unwrap();
    assert_eq!(json["meta"]["config_sha256"], eff.hash());
    assert_eq!(json["meta"]["seed"], 99);
    let embedded: ExperimentConfig = serde_json::from_value(json["meta"]["config"].clone()).unwrap();
    assert_eq!(embedded, eff.provenance());
    assert_eq!(out.files.len(), 2);
}

#[test]
fn renewal_ld_light_tail_table() {
    let dir = tempfile::tempdir().unwrap();
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/renewal_ld_exponential.json");
    let mut cfg = ExperimentConfig::load(&path).unwrap();
    cfg.n_rep = 20_000;
    let opts = RunOptions {
        out: Some(dir.path().to_path_buf()),
        ..Default::default()
    };
    run(Subcommand::RenewalLd, &cfg, &opts).unwrap();
    let csv = fs::read_to_string(dir.path().join("renewal_ld.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[1], "u,p_lower,se_lower,scaled_lower,predicted_lower,ratio,p_upper,scaled_upper");
    assert_eq!(lines.len(), 2 + 3);
    // no regularly varying tail, so no prediction columns
    for l in &lines[2..] {
        let f: Vec<_> = l.split(',').collect();
        assert_eq!(f[4], "");
        assert_eq!(f[5], "");
    }
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/quick.json");

    let ok = Command::new(BIN)
        .args(["telecom-chf", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(ok.code(), Some(0));

    // tiny budget: verdicts are inconclusive, so --assert must fail
    let asserted = Command::new(BIN)
        .args(["limit-check", "--assert", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(dir.path())
        .env("HETRAFFIC_WORKERS", "2")
        .output()
        .unwrap();
    assert_eq!(asserted.status.code(), Some(3));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"n_rep": 10, "lambdas": [4, 2]}"#).unwrap();
    let invalid = Command::new(BIN)
        .args(["scaling", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(invalid.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&invalid.stderr).contains("model"));

    let unknown = dir.path().join("unknown.json");
    fs::write(&unknown, r#"{"n_rep": 10, "lambda": [4]}"#).unwrap();
    let st = Command::new(BIN).args(["simulate", "--config"]).arg(&unknown).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&st.stderr).contains("lambda"));
}

#[test]
fn seed_env_override() {
    let dir1 = tempfile::tempdir().unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    let cfg_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/quick.json");
    for (d, seed) in [(dir1.path(), "5"), (dir2.path(), "6")] {
        let st = Command::new(BIN)
            .args(["covariance", "--config"])
            .arg(&cfg_path)
            .arg("--out")
            .arg(d)
            .env("HETRAFFIC_SEED", seed)
            .output()
            .unwrap();
        assert!(st.status.success());
    }
    let a = fs::read_to_string(dir1.path().join("covariance.csv")).unwrap();
    let b = fs::read_to_string(dir2.path().join("covariance.csv")).unwrap();
    assert!(a.starts_with("# hetraffic") && a.lines().next().unwrap().ends_with("seed=5"));
    assert_ne!(a, b);
}
