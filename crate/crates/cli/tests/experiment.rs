use std::collections::HashMap;
use std::fs;
use std::process::Command;

use asud_cli::experiment::{AGGREGATE_HEADER, TRIALS_HEADER};
use asud_cli::{export_plotdata, run_experiment, ExperimentConfig};
use asud_core::driver::Method;

fn small_config(out: &std::path::Path) -> ExperimentConfig {
    ExperimentConfig {
        function: 2,
        dims: vec![2],
        methods: vec![Method::McLs, Method::AsudLs],
        grid_size: 600,
        seed: 5,
        trials: 3,
        n_max: 20,
        out: out.to_path_buf(),
        ..Default::default()
    }
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut cfg = small_config(a.path());
    cfg.trials = 1;
    run_experiment(&cfg).unwrap();
    cfg.out = b.path().to_path_buf();
    run_experiment(&cfg).unwrap();
    for name in ["trials.csv", "aggregate.csv"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name} differs"
        );
    }
}

#[test]
fn headers_are_exact() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&small_config(dir.path())).unwrap();
    let trials = fs::read_to_string(&out.trials_csv).unwrap();
    assert_eq!(trials.lines().next().unwrap(), TRIALS_HEADER.join(","));
    assert_eq!(
        TRIALS_HEADER.join(","),
        "method,function,d,trial,l,N_l,M_l,F_l,E_l,V_l,R_l,inv_alpha,inv_beta"
    );
    let agg = fs::read_to_string(&out.aggregate_csv).unwrap();
    assert_eq!(agg.lines().next().unwrap(), AGGREGATE_HEADER.join(","));
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(&out.manifest_json).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 5);
    assert!(manifest["dimensions"]["2"]["ladder"].as_array().unwrap().len() > 3);
    assert!(dir.path().join("cache").read_dir().unwrap().count() == 1);
}

#[test]
fn aggregate_matches_offline_means() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&small_config(dir.path())).unwrap();
    let mut sums: HashMap<(String, String), (Vec<f64>, usize)> = HashMap::new();
    let mut rdr = csv::Reader::from_path(&out.trials_csv).unwrap();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let key = (rec[0].to_string(), rec[4].to_string());
        let vals: Vec<f64> = (7..13).map(|i| rec[i].parse().unwrap()).collect();
        let e = sums.entry(key).or_insert((vec![0.0; 6], 0));
        for (acc, v) in e.0.iter_mut().zip(vals) {
            *acc += v;
        }
        e.1 += 1;
    }
    let mut rdr = csv::Reader::from_path(&out.aggregate_csv).unwrap();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let (s, n) = &sums[&(rec[0].to_string(), rec[3].to_string())];
        assert_eq!(rec[12].parse::<usize>().unwrap(), *n);
        for (k, col) in (6..12).enumerate() {
            let agg: f64 = rec[col].parse().unwrap();
            let offline = s[k] / *n as f64;
            assert!((agg - offline).abs() <= 1e-12 * offline.abs().max(1.0), "col {col}: {agg} vs {offline}");
        }
        rows += 1;
    }
    assert_eq!(rows, sums.len());
}

#[test]
fn invalid_configs_fail_fast() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.function = 1;
    cfg.dims = vec![1];
    assert!(run_experiment(&cfg).is_err());
    cfg.dims = vec![2];
    cfg.trials = 0;
    assert!(run_experiment(&cfg).is_err());
}

#[test]
fn failed_trials_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.methods = vec![Method::McLs];
    cfg.function = 4;
    cfg.max_redraws = 1;
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.manifest.failures.len(), 3);
    assert_eq!(out.manifest.cells[0].trials_ok, 0);
    let agg = fs::read_to_string(&out.aggregate_csv).unwrap();
    assert_eq!(agg.lines().count(), 1);
}

#[test]
fn export_reshapes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.ladder = Some(vec![3, 5, 8]);
    let out = run_experiment(&cfg).unwrap();
    let mut plot = Vec::new();
    let rows = export_plotdata(fs::File::open(&out.aggregate_csv).unwrap(), &mut plot).unwrap();
    assert_eq!(rows, 6);
    let text = String::from_utf8(plot).unwrap();
    assert_eq!(text.lines().count(), 7);

    // A single row keeps every field verbatim.
    let agg = fs::read_to_string(&out.aggregate_csv).unwrap();
    let mut lines = agg.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    let single = format!("{}\n{}\n", header.join(","), first.join(","));
    let mut plot = Vec::new();
    export_plotdata(single.as_bytes(), &mut plot).unwrap();
    let text = String::from_utf8(plot).unwrap();
    let mut plines = text.lines();
    let pheader: Vec<&str> = plines.next().unwrap().split(',').collect();
    let prow: Vec<&str> = plines.next().unwrap().split(',').collect();
    for (name, value) in header.iter().zip(&first) {
        let i = pheader.iter().position(|h| h == name).unwrap();
        assert_eq!(prow[i], *value);
    }
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    fs::write(
        &cfg_path,
        r#"{"function": 2, "dims": [2], "methods": ["ASGD-LS"], "grid_size": 400, "trials": 5, "n_max": 10}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_asud"))
        .args(["run", "--config"])
        .arg(&cfg_path)
        .args(["--trials", "2", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["trials"], 2);
    assert_eq!(manifest["config"]["grid_size"], 400);
    assert_eq!(manifest["config"]["methods"][0], "ASGD-LS");
}
