use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polycarleson"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env_remove("POLYCARLESON_THREADS")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn decide_identity_is_bounded() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["decide", "--symbol", "identity2", "--threads", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&dir.path().join("decide.json"));
    assert_eq!(report["bidisc"]["decision"], "Bounded");
    assert_eq!(report["dagger"]["outcome"], "SufficiencyHolds");
    assert!(report["tolerances"]["rank_tol"].is_number());
    assert!(dir.path().join("warnings.jsonl").exists());
}

#[test]
fn exponent_writes_six_rows_and_annotated_plot() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["exponent", "--symbol", "product2", "--beta", "0"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let csv = fs::read_to_string(dir.path().join("exponent.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);
    let svg = fs::read_to_string(dir.path().join("exponent.svg")).unwrap();
    let slope: f64 = svg
        .split("slope = ")
        .nth(1)
        .and_then(|s| s.split('<').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((slope - 3.0).abs() <= 0.15, "slope {slope}");
}

#[test]
fn carleson_four_fold_product_is_in_band() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["carleson", "--symbol", "repeated-product4", "--budget", "4000000"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let report = json(&dir.path().join("carleson.json"));
    let slope = report["scans"][0]["fit"]["slope"].as_f64().unwrap();
    assert!((slope + 1.0).abs() <= 0.2, "slope {slope}");
}

#[test]
fn out_of_band_expectation_fails_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"symbol": "product1", "budget": 200000, "expect_slope": {"slope": 3.0, "tol": 0.1}}"#,
    )
    .unwrap();
    let o = run(&["exponent", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_configs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"symbol": "product2", "budgte": 10}"#).unwrap();
    assert_eq!(run(&["exponent", "--config", cfg.to_str().unwrap()], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["decide", "--symbol", "nope"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["decide", "--config", "/no/such/file.json"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["exponent", "--format", "png"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["decide"], dir.path()).status.code(), Some(2));
}

#[test]
fn format_flag_limits_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["exponent", "--symbol", "product1", "--budget", "100000", "--format", "csv"],
        dir.path(),
    );
    assert!(o.status.code() == Some(0) || o.status.code() == Some(1));
    assert!(dir.path().join("exponent.csv").exists());
    assert!(!dir.path().join("exponent.svg").exists());
    assert!(!dir.path().join("exponent.json").exists());
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"symbol": "diagonal-pair", "indices": [1, 2], "seed": 3}"#).unwrap();
    let o = run(&["contact", "--config", cfg.to_str().unwrap(), "--seed", "9"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let written = json(&dir.path().join("config.json"));
    assert_eq!(written["seed"], 9);
    let csv = fs::read_to_string(dir.path().join("contact.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with("positive-dimensional")));
}

#[test]
fn check_props_writes_one_report_per_property() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["check-props", "--seed", "11"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let reports: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".json") && n != "config.json")
        .collect();
    assert!(reports.len() >= 10, "{reports:?}");
    for kind in ["mobius", "linearization", "schwarz", "slice_gradient_constancy", "jc_check"] {
        assert!(reports.iter().any(|n| n.starts_with(kind)), "{kind}");
    }
}

#[test]
fn every_named_symbol_runs_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let listing = run(&["symbols"], dir.path());
    let names: Vec<String> = String::from_utf8(listing.stdout)
        .unwrap()
        .lines()
        .map(|l| l.split_whitespace().next().unwrap().to_string())
        .collect();
    assert!(names.len() >= 15);
    for name in names {
        let o = run(&["contact", "--symbol", &name, "--format", "json"], dir.path());
        assert_eq!(o.status.code(), Some(0), "{name}");
    }
}

#[test]
fn csv_bytes_do_not_depend_on_threads() {
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let dir = tempfile::tempdir().unwrap();
        run(
            &["carleson", "--symbol", "diagonal-pair", "--budget", "100000", "--seed", "5", "--threads", threads],
            dir.path(),
        );
        outputs.push(fs::read(dir.path().join("carleson.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}
