use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use msstarch::estimation::EstimationResult;
use msstarch::io;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msstarch")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic_28.csv")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate_into(dir: &Path, t: &str, seed: &str) -> Output {
    run(&["simulate", "--rows", "6", "--cols", "6", "--t", t, "--seed", seed, "--write-weights", "--out-dir", s(dir)])
}

#[test]
fn simulate_writes_three_files_reproducibly() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let o = run(&["simulate", "--rows", "3", "--cols", "4", "--t", "50", "--seed", "9", "--out-dir", s(&a)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("n=12 T=50 seed=9"));
    let mut files: Vec<String> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    assert_eq!(files, ["log_squared.csv", "panel.csv", "regimes.csv"]);
    let o = run(&["simulate", "--rows", "3", "--cols", "4", "--t", "50", "--seed", "9", "--out-dir", s(&b)]);
    assert!(o.status.success());
    for f in &files {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    // Existing outputs are kept unless --force is given.
    let o = run(&["simulate", "--rows", "3", "--cols", "4", "--t", "50", "--seed", "1", "--out-dir", s(&b)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--force"));
    let o = run(&["simulate", "--rows", "3", "--cols", "4", "--t", "50", "--seed", "1", "--force", "--out-dir", s(&b)]);
    assert!(o.status.success());
    assert_ne!(std::fs::read(a.join("panel.csv")).unwrap(), std::fs::read(b.join("panel.csv")).unwrap());
}

#[test]
fn invalid_parameter_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--rows", "3", "--cols", "3", "--t", "20", "--rho1", "1.5", "--out-dir", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("rho1"));
    assert!(!tmp.path().join("panel.csv").exists());
    let o = run(&["simulate", "--rows", "3", "--cols", "3", "--t", "20", "--delta2", "-0.3", "--out-dir", s(tmp.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["simulate", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["simulate", "--rows", "3", "--cols", "3"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"simulate": {"rows": 2, "cols": 2, "t": 30, "seed": 4, "gamma2": 0.7}}"#).unwrap();
    let o = run(&["simulate", "--config", s(&cfg), "--t", "25", "--out-dir", s(tmp.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("n=4 T=25 seed=4"));
    std::fs::write(&cfg, r#"{"rows": 2, "cols": 2, "t": 30, "colour": 1}"#).unwrap();
    let o = run(&["simulate", "--config", s(&cfg), "--out-dir", s(&tmp.path().join("x"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("colour"));
}

#[test]
fn build_weights_on_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["build-weights", "--input", s(&fixture()), "--k", "5", "--write-distances", "--out-dir", s(tmp.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("zero policy: not engaged"));
    let w = io::read_weights(tmp.path().join("weights.csv")).unwrap();
    assert_eq!(w.n(), 28);
    for i in 0..28 {
        let row: f64 = w.values().row(i).sum();
        assert!((row - 1.0).abs() < 1e-12);
        assert_eq!(w.neighbours(i), 5);
    }
    let meta: io::WeightsMeta = io::read_json(tmp.path().join("weights.meta.json")).unwrap();
    assert!(meta.row_normalized);
    let d = io::read_distances(tmp.path().join("distances.csv")).unwrap();
    assert_eq!(d.n(), 28);

    let o = run(&["build-weights", "--input", s(&fixture()), "--k", "28", "--out-dir", s(&tmp.path().join("k28"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--k"));
}

#[test]
fn constant_prices_engage_zero_policy() {
    let tmp = tempfile::tempdir().unwrap();
    let prices = tmp.path().join("prices.csv");
    let mut text = String::from("time,A,B,C\n");
    for t in 0..80 {
        let a = 100.0 * (1.0 + 0.01 * ((t * 7 % 13) as f64 - 6.0) / 6.0);
        let b = 50.0 + ((t * 5 % 11) as f64);
        text.push_str(&format!("{t},{a},{b},42\n"));
    }
    std::fs::write(&prices, text).unwrap();
    let o = run(&["build-weights", "--input", s(&prices), "--prices", "--k", "1", "--out-dir", s(tmp.path())]);
    let out = stdout(&o);
    assert!(out.contains("zero policy: 79 zero observations floored"), "{out}");
    assert!(out.contains("C: 79 of 79"), "{out}");
    // The floored series is constant, so its log-ARCH fit is degenerate.
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`C`"), "{}", stderr(&o));

    // A single zero return is floored and the build succeeds.
    let mut text = String::from("time,A,B\n");
    for t in 0..80 {
        let a = 100.0 * (1.0 + 0.01 * ((t * 7 % 13) as f64 - 6.0) / 6.0);
        let b = if t == 40 { 58.0 } else { 50.0 + ((t * 5 % 11) as f64) };
        text.push_str(&format!("{t},{a},{b}\n"));
    }
    std::fs::write(&prices, text).unwrap();
    let o = run(&["build-weights", "--input", s(&prices), "--prices", "--k", "1", "--force", "--out-dir", s(tmp.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("B: 1 of 79"), "{}", stdout(&o));
}

#[test]
fn fit_and_smooth_on_simulated_panel() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = simulate_into(d, "300", "12");
    assert!(o.status.success(), "{}", stderr(&o));
    let panel = d.join("panel.csv");
    let weights = d.join("weights.csv");
    let o = run(&["fit", "--panel", s(&panel), "--weights", s(&weights), "--mode", "both", "--out-dir", s(d)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("preferred=two-regime"), "{}", stdout(&o));
    let two: EstimationResult = io::read_json(d.join("fit_two_regime.json")).unwrap();
    let one: EstimationResult = io::read_json(d.join("fit_one_regime.json")).unwrap();
    assert!(two.converged && one.converged);
    assert!(two.bic < one.bic);
    assert_eq!(two.names.len(), 11);
    assert!(two.std_errors.is_some());

    let o = run(&["smooth", "--panel", s(&panel), "--weights", s(&weights), "--estimate", s(&d.join("fit_two_regime.json")), "--out-dir", s(d)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = io::read_smoothing_csv(d.join("smoothed.csv")).unwrap();
    assert_eq!(rows.len(), 300);
    for (_, r) in &rows {
        assert!((r[0] + r[1] - 1.0).abs() < 1e-10);
        assert!((r[2] + r[3] - 1.0).abs() < 1e-10);
    }
    let last = rows.last().unwrap().1;
    assert_eq!((last[0], last[1]), (last[2], last[3]));
    let (_, path) = io::read_regime_path(d.join("smoothed_regimes.csv")).unwrap();
    let (_, truth) = io::read_regime_path(d.join("regimes.csv")).unwrap();
    assert!(path.agreement(&truth) >= 0.9, "agreement {}", path.agreement(&truth));
}

#[test]
fn fit_and_smooth_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = run(&["simulate", "--rows", "3", "--cols", "9", "--t", "40", "--write-weights", "--out-dir", s(d)]);
    assert!(o.status.success());
    let o = run(&["fit", "--panel", s(&fixture()), "--weights", s(&d.join("weights.csv")), "--out-dir", s(d)]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("28") && err.contains("27x27"), "{err}");

    let o = run(&["smooth", "--panel", s(&d.join("panel.csv")), "--weights", s(&d.join("weights.csv")), "--estimate", s(&d.join("missing.json")), "--out-dir", s(d)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.json"));
}

#[test]
fn mc_study_config_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = d.join("study.json");
    std::fs::write(&cfg, r#"{"grid_dims": [[2, 3]], "horizons": [60], "replications": 0}"#).unwrap();
    let o = run(&["mc-study", "--config", s(&cfg), "--out-dir", s(d)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("replications"));

    std::fs::write(&cfg, r#"{"grid_dims": [[2, 3]], "horizons": "sixty"}"#).unwrap();
    let o = run(&["mc-study", "--config", s(&cfg), "--out-dir", s(d)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("horizons") || stderr(&o).contains("sequence"), "{}", stderr(&o));

    std::fs::write(
        &cfg,
        r#"{"grid_dims": [[2, 3]], "horizons": [60, 80], "replications": 2, "master_seed": 3,
            "fit_options": {"n_starts": 1, "compute_std_errors": false}}"#,
    )
    .unwrap();
    let (a, b) = (d.join("a"), d.join("b"));
    for out in [&a, &b] {
        let o = run(&["mc-study", "--config", s(&cfg), "--out-dir", s(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["study_wide.csv", "study_tidy.csv", "study_records.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let wide = std::fs::read_to_string(a.join("study_wide.csv")).unwrap();
    assert!(wide.lines().next().unwrap().ends_with("n=6 T=60,n=6 T=80"));
    assert!(wide.lines().any(|l| l.starts_with("gamma2,0.800,")));
}
