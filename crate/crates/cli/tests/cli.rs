use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gdfm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gdfm"))
        .args(args)
        .env_remove("GDFM_SEED")
        .output()
        .expect("gdfm runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simulate_eq7(out: &Path, n: &str, t: &str, sigma: &str, seed: &str) -> Output {
    gdfm(&[
        "simulate", "--example", "eq7", "--n", n, "--T", t, "--idio-sigma", sigma, "--seed", seed,
        "--out", p(out),
    ])
}

/// simulate, blocks and recover into one run directory.
fn pipeline(dir: &Path) {
    let o = simulate_eq7(dir, "20", "6000", "0.1", "7");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let spec = dir.join("spec.json");
    let o = gdfm(&["blocks", "--spec", p(&spec), "--out", p(dir)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = gdfm(&[
        "recover",
        "--input",
        p(&dir.join("y.csv")),
        "--plan",
        p(&dir.join("plan.json")),
        "--truth",
        p(dir),
        "--out",
        p(dir),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn simulate_writes_five_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate_eq7(dir.path(), "50", "2000", "0.5", "7");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["y.csv", "chi.csv", "xi.csv", "eps.csv", "spec.json"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let y = fs::read_to_string(dir.path().join("y.csv")).unwrap();
    assert!(y.starts_with("t,s1,s2,"));
    assert_eq!(y.lines().count(), 2001);
}

#[test]
fn spec_with_q_mismatch_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(
        &spec,
        r#"{"q": 2, "filters": [[[1.0], [-0.5]]], "idio": {"ar": 0.5, "sigma": 1.0}, "seed": 1}"#,
    )
    .unwrap();
    let o = gdfm(&["simulate", "--spec", p(&spec), "--out", p(&dir.path().join("run"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("invalid model spec"), "{}", stderr(&o));
}

#[test]
fn simulation_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(code(&simulate_eq7(a.path(), "6", "500", "0.5", "3")), 0);
    assert_eq!(code(&simulate_eq7(b.path(), "6", "500", "0.5", "3")), 0);
    for f in ["y.csv", "chi.csv", "xi.csv", "eps.csv", "spec.json"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn seed_variable_overrides_flag() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(code(&simulate_eq7(a.path(), "4", "300", "0.5", "11")), 0);
    let o = Command::new(env!("CARGO_BIN_EXE_gdfm"))
        .args(["simulate", "--example", "eq7", "--n", "4", "--T", "300", "--seed", "1", "--out"])
        .arg(b.path())
        .env("GDFM_SEED", "11")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(
        fs::read(a.path().join("y.csv")).unwrap(),
        fs::read(b.path().join("y.csv")).unwrap()
    );
    let bad = Command::new(env!("CARGO_BIN_EXE_gdfm"))
        .args(["simulate", "--example", "eq7", "--n", "4", "--out"])
        .arg(b.path())
        .env("GDFM_SEED", "seven")
        .output()
        .unwrap();
    assert_eq!(code(&bad), 2);
}

#[test]
fn full_pipeline_verifies() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path());
    for f in ["plan.json", "eps_hat.csv", "chi_hat.csv", "report.json"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let report = fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert!(report.contains("\"version\"") && report.contains("\"options\""));
    let o = gdfm(&["verify", "--run", p(dir.path())]);
    assert_eq!(code(&o), 0, "{}{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
}

#[test]
fn verify_rejects_white_noise_shocks() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path());
    // shocks of an unrelated run are white noise with respect to this panel
    let other = tempfile::tempdir().unwrap();
    assert_eq!(code(&simulate_eq7(other.path(), "2", "6000", "0.1", "99")), 0);
    fs::copy(other.path().join("eps.csv"), dir.path().join("eps_hat.csv")).unwrap();
    let o = gdfm(&["verify", "--run", p(dir.path())]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("subordination") || err.contains("rotation"), "{err}");
}

#[test]
fn zero_filters_have_no_common_component() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(
        &spec,
        r#"{"q": 1, "filters": [[[0.0]], [[0.0], [0.0]]], "idio": {"ar": 0.5, "sigma": 1.0}, "seed": 1}"#,
    )
    .unwrap();
    let o = gdfm(&["blocks", "--spec", p(&spec), "--out", p(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("no common component"), "{}", stderr(&o));
}

#[test]
fn missing_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = gdfm(&["verify", "--run", p(dir.path())]);
    assert_eq!(code(&o), 2);
    let o = gdfm(&["analyze", "--input", p(&dir.path().join("nope.csv")), "--q", "1", "--out", p(dir.path())]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&gdfm(&["simulate", "--out", p(dir.path())])), 2);
}

#[test]
fn analyze_writes_curves_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&simulate_eq7(dir.path(), "24", "2000", "0.5", "5")), 0);
    let o = gdfm(&[
        "analyze", "--input", p(&dir.path().join("y.csv")), "--q", "1", "--grid", "64", "--out", p(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let curves = fs::read_to_string(dir.path().join("eigencurves.csv")).unwrap();
    assert!(curves.starts_with("theta,mu_1,mu_2\n"));
    assert_eq!(curves.lines().count(), 65);
    let diag = fs::read_to_string(dir.path().join("diagnostics.json")).unwrap();
    assert!(diag.contains("\"factor_structure\": true"), "{diag}");
}

#[test]
fn thread_cap_does_not_change_results() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(code(&simulate_eq7(a.path(), "8", "800", "0.5", "2")), 0);
    let o = gdfm(&[
        "--threads", "1", "simulate", "--example", "eq7", "--n", "8", "--T", "800", "--idio-sigma", "0.5", "--seed",
        "2", "--out", p(b.path()),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        fs::read(a.path().join("chi.csv")).unwrap(),
        fs::read(b.path().join("chi.csv")).unwrap()
    );
    for d in [a.path(), b.path()] {
        let threads = if d == a.path() { None } else { Some("1") };
        let mut args = vec![];
        if let Some(t) = threads {
            args.extend(["--threads", t]);
        }
        let y = d.join("y.csv");
        args.extend(["analyze", "--input", p(&y), "--q", "1", "--grid", "32", "--out", p(d)]);
        assert_eq!(code(&gdfm(&args)), 0);
    }
    assert_eq!(
        fs::read(a.path().join("eigencurves.csv")).unwrap(),
        fs::read(b.path().join("eigencurves.csv")).unwrap()
    );
}
