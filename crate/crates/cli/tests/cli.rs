use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn qncq(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qncq")).args(args).current_dir(dir).output().expect("spawn qncq")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

/// Row-major `{dim, entries}` JSON of the pure state with the given real amplitudes.
fn pure_json(amps: &[f64]) -> String {
    let norm: f64 = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
    let entries: Vec<String> = amps
        .iter()
        .flat_map(|a| amps.iter().map(move |b| format!("[{},0]", a * b / (norm * norm))))
        .collect();
    format!("{{\"dim\":{},\"entries\":[{}]}}", amps.len(), entries.join(","))
}

fn csv_column(text: &str, col: &str) -> Vec<f64> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == col).unwrap();
    lines.map(|l| l.split(',').nth(i).unwrap().parse().unwrap()).collect()
}

#[test]
fn bounds_at_zero_is_a_single_trivial_row() {
    let d = TempDir::new().unwrap();
    let o = qncq(&["bounds", "--r", "2", "--beta-max", "0", "--out", "t"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(d.path().join("t/chi_2.csv")).unwrap();
    assert_eq!(text, "r,beta_abs,chi,chi_normalized\n2,0.0,1.0,1.0\n");
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("t/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "bounds");
    assert_eq!(manifest["seed"], 0);
    assert!(!d.path().join("t/.qncq.lock").exists());
}

#[test]
fn bounds_plateau_and_determinism() {
    let d = TempDir::new().unwrap();
    let args = |out: &'static str| ["bounds", "--r", "2", "--beta-max", "5", "--step", "0.5", "--restarts", "16", "--seed", "7", "--normalized", "--out", out];
    for out in ["a", "b"] {
        let o = qncq(&args(out), d.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["chi_2.csv", "chi_2.json", "normalized.csv"] {
        assert_eq!(fs::read(d.path().join("a").join(f)).unwrap(), fs::read(d.path().join("b").join(f)).unwrap(), "{f}");
    }
    let text = fs::read_to_string(d.path().join("a/chi_2.csv")).unwrap();
    let norm = csv_column(&text, "chi_normalized");
    assert!((norm.last().unwrap() - 0.5).abs() < 1e-3);
    let wide = fs::read_to_string(d.path().join("a/normalized.csv")).unwrap();
    assert!(wide.starts_with("beta_abs,chi_1,chi_2\n"));
}

#[test]
fn bounds_rejects_bad_flags_and_locked_dirs() {
    let d = TempDir::new().unwrap();
    assert_eq!(qncq(&["bounds", "--r", "5..2", "--out", "t"], d.path()).status.code(), Some(3));
    assert_eq!(qncq(&["bounds", "--restarts", "many", "--out", "t"], d.path()).status.code(), Some(3));
    assert_eq!(qncq(&["bounds", "--no-such-flag"], d.path()).status.code(), Some(3));
    fs::create_dir(d.path().join("locked")).unwrap();
    write(d.path(), "locked/.qncq.lock", "");
    let o = qncq(&["bounds", "--r", "2", "--beta-max", "0", "--out", "locked"], d.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("locked"));
}

#[test]
fn dnc_examples() {
    let d = TempDir::new().unwrap();
    write(d.path(), "two.json", &pure_json(&[0.0, 0.0, 1.0]));
    write(d.path(), "vac.json", r#"{"type":"fock_matrix","dim":1,"entries":[[1,0]]}"#);
    write(d.path(), "cat.json", &pure_json(&[1.0, 0.0, 0.0, 1.0]));
    let o = qncq(&["dnc", "two.json"], d.path());
    assert!(stdout(&o).contains("DNC = 3"));
    assert!(stdout(&qncq(&["dnc", "vac.json"], d.path())).contains("DNC = 1"));
    let o = qncq(&["dnc", "cat.json", "--out", "cat_report.json"], d.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("DNC = 4"));
    assert!(stdout(&o).contains("Schmidt rank = 4"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("cat_report.json")).unwrap()).unwrap();
    assert_eq!(report["dnc"], 4);
    assert_eq!(report["schmidt_rank"], 4);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("cat_report.json.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["input_digests"]["cat.json"].as_str().unwrap().len(), 64);

    write(d.path(), "bad.json", r#"{"dim":2,"entries":[[1,0],[0.5,0],[0,0],[0,0]]}"#);
    assert_eq!(qncq(&["dnc", "bad.json"], d.path()).status.code(), Some(3));
    assert_eq!(qncq(&["dnc", "missing.json"], d.path()).status.code(), Some(3));
}

#[test]
fn cf_curves() {
    let d = TempDir::new().unwrap();
    write(d.path(), "vac.json", r#"{"type":"fock_matrix","dim":1,"entries":[[1,0]]}"#);
    let o = qncq(&["cf", "vac.json", "--beta-max", "2", "--step", "0.5"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(csv_column(&stdout(&o), "max_abs").iter().all(|v| (v - 1.0).abs() < 1e-12));

    write(d.path(), "spv.json", r#"{"type":"sq_plus_vac","xi":[-0.562,0],"lambda":[-1.4,0]}"#);
    let o = qncq(&["cf", "spv.json", "--beta-max", "3", "--step", "0.01", "--out", "spv.csv"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(d.path().join("spv.csv")).unwrap();
    assert!(text.starts_with("beta_abs,max_abs,phase_at_max,abs_real_axis,abs_imag_axis\n"));
    let m = csv_column(&text, "max_abs");
    // below the classical limit only for |beta| << 1
    assert!(m[1..6].iter().all(|&v| v < 1.0));
    assert!(m[10] > 1.0);
    assert!(*m.last().unwrap() > 1.0);
    assert!(d.path().join("spv.csv.manifest.json").exists());

    // pure squeezed limit: the phase maximum is exp(beta^2 (1 - e^{-2r}) / 2)
    write(d.path(), "sq.json", r#"{"type":"sq_vac_mixture","xi":[-0.562,0],"lambda_abs":"inf"}"#);
    let o = qncq(&["cf", "sq.json", "--beta-max", "4", "--step", "1"], d.path());
    let m = csv_column(&stdout(&o), "max_abs");
    let expected = |b: f64| (b * b / 2.0 * (1.0 - (-2.0 * 0.562f64).exp())).exp();
    for (i, v) in m.iter().enumerate() {
        let b = i as f64;
        assert!((v / expected(b) - 1.0).abs() < 1e-9, "beta={b}: {v} vs {}", expected(b));
    }

    write(d.path(), "bad.json", r#"{"type":"squeezed_vacuum"}"#);
    assert_eq!(qncq(&["cf", "bad.json"], d.path()).status.code(), Some(3));
}

#[test]
fn photon_examples() {
    let d = TempDir::new().unwrap();
    write(d.path(), "vac.json", &pure_json(&[1.0]));
    write(d.path(), "one.json", &pure_json(&[0.0, 1.0]));
    write(d.path(), "m3.json", &pure_json(&[0.3, -0.5, 0.7, 0.4]));

    let o = qncq(&["photon", "add", "--n", "1", "--input", "vac.json", "--out", "added.json"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "DNC 1 → 2");
    let added: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("added.json")).unwrap()).unwrap();
    assert_eq!(added["type"], "fock_matrix");
    assert_eq!(added["dim"], 2);
    assert_eq!(added["entries"][3], serde_json::json!([1.0, 0.0]));

    let o = qncq(&["photon", "add", "--n", "2", "--input", "m3.json", "--out", "m5.json"], d.path());
    assert_eq!(stdout(&o).trim(), "DNC 4 → 6");

    let o = qncq(&["photon", "subtract", "--input", "one.json", "--out", "sub.json"], d.path());
    assert_eq!(stdout(&o).trim(), "DNC 2 → 1");
    let o = qncq(&["photon", "subtract", "--input", "vac.json", "--out", "never.json"], d.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(!d.path().join("never.json").exists());
}

/// Writes a small but honest pair of tables for r = 2, 3.
fn small_tables(dir: &Path) {
    let o = qncq(&["bounds", "--r", "2..3", "--beta-max", "3", "--step", "0.25", "--restarts", "64", "--out", "tables"], dir);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn witness_examples() {
    let d = TempDir::new().unwrap();
    small_tables(d.path());

    write(d.path(), "coh.json", r#"{"type":"coherent_superposition","terms":[{"lambda":[1,0],"alpha":[1.2,-0.4]}]}"#);
    let o = qncq(&["witness", "--spec", "coh.json", "--tables", "tables"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("no nonclassicality certified"));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["certified_dnc_gt"], 0);

    write(d.path(), "ex.json", r#"{"type":"gaussian_variances","v_sq":0.38636697,"v_asq":4.0831938}"#);
    let o = qncq(&["witness", "--spec", "ex.json", "--tables", "tables", "--out", "ex_report.json"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("certified DNC ≥ 3"));
    assert!(d.path().join("ex_report.json.manifest.json").exists());

    write(d.path(), "mix.json", r#"{"type":"sq_vac_mixture","xi":[-0.562,0],"lambda_abs":1.4}"#);
    let o = qncq(&["witness", "--spec", "mix.json", "--tables", "tables", "--scan-lambda", "0:3:0.1"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("lambda_abs,certified_dnc_gt\n"));
    let lam = csv_column(&text, "lambda_abs");
    let level = csv_column(&text, "certified_dnc_gt");
    let threshold = lam.iter().zip(&level).find(|(_, &c)| c >= 2.0).map(|(l, _)| *l).unwrap();
    assert!((threshold - 2.2).abs() <= 0.2, "threshold {threshold}");
}

#[test]
fn witness_samples_and_range() {
    let d = TempDir::new().unwrap();
    small_tables(d.path());
    // |1> has Phi = 1 - |beta|^2
    let mut csv = String::from("beta_re,beta_im,phi_re,phi_im,sigma\n0,0,1,0,0.001\n");
    for b in [1.8, 2.0, 2.2, 3.5] {
        csv.push_str(&format!("{b},0,{},0,0.001\n", 1.0 - b * b));
    }
    write(d.path(), "one.csv", &csv);
    let o = qncq(&["witness", "--samples", "one.csv", "--tables", "tables"], d.path());
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    let o = qncq(&["witness", "--samples", "one.csv", "--tables", "tables", "--clip"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["certified_dnc_gt"], 1);
    assert_eq!(report["ignored_points"], 1);
    assert_eq!(report["k_sigma"], 5.0);

    assert_eq!(qncq(&["witness", "--samples", "one.csv", "--tables", "nowhere"], d.path()).status.code(), Some(3));
    assert_eq!(qncq(&["witness", "--tables", "tables"], d.path()).status.code(), Some(3));
}
