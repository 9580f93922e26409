use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn cohere(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cohere"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON object")
}

fn write_doc(name: &str, body: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cohere-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn qubit_doc(p0: f64, re: f64, im: f64) -> String {
    format!(
        r#"{{"dim":2,"entries":[[[{p0},0],[{re},{im}]],[[{re},{}],[{},0]]]}}"#,
        -im,
        1.0 - p0
    )
}

#[test]
fn measure_l1_psi_plus() {
    let out = cohere(&["measure", "l1", "psi-plus:3", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stderr.is_empty());
    let v = report(&out)["results"]["value"].as_f64().unwrap();
    assert!((v - 2.0).abs() < 1e-12);
}

#[test]
fn measure_cm_qubit_file() {
    let path = write_doc("q03.json", &qubit_doc(0.5, 0.3, 0.0));
    let out = cohere(&["measure", "cm", path.to_str().unwrap(), "--observable", "psi-plus"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert!((r["results"]["value"].as_f64().unwrap() - 0.3).abs() < 1e-9);
    assert!(r["witnesses"]["tau"].is_object());
}

#[test]
fn measure_roc_and_cm_class() {
    let out = cohere(&["measure", "roc", "rho-p:3:0"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["results"]["value"].as_f64().unwrap(), 0.0);

    let out = cohere(&["measure", "cm-class", "psi-plus:2", "--class", "mio", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert!((r["results"]["value"].as_f64().unwrap() - 0.5).abs() < 1e-6);
    assert_eq!(r["witnesses"]["choi"]["dim"].as_u64(), Some(4));
}

#[test]
fn convert_identical_gives_all_ones() {
    let out = cohere(&["convert", "gio", "rho-p:3:0.4", "rho-p:3:0.4", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["results"]["verdict"], "convertible");
    for row in r["witnesses"]["tau"]["entries"].as_array().unwrap() {
        for z in row.as_array().unwrap() {
            assert!((z[0].as_f64().unwrap() - 1.0).abs() < 1e-12);
            assert!(z[1].as_f64().unwrap().abs() < 1e-12);
        }
    }
}

#[test]
fn convert_rho_p_upward_fails_with_exit_one() {
    let out = cohere(&["convert", "gio", "rho-p:3:0.2", "rho-p:3:0.7", "--samples", "2", "--json"]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["results"]["verdict"], "not_convertible");
    assert_eq!(r["results"]["reason"]["kind"], "forced_entry_too_large");
    assert!(r["results"]["measure_gap"].as_f64().unwrap() > 1e-6);
}

#[test]
fn convert_qubit_amplitude_damped_pair() {
    // amplitude damping with γ = 0.36 shrinks ρ01 by 0.8 but moves the diagonal
    let rho = write_doc("ad_rho.json", &qubit_doc(0.5, 0.4, 0.1));
    let damped = write_doc("ad_sigma.json", &qubit_doc(0.68, 0.32, 0.08));
    let dephased = write_doc("ad_gio.json", &qubit_doc(0.5, 0.32, 0.08));
    let (r, s, g) = (rho.to_str().unwrap(), damped.to_str().unwrap(), dephased.to_str().unwrap());

    let out = cohere(&["convert", "gio", r, s, "--json"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&out)["results"]["reason"]["kind"], "diagonal_mismatch");
    assert_eq!(cohere(&["convert", "gio", r, g, "--json"]).status.code(), Some(0));
    assert_eq!(cohere(&["convert", "offdiag", r, s, "--json"]).status.code(), Some(0));
    let out = cohere(&["convert", "offdiag", r, s, "--class", "dio", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(report(&out)["witnesses"]["choi"].is_object());
}

#[test]
fn construct_outputs() {
    let out = cohere(&["construct", "psi-plus:3", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert!(r["results"]["residual"].as_f64().unwrap() < 1e-12);
    for row in r["witnesses"]["tau0"]["entries"].as_array().unwrap() {
        for z in row.as_array().unwrap() {
            assert!((z[0].as_f64().unwrap() - 1.0).abs() < 1e-12);
        }
    }

    let zero = write_doc(
        "zero_diag.json",
        r#"{"dim":3,"entries":[[[0.6,0],[0,0],[0.2,0.3]],[[0,0],[0,0],[0,0]],[[0.2,-0.3],[0,0],[0.4,0]]]}"#,
    );
    let r = report(&cohere(&["construct", zero.to_str().unwrap(), "--json"]));
    assert_eq!(r["results"]["zero_diagonals"], serde_json::json!([1]));
    let tau = &r["witnesses"]["tau0"]["entries"];
    assert_eq!(tau[1][0], serde_json::json!([0.0, 0.0]));
    assert_eq!(tau[0][1], serde_json::json!([0.0, 0.0]));
    assert_eq!(tau[1][1], serde_json::json!([1.0, 0.0]));
}

#[test]
fn worked_example_passes() {
    let out = cohere(&["worked-example", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert!((r["results"]["c_m"].as_f64().unwrap() - 934.0 / 2025.0).abs() < 1e-5);
    assert!(r["results"]["c_m_conj"].as_f64().unwrap() < r["results"]["c_m"].as_f64().unwrap());
    assert!((r["results"]["diagonal"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(r["results"]["pass"], true);
}

#[test]
fn input_errors_exit_two() {
    let bad = write_doc("bad.json", r#"{"dim":2,"entries":[[[1,0],[0,0]]]}"#);
    let out = cohere(&["measure", "l1", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let not_psd = write_doc("notpsd.json", &qubit_doc(0.5, 0.9, 0.0));
    let out = cohere(&["measure", "l1", not_psd.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("positive"));

    assert_eq!(cohere(&["measure", "l1", "/nonexistent/file.json"]).status.code(), Some(2));
    assert_eq!(cohere(&["convert", "gio", "psi-plus:2", "psi-plus:3"]).status.code(), Some(2));
    assert_eq!(cohere(&["measure", "cm", "psi-plus:3", "--observable", "psi-plus:2"]).status.code(), Some(2));
    let diag_off = write_doc("obs.json", &qubit_doc(0.7, 0.3, 0.0));
    let out = cohere(&["measure", "cm", "psi-plus:2", "--observable", diag_off.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(cohere(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(cohere(&["measure", "l1", "psi-plus:2", "--tol", "-1"]).status.code(), Some(2));
}

#[test]
fn solver_errors_exit_three() {
    let out = cohere(&["measure", "roc", "psi-plus:4", "--max-iter", "3"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn reports_are_deterministic_and_round_trip() {
    let args = ["convert", "gio", "rho-p:2:0.3", "rho-p:2:0.5", "--seed", "11", "--samples", "3", "--json"];
    let mut a = report(&cohere(&args));
    let mut b = report(&cohere(&args));
    a["wall_time_s"] = Value::Null;
    b["wall_time_s"] = Value::Null;
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());

    let r = report(&cohere(&["measure", "cm", "example", "--observable", "example", "--json"]));
    let doc: cohere::MatrixDocument = serde_json::from_value(r["witnesses"]["tau"].clone()).unwrap();
    let m = doc.to_matrix().unwrap();
    let again: cohere::MatrixDocument =
        serde_json::from_str(&serde_json::to_string(&cohere::MatrixDocument::from_matrix(&m)).unwrap()).unwrap();
    assert_eq!(again, doc);
    assert!((r["results"]["value"].as_f64().unwrap() - 934.0 / 2025.0).abs() < 1e-5);
}
