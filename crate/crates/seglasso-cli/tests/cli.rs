//! End-to-end tests of the `seglasso` binary: exit codes, document shape,
//! schema conformance and reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_seglasso"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_code(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn write(path: &Path, content: &str) {
    std::fs::write(path, content).unwrap();
}

/// Two noiseless series with one jump each; true total K = 4.
fn noiseless_csv(path: &Path) {
    let mut csv = String::from("series_id,time,value\n");
    for t in 1..=30 {
        let v = if t <= 10 { 0.0 } else { 2.0 };
        csv.push_str(&format!("a,{t},{v}\n"));
    }
    for t in 1..=30 {
        let v = if t <= 18 { 1.0 } else { -1.0 };
        csv.push_str(&format!("b,{t},{v}\n"));
    }
    write(path, &csv);
}

fn fourier_config(path: &Path) {
    write(
        path,
        r#"
[[dictionary.basis]]
kind = "fourier_fixed"
j_max = 2
length = 30.0
"#,
    );
}

fn doc_at(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn schema() -> jsonschema::Validator {
    let schema_path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("schema/result.schema.json");
    let schema: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(schema_path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

#[test]
fn fit_noiseless_and_schema() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("data.csv");
    let config = dir.path().join("config.toml");
    noiseless_csv(&input);
    fourier_config(&config);
    let out = dir.path().join("result.json");
    let bias = dir.path().join("bias.csv");
    let output = run(&[
        "fit",
        "--input",
        input.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "-K",
        "4",
        "--out",
        out.to_str().unwrap(),
        "--bias-out",
        bias.to_str().unwrap(),
    ]);
    assert_code(&output, 0);
    let doc = doc_at(&out);
    let validator = schema();
    assert!(
        validator.validate(&doc).is_ok(),
        "schema violations: {:?}",
        validator.iter_errors(&doc).map(|e| e.to_string()).collect::<Vec<_>>()
    );
    assert!(doc["sigma2"].as_f64().unwrap() <= 1e-10);
    assert_eq!(doc["chosen_k"], 4);
    assert_eq!(doc["series"][0]["breakpoints"][0]["index"], 10);
    assert_eq!(doc["series"][0]["breakpoints"][0]["time"], 10.0);
    // active set is empty on this noiseless piecewise signal
    assert_eq!(doc["dictionary"]["active_functions"].as_array().unwrap().len(), 0);
    let bias_text = std::fs::read_to_string(&bias).unwrap();
    assert_eq!(bias_text.lines().count(), 31); // header + 30 grid points

    // reruns agree modulo the timestamp
    let out2 = dir.path().join("result2.json");
    let output2 = run(&[
        "fit",
        "--input",
        input.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "-K",
        "4",
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert_code(&output2, 0);
    let mut a = doc_at(&out);
    let mut b = doc_at(&out2);
    a["created_unix_ms"] = 0.into();
    b["created_unix_ms"] = 0.into();
    assert_eq!(a, b);
}

#[test]
fn select_trivial_and_sweep_table() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("data.csv");
    let config = dir.path().join("config.toml");
    noiseless_csv(&input);
    fourier_config(&config);
    let out = dir.path().join("result.json");
    // --kmin M --kmax M pins the choice trivially
    let output = run(&[
        "select",
        "--input",
        input.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--kmin",
        "2",
        "--kmax",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_code(&output, 0);
    let doc = doc_at(&out);
    assert_eq!(doc["chosen_k"], 2);
    assert_eq!(doc["command"], "select");
    assert_eq!(doc["mbic_sweep"].as_array().unwrap().len(), 1);
    assert!(schema().validate(&doc).is_ok());

    // a real sweep reports kmax − kmin + 1 rows and finds the true K
    let out2 = dir.path().join("result2.json");
    let output2 = run(&[
        "select",
        "--input",
        input.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--kmin",
        "2",
        "--kmax",
        "8",
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert_code(&output2, 0);
    let doc2 = doc_at(&out2);
    assert_eq!(doc2["mbic_sweep"].as_array().unwrap().len(), 7);
    assert_eq!(doc2["chosen_k"], 4);
    // degenerate (perfect-fit) sweep entries serialize as null + flag
    let degenerate: Vec<bool> = doc2["mbic_sweep"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["degenerate"].as_bool().unwrap())
        .collect();
    assert!(degenerate.iter().any(|&d| d));
    for entry in doc2["mbic_sweep"].as_array().unwrap() {
        if entry["degenerate"].as_bool().unwrap() {
            assert!(entry["mbic"].is_null());
        } else {
            assert!(entry["mbic"].is_number());
        }
    }
    assert!(schema().validate(&doc2).is_ok());
}

#[test]
fn fourier_grid_column_count() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("gps.csv");
    // one series over 160 time units; span 159, min_period 8 → 19 pairs
    let mut csv = String::from("series_id,time,value\n");
    for t in 1..=160 {
        csv.push_str(&format!("yar1,{t},{}\n", (t as f64 / 7.0).sin()));
    }
    write(&input, &csv);
    let config = dir.path().join("config.toml");
    write(
        &config,
        r#"
[[dictionary.basis]]
kind = "fourier_grid"
min_period = 8.0
"#,
    );
    let out = dir.path().join("result.json");
    let output = run(&[
        "fit",
        "--input",
        input.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "-K",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_code(&output, 0);
    let doc = doc_at(&out);
    assert_eq!(doc["dictionary"]["num_columns"], 2 * 19);
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    fourier_config(&config);
    let out = dir.path().join("result.json");

    // missing required column
    let bad_cols = dir.path().join("bad_cols.csv");
    write(&bad_cols, "series_id,when,value\na,1,2\n");
    let output = run(&[
        "fit",
        "--input",
        bad_cols.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "-K",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_code(&output, 2);
    assert!(String::from_utf8_lossy(&output.stderr).contains("time"));

    // duplicated timestamp names the row
    let dup = dir.path().join("dup.csv");
    write(&dup, "series_id,time,value\na,1,0\na,2,0\na,2,1\n");
    let output = run(&[
        "fit",
        "--input",
        dup.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "-K",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_code(&output, 2);
    assert!(String::from_utf8_lossy(&output.stderr).contains("row 3"));

    // non-numeric cell names the row
    let text_cell = dir.path().join("text.csv");
    write(&text_cell, "series_id,time,value\na,1,zero\n");
    let output = run(&[
        "fit",
        "--input",
        text_cell.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "-K",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_code(&output, 2);
    assert!(String::from_utf8_lossy(&output.stderr).contains("row 1"));

    // ungrouped series
    let ungrouped = dir.path().join("ungrouped.csv");
    write(&ungrouped, "series_id,time,value\na,1,0\nb,1,0\na,2,0\n");
    let output = run(&[
        "fit",
        "--input",
        ungrouped.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "-K",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_code(&output, 2);

    // infeasible selection range
    let input = dir.path().join("data.csv");
    noiseless_csv(&input);
    let output = run(&[
        "select",
        "--input",
        input.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--kmin",
        "1",
        "--kmax",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_code(&output, 2);

    // unknown config key
    let bad_config = dir.path().join("bad.toml");
    write(&bad_config, "[fit]\ngama = 2.1\n");
    let output = run(&[
        "fit",
        "--input",
        input.to_str().unwrap(),
        "--config",
        bad_config.to_str().unwrap(),
        "-K",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_code(&output, 2);
}

#[test]
fn simulate_roundtrip_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let output = run(&["simulate", "--seed", "7", "--out", out.to_str().unwrap()]);
        assert_code(&output, 0);
    }
    let data_a = std::fs::read(out_a.join("dataset.csv")).unwrap();
    let data_b = std::fs::read(out_b.join("dataset.csv")).unwrap();
    assert_eq!(data_a, data_b);
    assert_eq!(
        std::fs::read(out_a.join("truth.json")).unwrap(),
        std::fs::read(out_b.join("truth.json")).unwrap()
    );
    // default design: M=10 series of n=100 → 1000 data rows + header
    let text = String::from_utf8(data_a).unwrap();
    assert_eq!(text.lines().count(), 1001);

    let out_c = dir.path().join("c");
    let output = run(&["simulate", "--seed", "8", "--out", out_c.to_str().unwrap()]);
    assert_code(&output, 0);
    assert_ne!(
        std::fs::read(out_c.join("dataset.csv")).unwrap(),
        std::fs::read(out_b.join("dataset.csv")).unwrap()
    );
}

#[test]
fn benchmark_reports_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.toml");
    write(
        &grid,
        r#"
[[cell]]
num_series = 3
sigma2 = 0.2
replicates = 2
seed = 11
"#,
    );
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let output = run(&[
            "benchmark",
            "--grid",
            grid.to_str().unwrap(),
            "--methods",
            "lasso_true_k,position",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_code(&output, 0);
    }
    for name in ["summary.csv", "replicates.csv", "config.json"] {
        assert_eq!(
            std::fs::read(out_a.join(name)).unwrap(),
            std::fs::read(out_b.join(name)).unwrap(),
            "{name} differs between reruns"
        );
    }
    let summary = std::fs::read_to_string(out_a.join("summary.csv")).unwrap();
    assert!(summary.contains("lasso_true_k"));
    assert!(summary.contains("position"));

    let output = run(&[
        "benchmark",
        "--grid",
        grid.to_str().unwrap(),
        "--methods",
        "smoothing_spline",
        "--out",
        dir.path().join("x").to_str().unwrap(),
    ]);
    assert_code(&output, 2);
}
