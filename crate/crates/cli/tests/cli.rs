use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lmscreen"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn schema(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(name);
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_valid(schema_name: &str, doc: &Value) {
    let validator = jsonschema::validator_for(&schema(schema_name)).unwrap();
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{schema_name}: {errors:?}");
}

/// 30 subjects at times 0, 2, 4, 6 with a meal column; x1 carries a strong
/// main effect and time interaction, x2 and x3 are noise.
fn toy_csv(dir: &Path) -> PathBuf {
    let mut text = String::from("id,time,meal,y,x1,x2,x3\n");
    let mut state: u64 = 12345;
    let mut uniform = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    for i in 1..=30 {
        let b = uniform();
        let x: Vec<f64> = (0..3).map(|_| 2.0 * uniform()).collect();
        let meal = if i % 2 == 0 { "A" } else { "B" };
        for t in [0.0, 2.0, 4.0, 6.0] {
            let y = b + 0.2 * t + 2.0 * x[0] + 0.5 * x[0] * t + 0.3 * uniform();
            text.push_str(&format!("{i},{t},{meal},{y:.6},{:.6},{:.6},{:.6}\n", x[0], x[1], x[2]));
        }
    }
    let path = dir.join("toy.csv");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn screen_writes_ranked_reports() {
    let dir = tempfile::tempdir().unwrap();
    let input = toy_csv(dir.path());
    let json = dir.path().join("out.json");
    let csv = dir.path().join("out.csv");
    let out = run(&[
        "screen",
        "--input",
        input.to_str().unwrap(),
        "--condition-cols",
        "meal",
        "--output-json",
        json.to_str().unwrap(),
        "--output-csv",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(summary.contains("n=30 m=4 p=3"), "{summary}");
    assert!(summary.contains("top=x1,"), "{summary}");

    let table = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("1,1,x1,"));

    let doc: Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_valid("screening.schema.json", &doc);
    assert_eq!(doc["method"], "ls-slope");
}

#[test]
fn screen_is_byte_identical_across_runs_and_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let input = toy_csv(dir.path());
    let mut reports = Vec::new();
    for workers in ["1", "3", "1"] {
        let json = dir.path().join(format!("out{}.json", reports.len()));
        let out = run(&[
            "screen",
            "--input",
            input.to_str().unwrap(),
            "--condition-cols",
            "meal",
            "--seed",
            "7",
            "--workers",
            workers,
            "--output-json",
            json.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        reports.push(fs::read(&json).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    assert_eq!(reports[0], reports[2]);
}

#[test]
fn gees_methods_share_the_report_schema() {
    let dir = tempfile::tempdir().unwrap();
    let input = toy_csv(dir.path());
    for method in ["sis", "gees-cs", "gees-ar1"] {
        let json = dir.path().join(format!("{method}.json"));
        let out = run(&[
            "screen",
            "--input",
            input.to_str().unwrap(),
            "--covariate-cols",
            "x1,x2,x3",
            "--method",
            method,
            "--d",
            "2",
            "--output-json",
            json.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let doc: Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
        assert_valid("screening.schema.json", &doc);
        assert_eq!(doc["method"], method);
        assert_eq!(doc["variables"][0]["rank"], 1);
    }
}

#[test]
fn missing_response_column_exits_2_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let input = toy_csv(dir.path());
    let out = run(&["screen", "--input", input.to_str().unwrap(), "--response-col", "tg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("'tg'"));
}

#[test]
fn unparsable_cell_names_row_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let input = toy_csv(dir.path());
    // meal is not declared as conditioning, so it is read as a numeric covariate
    let out = run(&["screen", "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 2") && err.contains("'meal'"), "{err}");
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = toy_csv(dir.path());
    let config = dir.path().join("cfg.json");
    fs::write(
        &config,
        format!(
            r#"{{"input": "{}", "condition-cols": "meal", "method": "ls-intercept", "d": 1}}"#,
            input.display()
        ),
    )
    .unwrap();
    let out = run(&["screen", "--config", config.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("ls-intercept:") && text.contains("d=1"), "{text}");

    let out = run(&["screen", "--config", config.to_str().unwrap(), "--d", "2"]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("d=2"));

    fs::write(&config, r#"{"inputs": "x.csv"}"#).unwrap();
    let out = run(&["screen", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_writes_a_table_per_method() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("bench.json");
    let csv = dir.path().join("bench.csv");
    let out = run(&[
        "simulate",
        "--example",
        "1",
        "--n",
        "20",
        "--p",
        "20",
        "--replicates",
        "2",
        "--method",
        "ls-slope,sis",
        "--seed",
        "3",
        "--output-json",
        json.to_str().unwrap(),
        "--output-csv",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "n,method,r_M,Rbar_M,r_I,Rbar_I,mms50,mms75,mms95");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("20,ls-slope,") && lines[2].starts_with("20,sis,"));

    let doc: Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_valid("benchmark.schema.json", &doc);
    assert_eq!(doc["report"]["summaries"][0]["replicates"], 2);
}

#[test]
fn simulate_rejects_bad_configuration() {
    for args in [
        vec!["simulate", "--example", "4", "--omega", "1.5", "--n", "10", "--p", "10"],
        vec!["simulate", "--example", "7"],
        vec!["simulate", "--method", "lasso", "--n", "10", "--p", "10"],
        vec!["simulate", "--workers", "0", "--n", "10", "--p", "10"],
    ] {
        assert_eq!(run(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn bootstrap_counts_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let input = toy_csv(dir.path());
    let mut outputs = Vec::new();
    for name in ["a.json", "b.json"] {
        let json = dir.path().join(name);
        let out = run(&[
            "bootstrap",
            "--input",
            input.to_str().unwrap(),
            "--condition-cols",
            "meal",
            "--bootstrap-B",
            "1",
            "--d",
            "1",
            "--seed",
            "11",
            "--output-json",
            json.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(fs::read_to_string(&json).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let doc: Value = serde_json::from_str(&outputs[0]).unwrap();
    assert_valid("bootstrap.schema.json", &doc);
    let counts: Vec<u64> = doc["variables"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["count"].as_u64().unwrap())
        .collect();
    assert!(counts.iter().all(|&c| c <= 1));
    assert_eq!(counts.iter().sum::<u64>(), 1);
    assert_eq!(doc["variables"][0]["name"], "x1");
}

#[test]
fn bootstrap_rejects_gees_methods() {
    let dir = tempfile::tempdir().unwrap();
    let input = toy_csv(dir.path());
    let out = run(&["bootstrap", "--input", input.to_str().unwrap(), "--condition-cols", "meal", "--method", "sis"]);
    assert_eq!(out.status.code(), Some(2));
}
