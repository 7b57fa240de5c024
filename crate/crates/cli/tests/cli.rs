use std::process::{Command, Output};

fn fieldsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fieldsim"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn fieldsim")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn analytic_default_runs() {
    let o = fieldsim(&["analytic"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("Type2"));
}

#[test]
fn nonpositive_pitch_is_usage_error() {
    for p in ["-1", "0"] {
        let o = fieldsim(&["analytic", "--pitch", p]);
        assert_eq!(code(&o), 2);
        assert!(String::from_utf8_lossy(&o.stderr).contains("pitch must be positive"));
    }
}

#[test]
fn unknown_flag_is_usage_error() {
    assert_eq!(code(&fieldsim(&["simulate", "--bogus"])), 2);
}

#[test]
fn type1_pitch_gives_zero() {
    let o = fieldsim(&["analytic", "--pitch", "60"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("Type1"));
    assert!(out.lines().any(|l| l.starts_with("probability ") && l.trim_end().ends_with(" 0")));
}

#[test]
fn simulate_is_deterministic_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for (n, w) in ["1", "3", "1"].iter().enumerate() {
        let path = dir.path().join(format!("s{n}.csv"));
        let o = fieldsim(&[
            "simulate", "--iters", "30", "--seed", "9", "--workers", w, "--out", path.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        files.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert_eq!(files[0], files[2]);
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# comment\npitch = 60\nseed = 4\n").unwrap();
    let o = fieldsim(&["analytic", "--config", cfg.to_str().unwrap()]);
    assert!(stdout(&o).contains("Type1"));
    let o = fieldsim(&["analytic", "--config", cfg.to_str().unwrap(), "--pitch", "25.6"]);
    assert!(stdout(&o).contains("Type2"));
    std::fs::write(&cfg, "pich = 3\n").unwrap();
    assert_eq!(code(&fieldsim(&["analytic", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn sweep_writes_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = fieldsim(&[
        "sweep", "--random", "3", "--iters", "5", "--rings", "2", "--seed", "2", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert!(lines[0].starts_with("schema_version,"));
    assert_eq!(lines.len(), 1 + 3 * 2);
}

#[test]
fn sweep_ndjson_rows_parse() {
    let o = fieldsim(&[
        "sweep", "--random", "2", "--method", "analytic", "--format", "ndjson", "--seed", "2",
    ]);
    assert_eq!(code(&o), 0);
    for line in stdout(&o).lines() {
        assert!(line.starts_with('{') && line.ends_with('}'), "{line}");
        assert!(line.contains("\"method\":\"analytic\""));
    }
}

#[test]
fn validate_with_too_few_points_exits_3() {
    let o = fieldsim(&["validate", "--random", "2", "--iters", "3", "--rings", "1"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn fit_reports_missing_column() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.csv");
    std::fs::write(&input, "arm_length,pitch,probability\n1,2,3\n").unwrap();
    let o = fieldsim(&["fit", "--input", input.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("ratio"));
}

#[test]
fn fit_recovers_planted_surface() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.csv");
    let mut text = String::from("arm_length,ratio,pitch,probability\n");
    for i in 0..60 {
        let x = 7.0 + (i % 7) as f64;
        let y = 1.0 + (i % 5) as f64 * 0.2;
        let z = 25.0 + (i % 11) as f64;
        let f = 0.1 + 0.01 * x - 0.02 * y * y + 0.001 * x * z;
        text.push_str(&format!("{x},{y},{z},{f}\n"));
    }
    std::fs::write(&input, text).unwrap();
    let model = dir.path().join("model.txt");
    let o = fieldsim(&[
        "fit", "--input", input.to_str().unwrap(), "--lambda", "0", "--raw", "--out", model.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r2: f64 = stdout(&o)
        .lines()
        .find(|l| l.starts_with("test R^2"))
        .and_then(|l| l.split_whitespace().last())
        .unwrap()
        .parse()
        .unwrap();
    assert!(r2 > 0.999_999, "{r2}");
    assert_eq!(std::fs::read_to_string(&model).unwrap().split_whitespace().count(), 17);
}

#[test]
fn bench_two_positioners() {
    let o = fieldsim(&["bench", "--positioners", "2", "--seed", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("first-shell pairs  1"));
    assert!(out.contains("verdicts agree     yes"));
}

#[test]
fn bench_rejects_single_positioner() {
    assert_eq!(code(&fieldsim(&["bench", "--positioners", "1"])), 2);
}
