use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn jlstm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jlstm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

/// Tiny vdp run: 10 sequences of 20 steps, 4 hidden units.
fn small(out: &Path, extra: &[&str]) -> Vec<String> {
    let mut args: Vec<String> = [
        "--system",
        "vdp",
        "--out",
        out.to_str().unwrap(),
        "--sequence-count",
        "10",
        "--sequence-length",
        "20",
        "--hidden",
        "4",
        "--quiet",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    args.extend(extra.iter().map(|s| s.to_string()));
    args
}

fn run(cmd: &str, args: Vec<String>) -> Output {
    let mut all = vec![cmd.to_string()];
    all.extend(args);
    let refs: Vec<&str> = all.iter().map(String::as_str).collect();
    jlstm(&refs)
}

#[test]
fn generate_defaults_and_idempotence() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = jlstm(&["generate", "--system", "vdp", "--seed", "7", "--out", dir.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("data/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["count"], 100);
    assert_eq!(manifest["T"], 300);
    assert_eq!(dir_contents(&a.join("data")), dir_contents(&b.join("data")));
}

#[test]
fn usage_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = jlstm(&["generate", "--system", "vdp", "--out", tmp.path().to_str().unwrap(), "--sequence-count", "5"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("at least 10"), "{}", stderr(&out));
    assert!(!tmp.path().join("data").exists());

    let out = run("train", small(tmp.path(), &["--arch", "gru"]));
    assert_eq!(code(&out), 1);
    assert_eq!(code(&jlstm(&["generate", "--system", "lorenz"])), 1);
    assert_eq!(code(&jlstm(&["frobnicate"])), 1);
    assert_eq!(code(&jlstm(&["--help"])), 0);
}

#[test]
fn missing_dataset_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run("train", small(tmp.path(), &["--arch", "jlstm"]));
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("not found"));
}

#[test]
fn train_then_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&run("generate", small(tmp.path(), &[]))), 0);
    for arch in ["jlstm", "elstm"] {
        let out = run("train", small(tmp.path(), &["--arch", arch, "--max-epochs", "3", "--batch-size", "4"]));
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let log = fs::read_to_string(tmp.path().join(arch).join("train_log.csv")).unwrap();
        assert_eq!(log.lines().next(), Some("epoch,train_loss,val_loss,seconds_elapsed"));
        assert_eq!(log.lines().count(), 4, "{log}");
    }
    let out = run("evaluate", small(tmp.path(), &["--estimators", "ekf,jlstm,elstm"]));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary = fs::read_to_string(tmp.path().join("report/summary.csv")).unwrap();
    let lines: Vec<_> = summary.lines().collect();
    assert_eq!(lines[0], "system,estimator,nmse,nmse_oor,train_seconds,test_seconds");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("vdp,ekf,") && lines[1].contains(",,"));
    let curve = fs::read_to_string(tmp.path().join("report/error_curve_vdp.csv")).unwrap();
    assert_eq!(curve.lines().next(), Some("t,error_ekf,error_jlstm,error_elstm"));
    assert_eq!(curve.lines().count(), 21);

    let out = run("evaluate", small(tmp.path(), &["--estimators", "ekf,jlstm", "--oor"]));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(tmp.path().join("report/error_curve_vdp_oor.csv").exists());
    let summary = fs::read_to_string(tmp.path().join("report/summary.csv")).unwrap();
    for line in summary.lines().skip(1) {
        let fields: Vec<_> = line.split(',').collect();
        assert!(fields[3].parse::<f64>().is_ok(), "{line}");
    }

    // The Kalman filter needs a linear model.
    let out = run("evaluate", small(tmp.path(), &["--estimators", "kf"]));
    assert_eq!(code(&out), 1, "{}", stderr(&out));
}

#[test]
fn checkpoint_from_another_system_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let vdp = tmp.path().join("vdp");
    assert_eq!(code(&run("generate", small(&vdp, &[]))), 0);
    let out = run("train", small(&vdp, &["--arch", "jlstm", "--max-epochs", "1", "--batch-size", "4"]));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let springs = tmp.path().join("springs");
    let out = jlstm(&[
        "generate", "--system", "springs", "--out", springs.to_str().unwrap(), "--sequence-count", "10",
        "--sequence-length", "5", "--quiet",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = jlstm(&[
        "evaluate", "--system", "springs", "--out", springs.to_str().unwrap(), "--checkpoints",
        vdp.to_str().unwrap(), "--estimators", "kf,jlstm", "--quiet",
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("dimension mismatch"), "{}", stderr(&out));
}

#[test]
fn divergence_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&run("generate", small(tmp.path(), &[]))), 0);
    let out = run(
        "train",
        small(tmp.path(), &["--arch", "ern", "--learning-rate", "1e300", "--batch-size", "4", "--max-epochs", "5"]),
    );
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("experiment.json");
    let out_dir = tmp.path().join("run");
    fs::write(
        &config,
        format!(
            r#"{{"system": "vdp", "seed": 4, "sequence_count": 12, "sequence_length": 9, "out": {:?}}}"#,
            out_dir.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = jlstm(&["generate", "--config", config.to_str().unwrap(), "--sequence-length", "6", "--quiet"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("data/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["count"], 12);
    assert_eq!(manifest["T"], 6);

    fs::write(&config, r#"{"system": "vdp", "epochs": 3}"#).unwrap();
    let out = jlstm(&["generate", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn reproduce_takes_the_system_as_argument() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["reproduce".to_string(), "vdp".to_string()];
    args.extend(small(tmp.path(), &["--max-epochs", "1", "--batch-size", "4", "--threads", "1"]).into_iter().skip(2));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = jlstm(&refs);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary = fs::read_to_string(tmp.path().join("report/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert!(summary.contains("vdp,jlstm,") && summary.contains("vdp,elstm,"));
}
