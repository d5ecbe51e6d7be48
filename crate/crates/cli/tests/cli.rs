use std::path::Path;
use std::process::{Command, Output};

fn ocula(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ocula")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = ocula(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    let line = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(line.lines().last().unwrap()).unwrap()
}

#[test]
fn train_quantize_infer_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--trials-per-class", "3", "--duration", "1", "--output", "s.rec", "--labels", "s.csv", "--seed", "4"]);
    ok(d, &["train", "--input", "s.rec", "--labels", "s.csv", "--window", "1", "--epochs", "2", "--model", "m.epdn"]);
    ok(d, &["quantize", "--input", "s.rec", "--labels", "s.csv", "--window", "1", "--model", "m.epdn", "--output", "q.epdn"]);
    let preds = ok(d, &["infer", "--model", "q.epdn", "--input", "s.rec"]);
    let rows: Vec<&str> = preds.lines().collect();
    assert_eq!(rows[0], "sample_index,time_s,class_id");
    let n = (2.0 + 33.0) * 500.0;
    assert_eq!(rows.len() - 1, ((n - 500.0) / 100.0) as usize + 1);
    let eval = ok(d, &["eval", "--input", "s.rec", "--labels", "s.csv", "--window", "1", "--model", "m.epdn"]);
    assert!(eval.starts_with("truth\\pred,up,down"));
    assert!(eval.contains("fold,accuracy,sensitivity,specificity\nall,"));
}

#[test]
fn stream_sim_reports_losses() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--config", "combined", "--trials-per-class", "2", "--output", "c.rec"]);
    let report = ok(d, &["stream-sim", "--input", "c.rec", "--output", "c.frames", "--loss-rate", "0.2", "--seed", "1", "--reassembled", "r.rec"]);
    let fields: Vec<usize> = report.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(fields[0], fields[1] + fields[2]);
    assert!(fields[2] > 0);
    ok(d, &["derive-eog", "--input", "r.rec", "--output", "d.rec"]);
    ok(d, &["filter", "--input", "d.rec", "--output", "f.rec", "--kind", "bandpass", "--cutoff", "0.5,40"]);
}

#[test]
fn ssvep_sweep_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = ok(dir.path(), &["ssvep", "--trials", "1", "--duration", "4", "--windows", "2,3", "--freqs", "11.5"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "freq,window_s,mean_score,detected");
    assert_eq!(lines.len(), 3);
}

#[test]
fn failures_emit_one_json_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = ocula(d, &["derive-eog", "--input", "missing.rec", "--output", "x.rec"]);
    assert_eq!(out.status.code(), Some(1));
    let e = error_json(&out);
    assert_eq!(e["error"], "io");
    assert!(e["message"].as_str().unwrap().contains("missing.rec"));

    let out = ocula(d, &["synth", "--fs", "250", "--output", "x.rec"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "usage");

    std::fs::write(d.join("bad.rec"), b"format=ocula-rec/1 sample_rate=500 config=bogus n_samples=0 channels=a\n").unwrap();
    let out = ocula(d, &["derive-eog", "--input", "bad.rec", "--output", "x.rec"]);
    assert_eq!(error_json(&out)["error"], "parse");
}

#[test]
fn help_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = ocula(dir.path(), &["--help"]);
    assert!(out.status.success());
    for sub in ["synth", "filter", "derive-eog", "ssvep", "train", "quantize", "infer", "eval", "stream-sim"] {
        assert!(String::from_utf8_lossy(&out.stdout).contains(sub));
    }
}
