use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_l1pcanet")).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path) {
    ok(dir, &["synth", "--classes", "3", "--per-class", "4", "--size", "12x12", "--seed", "5", "--out", "data"]);
}

const SMALL_NET: [&str; 8] = ["--k", "3", "--l1", "2", "--l2", "2", "--blocks", "2x2"];

#[test]
fn synth_writes_one_directory_per_class() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    for c in 0..3 {
        let files = std::fs::read_dir(dir.path().join(format!("data/class_{c:02}"))).unwrap().count();
        assert_eq!(files, 4);
    }
}

#[test]
fn train_extract_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    let mut args = vec!["train", "--data", "data", "--variant", "2DPCANet", "--out", "model.bin"];
    args.extend(SMALL_NET);
    ok(d, &args);
    assert!(std::fs::read(d.join("model.bin")).unwrap().starts_with(b"L12DPCANET"));

    ok(d, &["extract", "--model", "model.bin", "--data", "data", "--out", "features.csv"]);
    let csv = std::fs::read_to_string(d.join("features.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 12);
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 2 + 4 * 2 * 4);
        assert!(fields[0].ends_with(".pgm"));
        assert!(fields[1].starts_with("class_"));
        let total: u64 = fields[2..].iter().map(|v| v.parse::<u64>().unwrap()).sum();
        assert_eq!(total, 2 * 12 * 12);
    }

    let clean = ok(d, &["eval", "--model", "model.bin", "--data", "data"]);
    assert!(clean.starts_with("accuracy "), "{clean}");
    let a = ok(d, &["eval", "--model", "model.bin", "--data", "data", "--occlusion", "0.3", "--seed", "4"]);
    let b = ok(d, &["eval", "--model", "model.bin", "--data", "data", "--occlusion", "0.3", "--seed", "4"]);
    assert_eq!(a, b);
}

#[test]
fn experiment_csv_is_bit_identical_across_executions() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    std::fs::write(
        d.join("spec.toml"),
        "[experiment]\ndata = \"data\"\nrepeats = 3\nseed = 11\ntrain_per_class = 2\nocclusion = [0.2]\n\
         k = 3\nl1 = 2\nl2 = 2\nblocks = \"2x2\"\n",
    )
    .unwrap();
    ok(d, &["experiment", "--spec", "spec.toml", "--out", "a"]);
    ok(d, &["experiment", "--spec", "spec.toml", "--out", "b"]);
    let a = std::fs::read(d.join("a/results.csv")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b/results.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().next().unwrap().ends_with("run_1,run_2,run_3,error"));
    assert!(d.join("a/results.txt").exists());
}

#[test]
fn flags_override_the_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    std::fs::write(
        d.join("spec.toml"),
        "[experiment]\ndata = \"data\"\nout = \"from_file\"\nrepeats = 3\nvariants = [\"PCANet\", \"2DPCANet\"]\n\
         k = 3\nl1 = 2\nl2 = 2\nblocks = \"2x2\"\n",
    )
    .unwrap();
    ok(d, &["experiment", "--spec", "spec.toml", "--repeats", "1", "--variants", "L1-PCANet", "--out", "flags"]);
    assert!(!d.join("from_file").exists());
    let csv = std::fs::read_to_string(d.join("flags/results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].ends_with("run_1,error"));
    assert!(lines[1].starts_with("L1-PCANet,"));
}

#[test]
fn experiment_without_spec_file_uses_flags_only() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    let mut args = vec![
        "experiment",
        "--data",
        "data",
        "--out",
        "r",
        "--repeats",
        "1",
        "--variants",
        "PCANet",
        "--block-sweep",
        "2x2,20x20",
    ];
    args.extend(&SMALL_NET[..6]);
    ok(d, &args);
    let csv = std::fs::read_to_string(d.join("r/results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[2].contains("does not fit"), "{}", lines[2]);
}

#[test]
fn usage_errors_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["train", "--data", "x"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["experiment", "--data", "x"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn invalid_network_parameters_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let out = run(dir.path(), &["train", "--data", "data", "--k", "4", "--out", "m.bin"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn data_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(run(d, &["train", "--data", "missing", "--out", "m.bin"]).status.code(), Some(2));
    std::fs::write(d.join("bogus.bin"), b"NOTAMODEL").unwrap();
    synth(d);
    let out = run(d, &["eval", "--model", "bogus.bin", "--data", "data"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("magic"));
}

#[test]
fn model_of_other_size_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    ok(d, &["synth", "--classes", "3", "--per-class", "2", "--size", "10x10", "--seed", "1", "--out", "small"]);
    let mut args = vec!["train", "--data", "data", "--out", "m.bin"];
    args.extend(SMALL_NET);
    ok(d, &args);
    assert_eq!(run(d, &["eval", "--model", "m.bin", "--data", "small"]).status.code(), Some(2));
}

#[test]
fn oracle_check_prints_one_line_per_suite() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["oracle-check", "--trials", "20", "--seed", "3"]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines.iter().all(|l| l.starts_with("PASS ") || l.starts_with("FAIL ")));
    for name in ["l2-power-iteration", "deflation-orthogonality", "outlier-robustness"] {
        assert!(stdout.contains(&format!("PASS {name}")), "{stdout}");
    }
    let any_failed = lines.iter().any(|l| l.starts_with("FAIL"));
    assert_eq!(out.status.code(), Some(if any_failed { 3 } else { 0 }));
}
