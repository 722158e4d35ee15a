use std::path::Path;
use std::process::{Command, Output};

fn assa(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_assa"))
        .args(args)
        .current_dir(dir)
        .env_remove("ASSA_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Value printed after `key: ` on its own line.
fn field(o: &Output, key: &str) -> f64 {
    let prefix = format!("{key}: ");
    stdout(o)
        .lines()
        .find_map(|l| l.strip_prefix(&prefix).map(|v| v.trim().parse().unwrap()))
        .unwrap_or_else(|| panic!("no {key} in {}", stdout(o)))
}

#[test]
fn bench_writes_one_row_per_bucket() {
    let dir = tempfile::tempdir().unwrap();
    let o = assa(dir.path(), &["bench", "--variant", "vanilla", "--sizes", "1024", "--runs", "20", "--out", "b.csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.contains(",1024,") && r.ends_with(",20,1")));
}

#[test]
fn bench_compare_prints_speedups() {
    let dir = tempfile::tempdir().unwrap();
    let o = assa(
        dir.path(),
        &["bench", "--variant", "vanilla", "--compare", "assa", "--sizes", "512", "--runs", "10", "--width", "16"],
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("speedup"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(assa(dir.path(), &["bench", "--variant", "fancy"]).status.code(), Some(2));
    assert_eq!(assa(dir.path(), &["bench", "--sizes", "0"]).status.code(), Some(2));
    assert_eq!(assa(dir.path(), &["nonsense"]).status.code(), Some(2));
    assert_eq!(assa(dir.path(), &[]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = assa(dir.path(), &["eval", "--checkpoint", "missing.ckpt", "--data", "nowhere"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
    assert_eq!(assa(dir.path(), &["bench", "--sizes", "64", "--runs", "3"]).status.code(), Some(1));
}

#[test]
fn equivalence_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = assa(dir.path(), &["equiv-check"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(field(&o, "max_abs_diff") <= 1e-5);
    assert_eq!(assa(dir.path(), &["equiv-check", "--edge-concat"]).status.code(), Some(1));
    let one = assa(dir.path(), &["equiv-check", "--seeds", "1"]);
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(field(&one, "instances"), 1.0);
}

#[test]
fn flops_reports_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = assa(dir.path(), &["flops", "--variant", "assa", "--width", "64", "--n", "1024", "--k", "32"]);
    assert_eq!(o.status.code(), Some(0));
    assert!((field(&o, "ratio_vs_vanilla") - 27.4286).abs() < 1e-9);
    let o = assa(dir.path(), &["flops", "--backbone", "--width", "16", "--depth", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().filter(|l| l.trim_start().starts_with(char::is_numeric)).count(), 4);
}

#[test]
fn generate_train_evaluate_and_dump_patterns() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = assa(d, &["gen-data", "--out", "data", "--per-class", "6", "--points", "300", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(d.join("data/manifest.txt").exists());

    let cfg = "epochs = 2\nbatch_size = 8\n";
    std::fs::write(d.join("run.toml"), cfg).unwrap();
    let o = assa(d, &["train", "--config", "run.toml", "--data", "data", "--out", "m.ckpt", "--report", "r.csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let trained = field(&o, "test_acc");
    let report = std::fs::read_to_string(d.join("r.csv")).unwrap();
    assert_eq!(report.lines().count(), 3);

    let o = assa(d, &["eval", "--checkpoint", "m.ckpt", "--data", "data"]);
    assert_eq!(o.status.code(), Some(0));
    assert!((field(&o, "test_acc") - trained).abs() < 1e-9);

    let o = assa(d, &["patterns", "--checkpoint", "m.ckpt", "--data", "data", "--neurons", "4", "--out", "pat"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let written = std::fs::read_dir(d.join("pat")).unwrap().count();
    let warned = String::from_utf8_lossy(&o.stderr).matches("warning").count();
    assert_eq!(written + warned, 4);
}

#[test]
fn train_flags_scale_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(assa(d, &["gen-data", "--out", "data", "--per-class", "2", "--points", "300"]).status.code(), Some(0));
    let o = assa(
        d,
        &["train", "--data", "data", "--epochs", "1", "--variant", "separable", "--scale-width", "2", "--scale-depth", "2"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let bytes = std::fs::read(d.join("model.ckpt")).unwrap();
    let model = assa_core::checkpoint::decode(&bytes).unwrap();
    let c = model.config();
    assert_eq!((c.variant.kind, c.initial_width, c.depth), (assa_core::sa::SaKind::Separable, 32, 2));
    assert!(d.join("train_report.csv").exists());
}
