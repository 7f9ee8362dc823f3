use std::path::Path;
use std::process::{Command, Output};

fn entropath(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_entropath"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn prepared(dir: &Path) {
    std::fs::write(dir.join("run.toml"), "corpus_size = 10\nimage_size = 32\nseed = 5\nepochs = 60\n").unwrap();
    let o = entropath(&["--config", "run.toml", "make-corpus", "--corpus-size", "60"], dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = entropath(&["--config", "run.toml", "train-heads"], dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    prepared(dir.path());
    let manifest = std::fs::read_to_string(dir.path().join("corpus/manifest.toml")).unwrap();
    assert_eq!(manifest.matches("[[entry]]").count(), 60);
    assert!(manifest.contains("image_size = 32"));
    assert!(dir.path().join("heads.txt").is_file());
}

#[test]
fn bench_is_deterministic_and_restore_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepared(d);
    for tag in ["a", "b"] {
        let report = format!("{tag}/report.txt");
        let o = entropath(&["--config", "run.toml", "bench", "--strategies", "seros,pea,fixed:cbn", "--report", &report], d);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("avg-class"));
    }
    for f in ["report.txt", "report.csv", "report.diag.jsonl"] {
        assert_eq!(std::fs::read(d.join("a").join(f)).unwrap(), std::fs::read(d.join("b").join(f)).unwrap());
    }
    let csv = std::fs::read_to_string(d.join("a/report.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("class,strategy,count,psnr,ssim,mae"));

    let o = entropath(&["restore", "--input", "corpus/degraded/0059.png", "--output-dir", "out"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.join("out/0059.png").is_file());
    let diag = std::fs::read_to_string(d.join("out/0059.diag.json")).unwrap();
    assert!(diag.contains("\"strategy\": \"seros\""));
}

#[test]
fn graph_dump_feeds_se() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepared(d);
    let o = entropath(
        &["graph", "corpus/clean/0000.png", "corpus/degraded/0000.png", "corpus/clean/0001.png", "--out", "g.txt"],
        d,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = entropath(&["se", "g.txt"], d);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("vertices 3"));
    assert_eq!(text.lines().filter(|l| l.split_whitespace().count() == 3 && !l.starts_with("vertex")).count(), 3);

    let o = entropath(&["graph", "--input", "corpus/degraded/0059.png"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("# 0 "));
}

#[test]
fn se_anchor_on_triangle() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("k3.txt"), "n 3 base 2\n0 1 1\n0 2 1\n1 2 1\n").unwrap();
    std::fs::write(dir.path().join("p.txt"), "0 0\n1 0\n2 0\n").unwrap();
    let o = entropath(&["se", "k3.txt", "--partition", "p.txt"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains(&format!("h2_bits {:.12}", 3f64.log2())));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.toml"), "no_such_key = 1\n").unwrap();
    assert_eq!(code(&entropath(&["--config", "bad.toml", "make-corpus"], d)), 2);
    assert_eq!(code(&entropath(&["train-heads", "--zeta", "1.5"], d)), 2);
    assert_eq!(code(&entropath(&["bench", "--strategies", ","], d)), 2);
    assert_eq!(code(&entropath(&["restore", "--strategy", "sideways"], d)), 2);
    assert_eq!(code(&entropath(&["restore"], d)), 2);
    assert_eq!(code(&entropath(&["no-such-command"], d)), 2);
}

#[test]
fn io_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&entropath(&["--config", "missing.toml", "make-corpus"], d)), 3);
    assert_eq!(code(&entropath(&["train-heads", "--corpus-dir", "nowhere"], d)), 3);
    assert_eq!(code(&entropath(&["bench", "--corpus-dir", "nowhere"], d)), 3);
    assert_eq!(code(&entropath(&["se", "missing.txt"], d)), 3);
    assert_eq!(code(&entropath(&["restore", "--input", "x.png", "--heads", "none.txt"], d)), 3);
}
