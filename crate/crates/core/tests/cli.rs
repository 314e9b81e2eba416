use std::path::Path;
use std::process::{Command, Output};

const SMALL_HEAT: &str = r#"
[experiment]
pde = "heat"
p = 40
m = 4
t_sim = 0.05
trials = 3
seed = 11

[enkf]
particles = 400
horizon = 0.05

[grid]
d0 = [0.0, 0.1]
lambda = [0.0, 0.2]
kinds = ["sin"]
"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robust-enkf"))
        .args(args)
        .output()
        .unwrap()
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{}: {e}", dir.join(name).display()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("small.toml");
    std::fs::write(&path, SMALL_HEAT).unwrap();
    path
}

#[test]
fn batch_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        run_ok(&["batch", "--config", s(&cfg), "--out", s(out), "--dump-trials"]);
    }
    for name in ["timeseries.csv", "heatmap.csv", "trials.csv", "config.echo"] {
        assert_eq!(read(&a, name), read(&b, name), "{name} differs");
    }
    let ts = String::from_utf8(read(&a, "timeseries.csv")).unwrap();
    assert!(ts.starts_with("policy,t,mean,variance\n"));
    for policy in ["uncontrolled", "optimal", "robust"] {
        assert!(ts.lines().any(|l| l.starts_with(policy)), "missing {policy}");
    }
}

#[test]
fn config_echo_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok(&[
        "batch",
        "--config",
        s(&cfg),
        "--out",
        s(&a),
        "--lambda",
        "0.3",
        "--d0",
        "0.05",
    ]);
    let echo = a.join("config.echo");
    run_ok(&["batch", "--config", s(&echo), "--out", s(&b)]);
    for name in ["timeseries.csv", "heatmap.csv", "config.echo"] {
        assert_eq!(read(&a, name), read(&b, name), "{name} differs");
    }
}

#[test]
fn saved_gain_gives_the_same_batch() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let (t, a, b) = (dir.path().join("t"), dir.path().join("a"), dir.path().join("b"));
    run_ok(&["train", "--config", s(&cfg), "--out", s(&t)]);
    run_ok(&["batch", "--config", s(&cfg), "--out", s(&a)]);
    let gain = t.join("gain.txt");
    run_ok(&["batch", "--config", s(&cfg), "--out", s(&b), "--gain", s(&gain)]);
    assert_eq!(read(&a, "timeseries.csv"), read(&b, "timeseries.csv"));
}

#[test]
fn grid_writes_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let out = dir.path().join("g");
    let stdout = run_ok(&["grid", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(stdout.lines().count(), 4);
    let heat = String::from_utf8(read(&out, "heatmap.csv")).unwrap();
    assert_eq!(heat.lines().count(), 5);
}

#[test]
fn oracle_reports_distance_to_learned_gain() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let t = dir.path().join("t");
    run_ok(&["train", "--config", s(&cfg), "--out", s(&t)]);
    let stdout = run_ok(&[
        "oracle",
        "--config",
        s(&cfg),
        "--out",
        s(&t),
        "--gain",
        s(&t.join("gain.txt")),
    ]);
    assert!(stdout.contains("relative Frobenius distance"), "{stdout}");
    assert!(t.join("oracle.txt").exists());
}

#[test]
fn errors_exit_nonzero_with_a_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let out = s(dir.path());

    let r = run(&["batch", "--config", s(&cfg), "--pde", "burgers", "--out", out]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).starts_with("error[config]"));

    let r = run(&["batch", "--config", "/nonexistent/cfg.toml", "--out", out]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).starts_with("error[io]"));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[experiment]\nbogus = 1\n").unwrap();
    let r = run(&["batch", "--config", s(&bad), "--out", out]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).starts_with("error[parse]"));

    let r = run(&["batch", "--config", s(&cfg), "--gain", s(&bad), "--out", out]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).starts_with("error[parse]"));

    let r = run(&["batch", "--pde", "navier-stokes"]);
    assert!(!r.status.success());
}
