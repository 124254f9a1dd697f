use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn wavefront(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavefront"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env("WAVEFRONT_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn manifest(dir: &Path, cmd: &str) -> serde_json::Value {
    let text = fs::read_to_string(dir.join(format!("manifest-{cmd}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn simulate_writes_waves_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = wavefront(dir.path(), &["simulate", "--steps", "10", "--burn-in", "0", "--seed", "99"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let waves = fs::read_to_string(dir.path().join("waves.csv")).unwrap();
    let mut lines = waves.lines();
    assert_eq!(lines.next(), Some("t,W,L,censored"));
    assert_eq!(lines.count(), 10);
    let m = manifest(dir.path(), "simulate");
    assert_eq!(m["seed"], 99);
    assert_eq!(m["command"], "simulate");
    assert!(fs::read_to_string(dir.path().join("run.conf")).unwrap().contains("seed = 99"));
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = wavefront(d.path(), &["simulate", "--steps", "300", "--burn-in", "50", "--seed", "5"]);
        assert_eq!(out.status.code(), Some(0));
    }
    for f in ["waves.csv", "snapshot.csv"] {
        let x = fs::read(a.path().join(f)).unwrap();
        let y = fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs between reruns");
    }
}

#[test]
fn different_seeds_differ() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    wavefront(a.path(), &["simulate", "--steps", "50", "--burn-in", "0", "--seed", "1"]);
    wavefront(b.path(), &["simulate", "--steps", "50", "--burn-in", "0", "--seed", "2"]);
    assert_ne!(fs::read(a.path().join("waves.csv")).unwrap(), fs::read(b.path().join("waves.csv")).unwrap());
}

#[test]
fn tail_without_waves_names_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let out = wavefront(dir.path(), &["tail"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("waves.csv"), "{err}");
    assert!(err.contains("wavefront simulate"), "{err}");
}

#[test]
fn tail_of_unit_waves_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("t,W,L,censored\n");
    for t in 1..=400 {
        csv.push_str(&format!("{t},1,1.0e0,0\n"));
    }
    fs::write(dir.path().join("waves.csv"), csv).unwrap();
    let out = wavefront(dir.path(), &["tail", "--burn-in", "100", "--j-grid", "2,4,8", "--replicates", "8"]);
    // Zero tail frequencies cannot be fitted, so the verdicts fail.
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let tail = fs::read_to_string(dir.path().join("tail.csv")).unwrap();
    assert_eq!(tail.lines().count(), 4);
    for line in tail.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[1], "0", "{line}");
        assert_eq!(f[2].parse::<f64>().unwrap(), 0.0, "{line}");
    }
}

#[test]
fn invalid_fields_are_reported_together() {
    let dir = tempfile::tempdir().unwrap();
    let out = wavefront(dir.path(), &["simulate", "--steps", "5", "--burn-in", "10", "--j-grid", "", "--horizon-cap", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("burn"), "{err}");
    assert!(err.contains("j-grid") || err.contains("j_grid"), "{err}");
    assert!(err.contains("horizon"), "{err}");
    assert!(!dir.path().join("waves.csv").exists());
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("exp.conf");
    fs::write(&conf, "# small run\nsteps = 20\nburn_in = 0\nseed = 3\n").unwrap();
    let out = wavefront(dir.path(), &["simulate", "--config", conf.to_str().unwrap(), "--seed", "4"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(manifest(dir.path(), "simulate")["seed"], 4);
    assert_eq!(fs::read_to_string(dir.path().join("waves.csv")).unwrap().lines().count(), 21);
}

#[test]
fn bad_config_lines_are_all_listed() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("exp.conf");
    fs::write(&conf, "steps = many\ncolour = blue\ndist = uniform:2,1\n").unwrap();
    let out = wavefront(dir.path(), &["simulate", "--config", conf.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("steps"), "{err}");
    assert!(err.contains("colour"), "{err}");
}
