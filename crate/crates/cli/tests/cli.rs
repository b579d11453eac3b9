use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use tempfile::tempdir;

fn nbv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nbv"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn theory_writes_table_and_curve() {
    let dir = tempdir().unwrap();
    let o = nbv(&["theory", "--k", "2,64", "--trials", "20", "--out", s(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("theory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("k,closed_form,empirical_mean,empirical_std,trials"));
    assert_eq!(fs::read_to_string(dir.path().join("theory_curve.dat")).unwrap().lines().filter(|l| !l.starts_with('#')).count(), 2);
}

#[test]
fn prep_run_export_round_trip() {
    let dir = tempdir().unwrap();
    let caches = dir.path().join("caches");
    let out = dir.path().join("out");
    let o = nbv(&["prep", "suite:cube", "suite:l_shape", "--centers", "0,2", "--surface-points", "3000", "--out", s(&caches)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(caches.join("manifest.json").exists());

    let config = dir.path().join("bench.toml");
    fs::write(
        &config,
        format!(
            "scenes = [{:?}]\nplanners = [\"random\", \"frontier\"]\nviews_budget = 5\nseeds = [0, 1]\n\n[env]\nwidth = 64\nheight = 64\nstop_at_target = false\n",
            s(&caches)
        ),
    )
    .unwrap();
    let o = nbv(&["run", "--config", s(&config), "--centers", "2", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let episodes = fs::read_to_string(out.join("episodes.csv")).unwrap();
    // 2 meshes x 1 center x 2 planners x 2 seeds
    assert_eq!(episodes.lines().count(), 1 + 8);
    assert!(episodes.lines().skip(1).all(|l| l.contains("@4,-4")));
    let timing = fs::read_to_string(out.join("timing.csv")).unwrap();
    assert_eq!(timing.lines().count(), 1 + 8);

    let mut traces: Vec<_> = fs::read_dir(out.join("traces")).unwrap().map(|e| e.unwrap().path()).collect();
    traces.sort();
    assert_eq!(traces.len(), 8);
    let exported = dir.path().join("export");
    let o = nbv(&["export", s(&traces[0]), "--out", s(&exported), "--format", "ply,csv,pgm"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(exported.join("recon.ply").exists());
    assert_eq!(fs::read_to_string(exported.join("coverage.csv")).unwrap().lines().count(), 1 + 4);
    assert!(exported.join("gray_004.pgm").exists());
}

#[test]
fn partial_prep_failure_exits_one() {
    let dir = tempdir().unwrap();
    let bad = dir.path().join("broken.obj");
    fs::write(&bad, "f 1 2 3\n").unwrap();
    let out = dir.path().join("caches");
    let o = nbv(&["prep", "suite:cube", s(&bad), "--centers", "0", "--surface-points", "500", "--out", s(&out)]);
    assert_eq!(code(&o), 1);
    let caches = fs::read_dir(&out).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "nbvgt")).count();
    assert_eq!(caches, 1);

    let o = nbv(&["prep", s(&bad), "--out", s(&dir.path().join("none"))]);
    assert_eq!(code(&o), 1);
}

#[test]
fn invalid_configuration_exits_two() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("out");
    let cases: Vec<Vec<&str>> = vec![
        vec!["run", "--centers", "7", "--out", s(&out)],
        vec!["run", "--planner", "oracle9000", "--scenes", "suite:cube", "--out", s(&out)],
        vec!["run", "--budget", "0", "--out", s(&out)],
        vec!["run", "--seed", "x", "--out", s(&out)],
        vec!["theory", "--k", "0", "--out", s(&out)],
        vec!["export", "missing.jsonl", "--out", s(&out), "--format", "png"],
        vec!["frobnicate"],
    ];
    for args in cases {
        let o = nbv(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let config = dir.path().join("bad.toml");
    fs::write(&config, "views_budgets = 3\n").unwrap();
    assert_eq!(code(&nbv(&["run", "--config", s(&config)])), 2);
}

#[test]
fn serve_over_stdio() {
    let config = tempdir().unwrap();
    let path = config.path().join("serve.toml");
    fs::write(&path, "scenes = [\"suite:cube\"]\nsurface_points = 500\n\n[env]\nwidth = 32\nheight = 32\n").unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_nbv"))
        .args(["serve", "--stdio", "--centers", "0", "--config", s(&path)])
        .env("RUST_LOG", "warn")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stdin = child.stdin.take().unwrap();
    stdin
        .write_all(b"{\"type\":\"hello\"}\n{\"type\":\"reset\",\"env_id\":\"a\",\"payload\":{\"seed\":1}}\n{\"type\":\"step\",\"env_id\":\"a\",\"payload\":{\"action\":[0.5,0.5,-0.5],\"lookat\":[0,0,5]}}\n")
        .unwrap();
    drop(stdin);
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3, "{text}");
    assert!(lines[0].contains("\"scenes\":[\"cube@0,0\"]"));
    assert!(lines[1].contains("\"type\":\"reset\"") && lines[2].contains("\"reward\""));
}
