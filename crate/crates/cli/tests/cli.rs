use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quasimorse"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.cfg");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn solve_flock_reports_radius_and_unit_mass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "C = 1.1111111111111112\nl = 0.75\nk = 0.5\nlambda = 1\ndr = 0.005\n");
    let out = dir.path().join("o");
    let o = run(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&out.join("summary.json"));
    let r = s["support"][1].as_f64().unwrap();
    assert!((1.29..=1.33).contains(&r), "R = {r}");
    assert!((s["mass"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(s["A"].as_f64().unwrap(), 1.5);
    let csv = fs::read_to_string(out.join("profile.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("r,rho,conv,target"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first.len(), 4);
    assert!(first[0].contains('e'));
}

#[test]
fn separatrix_has_no_compact_solution() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = run(&["solve", "--C", "1.5625", "--l", "0.8", "--dr", "0.02", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&out.join("summary.json"));
    assert_eq!(s["status"], "NoCompactSolution");
}

#[test]
fn bad_step_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    for text in ["dr = 0\n", "dr =\n"] {
        let cfg = write_config(dir.path(), text);
        let o = run(&["solve", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
        assert_eq!(code(&o), 1);
        assert!(String::from_utf8_lossy(&o.stderr).contains("dr"));
    }
    let o = run(&["solve", "--set", "bogus=1"]);
    assert_eq!(code(&o), 1);
    let o = run(&["solve", "--no-such-flag"]);
    assert_eq!(code(&o), 1);
    let o = run(&["solve", "--pattern", "mill", "--dim", "3"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn summary_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = run(&["solve", "--k", "1", "--dr", "0.01", "--out", a.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let summary = a.join("summary.json");
    let o = run(&["solve", "--config", summary.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        fs::read(a.join("profile.csv")).unwrap(),
        fs::read(b.join("profile.csv")).unwrap()
    );
    assert_eq!(json(&summary)["config"], json(&b.join("summary.json"))["config"]);
}

#[test]
fn mill_solve_writes_three_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m");
    let o = run(&[
        "solve", "--pattern", "mill", "--dr", "0.01", "--rmax", "4", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&out.join("summary.json"));
    assert_eq!(s["mu"].as_array().unwrap().len(), 3);
    assert!(s["gamma"].is_f64());
    let (a, b) = (s["support"][0].as_f64().unwrap(), s["support"][1].as_f64().unwrap());
    assert!((a - 0.47).abs() < 0.05 && (b - 1.57).abs() < 0.05, "({a}, {b})");
}

#[test]
fn single_particle_reaches_cruise_speed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let o = run(&["simulate", "--N", "1", "--T", "20", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&out.join("summary.json"));
    let speed = s["mean_speed"].as_f64().unwrap();
    assert!((speed - 0.2f64.sqrt()).abs() < 1e-6, "{speed}");
}

#[test]
fn seeded_simulation_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let outs: Vec<_> = ["a", "b"]
        .iter()
        .map(|n| {
            let out = dir.path().join(n);
            let o = run(&[
                "simulate", "--N", "60", "--T", "1", "--seed", "9", "--set", "samples=5", "--out",
                out.to_str().unwrap(),
            ]);
            assert_eq!(code(&o), 0);
            out
        })
        .collect();
    for file in ["empirical_density.csv", "trajectory.json", "snapshots/snapshot_00005.csv"] {
        assert_eq!(fs::read(outs[0].join(file)).unwrap(), fs::read(outs[1].join(file)).unwrap(), "{file}");
    }
    let other = dir.path().join("c");
    run(&["simulate", "--N", "60", "--T", "1", "--seed", "10", "--set", "samples=5", "--out", other.to_str().unwrap()]);
    assert_ne!(
        fs::read(outs[0].join("empirical_density.csv")).unwrap(),
        fs::read(other.join("empirical_density.csv")).unwrap()
    );
}

#[test]
fn simulation_compares_with_continuum() {
    let dir = tempfile::tempdir().unwrap();
    let solve = dir.path().join("solve");
    assert_eq!(code(&run(&["solve", "--dr", "0.01", "--out", solve.to_str().unwrap()])), 0);
    let sim = dir.path().join("sim");
    let o = run(&[
        "simulate",
        "--N",
        "100",
        "--T",
        "2",
        "--continuum",
        solve.join("summary.json").to_str().unwrap(),
        "--out",
        sim.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let c = json(&sim.join("comparison.json"));
    let l1 = c["relative_l1"].as_f64().unwrap();
    assert!(l1.is_finite() && l1 >= 0.0);
    let s = json(&sim.join("summary.json"));
    assert!((s["histogram_mass"].as_f64().unwrap() - 1.0).abs() < 0.2);
}

#[test]
fn blow_up_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "simulate", "--N", "30", "--T", "1", "--lambda", "1e9", "--set", "dt=0.1", "--out",
        dir.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&dir.path().join("x/summary.json"))["status"], "BlowUp");
}

#[test]
fn sweep_labels_follow_the_separatrix() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w");
    let o = run(&[
        "sweep", "--lambda", "1", "--set", "C_res=3", "--set", "l_res=3", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 9);
    for r in &rows {
        let (c, l): (f64, f64) = (r[0].parse().unwrap(), r[1].parse().unwrap());
        let want = if c * l * l < 1.0 { "I" } else { "II" };
        assert_eq!(r[3], want, "{r:?}");
        assert_ne!(r[8], "no", "{r:?}");
    }
    let o = run(&["sweep", "--set", "C_res=0", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn potential_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p");
    assert_eq!(code(&run(&["potential", "--out", out.to_str().unwrap()])), 0);
    let csv = fs::read_to_string(out.join("potential.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1001);
    let s = json(&out.join("summary.json"));
    assert_eq!(s["regime"]["region"], "I");
    assert!((s["r_min"].as_f64().unwrap() - 1.0523).abs() < 1e-3);
}
