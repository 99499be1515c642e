//! End-to-end runs of the `mpet-adapt` binary.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mpet-adapt"))
}

fn run(args: &[&str]) -> std::process::Output {
    bin().args(args).output().expect("binary runs")
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn converge_writes_tables_with_config_headers_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "problem = \"smooth3\"\nconverge.n = [4, 8]\nconverge.tau = [0.2, 0.1]\n").unwrap();
    let (o1, o2) = (dir.path().join("a"), dir.path().join("b"));
    for o in [&o1, &o2] {
        let out = run(&["converge", "--config", cfg.to_str().unwrap(), "--out", o.to_str().unwrap(), "--serial"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let mut names: Vec<String> =
        std::fs::read_dir(&o1).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    for want in
        ["table_u_linf_h1.csv", "table_p_l2_h1.csv", "estimators.csv", "efficiency.csv", "plot_eta2.svg", "study.json"]
    {
        assert!(names.iter().any(|n| n == want), "missing {want} in {names:?}");
    }
    for n in &names {
        let (a, b) = (read(&o1.join(n)), read(&o2.join(n)));
        assert_eq!(a, b, "{n} differs between identical runs");
        let first = a.lines().next().unwrap();
        assert!(
            first.starts_with("# config: {") || first.starts_with("<!-- config: {") || n.ends_with(".json"),
            "{n}: {first}"
        );
    }
    let study: serde_json::Value = serde_json::from_str(&read(&o1.join("study.json"))).unwrap();
    assert_eq!(study["config"]["converge_n"], serde_json::json!([4, 8]));
    // CSV layout: header row, one row per N, trailing rate row
    let t = read(&o1.join("table_u_linf_h1.csv"));
    let rows: Vec<&str> = t.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "N,tau=2.000000e-1,tau=1.000000e-1,rate_h");
    assert!(rows[1].starts_with("4,") && rows[2].starts_with("8,") && rows[3].starts_with("rate_tau,"));
}

#[test]
fn adapt_time_with_wide_band_only_accepts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "adapt-time",
        "--out",
        dir.path().to_str().unwrap(),
        "mesh.n=2",
        "end=0.4",
        "adapt.alpha=0.999999",
        "adapt.tau0=0.1",
        "adapt.tau_max=0.1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(&dir.path().join("decisions.csv"));
    let actions: Vec<&str> = csv.lines().skip(2).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(actions, vec!["accept"; 4]);
    let meta: serde_json::Value = serde_json::from_str(&read(&dir.path().join("trajectory_meta.json"))).unwrap();
    assert_eq!(meta["times"].as_array().unwrap().len(), 5);
    assert!(meta["errors"]["u_linf_h1"].as_f64().unwrap() > 0.0);
}

#[test]
fn adapt_space_writes_levels_meshes_and_indicators() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "adapt-space",
        "--out",
        dir.path().to_str().unwrap(),
        "mesh.n=2",
        "end=0.2",
        "adapt.tau0=0.1",
        "space.max_cells=20",
        "space.fraction=0.5",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let levels = read(&dir.path().join("levels.csv"));
    let rows: Vec<&str> = levels.lines().skip(2).collect();
    assert!(rows.len() >= 2, "{levels}");
    for l in 0..rows.len() {
        let mesh = read(&dir.path().join(format!("mesh_{l}.txt")));
        let m = mpet_adapt::mesh::Mesh::read_ascii(mesh.as_bytes()).unwrap();
        let ind = read(&dir.path().join(format!("indicators_{l}.csv")));
        assert_eq!(ind.lines().count(), m.num_cells() + 2);
    }
}

#[test]
fn solve_checkpoint_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["solve", "--out", dir.path().to_str().unwrap(), "problem=loaded-box", "mesh.n=2", "time.tau=0.2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = read(&dir.path().join("trajectory.txt"));
    let states = mpet_adapt::solver::Trajectory::read_states(text.as_bytes()).unwrap();
    assert_eq!(states.iter().map(|s| s.t).collect::<Vec<_>>(), vec![0.0, 0.2, 0.4]);
    let meta: serde_json::Value = serde_json::from_str(&read(&dir.path().join("trajectory_meta.json"))).unwrap();
    assert!(meta["errors"].is_null());
}

#[test]
fn invalid_configs_fail_fast_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    for (args, needle) in [
        (vec!["converge", "--out", d, "material.alpha=[0.5, 0.5, 1.5]"], "(0, 1]"),
        (vec!["converge", "--out", d, "material.gamma=-1"], "gamma_12"),
        (vec!["converge", "--out", d, "material.kappa_x=1"], "kappa_x"),
        (vec!["converge", "--out", d, "converge.n"], "key=value"),
        (vec!["converge", "--out", d, "--config", "/nonexistent.toml"], "cannot read"),
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert_eq!(err.trim().lines().count(), 1, "{err}");
        assert!(err.contains(needle), "{err}");
    }
    // nothing was run, so nothing was written
    assert_eq!(std::fs::read_dir(d).unwrap().count(), 0);
}
