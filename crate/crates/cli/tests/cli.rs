use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nonlocal-ld"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn hamiltonian_at_zero() {
    let o = run(&["hamiltonian", "--kernel", "gaussian", "--p", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0].parse::<f64>().unwrap(), 0.0);
    assert_eq!(row[1].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn hamiltonian_grid_and_quadrature() {
    let o = run(&["hamiltonian", "--kernel", "uniform:eta=1", "--p-grid", "-2:2:5", "--quadrature"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 6);
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let p: f64 = f[0].parse().unwrap();
        let h: f64 = f[1].parse().unwrap();
        let exact = if p == 0.0 { 0.0 } else { p.sinh() / p - 1.0 };
        assert!((h - exact).abs() <= 1e-8 * exact.abs().max(1.0));
        assert_eq!(f[4], "Quadrature");
    }
}

#[test]
fn legendre_stationary_point_and_law_columns() {
    let o = run(&["legendre", "--kernel", "gaussian", "--q", "1.648721"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let f: Vec<f64> = text.lines().nth(1).unwrap().split(',').take(3).map(|v| v.parse().unwrap()).collect();
    assert!((f[1] - 1.0).abs() < 1e-5, "L = {}", f[1]);
    assert!((f[2] - 1.0).abs() < 1e-5, "p0 = {}", f[2]);

    let o = run(&["legendre", "--kernel", "uniform:eta=1", "--q", "1e6,1e7", "--law"]);
    let text = stdout(&o);
    assert!(text.starts_with("q,L,p0,iterations,residual,at_boundary,law,ratio"));
    let ratio: f64 = text.lines().nth(1).unwrap().split(',').nth(7).unwrap().parse().unwrap();
    assert!((ratio - 1.1845).abs() < 1e-3);
}

#[test]
fn rate_point_and_bound() {
    let o = run(&["rate", "--kernel", "uniform", "--x", "1", "--t", "0.1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().nth(1).unwrap().ends_with(",0"));

    let o = run(&["rate", "--kernel", "uniform", "--R", "10", "--theta", "0.8", "--t", "0.1"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["asymptotic_exponent"].as_f64().unwrap() - 2.0 * 20f64.ln()).abs() < 1e-12);
}

#[test]
fn solve_dumps_csv_with_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.csv");
    let o = run(&[
        "solve", "--kernel", "uniform:eta=1", "--R", "10", "--t", "0.1", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    for key in ["R=10", "t=0.1", "kernel=uniform(eta=1)", "h=", "dt="] {
        assert!(header.contains(key), "{header}");
    }
    assert_eq!(lines.next(), Some("x,u"));
    for line in lines {
        let u: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&u));
    }
}

#[test]
fn study_report_schema_and_monotone_e() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "study", "--kernel", "uniform:eta=1", "--R", "10,15,20", "--theta", "0.8", "--t", "0.1", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["kernel"], "uniform(eta=1)");
    let rows = v["rows"].as_array().unwrap();
    let e: Vec<f64> = rows.iter().map(|r| r["E"].as_f64().unwrap()).collect();
    assert!(e.windows(2).all(|w| w[1] > w[0]), "{e:?}");
    for key in ["R", "sup_err", "E", "predicted_exponent", "slack", "floored"] {
        assert!(rows[0].get(key).is_some(), "{key}");
    }
    let files = v["profile_files"].as_array().unwrap();
    assert_eq!(files.len(), 3);
    for f in files {
        assert!(std::path::Path::new(f.as_str().unwrap()).exists());
    }
    let saved = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert_eq!(serde_json::from_str::<serde_json::Value>(&saved).unwrap(), v);
}

#[test]
fn study_from_config_file_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.cfg");
    std::fs::write(&cfg, "kernel=gaussian\nR=6,8\ntheta=0.8\nt=0.1\nh=0.0625\n").unwrap();
    let mut outs = Vec::new();
    for sub in ["a", "b"] {
        let out = dir.path().join(sub);
        let o = run(&["study", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        outs.push(std::fs::read(out.join("rows.csv")).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn validation_errors_exit_one() {
    let o = run(&["study", "--kernel", "uniform", "--R", "10,5", "--theta", "0.8", "--t", "0.1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains('R'));

    let o = run(&["study", "--kernel", "uniform", "--R", "10", "--theta", "1.5", "--t", "0.1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("theta"));

    let o = run(&["hamiltonian", "--kernel", "fractional:alpha=1", "--p", "1"]);
    assert_eq!(o.status.code(), Some(1));

    let o = run(&["legendre", "--kernel", "gaussian", "--q", "abc"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains('q'));

    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["solve", "--kernel", "uniform"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn numerical_failures_exit_two() {
    let o = run(&["hamiltonian", "--kernel", "critical", "--p", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn selftest_lists_and_runs_suites() {
    let o = run(&["selftest", "--list"]);
    let names = stdout(&o);
    for s in ["convexity", "fenchel_young", "biconjugacy", "maximum_principle", "rate_monotone_t"] {
        assert!(names.contains(s), "{s}");
    }
    let o = run(&["selftest", "--suite", "evenness"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("PASS evenness"));
    assert_eq!(run(&["selftest", "--suite", "nope"]).status.code(), Some(1));
}
