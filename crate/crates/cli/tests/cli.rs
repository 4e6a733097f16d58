use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn ptamp(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ptamp"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("failed to spawn ptamp")
}

fn with_config(dir: &TempDir, json: &str, args: &[&str]) -> Output {
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, json).unwrap();
    let mut all = vec!["--config", cfg.to_str().unwrap()];
    all.extend_from_slice(args);
    ptamp(dir.path(), &all)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read(dir: &TempDir, name: &str) -> String {
    std::fs::read_to_string(dir.path().join(name)).unwrap()
}

fn constant(v: f64) -> String {
    format!(r#"{{"kind":"constant","value":{v}}}"#)
}

fn amplifier(alpha: f64, beta: f64) -> String {
    format!(
        r#"{{"omega":{},"alpha":{},"beta":{},"mass":{}}}"#,
        constant(1.0),
        constant(alpha),
        constant(beta),
        constant(1.0)
    )
}

#[test]
fn pt_region_writes_one_row_per_grid_point() {
    let dir = TempDir::new().unwrap();
    let o = ptamp(dir.path(), &["pt-region", "--n", "2"]);
    assert!(o.status.success(), "{o:?}");
    let csv = read(&dir, "pt_region.csv");
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "alpha,beta,unbroken,constraint");
    assert_eq!(lines.len(), 5);
    // alpha = beta = 1 is broken under both criteria
    assert!(lines[4].ends_with(",0,0"));
}

#[test]
fn metric_solve_reports_default_root() {
    let dir = TempDir::new().unwrap();
    let o = ptamp(dir.path(), &["metric-solve"]);
    assert!(o.status.success(), "{o:?}");
    let s = stdout(&o);
    assert!(s.contains("kappa0 = 5.10208"), "{s}");
    assert!(s.contains("hermiticity_residual"));
}

#[test]
fn equal_rates_give_identity_metric() {
    let dir = TempDir::new().unwrap();
    let o = with_config(&dir, &format!(r#"{{"amplifier":{}}}"#, amplifier(0.15, 0.15)), &["metric-solve"]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("metric = identity"));
}

#[test]
fn broken_pt_exits_with_domain_code() {
    let dir = TempDir::new().unwrap();
    let o = with_config(&dir, &format!(r#"{{"amplifier":{}}}"#, amplifier(0.7, 0.6)), &["metric-solve"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("broken PT"));
}

#[test]
fn negative_rates_need_opt_in() {
    let dir = TempDir::new().unwrap();
    let amp = amplifier(-0.1, 0.2);
    let o = with_config(&dir, &format!(r#"{{"amplifier":{amp}}}"#), &["metric-solve"]);
    assert_eq!(o.status.code(), Some(3));
    // allowed, but then the region predicate rejects the point
    let o = with_config(&dir, &format!(r#"{{"amplifier":{amp},"allow_negative_rates":true}}"#), &["metric-solve"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("broken PT"));
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = TempDir::new().unwrap();
    assert_eq!(with_config(&dir, r#"{"kapa": 1}"#, &["metric-solve"]).status.code(), Some(2));
    assert_eq!(with_config(&dir, r#"{"ep": {"c1": 0.5}}"#, &["ep", "toy"]).status.code(), Some(2));
    assert_eq!(with_config(&dir, r#"{"tol": 1.0}"#, &["metric-solve"]).status.code(), Some(2));
    assert_eq!(ptamp(dir.path(), &["--tol", "-1", "metric-solve"]).status.code(), Some(2));
}

#[test]
fn missing_config_exits_with_io_code() {
    let dir = TempDir::new().unwrap();
    let o = ptamp(dir.path(), &["--config", "/nonexistent/run.json", "metric-solve"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn toy_command_reports_smooth_variant() {
    let dir = TempDir::new().unwrap();
    let o = ptamp(dir.path(), &["ep", "toy"]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("signed sin"));
    let csv = read(&dir, "eta_branches.csv");
    assert!(csv.starts_with("t,eta_1p,eta_1m,eta_2p,eta_2m\n"));
    assert_eq!(csv.lines().count(), 92);
    assert!(read(&dir, "ep_toy.csv").lines().count() > 1);
}

#[test]
fn numeric_ep_tracks_static_fixed_point() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"ep":{"mode":"numeric","span":[0,4],"samples":5,"partner_samples":101}}"#;
    let o = with_config(&dir, cfg, &["ep", "solve"]);
    assert!(o.status.success(), "{o:?}");
    let csv = read(&dir, "ep_numeric.csv");
    let etas: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(etas.len(), 5);
    // constant coefficients start at the frozen value, so eta stays put
    assert!(etas.iter().all(|e| (e - etas[0]).abs() < 1e-8), "{etas:?}");
}

#[test]
fn evolve_respects_uncertainty_bound() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"evolve":{"times":[1,2,5,9],"nx":21}}"#;
    let o = with_config(&dir, cfg, &["evolve"]);
    assert!(o.status.success(), "{o:?}");
    let cov = read(&dir, "covariance.csv");
    for line in cov.lines().skip(1) {
        let margin: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(margin >= -1e-12, "{line}");
    }
    for name in ["trajectory.csv", "phases.csv", "density_eta_plus.csv", "density_eta_minus.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn wigner_output_is_deterministic() {
    let cfg = r#"{"wigner":{"times":[0.1,1000],"nx":21,"np":21}}"#;
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for d in [&a, &b] {
        let o = with_config(d, cfg, &["--oracle-check", "wigner"]);
        assert!(o.status.success(), "{o:?}");
        assert!(stdout(&o).contains("oracle t = 1000"));
    }
    for name in ["wigner_t0.1.csv", "wigner_t1000.csv", "wigner_origin.csv", "wigner_compare.csv"] {
        assert_eq!(read(&a, name), read(&b, name), "{name}");
    }
    let origin = read(&a, "wigner_origin.csv");
    assert!(origin.starts_with("t,W00\n"));
    assert_eq!(origin.lines().count(), 3);
    let grid = read(&a, "wigner_t0.1.csv");
    assert!(grid.starts_with("# t=0.1 nx=21 np=21\nx,p,W\n"));
    assert_eq!(grid.lines().count(), 2 + 21 * 21);
}

#[test]
fn figures_runs_every_stage() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"pt_region":{"n":11},"evolve":{"times":[1,5],"nx":11},"wigner":{"times":[1,2],"nx":16,"np":16}}"#;
    let o = with_config(&dir, cfg, &["figures"]);
    assert!(o.status.success(), "{o:?}");
    for name in [
        "pt_region.csv",
        "metric.txt",
        "eta_branches.csv",
        "ep_toy.csv",
        "trajectory.csv",
        "covariance.csv",
        "wigner_t1.csv",
        "wigner_t2.csv",
        "wigner_compare.csv",
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn shipped_schema_matches_defaults() {
    use serde_json::Value;
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/config.schema.json")).unwrap();
    let schema: Value = serde_json::from_str(&text).unwrap();
    let defaults = serde_json::to_value(pt_amplifier_cli::RunConfig::default()).unwrap();

    // JSON integers and floats compare by value
    fn same(a: &Value, b: &Value) -> bool {
        match (a, b) {
            (Value::Number(x), Value::Number(y)) => x.as_f64() == y.as_f64(),
            (Value::Array(x), Value::Array(y)) => x.len() == y.len() && x.iter().zip(y).all(|(u, v)| same(u, v)),
            (Value::Object(x), Value::Object(y)) => {
                x.len() == y.len() && x.iter().all(|(k, u)| y.get(k).is_some_and(|v| same(u, v)))
            }
            _ => a == b,
        }
    }

    fn check(schema: &Value, value: &Value, path: &str) {
        if let Some(d) = schema.get("default") {
            assert!(same(d, value), "default of {path}: schema {d}, code {value}");
        }
        if let Some(props) = schema.get("properties").and_then(Value::as_object) {
            if schema.get("default").is_some() {
                return;
            }
            let obj = value.as_object().unwrap_or_else(|| panic!("{path} is not an object"));
            let mut a: Vec<_> = props.keys().collect();
            let mut b: Vec<_> = obj.keys().collect();
            a.sort();
            b.sort();
            assert_eq!(a, b, "keys of {path}");
            for (k, s) in props {
                check(s, &obj[k], &format!("{path}.{k}"));
            }
        }
    }
    check(&schema, &defaults, "config");
}
