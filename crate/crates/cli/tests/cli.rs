use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_minkowski");

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"))
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(BIN).args(args).arg("--out").arg(out).output().expect("spawn minkowski")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(format!("{name}.toml"));
    std::fs::write(&path, text).unwrap();
    path
}

fn report(dir: &Path, id: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{id}.report.json"))).unwrap()).unwrap()
}

#[test]
fn randers_sphere_is_isoparametric() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("randers_sphere");
    let out = run(&["verify", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path(), "randers_sphere");
    assert_eq!(r["schema"], 1);
    assert_eq!(r["isoparametric"], "yes");
    assert_eq!(r["expectation_met"], true);
    let csv = std::fs::read_to_string(dir.path().join("randers_sphere.samples.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "scenario,level,x_1,x_2,fstar_df,laplacian,k_1");
    assert_eq!(lines.count(), 3 * 32);
}

#[test]
fn drifted_field_is_transnormal_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("drifted_norm_plus_linear");
    let out = run(&["verify", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path(), "drifted_norm_plus_linear");
    assert_eq!(r["transnormal"], "yes");
    assert_eq!(r["isoparametric"], "no");
}

#[test]
fn wrong_expectation_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("drifted_norm_plus_linear")).unwrap();
    let cfg = write_config(dir.path(), "wrong", &text.replace("\"transnormal_only\"", "\"isoparametric\""));
    let out = run(&["verify", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(dir.path(), "wrong")["expectation_met"], false);
}

#[test]
fn malformed_config_exits_with_one_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("randers_sphere")).unwrap();
    let cfg = write_config(dir.path(), "bad", &text.replace("samples = 32", "samples = \"many\""));
    let out = run(&["verify", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("samples") && err.contains("line"), "{err}");

    let cfg = write_config(dir.path(), "bad_b", &text.replace("[0.5, 0.0]", "[\"half\", 0.0]"));
    let out = run(&["verify", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("norm.b"), "{err}");
    assert!(!dir.path().join("bad_b.report.json").exists());
}

#[test]
fn missing_config_and_bad_flags_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["verify", "/nonexistent/scenario.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let cfg = scenario("randers_sphere");
    let out = run(&["verify", cfg.to_str().unwrap(), "--tol", "-1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["dualcheck", scenario("randers_dual").to_str().unwrap(), "--strategy", "symbolic"], dir.path());
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = scenario("randers_cylinder");
    for cmd in ["verify", "curvatures", "dualcheck"] {
        assert_eq!(run(&[cmd, cfg.to_str().unwrap()], a.path()).status.code(), Some(0));
        assert_eq!(run(&[cmd, cfg.to_str().unwrap()], b.path()).status.code(), Some(0));
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 5);
    for name in names {
        let x = std::fs::read(a.path().join(&name)).unwrap();
        let y = std::fs::read(b.path().join(&name)).unwrap();
        assert_eq!(x, y, "{name:?} differs");
    }
}

#[test]
fn curvature_table_for_cylinders() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("randers_cylinder");
    assert_eq!(run(&["curvatures", cfg.to_str().unwrap()], dir.path()).status.code(), Some(0));
    let mut rdr = csv::Reader::from_path(dir.path().join("randers_cylinder.curvatures.csv")).unwrap();
    let header = rdr.headers().unwrap().clone();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let rows: Vec<_> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    for row in &rows {
        let t: f64 = row[col("level")].parse().unwrap();
        let k1: f64 = row[col("k_1")].parse().unwrap();
        let k2: f64 = row[col("k_2")].parse().unwrap();
        assert!((k1 + 1.0 / (2.0 * t).sqrt()).abs() < 1e-8, "{k1} at {t}");
        assert!(k2.abs() < 1e-8);
        let residual: f64 = row[col("two_curvature_residual")].parse().unwrap();
        assert!(residual < 1e-8);
        assert_eq!(row[col("groups")].split(';').count(), 2);
    }
    assert!(dir.path().join("randers_cylinder.curvatures.json").exists());
}

#[test]
fn dualcheck_passes_and_fails_on_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("randers_dual");
    let out = run(&["dualcheck", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("randers_dual.dualcheck.json")).unwrap();
    let r: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(r["schema"], 1);
    let suites = r["suites"].as_array().unwrap();
    let names: Vec<_> = suites.iter().map(|s| s["name"].as_str().unwrap()).collect();
    for n in ["legendre_round_trip", "dual_norm_preservation", "randers_closed_form_dual", "randers_cartan_curvature"] {
        assert!(names.contains(&n), "{names:?}");
    }
    assert!(suites.iter().all(|s| s["pass"] == true));

    let text = std::fs::read_to_string(&cfg).unwrap();
    let strict = write_config(dir.path(), "strict", &format!("{text}round_trip_tolerance = 1e-30\n"));
    assert_eq!(run(&["dualcheck", strict.to_str().unwrap()], dir.path()).status.code(), Some(2));
}

#[test]
fn overrides_take_effect() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("randers_sphere");
    let out = run(&["verify", cfg.to_str().unwrap(), "--strategy", "fd", "--seed", "3", "--tol", "1e-3"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let fd = std::fs::read_to_string(dir.path().join("randers_sphere.samples.csv")).unwrap();
    let other = tempfile::tempdir().unwrap();
    assert_eq!(run(&["verify", cfg.to_str().unwrap()], other.path()).status.code(), Some(0));
    let analytic = std::fs::read_to_string(other.path().join("randers_sphere.samples.csv")).unwrap();
    assert_ne!(fd, analytic);
}
