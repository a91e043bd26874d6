use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn example(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/examples").join(name)
}

fn run(args: &[&str], config: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dispersive"))
        .args(args)
        .arg("--config")
        .arg(example(config))
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(args: &[&str], config: &str) -> (i32, Value) {
    let mut a = args.to_vec();
    a.push("--json");
    let o = run(&a, config);
    let v = serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stderr(&o)));
    (o.status.code().unwrap(), v)
}

fn residual(v: &Value, name: &str) -> f64 {
    v["verdict"]["residuals"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["name"] == name)
        .unwrap_or_else(|| panic!("no residual {name}"))["re"]
        .as_f64()
        .unwrap()
}

#[test]
fn check_zero_system() {
    let (code, v) = json(&["check"], "complex_zero.toml");
    assert_eq!(code, 0);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["well_posed"], true);
    let rs = v["verdict"]["residuals"].as_array().unwrap();
    assert_eq!(rs.len(), 6);
    for r in rs {
        assert_eq!(r["re"].as_f64(), Some(0.0));
        assert_eq!(r["im"].as_f64(), Some(0.0));
        assert_eq!(r["pass"], true);
    }
}

#[test]
fn check_violating_complex() {
    let (code, v) = json(&["check"], "complex_violating.toml");
    assert_eq!(code, 2);
    assert_eq!(v["well_posed"], false);
    assert!((residual(&v, "im_int_a11") - 2.0 * PI).abs() < 1e-12);
}

#[test]
fn check_human_report() {
    let o = run(&["check"], "complex_violating.toml");
    assert_eq!(o.status.code(), Some(2));
    let out = stdout(&o);
    assert!(out.contains("im_int_a11"));
    assert!(out.contains("FAIL"));
    assert!(out.trim_end().ends_with("verdict: ill-posed"));
}

#[test]
fn check_every_kind() {
    let cases = [
        ("complex_compliant.toml", 0),
        ("complex_off_diagonal.toml", 0),
        ("real_compliant.toml", 0),
        ("real_violating.toml", 2),
        ("single.toml", 2),
        ("real_time_dependent.toml", 0),
        ("frame_constant_k.toml", 0),
        ("frame_holonomy.toml", 0),
        ("frame_varying_k.toml", 2),
        ("dichotomy.toml", 2),
    ];
    for (cfg, want) in cases {
        let o = run(&["check"], cfg);
        assert_eq!(o.status.code(), Some(want), "{cfg}: {}", stderr(&o));
    }
}

#[test]
fn check_real_violating_residual() {
    let (_, v) = json(&["check"], "real_violating.toml");
    assert!((residual(&v, "int_tr_beta") - 4.0 * PI).abs() < 1e-12);
    assert_eq!(residual(&v, "int_tr_j_gamma"), 0.0);
}

#[test]
fn check_single_residual() {
    let (_, v) = json(&["check"], "single.toml");
    assert_eq!(residual(&v, "im_int_a"), 0.0);
    assert!((residual(&v, "im_int_b") - 0.5 * PI).abs() < 1e-12);
}

#[test]
fn tolerance_flag_changes_verdict() {
    let o = run(&["check", "--tolerance", "2"], "single.toml");
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn malformed_config_is_an_error() {
    let o = run(&["check"], "malformed_missing_block.toml");
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("malformed_missing_block.toml:2:"), "{err}");
    assert!(err.contains("[complex]"), "{err}");
    assert!(o.stdout.is_empty());
}

#[test]
fn syntax_error_is_line_anchored() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, "kind = \"complex\"\n\n[complex.a]\nm11 = [[0, 1.0]\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_dispersive"))
        .args(["check", "--config"])
        .arg(&p)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.toml:4:"), "{}", stderr(&o));
}

#[test]
fn missing_config_file() {
    let o = run(&["check"], "no_such_file.toml");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cannot read config"));
}

#[test]
fn usage_errors_exit_one() {
    let o = run(&["check", "--method", "leapfrog"], "complex_zero.toml");
    assert_eq!(o.status.code(), Some(1));
    let o = Command::new(env!("CARGO_BIN_EXE_dispersive")).arg("check").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn diagonalize_constant_off_diagonal() {
    let (code, v) = json(&["diagonalize"], "complex_off_diagonal.toml");
    assert_eq!(code, 0);
    let half = serde_json::json!([[0, 0.5, 0.0]]);
    assert_eq!(v["b1"]["m11"], half);
    assert_eq!(v["row1"]["b"], half);
    assert_eq!(v["row2"]["b"], serde_json::json!([[0, -0.5, 0.0]]));
    assert_eq!(v["identity"], false);
    assert_eq!(v["verification"]["n"], 32);
    let text = stdout(&run(&["diagonalize"], "complex_off_diagonal.toml"));
    assert!(text.contains("[b1]\nm11 = [[0, 0.5, 0.0]]"), "{text}");
}

#[test]
fn diagonalize_zero_is_identity() {
    let (code, v) = json(&["diagonalize"], "complex_zero.toml");
    assert_eq!(code, 0);
    assert_eq!(v["identity"], true);
    for m in ["b1", "c1", "c2"] {
        for e in ["m11", "m12", "m21", "m22"] {
            assert_eq!(v[m][e], serde_json::json!([]), "{m}.{e}");
        }
    }
    assert_eq!(v["verification"]["coupling_norm"].as_f64(), Some(0.0));
}

#[test]
fn diagonalize_flags() {
    let (_, v) = json(&["diagonalize", "--modes", "16", "--r", "12"], "complex_compliant.toml");
    assert_eq!(v["verification"]["n"], 16);
    assert_eq!(v["r"].as_f64(), Some(12.0));
    assert_eq!(v["row_verdicts"][0]["well_posed"], true);
    assert_eq!(v["row_verdicts"][1]["well_posed"], true);
}

#[test]
fn diagonalize_rejects_frame() {
    let o = run(&["diagonalize"], "frame_constant_k.toml");
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn gauge_compliant() {
    let (code, v) = json(&["gauge"], "real_compliant.toml");
    assert_eq!(code, 0);
    let est: Vec<f64> = v["energy_estimate"].as_array().unwrap().iter().map(|e| e["value"].as_f64().unwrap()).collect();
    assert_eq!(est.len(), 3);
    let hi = est.iter().cloned().fold(f64::MIN, f64::max);
    let lo = est.iter().cloned().fold(f64::MAX, f64::min);
    assert!(hi / lo <= 1.2, "{est:?}");
    assert!(v["psi4"].is_array());
}

#[test]
fn gauge_violating_names_condition() {
    let o = run(&["gauge"], "real_violating.toml");
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("condition 1"), "{err}");
    assert!(err.contains("int_tr_beta"), "{err}");
}

#[test]
fn gauge_of_frame_system() {
    let o = run(&["gauge"], "frame_constant_k.toml");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

fn csv_norms(csv: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,norm"));
    lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect()
}

#[test]
fn evolve_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("h.csv");
    let o = run(&["evolve", "--out", out.to_str().unwrap()], "real_compliant.toml");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    let norms = csv_norms(&csv);
    assert_eq!(norms.len(), 32);
    assert!(norms.iter().all(|n| (n / norms[0] - 1.0).abs() < 0.01));
    assert!(stdout(&o).starts_with(&csv));
}

#[test]
fn evolve_methods_agree() {
    let (_, a) = json(&["evolve"], "complex_compliant.toml");
    let (_, b) = json(&["evolve", "--method", "step"], "complex_compliant.toml");
    let last = |v: &Value| v["norms"].as_array().unwrap().last().unwrap().as_f64().unwrap();
    assert!((last(&a) - last(&b)).abs() < 1e-9);
    assert_eq!(a["method"], "expm");
    assert_eq!(b["method"], "step");
}

#[test]
fn evolve_time_dependent() {
    let o = run(&["evolve"], "real_time_dependent.toml");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run(&["evolve", "--method", "expm"], "real_time_dependent.toml");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("step"));
}

#[test]
fn evolve_single_and_frame() {
    for cfg in ["single.toml", "frame_holonomy.toml"] {
        let o = run(&["evolve", "--modes", "8"], cfg);
        assert_eq!(o.status.code(), Some(0), "{cfg}: {}", stderr(&o));
    }
}

#[test]
fn growth_dichotomy() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.csv");
    let o = run(&["growth", "--out", out.to_str().unwrap()], "dichotomy.toml");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("verdicts consistent: yes"), "{text}");
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("series,N,t,propagator_norm"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 8);
    assert_eq!(rows.iter().filter(|r| r[0] == "compliant").count(), 4);
    assert_eq!(rows.iter().filter(|r| r[0] == "violating").count(), 4);
    for r in &rows {
        // 17 significant digits
        assert_eq!(r[3].split('e').next().unwrap().replace(['.', '-'], "").len(), 17, "{r:?}");
    }
    let last: f64 = rows[7][3].parse().unwrap();
    assert!(last > 1e3);
}

#[test]
fn growth_json_classifies() {
    let (code, v) = json(&["growth"], "dichotomy.toml");
    assert_eq!(code, 0);
    assert_eq!(v["consistent"], true);
    assert_eq!(v["series"][0]["study"]["model"]["model"], "bounded");
    assert_eq!(v["series"][1]["study"]["model"]["model"], "cubic_exponential");
}

#[test]
fn growth_overflow_guard() {
    let o = run(&["growth", "--t-final", "1"], "complex_violating.toml");
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("overflow guard"), "{}", stderr(&o));
    assert!(!stdout(&o).contains("inf"));
}

#[test]
fn growth_modes_sets_ladder() {
    let (_, v) = json(&["growth", "--modes", "16"], "real_compliant.toml");
    assert_eq!(v["series"][0]["study"]["ns"], serde_json::json!([4, 8, 12, 16]));
}

#[test]
fn growth_rejects_time_dependent() {
    assert_eq!(run(&["growth"], "real_time_dependent.toml").status.code(), Some(1));
}

#[test]
fn frame_constant_curvature() {
    let o = run(&["frame"], "frame_constant_k.toml");
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("[beta_hat]"));
    assert!(text.contains("[gamma_hat]"));
    assert!(text.contains("divergence identity"));
    assert!(text.trim_end().ends_with("verdict: well-posed"));
}

#[test]
fn frame_holonomy_coefficient() {
    let (code, v) = json(&["frame"], "frame_holonomy.toml");
    assert_eq!(code, 0);
    assert_eq!(v["third_order_coeff"].as_f64(), Some(-1.3));
    assert_eq!(v["holonomy"]["exact"], true);
    assert!(v["identities"]["trace_beta"].as_f64().unwrap() < 1e-12);
    assert!(stdout(&run(&["frame"], "frame_holonomy.toml")).contains("third_order_coeff = -1.3"));
}

#[test]
fn frame_varying_curvature() {
    let (code, v) = json(&["frame"], "frame_varying_k.toml");
    assert_eq!(code, 2);
    let got = v["identities"]["skew_integral"].as_f64().unwrap();
    let want = v["identities"]["skew_integral_expected"].as_f64().unwrap();
    assert!(want.abs() > 0.1);
    assert!((got - want).abs() < 1e-12);
}

#[test]
fn frame_rejects_other_kinds() {
    assert_eq!(run(&["frame"], "complex_zero.toml").status.code(), Some(1));
}

#[test]
fn json_out_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = run(&["check", "--json", "--out", out.to_str().unwrap()], "real_violating.toml");
    assert_eq!(std::fs::read(&out).unwrap(), o.stdout);
    let o = run(&["check", "--out", out.to_str().unwrap()], "real_violating.toml");
    let v: Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(v["command"], "check");
    assert!(stdout(&o).contains("verdict: ill-posed"));
}

#[test]
fn runs_are_byte_identical() {
    let cases: [(&[&str], &str); 5] = [
        (&["check", "--json"], "complex_violating.toml"),
        (&["growth"], "dichotomy.toml"),
        (&["frame", "--json"], "frame_holonomy.toml"),
        (&["gauge", "--json"], "real_compliant.toml"),
        (&["evolve"], "real_time_dependent.toml"),
    ];
    for (args, cfg) in cases {
        let a = run(args, cfg);
        let b = run(args, cfg);
        assert_eq!(a.stdout, b.stdout, "{cfg}");
        assert_eq!(a.stderr, b.stderr, "{cfg}");
        assert_eq!(a.status.code(), b.status.code(), "{cfg}");
    }
}

#[test]
fn exit_code_follows_report() {
    for cfg in ["complex_zero.toml", "complex_violating.toml", "single.toml", "frame_varying_k.toml"] {
        let (code, v) = json(&["check"], cfg);
        let want = if v["well_posed"] == true { 0 } else { 2 };
        assert_eq!(code, want, "{cfg}");
    }
}
