use std::collections::BTreeSet;
use std::process::{Command, Output};

fn qs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qs"))
        .args(args)
        .output()
        .expect("qs runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Parses the printed `re±im i` form.
fn printed(o: &Output) -> (f64, f64) {
    let s = stdout(o);
    let z = qseries::verify::parse_complex(s.trim()).unwrap();
    (z.re, z.im)
}

#[test]
fn eval_trivial_values() {
    let o = qs(&["eval", "theta", "1.0", "--q", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let (re, im) = printed(&o);
    assert!(re.abs() < 1e-15 && im.abs() < 1e-15);

    let o = qs(&["eval", "qpoch", "0.25", "0", "--q", "0.5"]);
    assert_eq!(stdout(&o).trim(), "1+0i");
}

#[test]
fn eval_psi_star_matches_closed_form_r1() {
    let series = printed(&qs(&["eval", "psi_star", "2", "0.3", "0.4", "0.7", "--q", "0.5"]));
    let closed = printed(&qs(&[
        "eval",
        "psi_star1_closed_form",
        "2",
        "0.3",
        "0.4",
        "0.7",
        "--q",
        "0.5",
    ]));
    let gap = ((series.0 - closed.0).powi(2) + (series.1 - closed.1).powi(2)).sqrt();
    assert!(gap < 1e-12 * closed.0.abs(), "{series:?} vs {closed:?}");
}

#[test]
fn eval_accepts_negative_complex_arguments() {
    let o = qs(&["eval", "theta", "-0.5+0.2i", "--q", "0.3+0.2i"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (re, _) = printed(&o);
    assert!(re.is_finite());
}

#[test]
fn exit_codes() {
    assert_eq!(qs(&["eval", "nope", "1"]).status.code(), Some(2));
    assert_eq!(qs(&["eval", "theta", "1", "2"]).status.code(), Some(2));
    assert_eq!(qs(&["eval", "theta", "x"]).status.code(), Some(2));
    assert_eq!(qs(&["verify", "--suite", "bogus"]).status.code(), Some(2));

    let o = qs(&["eval", "theta", "0"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("theta(0)"));
    assert_eq!(qs(&["eval", "theta", "0.5", "--q", "0.95"]).status.code(), Some(3));
    assert_eq!(
        qs(&["verify", "--suite", "classical", "--samples", "0"]).status.code(),
        Some(3)
    );

    // no admissible x exists for this parameter set
    let o = qs(&[
        "verify",
        "--suite",
        "theorem1",
        "--a",
        "2,3",
        "--b",
        "5,8",
        "--samples",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("admissible"));
}

#[test]
fn max_terms_override_is_applied() {
    let o = Command::new(env!("CARGO_BIN_EXE_qs"))
        .args(["eval", "qpoch_inf", "0.5", "--q", "0.9"])
        .env("QS_MAX_TERMS", "64")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not converged"));
}

#[test]
fn classical_suite_passes() {
    let o = qs(&[
        "verify",
        "--suite",
        "classical",
        "--q",
        "0.5",
        "--seed",
        "7",
        "--samples",
        "50",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("PASS 150/150"));
}

#[test]
fn theorem2_suite_composition() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t2.ndjson");
    let o = qs(&[
        "verify",
        "--suite",
        "theorem2",
        "--q",
        "0.5",
        "--seed",
        "7",
        "--samples",
        "10",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    let header: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(header["seed"], 7);
    assert_eq!(header["q"], "0.5+0i");
    assert!(header["generator"].as_str().unwrap().contains("ChaCha8"));
    let ids: BTreeSet<String> = lines
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            assert!(v["runtime_ms"].is_null());
            v["identity_id"].as_str().unwrap().to_string()
        })
        .collect();
    for want in [
        "A_rho_relation",
        "rho_functional_eq",
        "rho_integral_match",
        "bailey_symmetry",
    ] {
        assert!(ids.contains(want), "{want} missing from {ids:?}");
    }
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let o = qs(&[
            "verify",
            "--suite",
            "wronskian",
            "--q",
            "0.3+0.2i",
            "--seed",
            "11",
            "--samples",
            "5",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        std::fs::read(path).unwrap()
    };
    assert_eq!(run("a.ndjson"), run("b.ndjson"));
}

#[test]
fn tiny_tolerance_scale_forces_failure() {
    let o = qs(&[
        "verify",
        "--suite",
        "classical",
        "--q",
        "0.5",
        "--seed",
        "7",
        "--samples",
        "10",
        "--tolerance-scale",
        "0.0001",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.lines().last().unwrap().starts_with("FAIL "), "{err}");
}

#[test]
fn timings_fill_runtime() {
    let o = qs(&["verify", "--suite", "elliptic", "--samples", "2", "--timings"]);
    let rec: serde_json::Value = serde_json::from_str(stdout(&o).lines().nth(1).unwrap()).unwrap();
    assert!(rec["runtime_ms"].as_f64().unwrap() >= 0.0);
}

fn factor_lines(o: &Output) -> Vec<(String, String)> {
    stdout(o)
        .lines()
        .map(|l| {
            let (k, v) = l.split_once(" = ").unwrap();
            (k.to_string(), v.split_whitespace().next().unwrap().to_string())
        })
        .collect()
}

fn value(lines: &[(String, String)], key: &str) -> (f64, f64) {
    let v = &lines.iter().find(|(k, _)| k == key).unwrap().1;
    let z = qseries::verify::parse_complex(v).unwrap();
    (z.re, z.im)
}

#[test]
fn factorize_r1_closed_form() {
    let o = qs(&[
        "factorize",
        "--r",
        "1",
        "--a",
        "2",
        "--b",
        "0.3",
        "--x",
        "0.4",
        "--q",
        "0.5",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let lines = factor_lines(&o);
    let rho = value(&lines, "rho_1");
    assert!((rho.0 - 1.25).abs() < 1e-10 && rho.1.abs() < 1e-10);
    let a = value(&lines, "A");
    let want = printed(&qs(&["eval", "qpoch_inf", "0.15", "--q", "0.5"]));
    assert!((a.0 - want.0).abs() < 1e-10 * want.0 && a.1.abs() < 1e-10);
}

#[test]
fn factorize_r2_at_one() {
    let o = qs(&[
        "factorize",
        "--r",
        "2",
        "--a",
        "2,3",
        "--b",
        "0.1,0.15",
        "--x",
        "1",
        "--q",
        "0.5",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let lines = factor_lines(&o);
    let mut rhos = [value(&lines, "rho_1").0, value(&lines, "rho_2").0];
    rhos.sort_by(f64::total_cmp);
    // classes {1/a_1, 1/a_2} modulo q^Z
    for (got, want) in rhos.iter().zip([1.0 / 3.0, 0.5]) {
        let k = (got / want).ln() / 0.5f64.ln();
        assert!((k - k.round()).abs() < 1e-8, "{got} vs {want}");
    }
}

#[test]
fn factorize_generic_residual() {
    let o = qs(&[
        "factorize",
        "--r",
        "2",
        "--a",
        "2,3",
        "--b",
        "0.1,0.15",
        "--x",
        "0.3+0.1i",
        "--q",
        "0.5",
    ]);
    let lines = factor_lines(&o);
    let residual: f64 = lines.iter().find(|(k, _)| k == "residual").unwrap().1.parse().unwrap();
    assert!(residual < 1e-8);
    assert_eq!(
        qs(&["factorize", "--r", "2", "--a", "2", "--b", "0.1,0.15", "--x", "0.3"])
            .status
            .code(),
        Some(2)
    );
}
