use std::io::Write;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    run_env(args, &[])
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_semiconj"));
    cmd.args(args).env_remove("SEMICONJ_MAX_ITER");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(bytes)))
}

fn num(v: &Value) -> f64 {
    v["value"].as_f64().unwrap()
}

#[test]
fn classify_hyperbolic() {
    let out = run(&["classify", "--map", "2*z+i", "--domain", "halfplane"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out.stdout);
    assert_eq!(v["schema"], 1);
    assert_eq!(v["kind"], "hyperbolic");
    assert_eq!(v["dw_point"], "infinity");
    assert!((num(&v["A"]) - 2.0).abs() < 1e-9);
    assert!(v["A"]["digits"].as_f64().unwrap() > 10.0);
}

#[test]
fn classify_disk_elliptic() {
    let out = run(&["classify", "--map", "(z^2+z)/2", "--domain", "disk"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out.stdout);
    assert_eq!(v["kind"], "elliptic-attracting");
    assert!((num(&v["multiplier"]) - 0.5).abs() < 1e-9);
}

#[test]
fn semiconj_planar() {
    let out = run(&[
        "semiconj",
        "--map",
        "z+i",
        "--domain",
        "halfplane",
        "--seed",
        "0,1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out.stdout);
    assert_eq!(v["model"], "theoremB");
    assert!(num(&v["residual"]) < 1e-12);
    for s in v["samples"].as_array().unwrap() {
        let (x, y) = (num(&s["z"]["re"]), num(&s["z"]["im"]));
        // h(z) = -i(z - i) = y - 1 - ix
        assert!((num(&s["value"]["re"]) - (y - 1.0)).abs() < 1e-10);
        assert!((num(&s["value"]["im"]) + x).abs() < 1e-10);
    }
}

#[test]
fn semiconj_model_override_mismatch() {
    let out = run(&["semiconj", "--map", "2*z+i", "--model", "theoremB"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out.stderr)["error"]["kind"], "model-mismatch");
}

#[test]
fn parse_error_is_positioned() {
    let out = run(&["classify", "--map", "z ^"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let e = json(&out.stderr);
    assert_eq!(e["error"]["kind"], "parse");
    assert_eq!(e["error"]["offset"], 3);
}

#[test]
fn usage_errors() {
    assert_eq!(run(&["classify"]).status.code(), Some(2));
    assert_eq!(
        run(&["classify", "--map", "z/2+i", "--seed", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["classify", "--map", "z/2+i", "--max-iter", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["semiconj", "--map", "2*z+i", "--tol", "-1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let auto = run(&["classify", "--map", "2*z"]);
    assert_eq!(auto.status.code(), Some(2));
    assert_eq!(json(&auto.stderr)["error"]["kind"], "automorphism");
}

#[test]
fn output_is_deterministic() {
    let args = ["semiconj", "--map", "z+1-1/(z+i)"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn iteration_cap_from_env() {
    let out = run_env(
        &["classify", "--map", "z+1-1/(z+i)"],
        &[("SEMICONJ_MAX_ITER", "3")],
    );
    assert_eq!(out.status.code(), Some(3));
    let flag = run_env(
        &["classify", "--map", "z+1-1/(z+i)", "--max-iter", "5000"],
        &[("SEMICONJ_MAX_ITER", "3")],
    );
    assert_eq!(flag.status.code(), Some(0));
    let bad = run_env(
        &["classify", "--map", "z/2+i"],
        &[("SEMICONJ_MAX_ITER", "many")],
    );
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn config_file_and_precedence() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    write!(
        f,
        r#"{{"map": "2*z+i", "domain": "halfplane", "output": "csv"}}"#
    )
    .unwrap();
    let path = f.path().to_str().unwrap();
    let out = run(&["classify", "--config", path]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("key,value,digits\n"));
    assert!(text.lines().any(|l| l == "kind,hyperbolic,"));
    let out = run(&[
        "classify", "--config", path, "--map", "z+i", "--output", "json",
    ]);
    assert_eq!(json(&out.stdout)["kind"], "parabolic-zero-step");

    let mut bad = tempfile::NamedTempFile::new().unwrap();
    write!(bad, r#"{{"mapp": "z"}}"#).unwrap();
    assert_eq!(
        run(&["classify", "--config", bad.path().to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn semiconj_csv_grid() {
    let out = run(&["semiconj", "--map", "2*z+i", "--output", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("re_z,im_z,re_val,im_val"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 25);
    for r in rows {
        // g(z) = (z + i)/2
        assert!((r[2] - r[0] / 2.0).abs() < 1e-6);
        assert!((r[3] - (r[1] + 1.0) / 2.0).abs() < 1e-6);
    }
}

#[test]
fn verify_pass_and_fail() {
    let ok = run(&[
        "verify",
        "--map",
        "2*z+i",
        "--sigma",
        "3*z",
        "--compose",
        "--tau",
        "2,0",
    ]);
    assert_eq!(ok.status.code(), Some(0));
    let v = json(&ok.stdout);
    assert_eq!(v["pass"], true);
    assert_eq!(v["canonicity"]["canonical"], true);
    assert_eq!(v["maximality"]["violations"], 0);

    let closed = run(&[
        "verify", "--map", "2*z+i", "--sigma", "(z+i)/2", "--tau", "2,0",
    ]);
    assert_eq!(closed.status.code(), Some(0));
    assert!(num(&json(&closed.stdout)["residual"]) < 1e-12);

    let wrong = run(&[
        "verify",
        "--map",
        "2*z+i",
        "--sigma",
        "z",
        "--compose",
        "--tau",
        "3,0",
    ]);
    assert_eq!(wrong.status.code(), Some(1));
    assert_eq!(json(&wrong.stdout)["residual_pass"], false);

    let root = run(&[
        "verify",
        "--map",
        "2*z+i",
        "--sigma",
        "sqrt(z)",
        "--compose",
        "--tau",
        "1.4142135623730951,0",
    ]);
    assert_eq!(root.status.code(), Some(0));
    assert_eq!(json(&root.stdout)["canonicity"]["canonical"], false);
}

#[test]
fn verify_planar() {
    let out = run(&[
        "verify",
        "--map",
        "z+i",
        "--sigma",
        "z+2-i",
        "--compose",
        "--tau",
        "1,1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out.stdout);
    assert_eq!(v["model"], "theoremB");
    assert!(v["maximality"].is_null());
    assert_eq!(v["canonicity"]["canonical"], true);
}

#[test]
fn intertwine_families() {
    let out = run(&["intertwine", "--family", "h->h(4,2)"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out.stdout);
    assert!(num(&v["residual"]) < 1e-10);
    assert_eq!(v["decay_monotone"], true);

    let ell = run(&["intertwine", "--family", "planar:p->e(0.5,1.5)"]);
    assert_eq!(ell.status.code(), Some(0));

    for empty in ["p->h(+,2)", "planar:e->p(2,0)", "h->h(2,4)"] {
        let out = run(&["intertwine", "--family", empty]);
        assert_eq!(out.status.code(), Some(1), "{empty}");
        assert_eq!(json(&out.stderr)["error"]["kind"], "empty-family");
    }
    assert_eq!(
        run(&["intertwine", "--family", "q->q(1,2)"]).status.code(),
        Some(2)
    );
}

#[test]
fn suite_passes() {
    let out = run(&["suite"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out.stdout);
    assert_eq!(v["total"], 11);
    assert_eq!(v["passed"], 11);
}
