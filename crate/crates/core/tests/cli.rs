use std::path::Path;
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_contract-design"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn structured(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.extend(["--format", "structured"]);
    let (code, out, err) = run(&all);
    assert_eq!(code, 0, "{err}");
    serde_json::from_str(&out).unwrap()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_owned()
}

fn gen(dir: &TempDir, kind: &str, name: &str, extra: &[&str]) -> String {
    let p = path(dir, name);
    let mut args = vec!["gen", kind, "-o", &p];
    args.extend(extra);
    let (code, _, err) = run(&args);
    assert_eq!(code, 0, "{err}");
    assert!(Path::new(&p).exists());
    p
}

#[test]
fn gap_regression_through_the_binary() {
    let dir = TempDir::new().unwrap();
    let inst = gen(&dir, "gap", "gap.json", &[]);
    let contract = gen(&dir, "gap-contract", "gap_contract.json", &[]);

    let det = structured(&["solve-det", &inst]);
    assert_eq!(det["results"]["opt_d"].as_f64().unwrap().abs(), 0.0);
    assert!(det["instance_digest"].as_str().unwrap().starts_with("sha256:"));

    let v = structured(&["verify", &inst, "--contract", &contract]);
    let value = v["results"]["audit"]["value"].as_f64().unwrap();
    assert!((value - 1.0 / 15.0).abs() < 1e-9);
    assert_eq!(v["results"]["audit"]["ic_ok"], Value::Bool(true));
}

#[test]
fn no_supremum_sweep_is_nondecreasing() {
    let dir = TempDir::new().unwrap();
    let inst = gen(&dir, "no-supremum", "ns.json", &[]);
    let r = structured(&["solve-rand", &inst, "--sweep", "10,100,1000"]);
    let values: Vec<f64> = r["results"]["sweep"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["lp_value"].as_f64().unwrap())
        .collect();
    assert_eq!(values.len(), 3);
    assert!(values.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    assert!(values.iter().all(|&x| x <= 0.75 + 1e-6));
    assert!(values[2] > 0.74);
}

#[test]
fn human_and_structured_reports_carry_the_same_numbers() {
    let dir = TempDir::new().unwrap();
    let inst = gen(&dir, "random", "r.json", &["--seed", "5", "--outcomes", "3"]);
    let s = structured(&["analyze", &inst, "--scales", "1,1.5,2"]);
    let (code, human, _) = run(&["analyze", &inst, "--scales", "1,1.5,2"]);
    assert_eq!(code, 0);
    for v in s["results"]["vsw"].as_array().unwrap() {
        assert!(human.contains(&v.to_string()), "{v} missing from\n{human}");
    }
    assert!(human.contains(&s["results"]["beta"].to_string()));
}

#[test]
fn saved_contracts_verify() {
    let dir = TempDir::new().unwrap();
    let inst = gen(&dir, "random", "r.json", &["--seed", "9"]);
    let c = path(&dir, "c.json");
    let solved = structured(&["solve-rand", &inst, "--M", "100", "--save-contract", &c]);
    let v = structured(&["verify", &inst, "--contract", &c, "--audit"]);
    assert_eq!(
        v["results"]["audit"]["value"],
        solved["results"]["audit"]["value"],
        "the saved contract must round-trip exactly"
    );
    assert!(v["results"]["audit"]["slacks"].is_array());

    let b = gen(&dir, "bayes-gap", "bg.json", &["--alpha", "0.5"]);
    let bc = path(&dir, "bc.json");
    structured(&["affine", &b, "--delta", "0.1", "--save-contract", &bc]);
    // The affine contract pays negative amounts here, so it fails only with LL required.
    let (code, _, _) = run(&["verify", &b, "--contract", &bc]);
    assert_eq!(code, 1);
    let ok = structured(&["verify", &b, "--contract", &bc, "--no-ll"]);
    assert_eq!(ok["results"]["passes"], Value::Bool(true));
}

#[test]
fn bayesian_commands() {
    let dir = TempDir::new().unwrap();
    let b = gen(&dir, "bayes-gap", "bg.json", &[]);
    let bf = structured(&["brute-bayes", &b]);
    assert!(bf["results"]["value"].as_f64().unwrap().abs() < 1e-7);
    let r = structured(&["solve-bayes", &b, "--M", "100"]);
    assert_eq!(r["results"]["audit"]["dsic_ok"], Value::Bool(true));
    let a = structured(&["analyze", &b, "--scales", "2"]);
    let first = &a["results"]["per_type"][0];
    assert_eq!(first["type_profile"], "(t_up,t_up)");
    assert!((first["vsw"][0].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-9);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let inst = gen(&dir, "gap", "gap.json", &[]);

    let bad = path(&dir, "bad.json");
    std::fs::write(&bad, "{ \"agents\": [").unwrap();
    let (code, _, err) = run(&["solve-det", &bad]);
    assert_eq!(code, 1);
    assert!(err.contains("line"), "{err}");

    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(&inst).unwrap()).unwrap();
    doc["distributions"][1]["probs"][0] = serde_json::json!(0.9);
    let invalid = path(&dir, "invalid.json");
    std::fs::write(&invalid, doc.to_string()).unwrap();
    let (code, _, err) = run(&["solve-det", &invalid]);
    assert_eq!(code, 1);
    assert!(err.contains("distributions"), "{err}");

    let (code, _, err) = run(&["solve-single", &inst, "--alpha", "-1"]);
    assert_eq!(code, 2);
    assert!(err.contains("alpha"), "{err}");

    let (code, _, err) = run(&["linear", &inst, "--delta", "0"]);
    assert_eq!(code, 2);
    assert!(err.contains("delta"), "{err}");

    let (code, _, _) = run(&["solve-rand", &inst, "--M", "0"]);
    assert_eq!(code, 2);

    let (code, _, _) = run(&["gen", "tightness", "--alpha", "0.1", "--eps", "0.1"]);
    assert_eq!(code, 2);

    let (code, _, _) = run(&["brute-bayes", &inst]);
    assert_eq!(code, 1, "a plain instance is not a Bayesian one");

    let (code, _, _) = run(&["solve-det", &path(&dir, "missing.json")]);
    assert_eq!(code, 2);

    let (code, _, _) = run(&["no-such-command"]);
    assert_eq!(code, 2);
}

#[test]
fn gen_without_output_prints_the_document() {
    let (code, out, _) = run(&["gen", "gap"]);
    assert_eq!(code, 0);
    let inst = contract_design::format::parse_instance(&out).unwrap();
    assert_eq!(inst, contract_design::generators::gap());
}
