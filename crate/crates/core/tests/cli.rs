use std::path::Path;
use std::process::{Command, Output};

fn cfaudit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfaudit")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write_config(dir: &Path, k: usize) -> String {
    let path = dir.join("audit.toml");
    let text = format!(
        "data = \"synthetic.csv\"\nschema = \"synthetic.toml\"\nsensitive = \"group\"\nk = {k}\nout = \"out\"\n\n\
         [decision_maker]\nfamily = \"decision-tree\"\nparams = {{ max_depth = 5 }}\n"
    );
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn synth_audit_and_recompute() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = cfaudit(&["synth", "--n", "1500", "--beta", "0.9", "--seed", "3", "--out", d]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let cfg = write_config(dir.path(), 10);

    let out = cfaudit(&["audit", "--config", &cfg, "--workers", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    let delta = report["strategies"][0]["delta_cflips"].as_f64().unwrap();

    let dump = dir.path().join("out/kdtree/counterfactuals.jsonl");
    let out = cfaudit(&["metrics", "--dump", dump.to_str().unwrap(), "--ablation", "1,10"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let m: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(m["delta_cflips"].as_f64().unwrap(), delta);

    let out = cfaudit(&["proxy", "--dump", dump.to_str().unwrap(), "--top", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let p: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(p["top_features"][0]["feature"], "proxy");

    let data = dir.path().join("synthetic.csv");
    let schema = dir.path().join("synthetic.toml");
    let out = cfaudit(&["inspect-schema", "--data", data.to_str().unwrap(), "--schema", schema.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let i: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(i["rows"], 1500);
}

#[test]
fn reports_match_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(code(&cfaudit(&["synth", "--n", "800", "--seed", "1", "--out", d])), 0);
    let cfg = write_config(dir.path(), 5);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, w) in [(&a, "1"), (&b, "3")] {
        let o = cfaudit(&["audit", "--config", &cfg, "--workers", w, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ra = std::fs::read(a.join("report.json")).unwrap();
    let rb = std::fs::read(b.join("report.json")).unwrap();
    assert_eq!(ra, rb);
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(code(&cfaudit(&["synth", "--n", "200", "--out", d])), 0);
    let cfg = write_config(dir.path(), 0);
    let out = cfaudit(&["audit", "--config", &cfg]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("k must be at least 1"));
    assert!(!dir.path().join("out").exists());

    let cfg = write_config(dir.path(), 5);
    std::fs::remove_file(dir.path().join("synthetic.csv")).unwrap();
    assert_eq!(code(&cfaudit(&["audit", "--config", &cfg])), 1);
    assert_eq!(code(&cfaudit(&["synth", "--beta", "2", "--out", d])), 1);
    assert_eq!(code(&cfaudit(&["frobnicate"])), 1);
    assert_eq!(code(&cfaudit(&["--help"])), 0);
}

#[test]
fn stage_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(code(&cfaudit(&["synth", "--n", "300", "--out", d])), 0);
    let path = dir.path().join("audit.toml");
    std::fs::write(
        &path,
        "data = \"synthetic.csv\"\nschema = \"synthetic.toml\"\nsensitive = \"group\"\nk = 3\n\n\
         [decision_maker]\nfamily = \"external\"\ncommand = [\"/nonexistent/adapter\"]\n",
    )
    .unwrap();
    let out = cfaudit(&["audit", "--config", path.to_str().unwrap(), "--out", d]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("decision_maker"));
}
