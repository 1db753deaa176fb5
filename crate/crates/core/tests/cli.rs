use std::path::Path;
use std::process::{Command, Output};

use telltale::channel::load_bundle;

fn telltale(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_telltale"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = telltale(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn identity_chain_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "create-watermarks",
            "--height",
            "40",
            "--width",
            "48",
            "--out-dir",
            "refs",
        ],
    );
    for f in ["sem.ttwm", "pho.ttwm", "geo.ttwm", "manifest.json", "pho.png"] {
        assert!(d.join("refs").join(f).exists(), "{f}");
    }
    std::fs::write(d.join("id.json"), "{}").unwrap();
    ok(
        d,
        &[
            "transform",
            "--in",
            "refs/pho.ttwm",
            "--chain",
            "id.json",
            "--out",
            "same.ttwm",
        ],
    );
    let report: serde_json::Value = serde_json::from_str(&ok(
        d,
        &[
            "evaluate",
            "--a",
            "refs/pho.ttwm",
            "--b",
            "same.ttwm",
            "--metrics",
            "l1,linf",
        ],
    ))
    .unwrap();
    assert_eq!(report["l1"], 0.0);
    assert_eq!(report["linf"], 0.0);
}

#[test]
fn reason_recovers_an_oracle_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "create-watermarks",
            "--height",
            "64",
            "--width",
            "64",
            "--out-dir",
            "refs",
        ],
    );
    let chain = r#"{"semantic": {"mask": {"shape": "rect", "seed": 2}},
        "photometric": {"order": ["b","c","h","s"], "params": {"h": 0.1}},
        "geometric": {"order": ["ro","tr","sc","sh"], "params": {"ro": 15}}}"#;
    std::fs::write(d.join("chain.json"), chain).unwrap();
    ok(
        d,
        &[
            "extract",
            "--mode",
            "oracle",
            "--refs",
            "refs",
            "--chain",
            "chain.json",
            "--degrees",
            "--out-dir",
            "ext",
        ],
    );
    assert_eq!(load_bundle(d.join("ext")).unwrap().height(), 64);
    ok(
        d,
        &[
            "reason",
            "--bundle",
            "ext/manifest.json",
            "--refs",
            "refs/manifest.json",
            "--out",
            "hyp.json",
        ],
    );
    let hyp: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("hyp.json")).unwrap()).unwrap();
    let ro = hyp["geometric"]["params"]["ro"].as_f64().unwrap();
    assert!((ro - 15f64.to_radians()).abs() < 0.01, "{hyp}");
    assert!((hyp["photometric"]["params"]["h"].as_f64().unwrap() - 0.1).abs() < 0.02);
    assert_eq!(hyp["geometric"]["order"].as_array().unwrap().len(), 4);
    assert!(hyp["losses"]["geometric"].as_f64().unwrap() <= 0.02);
    assert_eq!(hyp["semantic"]["mask"], "hyp_mask.png");
    assert!(d.join("hyp_mask.png").exists());

    // a hypothesis is a chain file
    ok(
        d,
        &[
            "transform",
            "--in",
            "refs/pho.ttwm",
            "--chain",
            "hyp.json",
            "--out",
            "again.png",
        ],
    );
}

#[test]
fn residual_and_file_modes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "create-watermarks",
            "--height",
            "32",
            "--width",
            "32",
            "--out-dir",
            "refs",
        ],
    );
    ok(
        d,
        &[
            "extract",
            "--mode",
            "file",
            "--sem",
            "refs/sem.ttwm",
            "--pho",
            "refs/pho.png",
            "--geo",
            "refs/geo.ttwm",
            "--out-dir",
            "packed",
        ],
    );
    assert_eq!(load_bundle(d.join("packed")).unwrap().width(), 32);
    std::fs::write(d.join("id.json"), "{}").unwrap();
    ok(
        d,
        &[
            "transform",
            "--in",
            "refs/sem.ttwm",
            "--chain",
            "id.json",
            "--out",
            "flat.png",
        ],
    );
    // a one-channel carrier cannot hold the colour payload
    let out = telltale(
        d,
        &[
            "extract",
            "--mode",
            "residual",
            "--carrier",
            "flat.png",
            "--refs",
            "refs",
            "--out-dir",
            "r",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    ok(
        d,
        &[
            "extract",
            "--mode",
            "residual",
            "--carrier",
            "refs/pho.png",
            "--refs",
            "refs",
            "--alpha",
            "0.1",
            "--out-dir",
            "r",
        ],
    );
    ok(
        d,
        &[
            "transform",
            "--in",
            "refs/pho.png",
            "--chain",
            "id.json",
            "--out",
            "x.png",
        ],
    );
    ok(
        d,
        &[
            "extract",
            "--mode",
            "residual",
            "--in",
            "x.png",
            "--clean",
            "x.png",
            "--out-dir",
            "informed",
        ],
    );
    let informed = load_bundle(d.join("informed")).unwrap();
    // nothing embedded: the payload sits at the neutral level
    assert!(informed.geo.data().iter().all(|v| (v - 0.5).abs() < 1e-6));
    assert_eq!(load_bundle(d.join("r")).unwrap().height(), 32);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = telltale(d, &["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(telltale(d, &["evaluate", "--a", "x.ttwm"]).status.code(), Some(1));
    assert_eq!(
        telltale(d, &["evaluate", "--a", "x.ttwm", "--b", "y.ttwm"])
            .status
            .code(),
        Some(2)
    );
    std::fs::write(d.join("junk.ttwm"), b"not an image").unwrap();
    assert_eq!(
        telltale(d, &["evaluate", "--a", "junk.ttwm", "--b", "junk.ttwm"])
            .status
            .code(),
        Some(2)
    );
    ok(
        d,
        &["create-watermarks", "--height", "8", "--width", "8", "--out-dir", "r"],
    );
    let bad_metric = telltale(
        d,
        &["evaluate", "--a", "r/geo.ttwm", "--b", "r/geo.ttwm", "--metrics", "l7"],
    );
    assert_eq!(bad_metric.status.code(), Some(1));
    assert_eq!(
        telltale(d, &["extract", "--mode", "oracle", "--out-dir", "o"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(telltale(d, &["--help"]).status.code(), Some(0));
    let help = ok(d, &["reason", "--help"]);
    assert!(help.contains("HYPOTHESIS") && help.contains("max_iter"));
}

#[test]
fn experiment_rotation_family() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("exp.json"), r#"{"family": "Syn&Ro", "sigma": 0.0, "trials": 5}"#).unwrap();
    ok(d, &["experiment", "--config", "exp.json", "--out-dir", "out"]);
    let agg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("out/aggregate.json")).unwrap()).unwrap();
    assert_eq!(agg["trials"], 5);
    assert!(agg["errors"]["ro"]["mean"].as_f64().unwrap() <= 0.01, "{agg}");
    let first = std::fs::read(d.join("out/report.csv")).unwrap();
    ok(d, &["experiment", "--config", "exp.json", "--out-dir", "again"]);
    assert_eq!(std::fs::read(d.join("again/report.csv")).unwrap(), first);
    ok(
        d,
        &[
            "--seed",
            "0x1234",
            "experiment",
            "--config",
            "exp.json",
            "--out-dir",
            "seeded",
        ],
    );
    assert_ne!(std::fs::read(d.join("seeded/report.csv")).unwrap(), first);
}
