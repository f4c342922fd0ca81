use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn run(dir: &Path, args: &[&str], config: Option<Value>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hriesz"));
    cmd.args(args)
        .arg("--out")
        .arg(dir.join("out"))
        .arg("--threads")
        .arg("1");
    if let Some(cfg) = config {
        let path = dir.join("config.json");
        std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().expect("binary runs")
}

fn read_json(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("out").join(name)).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn selftest_quick_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["selftest", "--quick"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("associativity") && out.contains("all passed"));
    let j = read_json(dir.path(), "selftest.json");
    assert_eq!(j["result"]["passed"], true);
    assert_eq!(j["tool"], "hriesz");
    assert!(j["version"].is_string());
}

#[test]
fn selftest_catches_sign_flip() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["selftest", "--quick", "--inject-mutant", "sign-flip"],
        None,
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("associativity"), "{}", stderr(&o));
}

#[test]
fn ifs_generate_level4() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["ifs", "generate"],
        Some(json!({"schema_version": 1, "ifs": {"level": 4}})),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let j = read_json(dir.path(), "ifs_generate.json");
    assert_eq!(j["result"]["atoms"], 65536);
    assert!((j["result"]["total_mass"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(j["config"]["ifs"]["level"], 4);
    let csv = std::fs::read_to_string(dir.path().join("out/measure_level4.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x1,x2,x3,weight"));
    assert_eq!(lines.count(), 65536);
}

#[test]
fn contracting_ratio_rejected_before_work() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({"schema_version": 1, "ifs": {"system": {"kind": "strichartz", "n": 1, "r": 0.6}}});
    let o = run(dir.path(), &["ifs", "generate"], Some(cfg));
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(!dir.path().join("out/ifs_generate.json").exists());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for cfg in [
        json!({"seed": 1}),
        json!({"schema_version": 7}),
        json!({"schema_version": 1, "bogus": 0}),
    ] {
        let o = run(dir.path(), &["ifs", "generate"], Some(cfg));
        assert_eq!(o.status.code(), Some(2));
    }
}

#[test]
fn atom_cap_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["ifs", "generate"],
        Some(json!({"schema_version": 1, "atom_cap": 1000, "ifs": {"level": 3}})),
    );
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn ifs_verify_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({"schema_version": 1, "ifs": {"phi_resolution": 33, "verify_samples": 2000, "separation_levels": [2, 3]}});
    let o = run(dir.path(), &["ifs", "verify"], Some(cfg));
    assert!(o.status.success(), "{}", stderr(&o));
    let j = read_json(dir.path(), "ifs_verify.json");
    let r = &j["result"];
    assert_eq!(r["certified"], true);
    assert_eq!(r["region"]["containment_violations"], 0);
    assert!(r["region"]["min_containment_margin"].is_number());
    assert!(r["phi"]["max_contraction_ratio"].as_f64().unwrap() <= 1.0 / 16.0 + 0.01);
    assert!(r["separation"][0]["min_separation"].as_f64().unwrap() > 0.0);
    assert_eq!(j["verdict"]["ok"], true);
}

#[test]
fn transform_beyond_diameter_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({"schema_version": 1, "riesz": {"transform": {
        "measure": {"kind": "cylinder", "level": 2},
        "points": {"kind": "atoms", "count": 2},
        "eps": [10.0, 20.0]
    }}});
    let o = run(dir.path(), &["riesz", "transform"], Some(cfg));
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("out/transform_p00.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("eps,R,coord_index,value"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    for row in rows {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f[1], "inf");
        assert_eq!(f[3].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn divergence_on_cantor_set() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({"schema_version": 1, "riesz": {"divergence": {
        "measure": {"kind": "cylinder", "level": 4},
        "points": {"kind": "cylinder-fixed-points", "count": 8, "word_length": 2},
        "eps": [0.25, 0.0625, 0.015625]
    }}});
    let o = run(dir.path(), &["riesz", "divergence"], Some(cfg));
    assert!(o.status.success(), "{}", stderr(&o));
    let j = read_json(dir.path(), "riesz_divergence.json");
    assert_eq!(j["verdict"]["ok"], true);
    assert!(j["result"]["diverging"].as_u64().unwrap() >= 6);
    assert!(dir.path().join("out/divergence_p07.csv").exists());

    // expecting boundedness on the same data is a contradiction
    let cfg = json!({"schema_version": 1, "riesz": {"divergence": {
        "measure": {"kind": "cylinder", "level": 4},
        "points": {"kind": "cylinder-fixed-points", "count": 8, "word_length": 2},
        "eps": [0.25, 0.0625, 0.015625],
        "expect": "bounded"
    }}});
    assert_eq!(
        run(dir.path(), &["riesz", "divergence"], Some(cfg)).status.code(),
        Some(3)
    );
}

#[test]
fn subgroup_probe_t_axis_bounded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({"schema_version": 1, "riesz": {"probe": {
        "grid": {"window": 2.0, "resolution": 128, "isotropic": true},
        "eps": [0.5, 0.25, 0.125],
        "point_count": 3
    }}});
    let o = run(dir.path(), &["riesz", "subgroup-probe"], Some(cfg));
    assert!(o.status.success(), "{}", stderr(&o));
    let j = read_json(dir.path(), "riesz_subgroup_probe.json");
    assert_eq!(j["result"]["verdict"], "bounded");
}

#[test]
fn ad_report_cone_tangent_horest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({"schema_version": 1, "diagnostics": {
        "ad": {"measure": {"kind": "cylinder", "level": 3}, "centers": 8, "radii": [0.25, 0.0625]},
        "cone": {"measure": {"kind": "cylinder", "level": 3}, "vertices": 2, "radii": [0.25, 0.0625]},
        "tangent": {"measure": {"kind": "cylinder", "level": 3}, "scales": [0.25]},
        "horest": {"trials": 20000}
    }});
    for (args, file) in [
        (&["measure", "ad-report"][..], "ad_report.json"),
        (&["cone-deficiency"][..], "cone_deficiency.json"),
        (&["tangent", "blowup"][..], "tangent_blowup.json"),
        (&["horest"][..], "horest.json"),
    ] {
        let o = run(dir.path(), args, Some(cfg.clone()));
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        let j = read_json(dir.path(), file);
        assert_eq!(j["config"]["diagnostics"]["horest"]["trials"], 20000);
    }
    let j = read_json(dir.path(), "ad_report.json");
    assert_eq!(j["result"]["regular"], true);
    let j = read_json(dir.path(), "cone_deficiency.json");
    assert!(j["result"]["floor"].as_f64().unwrap() > 0.0);
    let j = read_json(dir.path(), "tangent_blowup.json");
    let m = j["result"][0]["scales"][0]["ball_masses"][1][1].as_f64().unwrap();
    assert!((m - 1.0).abs() < 1e-12);
}

#[test]
fn single_thread_output_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = json!({"schema_version": 1, "seed": 5, "diagnostics": {
        "ad": {"measure": {"kind": "cylinder", "level": 3}, "centers": 8, "radii": [0.25, 0.0625]}
    }});
    for d in [&a, &b] {
        assert!(run(d.path(), &["measure", "ad-report"], Some(cfg.clone()))
            .status
            .success());
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("out/ad_report.json")).unwrap();
    let (ja, jb) = (read(&a), read(&b));
    // the embedded output_dir differs, everything else must match
    let strip = |bytes: Vec<u8>| {
        let mut v: Value = serde_json::from_slice(&bytes).unwrap();
        v["config"]["output_dir"] = Value::Null;
        serde_json::to_vec(&v).unwrap()
    };
    assert_eq!(strip(ja), strip(jb));
    assert_eq!(
        std::fs::read(a.path().join("out/ad_report.csv")).unwrap(),
        std::fs::read(b.path().join("out/ad_report.csv")).unwrap()
    );
}
