//! End-to-end runs of the `anosov-lab` binary.

use std::fs;
use std::path::Path;
use std::process::Command;

use anosov_lab::cli::{verify_manifest, RunManifest};
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_anosov-lab");

const SCENARIO: &str = r#"
seed = 5

[map]
epsilon = 0.05
modes = [{ k = [1, 0, 0], sin = [0.3, -0.5, 0.8] }]

[growth]
radii = [0.1, 0.5]
n_max = { uu = 5, wu = 8, s = 4 }

[entropy]
n_max = { uu = 4, wu = 6, s = 3 }

[exponents]
orbit_length = 200
ensemble = 8

[measure]
samples = 500
depth = 10
density_radius = 0.05

[conjugacy]
grid_n = 8
verify_grid = 6
ladder = [3, 10]

[rigidity]
samples = 2000
growth_n_max = { uu = 5, wu = 8, s = 4 }
entropy_n_max = { uu = 4, wu = 6, s = 3 }
"#;

fn lab(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("scenario.toml");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn run_into(dir: &Path, verb: &str, config: &str, extra: &[&str]) -> RunManifest {
    let out = dir.to_string_lossy().into_owned();
    let mut args = vec![verb, "--config", config, "--out", &out];
    args.extend_from_slice(extra);
    let o = lab(&args);
    assert!(
        o.status.success(),
        "{verb}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SCENARIO);
    for verb in [
        "spectrum",
        "growth",
        "entropy",
        "exponents",
        "measure",
        "conjugacy",
    ] {
        for format in ["csv", "json"] {
            let a = tmp.path().join(format!("{verb}-{format}-a"));
            let b = tmp.path().join(format!("{verb}-{format}-b"));
            let ma = run_into(&a, verb, &cfg, &["--threads", "1", "--format", format]);
            let mb = run_into(&b, verb, &cfg, &["--threads", "4", "--format", format]);
            assert_eq!(ma.config_hash, mb.config_hash);
            assert_eq!(ma.outputs, mb.outputs, "{verb} {format}");
            for f in &ma.outputs {
                assert_eq!(
                    fs::read(a.join(&f.file)).unwrap(),
                    fs::read(b.join(&f.file)).unwrap(),
                    "{verb}/{}",
                    f.file
                );
            }
            assert!(verify_manifest(&a).unwrap().is_empty());
        }
    }
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SCENARIO);
    let a = run_into(&tmp.path().join("a"), "exponents", &cfg, &["--seed", "9"]);
    let b = run_into(&tmp.path().join("b"), "exponents", &cfg, &[]);
    assert_eq!(a.seed, 9);
    assert_ne!(a.config_hash, b.config_hash);
    let resolved = fs::read_to_string(tmp.path().join("a/config.toml")).unwrap();
    assert!(resolved.starts_with("seed = 9"), "{resolved}");
}

#[test]
fn growth_is_radius_independent() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SCENARIO);
    run_into(tmp.path(), "growth", &cfg, &["--format", "json"]);
    let rows: Vec<Value> =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("growth_fit.json")).unwrap())
            .unwrap();
    for tag in ["uu", "wu", "s"] {
        let chi: Vec<f64> = rows
            .iter()
            .filter(|r| r["tag"] == tag)
            .map(|r| r["chi"].as_f64().unwrap())
            .collect();
        assert_eq!(chi.len(), 2);
        assert!((chi[0] - chi[1]).abs() <= 1e-3, "{tag}: {chi:?}");
    }
}

#[test]
fn linear_rigidity_is_all_equalities() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SCENARIO.replacen("epsilon = 0.05", "epsilon = 0.0", 1);
    let cfg = write_config(tmp.path(), &text);
    run_into(tmp.path(), "rigidity", &cfg, &[]);
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("summary.json")).unwrap())
            .unwrap();
    let report = &summary["report"];
    assert_eq!(report["hypothesis_satisfied"], Value::Bool(true));
    for t in report["tags"].as_array().unwrap() {
        assert!(t["gap"].as_f64().unwrap().abs() <= 5e-3, "{t}");
        assert_eq!(t["regularity"]["verdict"], "c1-consistent");
    }
}

#[test]
fn failures_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out").to_string_lossy().into_owned();
    let case = |text: &str| {
        let cfg = write_config(tmp.path(), text);
        lab(&["spectrum", "--config", &cfg, "--out", &out])
            .status
            .code()
    };
    assert_eq!(
        case("seed = 1\n[map]\nmatrix = [[1,0,0],[0,1,0],[0,0,1]]\n"),
        Some(10)
    );
    assert_eq!(
        case(
            "seed = 1\n[map]\nepsilon = 0.9\nmodes = [{ k = [1, 0, 0], sin = [1.0, 1.0, 1.0] }]\n"
        ),
        Some(11)
    );
    assert_eq!(case("[map]\nepsilon = 0.0\n"), Some(2));
    assert_eq!(case("seed = 1\nbogus = 3\n"), Some(2));
    assert_eq!(case("seed = 1\n[conjugacy]\ntol = 2.0\n"), Some(2));
    let missing = lab(&["spectrum", "--config", "/nonexistent/x.toml", "--out", &out]);
    assert_eq!(missing.status.code(), Some(3));
}
