//! Running a CLI verb from code: build a scenario, run it into a temporary
//! directory and check the manifest hashes.
//!
//! cargo run --release --example scenario

use anosov_lab::cli::{run, verify_manifest, OutputFormat, RunOptions, ScenarioConfig, Verb};

fn main() -> anosov_lab::error::Result<()> {
    let cfg = ScenarioConfig::from_toml(
        r#"
        seed = 1
        [map]
        family = { kind = "smooth-conjugate", epsilon = 0.05 }
        [growth]
        tags = ["uu", "wu"]
        radii = [0.1, 0.5]
        "#,
    )?;
    let out = std::env::temp_dir().join("anosov-lab-scenario");
    let opts = RunOptions {
        out_dir: out.clone(),
        format: OutputFormat::Csv,
        seed: None,
        threads: Some(2),
    };
    let manifest = run(Verb::Growth, &cfg, &opts)?;
    println!("config hash {}", manifest.config_hash);
    for f in &manifest.outputs {
        println!("  {:<16} {:>7} bytes  {}", f.file, f.bytes, &f.sha256[..16]);
    }
    println!("{}", std::fs::read_to_string(out.join("growth_fit.csv"))?);
    println!("stale files: {:?}", verify_manifest(&out)?);
    Ok(())
}
