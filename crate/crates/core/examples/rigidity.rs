//! The rigidity experiment on a smooth conjugate of A and on the first
//! generic family member (about 30 s in release mode).
//!
//! cargo run --release --example rigidity

use anosov_lab::conjugacy::{rigidity_experiment, RigidityParams};
use anosov_lab::families::{GenericFamily, SmoothConjugateFamily};
use anosov_lab::torus::{AnosovMap, ConeRequest};

fn main() -> anosov_lab::error::Result<()> {
    let fam = SmoothConjugateFamily::new(0.05);
    let maps = [
        (
            "smooth",
            AnosovMap::certified(
                fam.linear_part(),
                fam.perturbation(),
                ConeRequest::default(),
                12,
            )?,
        ),
        ("generic #0", GenericFamily::default().certified_member(0)?),
    ];
    let params = RigidityParams::default();
    for (name, map) in &maps {
        let rep = rigidity_experiment(map, &params)?;
        println!(
            "{name}: equality in every direction = {}, consistent = {}",
            rep.hypothesis_satisfied, rep.consistent
        );
        for t in &rep.tags {
            println!(
                "  {:<2} lambda {:.5} chi {:.5} gap {:+.2e} ({:.1} sigma)  exponent {:.3} ({})",
                t.tag.short(),
                t.lambda,
                t.chi,
                t.gap,
                t.gap / t.sigma,
                t.regularity.exponent,
                t.regularity.verdict
            );
        }
    }
    Ok(())
}
