//! Spectrum of the reference automorphism and cone certificates for a few
//! perturbation sizes.
//!
//! cargo run --release --example spectrum_and_cones

use anosov_lab::linalg::Vec3;
use anosov_lab::torus::{
    AnosovMap, BundleTag, ConeRequest, FourierMode, PerturbationField, REFERENCE_MATRIX,
};

fn main() -> anosov_lab::error::Result<()> {
    let linear = AnosovMap::linear(REFERENCE_MATRIX)?;
    let s = linear.spectrum();
    for tag in BundleTag::ALL {
        println!(
            "{:>2}  alpha = {:+.6}  log|alpha| = {:+.6}  v = {:?}",
            tag.short(),
            s.eigenvalue(tag),
            s.log_modulus(tag),
            s.eigenvector(tag).0
        );
    }

    let mode = FourierMode::sine([1, 0, 0], Vec3([0.3, -0.5, 0.8]));
    for eps in [0.0, 0.05, 0.2, 0.6] {
        let p = PerturbationField::new(vec![mode.clone()], eps);
        match AnosovMap::certified(REFERENCE_MATRIX, p, ConeRequest::default(), 12) {
            Ok(map) => {
                let c = map.cone_certificate().expect("certified");
                println!(
                    "eps = {eps:<4}  strong in [{:.4}, {:.4}]  unstable >= {:.4}  gamma = {:.4}",
                    c.strong_expansion_min, c.strong_expansion_max, c.unstable_expansion, c.gamma
                );
            }
            Err(e) => println!(
                "eps = {eps:<4}  rejected: {e} (exit code {})",
                e.exit_code()
            ),
        }
    }
    Ok(())
}
