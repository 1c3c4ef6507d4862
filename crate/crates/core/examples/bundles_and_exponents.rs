//! Invariant directions at a point and Lyapunov exponents by two estimators.
//!
//! cargo run --release --example bundles_and_exponents

use anosov_lab::families::SmoothConjugateFamily;
use anosov_lab::splitting::{bundle_sample, lyapunov_exponent, qr_exponent_estimates, Sampler};
use anosov_lab::torus::{AnosovMap, BundleTag, ConeRequest, TorusPoint};

fn main() -> anosov_lab::error::Result<()> {
    let fam = SmoothConjugateFamily::new(0.05);
    let map = AnosovMap::certified(
        fam.linear_part(),
        fam.perturbation(),
        ConeRequest::default(),
        12,
    )?;
    let x = TorusPoint::new(0.1, 0.2, 0.3);

    for tag in BundleTag::ALL {
        let b = bundle_sample(&map, tag, &x, 40, 1e-6)?;
        println!(
            "E^{:<2} at x: {:?}  (equivariance residual {:.1e})",
            tag.short(),
            b.direction.0,
            b.equivariance_residual
        );
    }

    let qr = qr_exponent_estimates(&map, &Sampler::Volume, 2000, 32, 1)?;
    println!("\ntag  bundle Birkhoff        QR                   log|alpha|");
    for (tag, q) in BundleTag::ALL.into_iter().zip(qr) {
        let b = lyapunov_exponent(&map, tag, &Sampler::Volume, 2000, 32, 1)?;
        println!(
            "{:<4} {:+.6} ± {:.1e}   {:+.6} ± {:.1e}   {:+.6}",
            tag.short(),
            b.value,
            b.std_error,
            q.value,
            q.std_error,
            map.spectrum().log_modulus(tag)
        );
    }
    Ok(())
}
