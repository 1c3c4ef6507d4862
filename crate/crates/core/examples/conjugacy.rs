//! Solving H∘F = A∘H for a perturbed map, recovering a known conjugator and
//! probing the regularity of H along each leaf.
//!
//! cargo run --release --example conjugacy

use anosov_lab::conjugacy::{
    conjugacy_series, dyadic_ladder, foliation_image_check, leafwise_regularity_probe,
    probe_resolution, select_probe_base, solve_conjugacy, verify_semiconjugacy,
};
use anosov_lab::families::{GenericFamily, SmoothConjugateFamily};
use anosov_lab::linalg::Vec3;
use anosov_lab::torus::{AnosovMap, BundleTag, ConeRequest, TorusPoint};

fn main() -> anosov_lab::error::Result<()> {
    let fam = SmoothConjugateFamily::new(0.05);
    let smooth = AnosovMap::certified(
        fam.linear_part(),
        fam.perturbation(),
        ConeRequest::default(),
        12,
    )?;
    let h = solve_conjugacy(&smooth, 32, 1e-9)?;
    let semi = verify_semiconjugacy(&h, &smooth, 16)?;
    println!(
        "grid 32: residual {:.2e}, series terms {:?}, injectivity violations {}",
        h.residual, h.terms, semi.injectivity_violations
    );

    let mut err: f64 = 0.0;
    for i in 0..200 {
        let x = Vec3([
            (i as f64 * 0.618).fract(),
            (i as f64 * 0.414).fract(),
            (i as f64 * 0.732).fract(),
        ]);
        let d = h.h(x)? - fam.conjugacy(x);
        err = err.max(
            d.0.iter()
                .map(|c| (c - c.round()).abs())
                .fold(0.0, f64::max),
        );
    }
    println!("max |H - g^-1| over 200 points: {err:.2e}");

    let x = TorusPoint::new(0.3, 0.6, 0.2);
    for tag in BundleTag::ALL {
        let img = foliation_image_check(&h, tag, &x, 0.2)?;
        println!(
            "H(W^{}) line deviation {:.1e}, monotone {}",
            tag.short(),
            img.line_deviation,
            img.monotone
        );
    }

    // A generic member: H is only Hölder along wu at its period-2 points.
    let generic = GenericFamily::default().certified_member(0)?;
    let hs = conjugacy_series(&generic, 1e-13)?;
    for tag in BundleTag::ALL {
        let base = select_probe_base(&generic, tag, 3)?;
        let (res, _) = probe_resolution(&hs, tag, &base.point)?;
        let ladder: Vec<f64> = dyadic_ladder(3, 16)
            .into_iter()
            .filter(|d| *d >= res)
            .collect();
        let rep = leafwise_regularity_probe(&hs, tag, &base.point, &ladder)?;
        println!(
            "generic {:<2}: period {} predicted {:.4} fitted {:.4} -> {}",
            tag.short(),
            base.period,
            base.predicted_exponent,
            rep.exponent,
            rep.verdict
        );
    }
    Ok(())
}
