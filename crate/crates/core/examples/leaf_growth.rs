//! Geometric growth of strong unstable, weak unstable and stable leaves.
//!
//! cargo run --release --example leaf_growth

use anosov_lab::foliation::{geometric_growth, grow_leaf, leaf_length, LeafOptions};
use anosov_lab::linalg::Vec3;
use anosov_lab::torus::{
    AnosovMap, BundleTag, ConeRequest, FourierMode, PerturbationField, TorusPoint, REFERENCE_MATRIX,
};

fn main() -> anosov_lab::error::Result<()> {
    let p = PerturbationField::new(
        vec![FourierMode::sine([0, 1, 1], Vec3([-0.4, 0.1, 0.3]))],
        0.05,
    );
    let map = AnosovMap::certified(REFERENCE_MATRIX, p, ConeRequest::default(), 12)?;
    let x = TorusPoint::new(0.1, 0.2, 0.3);

    let seg = grow_leaf(&map, &x, BundleTag::WeakUnstable, 0.1, 1e-3)?;
    println!(
        "W^wu_0.1(x): {} vertices, length {:.6}",
        seg.vertices.len(),
        leaf_length(&seg)
    );

    let opts = LeafOptions::with_max_step(2.5e-4);
    for (tag, n_max) in [
        (BundleTag::StrongUnstable, 7),
        (BundleTag::WeakUnstable, 12),
        (BundleTag::Stable, 5),
    ] {
        let est = geometric_growth(
            map.oriented(tag.expanding_direction()),
            tag,
            &x,
            0.1,
            n_max,
            None,
            &opts,
        )?;
        println!(
            "chi_{:<2} = {:.6} ± {:.1e}  (linear {:.6}, fit window {:?})",
            tag.short(),
            est.chi,
            est.slope_stderr,
            map.spectrum().log_modulus(tag).abs(),
            est.window
        );
        for (n, l) in &est.per_n {
            print!(" {n}:{l:.3}");
        }
        println!();
    }
    Ok(())
}
