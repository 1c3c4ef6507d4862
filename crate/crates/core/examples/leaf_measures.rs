//! Invariant measures with absolutely continuous leaf disintegrations:
//! the Δ density product, the normalized leaf density, the Lebesgue
//! exponent and the comparison λ ≤ χ.
//!
//! cargo run --release --example leaf_measures

use anosov_lab::foliation::{grow_leaf, LeafOptions};
use anosov_lab::linalg::Vec3;
use anosov_lab::measures::{
    build_measure, delta_between, invariance_defect, leaf_density, lebesgue_exponent,
    saghin_xia_check, DeltaOptions, MeasureParams,
};
use anosov_lab::torus::{
    AnosovMap, BundleTag, ConeRequest, FourierMode, PerturbationField, TorusPoint, REFERENCE_MATRIX,
};

fn main() -> anosov_lab::error::Result<()> {
    let p = PerturbationField::new(
        vec![FourierMode::sine([1, 0, 0], Vec3([0.3, -0.5, 0.8]))],
        0.05,
    );
    let map = AnosovMap::certified(REFERENCE_MATRIX, p, ConeRequest::default(), 12)?;
    let tag = BundleTag::WeakUnstable;
    let dynamics = map.forward();
    let x = TorusPoint::new(0.1, 0.2, 0.3);

    let seg = grow_leaf(&map, &x, tag, 0.1, 1e-3)?;
    let opts = DeltaOptions::default();
    let d = delta_between(&dynamics, &seg, 0.05, -0.05, &opts)?;
    println!(
        "Delta(+0.05, -0.05) = {:.10}  ({} terms, tail <= {:.1e})",
        d.value, d.terms, d.tail_bound
    );
    let rho = leaf_density(&dynamics, &seg, 0.0, &opts)?;
    println!(
        "density on W^wu_0.1(x): min {:.6} max {:.6}  integral {:.12}",
        rho.rho.iter().cloned().fold(f64::INFINITY, f64::min),
        rho.rho.iter().cloned().fold(0.0, f64::max),
        rho.integral()
    );

    let params = MeasureParams {
        samples: 4000,
        seed: 3,
        ..Default::default()
    };
    let mu = build_measure(&dynamics, tag, &params)?;
    let lambda = lebesgue_exponent(&dynamics, tag, &mu)?;
    println!(
        "lambda_wu = {:.6} ± {:.1e} (depth bias {:.1e}), invariance defect {:.2e}",
        lambda.value,
        lambda.std_error,
        lambda.depth_bias,
        invariance_defect(&dynamics, &mu)?
    );

    let sx = saghin_xia_check(
        &dynamics,
        tag,
        &x,
        0.1,
        12,
        &params,
        &LeafOptions::with_max_step(2.5e-4),
    )?;
    println!(
        "chi_wu - lambda_wu = {:+.2e} (combined std error {:.1e})",
        sx.slack, sx.combined_std_error
    );
    Ok(())
}
