//! Greedy separated/generator counts against exhaustive oracles on small
//! discretizations of real leaves.

mod common;

use anosov_lab::foliation::{grow_leaf, LeafOptions};
use anosov_lab::leaf_entropy::{greedy_generator, greedy_separated, LeafHistory, ProfileMatrix};
use anosov_lab::linalg::Vec3;
use anosov_lab::torus::{
    AnosovMap, BundleTag, ConeRequest, FourierMode, PerturbationField, TorusPoint, REFERENCE_MATRIX,
};
use common::*;
use proptest::prelude::*;

fn map() -> AnosovMap {
    let p = PerturbationField::new(
        vec![FourierMode::sine([1, 0, 0], Vec3([0.3, -0.5, 0.8]))],
        0.05,
    );
    AnosovMap::certified(REFERENCE_MATRIX, p, ConeRequest::default(), 12).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn greedy_equals_exhaustive(
        x in (0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64),
        wu in any::<bool>(),
        knots in 2usize..=50,
        r in 0.01..0.1f64,
    ) {
        let map = map();
        let tag = if wu { BundleTag::WeakUnstable } else { BundleTag::StrongUnstable };
        let k = grow_leaf(&map, &TorusPoint::new(x.0, x.1, x.2), tag, r, 1e-3).unwrap();
        let hist = LeafHistory::build(map.forward(), &k, 4, &LeafOptions::with_max_step(1e-3)).unwrap();
        for n in 1..=4 {
            let p = ProfileMatrix::subsample(&hist, n, knots).unwrap();
            let d = matrix(&p);
            assert_order_monotone(&d);
            let scale = d[0][d.len() - 1];
            for frac in [0.4, 0.2, 0.1, 0.05, 0.025] {
                let eps = frac * scale;
                let s = greedy_separated(&mut p.clone(), eps);
                let g = greedy_generator(&mut p.clone(), eps);
                prop_assert_eq!(s, dp_separated(&d, eps), "separated n={} eps={}", n, eps);
                prop_assert_eq!(g, dp_generator(&d, eps), "generator n={} eps={}", n, eps);
                if d.len() <= 16 {
                    prop_assert_eq!(s, brute_separated(&d, eps));
                    prop_assert_eq!(g, brute_generator(&d, eps));
                }
            }
        }
    }
}
