//! Property tests for the structural invariants of each module.

use anosov_lab::conjugacy::conjugacy_series;
use anosov_lab::foliation::{
    geometric_growth, grow_leaf, iterate_leaf, leaf_length, LeafOptions, DEFAULT_VERTEX_BUDGET,
};
use anosov_lab::leaf_entropy::{LeafHistory, SeparationTable};
use anosov_lab::linalg::Vec3;
use anosov_lab::measures::{build_measure, delta_between, DeltaOptions, MeasureParams};
use anosov_lab::splitting::{
    bundle_sample, log_det_average, lyapunov_exponent, orbit_exponent, oseledets_qr, Sampler,
};
use anosov_lab::torus::{
    AnosovMap, BundleTag, ConeRequest, FourierMode, PerturbationField, TorusPoint, REFERENCE_MATRIX,
};
use proptest::prelude::*;

fn field(eps: f64) -> PerturbationField {
    PerturbationField::new(
        vec![
            FourierMode::sine([1, 0, 0], Vec3([0.3, -0.5, 0.8])),
            FourierMode {
                frequency: [0, 1, 1],
                sin_amplitude: Vec3([-0.4, 0.1, 0.3]),
                cos_amplitude: Vec3([0.0, 0.0, 0.1]),
            },
        ],
        eps,
    )
}

fn certified(eps: f64) -> AnosovMap {
    AnosovMap::certified(REFERENCE_MATRIX, field(eps), ConeRequest::default(), 12).unwrap()
}

fn unit() -> impl Strategy<Value = f64> {
    0.0..1.0f64
}

fn point() -> impl Strategy<Value = TorusPoint> {
    (unit(), unit(), unit()).prop_map(|(a, b, c)| TorusPoint::new(a, b, c))
}

fn tag() -> impl Strategy<Value = BundleTag> {
    prop_oneof![
        Just(BundleTag::StrongUnstable),
        Just(BundleTag::WeakUnstable),
        Just(BundleTag::Stable)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lift_is_z3_equivariant(x in point(), n in prop::array::uniform3(-3i64..=3), eps in 0.0..0.1f64) {
        let map = AnosovMap::new(REFERENCE_MATRIX, field(eps)).unwrap();
        let x = x.rep();
        let shifted = map.lift_apply(x + Vec3(n.map(|c| c as f64))) - map.lift_apply(x);
        let an = REFERENCE_MATRIX.mul_int(n);
        for i in 0..3 {
            prop_assert!((shifted[i] - an[i] as f64).abs() <= 1e-12);
        }
    }

    #[test]
    fn inverse_round_trip(x in point(), eps in 0.0..0.1f64) {
        let map = AnosovMap::new(REFERENCE_MATRIX, field(eps)).unwrap();
        let tol = 1e-12;
        let back = map.apply(&map.inverse_apply(&x, tol).unwrap());
        prop_assert!(back.distance(&x) <= 10.0 * tol);
    }

    #[test]
    fn jacobian_matches_finite_differences(x in point(), eps in 0.0..0.1f64) {
        let map = AnosovMap::new(REFERENCE_MATRIX, field(eps)).unwrap();
        let x = x.rep();
        let j = map.jacobian_at(x);
        let h = 1e-5;
        for c in 0..3 {
            let mut e = [0.0; 3];
            e[c] = h;
            let e = Vec3(e);
            let fd = (map.lift_apply(x + e) - map.lift_apply(x - e)) * (0.5 / h);
            for r in 0..3 {
                prop_assert!((fd[r] - j.0[r][c]).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn bundles_are_equivariant(x in point(), t in tag()) {
        let map = certified(0.05);
        let b = bundle_sample(&map, t, &x, 40, 1e-6).unwrap();
        prop_assert!((b.direction.norm() - 1.0).abs() < 1e-12);
        prop_assert!(b.equivariance_residual <= 1e-6);
    }

    #[test]
    fn finite_time_rates_are_ordered(x in point()) {
        let map = certified(0.05);
        let r = BundleTag::ALL.map(|t| orbit_exponent(&map, t, x.rep(), 20, 40).unwrap());
        prop_assert!(r[0] > r[1] && r[1] > 0.0 && 0.0 > r[2], "{r:?}");
    }

    #[test]
    fn qr_sum_is_log_det(x in point()) {
        let map = certified(0.05);
        let q = oseledets_qr(&map, x.rep(), 200).unwrap();
        prop_assert!((q.iter().sum::<f64>() - log_det_average(&map, x.rep(), 200)).abs() <= 1e-10);
    }
}

#[test]
fn spectrum_product_is_determinant() {
    let s = AnosovMap::linear(REFERENCE_MATRIX).unwrap();
    let s = s.spectrum();
    let prod: f64 = BundleTag::ALL.iter().map(|t| s.eigenvalue(*t)).product();
    assert!((prod - REFERENCE_MATRIX.det() as f64).abs() <= 1e-10);
    let a = REFERENCE_MATRIX.to_real();
    for t in BundleTag::ALL {
        let v = s.eigenvector(t);
        assert!((a.mul_vec(v) - v * s.eigenvalue(t)).norm() <= 1e-10);
    }
}

#[test]
fn gamma_never_improves_with_epsilon() {
    let mut last = 0.0;
    for i in 0..=8 {
        let eps = 0.025 * i as f64;
        let g = certified(eps).cone_certificate().unwrap().gamma;
        assert!(g >= last - 1e-12, "gamma {g} at eps {eps} below {last}");
        last = g;
    }
}

#[test]
fn linear_sampler_independence() {
    let map = AnosovMap::certified(
        REFERENCE_MATRIX,
        PerturbationField::zero(),
        ConeRequest::default(),
        4,
    )
    .unwrap();
    let atoms = Sampler::Empirical {
        points: vec![Vec3([0.1, 0.7, 0.3]), Vec3([0.9, 0.05, 0.5])],
        weights: vec![0.25, 0.75],
        label: "two atoms".into(),
    };
    for t in BundleTag::ALL {
        for s in [Sampler::Volume, atoms.clone()] {
            let est = lyapunov_exponent(&map, t, &s, 50, 4, 1).unwrap();
            assert!((est.value - map.spectrum().log_modulus(t)).abs() <= 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn leaves_stretch_at_least_the_certified_rate(x in point(), t in tag(), r in 0.02..0.2f64) {
        let map = certified(0.05);
        let seg = grow_leaf(&map, &x, t, r, 1e-3).unwrap();
        let img = iterate_leaf(map.oriented(t.expanding_direction()), &seg, 1, 1e-3, DEFAULT_VERTEX_BUDGET).unwrap();
        let (lo, _) = map.cone_certificate().unwrap().expansion_bounds(t);
        prop_assert!(leaf_length(&img) >= lo * leaf_length(&seg) * (1.0 - 1e-9));
    }

    #[test]
    fn refinement_converges(x in point(), t in tag()) {
        let map = certified(0.05);
        let d = map.oriented(t.expanding_direction());
        let len = |h: f64| {
            let seg = grow_leaf(&map, &x, t, 0.05, h).unwrap();
            leaf_length(&iterate_leaf(d, &seg, 2, h, DEFAULT_VERTEX_BUDGET).unwrap())
        };
        prop_assert!((len(1e-3) - len(5e-4)).abs() < 1e-6);
    }

    #[test]
    fn chi_sits_inside_certified_rates(x in point(), t in tag()) {
        let map = certified(0.05);
        let n_max = match t { BundleTag::WeakUnstable => 8, _ => 4 };
        let est = geometric_growth(map.oriented(t.expanding_direction()), t, &x, 0.1, n_max, None, &LeafOptions::with_max_step(1e-3)).unwrap();
        let (lo, hi) = map.cone_certificate().unwrap().expansion_bounds(t);
        prop_assert!(lo.ln() <= est.chi && est.chi <= hi.ln(), "{} not in [{}, {}]", est.chi, lo.ln(), hi.ln());
    }

    #[test]
    fn separation_tables_are_monotone_and_sandwiched(x in point(), t in prop_oneof![Just(BundleTag::StrongUnstable), Just(BundleTag::WeakUnstable)]) {
        let map = certified(0.05);
        let r = 0.05;
        let opts = LeafOptions::with_max_step(2.5e-4);
        let k = grow_leaf(&map, &x, t, r, 2.5e-4).unwrap();
        let n_max = 4;
        let hist = LeafHistory::build(map.forward(), &k, n_max, &opts).unwrap();
        let eps = [0.02, 0.01, 0.005, 0.0025];
        let table = SeparationTable::build(&hist, n_max, &eps).unwrap();
        for n in 1..=n_max {
            for w in eps.windows(2) {
                let (big, small) = (table.cell(n, w[0]).unwrap(), table.cell(n, w[1]).unwrap());
                prop_assert!(big.s_count <= small.s_count && big.g_count <= small.g_count);
                // ε schedule halves, so the next column is g(ε/2)
                prop_assert!(big.g_count <= big.s_count && big.s_count <= small.g_count);
            }
            if n > 1 {
                for e in eps {
                    let (a, b) = (table.cell(n - 1, e).unwrap(), table.cell(n, e).unwrap());
                    prop_assert!(a.s_count <= b.s_count && a.g_count <= b.g_count);
                }
            }
        }
    }

    #[test]
    fn delta_cocycle(a in -0.08..0.08f64, b in -0.08..0.08f64, c in -0.08..0.08f64) {
        let map = certified(0.05);
        let d = map.forward();
        let seg = grow_leaf(&map, &TorusPoint::new(0.2, 0.5, 0.7), BundleTag::WeakUnstable, 0.1, 1e-3).unwrap();
        let o = DeltaOptions::default();
        let ab = delta_between(&d, &seg, a, b, &o).unwrap().log_value;
        let bc = delta_between(&d, &seg, b, c, &o).unwrap().log_value;
        let ac = delta_between(&d, &seg, a, c, &o).unwrap().log_value;
        prop_assert!((ab + bc - ac).abs() <= 1e-8);
    }

    #[test]
    fn conjugacy_is_bounded_and_periodic(x in point(), n in prop::array::uniform3(-2i64..=2)) {
        let map = certified(0.05);
        let h = conjugacy_series(&map, 1e-10).unwrap();
        let u = h.u_exact(x.rep()).unwrap();
        let v = h.u_exact(x.rep() + Vec3(n.map(|c| c as f64))).unwrap();
        // x + n reduces to x only up to rounding, which the wu series
        // amplifies to its evaluation noise floor
        prop_assert!((u - v).norm() <= 1e-6, "{}", (u - v).norm());
        prop_assert!(u.norm() <= 1.0);
    }
}

#[test]
fn measure_weights_sum_to_one() {
    let map = certified(0.05);
    for t in BundleTag::ALL {
        let params = MeasureParams {
            samples: 500,
            ..Default::default()
        };
        let mu = build_measure(&map.oriented(t.expanding_direction()), t, &params).unwrap();
        let total: f64 = mu.samples.iter().map(|(_, w)| *w).sum();
        assert!(mu.samples.iter().all(|(_, w)| *w > 0.0));
        assert!((total - 1.0).abs() <= 1e-12);
    }
}
