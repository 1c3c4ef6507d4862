//! Pointwise invariant bundles E^uu, E^wu, E^s by cocycle iteration, and
//! Lyapunov exponents along them.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::linalg::{mean_and_stderr, CompensatedSum, Mat3, Vec3};
use crate::torus::{AnosovMap, BundleTag, TorusPoint, ORBIT_INVERSE_TOL};

/// Default angular tolerance on the equivariance residual.
pub const DEFAULT_BUNDLE_TOL: f64 = 1e-6;

/// Depth used when the caller does not pick one.
pub const DEFAULT_DEPTH: usize = 40;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleSample {
    pub base: TorusPoint,
    pub direction: Vec3,
    pub tag: BundleTag,
    pub equivariance_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub value: f64,
    pub std_error: f64,
    pub orbit_length: usize,
    pub ensemble_size: usize,
    pub tag: BundleTag,
    pub sampler: String,
}

impl LyapunovEstimate {
    pub const CSV_HEADER: &'static str = "map_id,tag,value,std_error,n,ensemble,seed";

    pub fn csv_row(&self, map_id: &str, seed: u64) -> String {
        format!(
            "{map_id},{},{},{},{},{},{seed}",
            self.tag, self.value, self.std_error, self.orbit_length, self.ensemble_size
        )
    }
}

/// Where orbit starting points come from.
#[derive(Clone, Debug)]
pub enum Sampler {
    /// Uniform on T³.
    Volume,
    /// Draws from a weighted point cloud.
    Empirical {
        points: Vec<Vec3>,
        weights: Vec<f64>,
        label: String,
    },
}

impl Sampler {
    pub fn describe(&self) -> String {
        match self {
            Sampler::Volume => "volume".to_string(),
            Sampler::Empirical { label, points, .. } => format!("{label} ({} atoms)", points.len()),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<Vec3> {
        match self {
            Sampler::Volume => Ok(Vec3::new(rng.gen(), rng.gen(), rng.gen())),
            Sampler::Empirical {
                points, weights, ..
            } => {
                let dist = WeightedIndex::new(weights)
                    .map_err(|e| LabError::InvalidConfig(format!("sampler weights: {e}")))?;
                Ok(points[dist.sample(rng)])
            }
        }
    }
}

/// Per-item RNG derived from (seed, index) so results do not depend on
/// scheduling.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn require_certificate(map: &AnosovMap) -> Result<()> {
    if map.cone_certificate().is_none() {
        return Err(LabError::NotPartiallyHyperbolicAnosov(
            "map carries no cone certificate".into(),
        ));
    }
    Ok(())
}

/// Sign convention: positive pairing with the eigenvector of A.
fn orient(map: &AnosovMap, tag: BundleTag, v: Vec3) -> Vec3 {
    if v.dot(map.spectrum().eigenvector(tag)) < 0.0 {
        -v
    } else {
        v
    }
}

/// (1,1,1)/√3, rotated if it is nearly annihilated by the tag's dual covector.
fn generic_seed(map: &AnosovMap, tag: BundleTag) -> Vec3 {
    let dual = map.eigenbasis_inverse().row(tag.index());
    let mut seed = Vec3::new(1.0, 1.0, 1.0).normalized();
    if seed.dot(dual).abs() < 1e-6 * dual.norm() {
        seed = Vec3::new(1.0, 0.5, 0.25).normalized();
    }
    seed
}

fn backward_orbit(map: &AnosovMap, x: Vec3, n: usize) -> Result<Vec<Vec3>> {
    // out[k] = f^{-k}(x)
    let mut out = Vec::with_capacity(n + 1);
    out.push(x);
    let mut y = x;
    for _ in 0..n {
        y = reduce(map.lift_inverse(y, ORBIT_INVERSE_TOL)?);
        out.push(y);
    }
    Ok(out)
}

fn forward_orbit(map: &AnosovMap, x: Vec3, n: usize) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(x);
    let mut y = x;
    for _ in 0..n {
        y = reduce(map.lift_apply(y));
        out.push(y);
    }
    out
}

/// Orbit points are only needed mod Z³; reducing keeps lifts O(1).
#[inline]
fn reduce(x: Vec3) -> Vec3 {
    TorusPoint::from_lift(x).rep()
}

fn uu_raw(map: &AnosovMap, x: Vec3, n: usize) -> Result<Vec3> {
    if map.is_linear() {
        return Ok(map.spectrum().v_uu);
    }
    let orbit = backward_orbit(map, x, n)?;
    let mut v = generic_seed(map, BundleTag::StrongUnstable);
    for k in (1..=n).rev() {
        v = map.jacobian_at(orbit[k]).mul_vec(v).normalized();
    }
    Ok(orient(map, BundleTag::StrongUnstable, v))
}

fn s_raw(map: &AnosovMap, x: Vec3, n: usize) -> Result<Vec3> {
    if map.is_linear() {
        return Ok(map.spectrum().v_s);
    }
    let orbit = forward_orbit(map, x, n);
    let mut v = generic_seed(map, BundleTag::Stable);
    for k in (0..n).rev() {
        v = solve_jacobian(map, orbit[k], v)?.normalized();
    }
    Ok(orient(map, BundleTag::Stable, v))
}

fn solve_jacobian(map: &AnosovMap, x: Vec3, v: Vec3) -> Result<Vec3> {
    map.jacobian_at(x).solve(v).ok_or(LabError::NonConvergence {
        iterations: 0,
        residual: f64::NAN,
    })
}

/// Orthonormal pair spanning a plane, Gram–Schmidt.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plane {
    pub e1: Vec3,
    pub e2: Vec3,
}

impl Plane {
    fn from_pair(a: Vec3, b: Vec3) -> Result<Plane> {
        let na = a.norm();
        let e1 = a * (1.0 / na);
        let b_perp = b - e1 * e1.dot(b);
        let ratio = b_perp.norm() / b.norm().max(na);
        if !(ratio > 1e-13) {
            return Err(LabError::PlaneDegeneracy { ratio });
        }
        Ok(Plane {
            e1,
            e2: b_perp.normalized(),
        })
    }

    pub fn project(&self, v: Vec3) -> Vec3 {
        self.e1 * self.e1.dot(v) + self.e2 * self.e2.dot(v)
    }

    pub fn normal(&self) -> Vec3 {
        self.e1.cross(self.e2).normalized()
    }

    /// Angle between `v` and the plane.
    pub fn angle_to(&self, v: Vec3) -> f64 {
        let n = v.norm();
        (self.normal().dot(v).abs() / n).clamp(0.0, 1.0).asin()
    }

    fn push(&self, jac: &Mat3) -> Result<Plane> {
        Plane::from_pair(jac.mul_vec(self.e1), jac.mul_vec(self.e2))
    }
}

fn plane_seed() -> (Vec3, Vec3) {
    (
        Vec3::new(1.0, 1.0, 1.0).normalized(),
        Vec3::new(1.0, -1.0, 0.5).normalized(),
    )
}

/// Unstable plane E^u at `x`, by pushing a generic plane along the backward
/// orbit.
pub fn unstable_plane(map: &AnosovMap, x: Vec3, n: usize) -> Result<Plane> {
    if map.is_linear() {
        let s = map.spectrum();
        return Plane::from_pair(s.v_uu, s.v_wu);
    }
    let orbit = backward_orbit(map, x, n)?;
    let (a, b) = plane_seed();
    let mut plane = Plane::from_pair(a, b)?;
    for k in (1..=n).rev() {
        plane = plane.push(&map.jacobian_at(orbit[k]))?;
    }
    Ok(plane)
}

/// Unstable planes along the forward orbit `x_0..=x_m` of `x`.
fn unstable_planes_along(
    map: &AnosovMap,
    orbit: &[Vec3],
    plane_depth: usize,
) -> Result<Vec<Plane>> {
    let mut plane = unstable_plane(map, orbit[0], plane_depth)?;
    let mut planes = Vec::with_capacity(orbit.len());
    planes.push(plane);
    for w in orbit.windows(2) {
        plane = if map.is_linear() {
            plane
        } else {
            plane.push(&map.jacobian_at(w[0]))?
        };
        planes.push(plane);
    }
    Ok(planes)
}

/// Backward sweep inside the stored planes; returns e_wu at every orbit point.
fn wu_sweep(map: &AnosovMap, orbit: &[Vec3], planes: &[Plane]) -> Result<Vec<Vec3>> {
    let m = orbit.len() - 1;
    let mut out = vec![Vec3::ZERO; orbit.len()];
    let mut v = planes[m].project(generic_seed(map, BundleTag::WeakUnstable));
    if v.norm() < 1e-8 {
        v = planes[m].e2;
    }
    v = v.normalized();
    out[m] = orient(map, BundleTag::WeakUnstable, v);
    for k in (0..m).rev() {
        v = planes[k]
            .project(solve_jacobian(map, orbit[k], v)?)
            .normalized();
        out[k] = orient(map, BundleTag::WeakUnstable, v);
    }
    Ok(out)
}

fn wu_raw(map: &AnosovMap, x: Vec3, n: usize, m: usize) -> Result<Vec3> {
    if map.is_linear() {
        return Ok(map.spectrum().v_wu);
    }
    let orbit = forward_orbit(map, x, m);
    let planes = unstable_planes_along(map, &orbit, n)?;
    Ok(wu_sweep(map, &orbit, &planes)?[0])
}

/// Unit bundle direction at a lift point, without the residual audit.
pub fn bundle_direction(map: &AnosovMap, tag: BundleTag, x: Vec3, n: usize) -> Result<Vec3> {
    match tag {
        BundleTag::StrongUnstable => uu_raw(map, x, n),
        BundleTag::WeakUnstable => wu_raw(map, x, n, n),
        BundleTag::Stable => s_raw(map, x, n),
    }
}

fn audited(
    map: &AnosovMap,
    tag: BundleTag,
    x: &TorusPoint,
    n: usize,
    tolerance: f64,
) -> Result<BundleSample> {
    require_certificate(map)?;
    if n == 0 {
        return Err(LabError::InvalidConfig("bundle depth must be ≥ 1".into()));
    }
    let base = x.rep();
    let e = bundle_direction(map, tag, base, n)?;
    let (fx, jac) = map.lift_apply_with_jacobian(base);
    let e_next = bundle_direction(map, tag, fx, n)?;
    let residual = jac.mul_vec(e).line_angle(e_next);
    if !(residual <= tolerance) {
        return Err(LabError::BundleNonConvergence {
            depth: n,
            residual,
            tolerance,
        });
    }
    Ok(BundleSample {
        base: *x,
        direction: e,
        tag,
        equivariance_residual: residual,
    })
}

/// E^uu(x): pull `x` back `n` steps, push (1,1,1)/√3 forward.
pub fn strong_unstable_direction(
    map: &AnosovMap,
    x: &TorusPoint,
    n: usize,
) -> Result<BundleSample> {
    audited(map, BundleTag::StrongUnstable, x, n, DEFAULT_BUNDLE_TOL)
}

/// E^s(x): push `x` forward `n` steps, pull the seed back with Df⁻¹.
pub fn stable_direction(map: &AnosovMap, x: &TorusPoint, n: usize) -> Result<BundleSample> {
    audited(map, BundleTag::Stable, x, n, DEFAULT_BUNDLE_TOL)
}

/// E^wu(x): unstable plane from `n` backward steps, then `n` steps of Df⁻¹
/// restricted to the plane field along the forward orbit.
pub fn weak_unstable_direction(map: &AnosovMap, x: &TorusPoint, n: usize) -> Result<BundleSample> {
    audited(map, BundleTag::WeakUnstable, x, n, DEFAULT_BUNDLE_TOL)
}

/// Same as the per-tag functions with an explicit residual tolerance.
pub fn bundle_sample(
    map: &AnosovMap,
    tag: BundleTag,
    x: &TorusPoint,
    n: usize,
    tolerance: f64,
) -> Result<BundleSample> {
    audited(map, tag, x, n, tolerance)
}

/// Depth at which the spectral convergence rate reaches `tol`, plus margin.
pub fn auto_depth(map: &AnosovMap, tag: BundleTag, tol: f64) -> usize {
    let s = map.spectrum();
    let spectral = match tag {
        BundleTag::StrongUnstable | BundleTag::WeakUnstable => (s.alpha_wu / s.alpha_uu).abs(),
        BundleTag::Stable => (s.alpha_s / s.alpha_wu).abs(),
    };
    let rate = match (tag, map.cone_certificate()) {
        (BundleTag::Stable, _) | (_, None) => spectral,
        (_, Some(c)) => c.gamma.max(spectral),
    };
    let n = (tol.ln() / rate.ln()).ceil() as usize;
    n + 5
}

/// Bundle directions along the forward orbit `x_0..x_{n-1}`.
pub fn directions_along_orbit(
    map: &AnosovMap,
    tag: BundleTag,
    x: Vec3,
    n: usize,
    depth: usize,
) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    match tag {
        BundleTag::StrongUnstable => {
            let mut e = uu_raw(map, x, depth)?;
            let mut y = x;
            let mut points = Vec::with_capacity(n);
            let mut dirs = Vec::with_capacity(n);
            for _ in 0..n {
                points.push(y);
                dirs.push(e);
                let (fy, jac) = map.lift_apply_with_jacobian(y);
                e = jac.mul_vec(e).normalized();
                y = reduce(fy);
            }
            Ok((points, dirs))
        }
        BundleTag::Stable => {
            let orbit = forward_orbit(map, x, n + depth);
            let mut dirs = vec![Vec3::ZERO; n];
            let mut v = if map.is_linear() {
                map.spectrum().v_s
            } else {
                generic_seed(map, BundleTag::Stable)
            };
            for k in (0..n + depth).rev() {
                if !map.is_linear() {
                    v = solve_jacobian(map, orbit[k], v)?.normalized();
                }
                if k < n {
                    dirs[k] = orient(map, BundleTag::Stable, v);
                }
            }
            Ok((orbit[..n].to_vec(), dirs))
        }
        BundleTag::WeakUnstable => {
            let orbit = forward_orbit(map, x, n + depth);
            if map.is_linear() {
                return Ok((orbit[..n].to_vec(), vec![map.spectrum().v_wu; n]));
            }
            let planes = unstable_planes_along(map, &orbit, depth)?;
            let dirs = wu_sweep(map, &orbit, &planes)?;
            Ok((orbit[..n].to_vec(), dirs[..n].to_vec()))
        }
    }
}

/// (1/n) Σ log‖Df(x_k) e(x_k)‖ along one orbit, compensated.
pub fn orbit_exponent(
    map: &AnosovMap,
    tag: BundleTag,
    x: Vec3,
    n: usize,
    depth: usize,
) -> Result<f64> {
    let (points, dirs) = directions_along_orbit(map, tag, x, n, depth)?;
    let sum: CompensatedSum = points
        .iter()
        .zip(&dirs)
        .map(|(p, e)| map.jacobian_at(*p).mul_vec(*e).norm().ln())
        .collect();
    Ok(sum.value() / n as f64)
}

/// Ensemble Birkhoff average of the bundle log-Jacobian.
pub fn lyapunov_exponent(
    map: &AnosovMap,
    tag: BundleTag,
    sampler: &Sampler,
    n: usize,
    ensemble: usize,
    seed: u64,
) -> Result<LyapunovEstimate> {
    if n == 0 || ensemble == 0 {
        return Err(LabError::InvalidConfig(
            "orbit length and ensemble size must be positive".into(),
        ));
    }
    let depth = DEFAULT_DEPTH;
    let values: Vec<f64> = (0..ensemble)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let x = sampler.draw(&mut rng)?;
            orbit_exponent(map, tag, x, n, depth)
        })
        .collect::<Result<Vec<_>>>()?;
    let (value, std_error) = mean_and_stderr(&values);
    Ok(LyapunovEstimate {
        value,
        std_error,
        orbit_length: n,
        ensemble_size: ensemble,
        tag,
        sampler: sampler.describe(),
    })
}

fn gram_schmidt(cols: [Vec3; 3]) -> ([Vec3; 3], [f64; 3]) {
    let mut q = [Vec3::ZERO; 3];
    let mut r = [0.0; 3];
    for j in 0..3 {
        let mut v = cols[j];
        for i in 0..j {
            v -= q[i] * q[i].dot(v);
        }
        // second pass for orthogonality
        for i in 0..j {
            v -= q[i] * q[i].dot(v);
        }
        r[j] = v.norm();
        q[j] = v * (1.0 / r[j]);
    }
    (q, r)
}

/// QR exponents along the orbit of `x`, sorted descending.
///
/// The initial frame is the orthonormalized eigen-flag of A, so for a
/// linear map every step reproduces the eigenvalues exactly.
pub fn oseledets_qr(map: &AnosovMap, x: Vec3, n: usize) -> Result<[f64; 3]> {
    if n == 0 {
        return Err(LabError::InvalidConfig(
            "orbit length must be positive".into(),
        ));
    }
    let s = map.spectrum();
    let (mut q, _) = gram_schmidt([s.v_uu, s.v_wu, s.v_s]);
    let mut sums = [
        CompensatedSum::new(),
        CompensatedSum::new(),
        CompensatedSum::new(),
    ];
    let mut y = x;
    for _ in 0..n {
        let (fy, jac) = map.lift_apply_with_jacobian(y);
        let (nq, r) = gram_schmidt([jac.mul_vec(q[0]), jac.mul_vec(q[1]), jac.mul_vec(q[2])]);
        if r.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(LabError::NonConvergence {
                iterations: n,
                residual: f64::NAN,
            });
        }
        for i in 0..3 {
            sums[i].add(r[i].ln());
        }
        q = nq;
        y = reduce(fy);
    }
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = sums[i].value() / n as f64;
    }
    out.sort_by(|a, b| b.total_cmp(a));
    Ok(out)
}

/// (1/n) Σ log|det Df(x_k)| along the orbit of `x`.
pub fn log_det_average(map: &AnosovMap, x: Vec3, n: usize) -> f64 {
    let mut sum = CompensatedSum::new();
    let mut y = x;
    for _ in 0..n {
        let (fy, jac) = map.lift_apply_with_jacobian(y);
        sum.add(jac.det().abs().ln());
        y = reduce(fy);
    }
    sum.value() / n as f64
}

/// QR exponents averaged over the same orbits `lyapunov_exponent` would use.
pub fn qr_exponent_estimates(
    map: &AnosovMap,
    sampler: &Sampler,
    n: usize,
    ensemble: usize,
    seed: u64,
) -> Result<[LyapunovEstimate; 3]> {
    let runs: Vec<[f64; 3]> = (0..ensemble)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let x = sampler.draw(&mut rng)?;
            oseledets_qr(map, x, n)
        })
        .collect::<Result<Vec<_>>>()?;
    let make = |idx: usize, tag: BundleTag| {
        let vals: Vec<f64> = runs.iter().map(|r| r[idx]).collect();
        let (value, std_error) = mean_and_stderr(&vals);
        LyapunovEstimate {
            value,
            std_error,
            orbit_length: n,
            ensemble_size: ensemble,
            tag,
            sampler: format!("qr/{}", sampler.describe()),
        }
    };
    Ok([
        make(0, BundleTag::StrongUnstable),
        make(1, BundleTag::WeakUnstable),
        make(2, BundleTag::Stable),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{ConeRequest, FourierMode, PerturbationField, REFERENCE_MATRIX};

    fn certified(eps: f64) -> AnosovMap {
        let p = PerturbationField::new(
            vec![
                FourierMode::sine([1, 0, 0], Vec3::new(0.3, -0.5, 0.8)),
                FourierMode {
                    frequency: [0, 1, 1],
                    sin_amplitude: Vec3::new(0.2, 0.4, -0.1),
                    cos_amplitude: Vec3::new(-0.4, 0.1, 0.3),
                },
            ],
            eps,
        );
        AnosovMap::certified(REFERENCE_MATRIX, p, ConeRequest::default(), 12).unwrap()
    }

    #[test]
    fn linear_bundles_are_eigenvectors() {
        let map = certified(0.0);
        let x = TorusPoint::new(0.2, 0.7, 0.1);
        let s = map.spectrum().clone();
        assert_eq!(
            strong_unstable_direction(&map, &x, 3).unwrap().direction,
            s.v_uu
        );
        assert_eq!(
            weak_unstable_direction(&map, &x, 3).unwrap().direction,
            s.v_wu
        );
        assert_eq!(stable_direction(&map, &x, 3).unwrap().direction, s.v_s);
    }

    #[test]
    fn uncertified_map_is_rejected() {
        let map = AnosovMap::linear(REFERENCE_MATRIX).unwrap();
        let x = TorusPoint::new(0.2, 0.7, 0.1);
        assert!(strong_unstable_direction(&map, &x, 3).is_err());
    }

    #[test]
    fn perturbed_residuals_small() {
        let map = certified(0.05);
        let x = TorusPoint::new(0.41, 0.13, 0.77);
        for tag in BundleTag::ALL {
            let b = bundle_sample(&map, tag, &x, 40, 1e-6).unwrap();
            assert!(
                b.equivariance_residual < 1e-8,
                "{tag}: {}",
                b.equivariance_residual
            );
            assert!((b.direction.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn wu_lies_in_unstable_plane() {
        let map = certified(0.05);
        let x = Vec3::new(0.3, 0.9, 0.55);
        let e = bundle_direction(&map, BundleTag::WeakUnstable, x, 40).unwrap();
        let plane = unstable_plane(&map, x, 40).unwrap();
        assert!(plane.angle_to(e) < 1e-8);
    }

    #[test]
    fn shallow_depth_fails_audit() {
        let map = certified(0.05);
        let x = TorusPoint::new(0.41, 0.13, 0.77);
        let err = bundle_sample(&map, BundleTag::StrongUnstable, &x, 2, 1e-10).unwrap_err();
        assert!(matches!(err, LabError::BundleNonConvergence { .. }));
    }

    #[test]
    fn orbit_directions_match_pointwise_ones() {
        let map = certified(0.05);
        let x = Vec3::new(0.11, 0.52, 0.33);
        for tag in BundleTag::ALL {
            let (pts, dirs) = directions_along_orbit(&map, tag, x, 5, 40).unwrap();
            for (p, d) in pts.iter().zip(&dirs) {
                let direct = bundle_direction(&map, tag, *p, 40).unwrap();
                assert!(d.line_angle(direct) < 1e-8, "{tag}");
            }
        }
    }

    #[test]
    fn qr_sum_matches_log_det() {
        let map = certified(0.05);
        let x = Vec3::new(0.6, 0.2, 0.9);
        let q = oseledets_qr(&map, x, 500).unwrap();
        let ld = log_det_average(&map, x, 500);
        assert!((q.iter().sum::<f64>() - ld).abs() < 1e-10);
    }

    #[test]
    fn linear_qr_reproduces_spectrum() {
        let map = AnosovMap::linear(REFERENCE_MATRIX).unwrap();
        let q = oseledets_qr(&map, Vec3::new(0.1, 0.2, 0.3), 200).unwrap();
        let s = map.spectrum();
        for (got, want) in q.iter().zip([s.lambda_uu, s.lambda_wu, s.lambda_s]) {
            assert!((got - want).abs() < 1e-10, "{got} {want}");
        }
    }

    #[test]
    fn ensemble_is_thread_count_independent() {
        let map = certified(0.05);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    lyapunov_exponent(&map, BundleTag::StrongUnstable, &Sampler::Volume, 50, 8, 3)
                })
                .unwrap()
        };
        assert_eq!(run(1), run(3));
    }
}
