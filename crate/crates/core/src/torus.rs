//! Maps `f = A + p` of the 3-torus: lifts, inverses, Jacobians, the
//! spectrum of the linear part, and one-step cone certificates.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::linalg::{IntMatrix3, Mat3, Vec3};

/// Newton cap for inverse evaluation.
pub const INVERSE_MAX_ITERATIONS: usize = 50;
/// Default residual tolerance of the Newton inverse.
pub const DEFAULT_INVERSE_TOL: f64 = 1e-12;
/// Tolerance used internally when orbits are pulled back.
pub(crate) const ORBIT_INVERSE_TOL: f64 = 1e-14;

/// The reference linear part used throughout the tests and examples.
pub const REFERENCE_MATRIX: IntMatrix3 = IntMatrix3([[2, 1, 0], [1, 2, 1], [0, 1, 1]]);

/// A point of T³ = R³/Z³ with its canonical representative in [0,1)³.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    rep: Vec3,
}

impl TorusPoint {
    /// Reduces an arbitrary lift point into the fundamental domain.
    pub fn from_lift(x: Vec3) -> Self {
        let mut r = [0.0; 3];
        for (out, v) in r.iter_mut().zip(x.0) {
            let mut w = v - v.floor();
            if w >= 1.0 {
                w = 0.0;
            }
            *out = w;
        }
        TorusPoint { rep: Vec3(r) }
    }

    pub fn new(x1: f64, x2: f64, x3: f64) -> Self {
        Self::from_lift(Vec3::new(x1, x2, x3))
    }

    pub fn rep(&self) -> Vec3 {
        self.rep
    }

    /// Flat torus metric.
    pub fn distance(&self, other: &TorusPoint) -> f64 {
        torus_displacement(self.rep, other.rep).norm()
    }
}

/// Shortest displacement `b − a` modulo Z³, componentwise in [-1/2, 1/2].
pub fn torus_displacement(a: Vec3, b: Vec3) -> Vec3 {
    let mut d = b - a;
    for v in d.0.iter_mut() {
        *v -= v.round();
    }
    d
}

/// Torus distance between two lift points.
pub fn torus_distance(a: Vec3, b: Vec3) -> f64 {
    torus_displacement(a, b).norm()
}

/// The three invariant bundles of a partially hyperbolic Anosov map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum BundleTag {
    #[serde(rename = "uu")]
    StrongUnstable,
    #[serde(rename = "wu")]
    WeakUnstable,
    #[serde(rename = "s")]
    Stable,
}

impl BundleTag {
    pub const ALL: [BundleTag; 3] = [
        BundleTag::StrongUnstable,
        BundleTag::WeakUnstable,
        BundleTag::Stable,
    ];

    pub fn index(self) -> usize {
        match self {
            BundleTag::StrongUnstable => 0,
            BundleTag::WeakUnstable => 1,
            BundleTag::Stable => 2,
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            BundleTag::StrongUnstable => "uu",
            BundleTag::WeakUnstable => "wu",
            BundleTag::Stable => "s",
        }
    }

    /// Time direction in which the bundle's leaves expand.
    pub fn expanding_direction(self) -> TimeDirection {
        match self {
            BundleTag::Stable => TimeDirection::Backward,
            _ => TimeDirection::Forward,
        }
    }
}

impl fmt::Display for BundleTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

impl FromStr for BundleTag {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uu" => Ok(BundleTag::StrongUnstable),
            "wu" => Ok(BundleTag::WeakUnstable),
            "s" => Ok(BundleTag::Stable),
            other => Err(LabError::InvalidConfig(format!(
                "unknown bundle tag {other:?}"
            ))),
        }
    }
}

/// One trigonometric mode `s·sin(2π k·x) + c·cos(2π k·x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierMode {
    pub frequency: [i64; 3],
    pub sin_amplitude: Vec3,
    pub cos_amplitude: Vec3,
}

impl FourierMode {
    pub fn sine(frequency: [i64; 3], amplitude: Vec3) -> Self {
        FourierMode {
            frequency,
            sin_amplitude: amplitude,
            cos_amplitude: Vec3::ZERO,
        }
    }

    fn freq_norm(&self) -> f64 {
        Vec3::from_ints(self.frequency).norm()
    }
}

/// Z³-periodic perturbation `p(x) = (ε/2π) Σ [s_m sin(2π k_m·x) + c_m cos(2π k_m·x)]`.
///
/// The 1/2π normalisation makes `Dp = ε Σ (s_m cos − c_m sin) k_mᵀ`, so ε is
/// the derivative scale of a unit-amplitude, unit-frequency mode.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PerturbationField {
    pub modes: Vec<FourierMode>,
    pub epsilon: f64,
}

impl PerturbationField {
    pub fn zero() -> Self {
        PerturbationField {
            modes: Vec::new(),
            epsilon: 0.0,
        }
    }

    pub fn new(modes: Vec<FourierMode>, epsilon: f64) -> Self {
        PerturbationField { modes, epsilon }
    }

    pub fn is_zero(&self) -> bool {
        self.epsilon == 0.0
            || self
                .modes
                .iter()
                .all(|m| m.sin_amplitude == Vec3::ZERO && m.cos_amplitude == Vec3::ZERO)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        PerturbationField {
            modes: self.modes.clone(),
            epsilon,
        }
    }

    #[inline]
    pub fn value(&self, x: Vec3) -> Vec3 {
        let mut acc = Vec3::ZERO;
        for m in &self.modes {
            let theta = TAU * (Vec3::from_ints(m.frequency).dot(x));
            let (s, c) = theta.sin_cos();
            acc += m.sin_amplitude * s + m.cos_amplitude * c;
        }
        acc * (self.epsilon / TAU)
    }

    #[inline]
    pub fn derivative(&self, x: Vec3) -> Mat3 {
        self.value_and_derivative(x).1
    }

    #[inline]
    pub fn value_and_derivative(&self, x: Vec3) -> (Vec3, Mat3) {
        let mut val = Vec3::ZERO;
        let mut der = Mat3::ZERO;
        for m in &self.modes {
            let k = Vec3::from_ints(m.frequency);
            let theta = TAU * k.dot(x);
            let (s, c) = theta.sin_cos();
            val += m.sin_amplitude * s + m.cos_amplitude * c;
            let col = m.sin_amplitude * c - m.cos_amplitude * s;
            der = der + Mat3::outer(col, k);
        }
        (val * (self.epsilon / TAU), der * self.epsilon)
    }

    /// Upper bound on sup ‖p‖ from the coefficients.
    pub fn sup_norm_bound(&self) -> f64 {
        self.epsilon.abs() / TAU
            * self
                .modes
                .iter()
                .map(|m| m.sin_amplitude.norm().hypot(m.cos_amplitude.norm()))
                .sum::<f64>()
    }

    /// Upper bound on sup ‖Dp‖ (operator norm) from the coefficients.
    pub fn derivative_sup_bound(&self) -> f64 {
        self.epsilon.abs()
            * self
                .modes
                .iter()
                .map(|m| m.sin_amplitude.norm().hypot(m.cos_amplitude.norm()) * m.freq_norm())
                .sum::<f64>()
    }

    /// Bound on sup |⟨w, p⟩| for a fixed covector `w`.
    pub fn component_sup_bound(&self, w: Vec3) -> f64 {
        self.epsilon.abs() / TAU
            * self
                .modes
                .iter()
                .map(|m| w.dot(m.sin_amplitude).abs() + w.dot(m.cos_amplitude).abs())
                .sum::<f64>()
    }
}

/// Eigen-data of the linear part, ordered by modulus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub alpha_uu: f64,
    pub alpha_wu: f64,
    pub alpha_s: f64,
    pub v_uu: Vec3,
    pub v_wu: Vec3,
    pub v_s: Vec3,
    pub lambda_uu: f64,
    pub lambda_wu: f64,
    pub lambda_s: f64,
}

impl Spectrum {
    pub fn eigenvalue(&self, tag: BundleTag) -> f64 {
        match tag {
            BundleTag::StrongUnstable => self.alpha_uu,
            BundleTag::WeakUnstable => self.alpha_wu,
            BundleTag::Stable => self.alpha_s,
        }
    }

    pub fn eigenvector(&self, tag: BundleTag) -> Vec3 {
        match tag {
            BundleTag::StrongUnstable => self.v_uu,
            BundleTag::WeakUnstable => self.v_wu,
            BundleTag::Stable => self.v_s,
        }
    }

    /// log|α| for the tag (nats per iterate).
    pub fn log_modulus(&self, tag: BundleTag) -> f64 {
        match tag {
            BundleTag::StrongUnstable => self.lambda_uu,
            BundleTag::WeakUnstable => self.lambda_wu,
            BundleTag::Stable => self.lambda_s,
        }
    }

    /// Eigenvector matrix with columns (v_uu, v_wu, v_s).
    pub fn basis(&self) -> Mat3 {
        Mat3::from_columns(self.v_uu, self.v_wu, self.v_s)
    }
}

fn discriminant(coeffs: [i64; 3]) -> i128 {
    let (b, c, d) = (coeffs[0] as i128, coeffs[1] as i128, coeffs[2] as i128);
    18 * b * c * d - 4 * b * b * b * d + b * b * c * c - 4 * c * c * c - 27 * d * d
}

fn eval_cubic(coeffs: [i64; 3], x: f64) -> (f64, f64) {
    let (b, c, d) = (coeffs[0] as f64, coeffs[1] as f64, coeffs[2] as f64);
    let v = ((x + b) * x + c) * x + d;
    let dv = (3.0 * x + 2.0 * b) * x + c;
    (v, dv)
}

fn eigenvector(a: &Mat3, alpha: f64) -> Vec3 {
    let m = *a - Mat3::IDENTITY * alpha;
    let rows = [m.row(0), m.row(1), m.row(2)];
    let candidates = [
        rows[0].cross(rows[1]),
        rows[0].cross(rows[2]),
        rows[1].cross(rows[2]),
    ];
    let mut v = candidates
        .into_iter()
        .max_by(|x, y| x.norm_sq().total_cmp(&y.norm_sq()))
        .unwrap()
        .normalized();
    // one inverse-iteration polish step
    let shifted = *a - Mat3::IDENTITY * (alpha * (1.0 + 1e-12) + 1e-14);
    if let Some(w) = shifted.solve(v) {
        if w.is_finite() && w.norm() > 0.0 {
            v = w.normalized();
        }
    }
    let pivot =
        v.0.iter()
            .copied()
            .max_by(|x, y| x.abs().total_cmp(&y.abs()))
            .unwrap();
    if pivot < 0.0 {
        v = -v;
    }
    v
}

/// Eigen-decomposition of an integer linear part.
///
/// Requires three distinct real eigenvalues with
/// |α_uu| > |α_wu| > 1 > |α_s| > 0.
pub fn spectrum(a: &IntMatrix3) -> Result<Spectrum> {
    let det = a.det();
    if det.abs() != 1 {
        return Err(LabError::NotPartiallyHyperbolicAnosov(format!(
            "determinant {det} is not ±1"
        )));
    }
    let coeffs = a.char_poly();
    let disc = discriminant(coeffs);
    if disc < 0 {
        return Err(LabError::NotPartiallyHyperbolicAnosov(
            "characteristic polynomial has complex roots".into(),
        ));
    }
    if disc == 0 {
        return Err(LabError::NotPartiallyHyperbolicAnosov(
            "characteristic polynomial has a repeated root".into(),
        ));
    }
    // Trigonometric solution of the depressed cubic, then Newton polish.
    let (b, c, d) = (coeffs[0] as f64, coeffs[1] as f64, coeffs[2] as f64);
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let r = 2.0 * (-p / 3.0).sqrt();
    let arg = (3.0 * q / (p * r)).clamp(-1.0, 1.0);
    let phi = arg.acos() / 3.0;
    let mut roots: Vec<f64> = (0..3)
        .map(|k| r * (phi - TAU * k as f64 / 3.0).cos() - b / 3.0)
        .collect();
    for root in roots.iter_mut() {
        for _ in 0..8 {
            let (v, dv) = eval_cubic(coeffs, *root);
            if dv == 0.0 {
                break;
            }
            *root -= v / dv;
        }
    }
    roots.sort_by(|x, y| y.abs().total_cmp(&x.abs()));
    let [a1, a2, a3] = [roots[0], roots[1], roots[2]];
    if !(a1.abs() > a2.abs() && a2.abs() > 1.0 && a3.abs() < 1.0 && a3 != 0.0) {
        return Err(LabError::NotPartiallyHyperbolicAnosov(format!(
            "eigenvalue moduli ({:.6}, {:.6}, {:.6}) are not ordered |α_uu| > |α_wu| > 1 > |α_s|",
            a1.abs(),
            a2.abs(),
            a3.abs()
        )));
    }
    let real = a.to_real();
    Ok(Spectrum {
        alpha_uu: a1,
        alpha_wu: a2,
        alpha_s: a3,
        v_uu: eigenvector(&real, a1),
        v_wu: eigenvector(&real, a2),
        v_s: eigenvector(&real, a3),
        lambda_uu: a1.abs().ln(),
        lambda_wu: a2.abs().ln(),
        lambda_s: a3.abs().ln(),
    })
}

/// Requested cone half-angles (radians) around the eigen-directions of A.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeRequest {
    /// Cone around the unstable plane E^uu ⊕ E^wu.
    pub unstable: f64,
    /// Cone around the stable line E^s.
    pub stable: f64,
    /// Cone around the strong unstable line E^uu.
    pub strong: f64,
    /// Cone around the centre-stable plane E^wu ⊕ E^s.
    pub center_stable: f64,
}

impl ConeRequest {
    pub fn uniform(half_angle: f64) -> Self {
        ConeRequest {
            unstable: half_angle,
            stable: half_angle,
            strong: half_angle,
            center_stable: half_angle,
        }
    }
}

impl Default for ConeRequest {
    fn default() -> Self {
        ConeRequest::uniform(0.3)
    }
}

/// Grid-verified one-step cone invariance with measured factors.
///
/// Norms are Euclidean in the eigen-coordinates of A (the adapted metric);
/// for symmetric linear parts this is the ambient Euclidean norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeCertificate {
    pub request: ConeRequest,
    pub grid_n: usize,
    /// min ‖Df v‖/‖v‖ over the unstable cone.
    pub unstable_expansion: f64,
    /// min ‖Df⁻¹ v‖/‖v‖ over the stable cone.
    pub stable_expansion_inverse: f64,
    /// max ‖Df⁻¹ v‖/‖v‖ over the stable cone.
    pub stable_expansion_inverse_max: f64,
    /// min and max ‖Df v‖/‖v‖ over the strong unstable cone.
    pub strong_expansion_min: f64,
    pub strong_expansion_max: f64,
    /// max ‖Df v‖/‖v‖ over the centre-stable cone.
    pub center_stable_max: f64,
    /// Worst ratio (max over centre-stable cone)/(min over strong cone).
    pub gamma: f64,
}

impl ConeCertificate {
    /// One-step contraction along the stable cone, 1/stable_expansion_inverse.
    pub fn stable_contraction(&self) -> f64 {
        1.0 / self.stable_expansion_inverse
    }

    /// Certified one-step (min, max) expansion of leaves of `tag` in the
    /// direction of time in which they expand.
    pub fn expansion_bounds(&self, tag: BundleTag) -> (f64, f64) {
        match tag {
            BundleTag::StrongUnstable => (self.strong_expansion_min, self.strong_expansion_max),
            BundleTag::WeakUnstable => (self.unstable_expansion, self.center_stable_max),
            BundleTag::Stable => (
                self.stable_expansion_inverse,
                self.stable_expansion_inverse_max,
            ),
        }
    }
}

/// A map `F = A + p` of R³ descending to T³.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnosovMap {
    linear_part: IntMatrix3,
    perturbation: PerturbationField,
    spectrum: Spectrum,
    cone_certificate: Option<ConeCertificate>,
    #[serde(skip)]
    cache: LinearCache,
}

#[derive(Clone, Debug, Default, PartialEq)]
struct LinearCache {
    a: Mat3,
    a_inv: Mat3,
    basis: Mat3,
    basis_inv: Mat3,
}

impl LinearCache {
    fn build(a: &IntMatrix3, spec: &Spectrum) -> Self {
        let basis = spec.basis();
        LinearCache {
            a: a.to_real(),
            a_inv: a
                .unimodular_inverse()
                .expect("unimodular linear part")
                .to_real(),
            basis,
            basis_inv: basis.inverse().expect("eigenbasis is nonsingular"),
        }
    }
}

impl AnosovMap {
    /// Builds the map and its spectrum. No cone certificate is attached.
    pub fn new(linear_part: IntMatrix3, perturbation: PerturbationField) -> Result<Self> {
        let spectrum = spectrum(&linear_part)?;
        let cache = LinearCache::build(&linear_part, &spectrum);
        Ok(AnosovMap {
            linear_part,
            perturbation,
            spectrum,
            cone_certificate: None,
            cache,
        })
    }

    /// The hyperbolic automorphism itself.
    pub fn linear(linear_part: IntMatrix3) -> Result<Self> {
        Self::new(linear_part, PerturbationField::zero())
    }

    /// Builds the map and attaches a verified cone certificate.
    pub fn certified(
        linear_part: IntMatrix3,
        perturbation: PerturbationField,
        cones: ConeRequest,
        grid_n: usize,
    ) -> Result<Self> {
        let mut map = Self::new(linear_part, perturbation)?;
        let cert = verify_cone_condition(&map, cones, grid_n)?;
        map.cone_certificate = Some(cert);
        Ok(map)
    }

    pub fn with_certificate(mut self, cert: ConeCertificate) -> Self {
        self.cone_certificate = Some(cert);
        self
    }

    pub fn linear_part(&self) -> &IntMatrix3 {
        &self.linear_part
    }

    pub fn linear_real(&self) -> &Mat3 {
        &self.cache.a
    }

    pub fn linear_inverse(&self) -> &Mat3 {
        &self.cache.a_inv
    }

    /// Columns are the eigenvectors (v_uu, v_wu, v_s).
    pub fn eigenbasis(&self) -> &Mat3 {
        &self.cache.basis
    }

    /// Rows are the dual covectors of the eigenbasis.
    pub fn eigenbasis_inverse(&self) -> &Mat3 {
        &self.cache.basis_inv
    }

    pub fn perturbation(&self) -> &PerturbationField {
        &self.perturbation
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn cone_certificate(&self) -> Option<&ConeCertificate> {
        self.cone_certificate.as_ref()
    }

    pub fn is_linear(&self) -> bool {
        self.perturbation.is_zero()
    }

    /// Lift `F(x) = A x + p(x)`.
    #[inline]
    pub fn lift_apply(&self, x: Vec3) -> Vec3 {
        self.cache.a.mul_vec(x) + self.perturbation.value(x)
    }

    /// Lift together with its Jacobian at `x`.
    #[inline]
    pub fn lift_apply_with_jacobian(&self, x: Vec3) -> (Vec3, Mat3) {
        let (p, dp) = self.perturbation.value_and_derivative(x);
        (self.cache.a.mul_vec(x) + p, self.cache.a + dp)
    }

    pub fn apply(&self, x: &TorusPoint) -> TorusPoint {
        TorusPoint::from_lift(self.lift_apply(x.rep()))
    }

    /// `A + Dp(x)` with `Dp` evaluated analytically.
    #[inline]
    pub fn jacobian_at(&self, x: Vec3) -> Mat3 {
        self.cache.a + self.perturbation.derivative(x)
    }

    pub fn jacobian(&self, x: &TorusPoint) -> Mat3 {
        self.jacobian_at(x.rep())
    }

    /// Newton inverse of the lift, seeded at `A⁻¹ y`.
    ///
    /// `tol` is relative to `max(1, |y|∞)` so large lifts stay solvable.
    pub fn lift_inverse(&self, y: Vec3, tol: f64) -> Result<Vec3> {
        let tol = tol * y.max_abs().max(1.0);
        let mut x = self.cache.a_inv.mul_vec(y);
        if self.is_linear() {
            return Ok(x);
        }
        let mut residual = f64::INFINITY;
        for _ in 0..INVERSE_MAX_ITERATIONS {
            let (fx, jac) = self.lift_apply_with_jacobian(x);
            let r = fx - y;
            residual = r.max_abs();
            if residual <= tol {
                return Ok(x);
            }
            let step = jac.solve(r).ok_or(LabError::NonConvergence {
                iterations: 0,
                residual,
            })?;
            x -= step;
            if step.max_abs() <= 1e-17 * (1.0 + x.max_abs()) {
                let r = self.lift_apply(x) - y;
                residual = r.max_abs();
                if residual <= tol {
                    return Ok(x);
                }
            }
        }
        self.lift_inverse_continued(y, tol)
            .map_err(|_| LabError::NonConvergence {
                iterations: INVERSE_MAX_ITERATIONS,
                residual,
            })
    }

    /// Fallback for [`lift_inverse`](Self::lift_inverse): damped Newton
    /// along `ε·i/16`, each stage seeded with the previous solution.
    fn lift_inverse_continued(&self, y: Vec3, tol: f64) -> Result<Vec3> {
        const STAGES: usize = 16;
        let a = self.cache.a;
        let mut x = self.cache.a_inv.mul_vec(y);
        let mut residual = f64::INFINITY;
        for stage in 1..=STAGES {
            let p = self
                .perturbation
                .with_epsilon(self.perturbation.epsilon * stage as f64 / STAGES as f64);
            let eval = |x: Vec3| {
                let (px, dp) = p.value_and_derivative(x);
                (a.mul_vec(x) + px - y, a + dp)
            };
            let stage_tol = if stage == STAGES {
                tol
            } else {
                1e-10 * y.max_abs().max(1.0)
            };
            let (mut r, mut jac) = eval(x);
            residual = r.max_abs();
            let mut iterations = 0;
            while residual > stage_tol {
                iterations += 1;
                if iterations > INVERSE_MAX_ITERATIONS {
                    return Err(LabError::NonConvergence {
                        iterations: INVERSE_MAX_ITERATIONS,
                        residual,
                    });
                }
                let step = jac.solve(r).ok_or(LabError::NonConvergence {
                    iterations,
                    residual,
                })?;
                let mut t = 1.0;
                loop {
                    let trial = x - step * t;
                    let (tr, tj) = eval(trial);
                    if tr.max_abs() < residual || t < 1e-6 {
                        x = trial;
                        r = tr;
                        jac = tj;
                        break;
                    }
                    t *= 0.5;
                }
                let next = r.max_abs();
                if next >= residual
                    && stage == STAGES
                    && residual <= 64.0 * f64::EPSILON * y.max_abs().max(1.0)
                {
                    // Stalled at rounding level.
                    break;
                }
                residual = next;
            }
        }
        let _ = residual;
        Ok(x)
    }

    pub fn inverse_apply(&self, y: &TorusPoint, tol: f64) -> Result<TorusPoint> {
        self.lift_inverse(y.rep(), tol).map(TorusPoint::from_lift)
    }

    /// The fixed point of `F` near the origin (`F(x) = x` on the lift),
    /// continued from `x = 0` at `ε = 0` in eight stages.
    pub fn fixed_point(&self) -> Result<Vec3> {
        const STAGES: usize = 8;
        let a = self.cache.a;
        let mut x = Vec3::ZERO;
        for stage in 1..=STAGES {
            let p = self
                .perturbation
                .with_epsilon(self.perturbation.epsilon * stage as f64 / STAGES as f64);
            let mut residual = f64::INFINITY;
            let mut converged = false;
            for _ in 0..INVERSE_MAX_ITERATIONS {
                let (px, dp) = p.value_and_derivative(x);
                let r = a.mul_vec(x) + px - x;
                residual = r.max_abs();
                if residual <= 1e-15 {
                    converged = true;
                    break;
                }
                let step = (a + dp - Mat3::IDENTITY)
                    .solve(r)
                    .ok_or(LabError::NonConvergence {
                        iterations: 0,
                        residual,
                    })?;
                x -= step;
            }
            if !converged && residual > 1e-13 {
                return Err(LabError::NonConvergence {
                    iterations: INVERSE_MAX_ITERATIONS,
                    residual,
                });
            }
        }
        Ok(x)
    }

    /// Time-oriented view of the map.
    pub fn forward(&self) -> Dynamics<'_> {
        Dynamics {
            map: self,
            direction: TimeDirection::Forward,
        }
    }

    /// The inverse map `f⁻¹`, for contracting foliations.
    pub fn inverse(&self) -> Dynamics<'_> {
        Dynamics {
            map: self,
            direction: TimeDirection::Backward,
        }
    }

    pub fn oriented(&self, direction: TimeDirection) -> Dynamics<'_> {
        Dynamics {
            map: self,
            direction,
        }
    }

    /// Rebuilds internal caches after deserialisation.
    pub fn rebuild(self) -> Result<Self> {
        let certificate = self.cone_certificate.clone();
        let mut map = AnosovMap::new(self.linear_part, self.perturbation)?;
        map.cone_certificate = certificate;
        Ok(map)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TimeDirection {
    Forward,
    Backward,
}

/// `f` or `f⁻¹` as a dynamical system on lifts.
#[derive(Clone, Copy, Debug)]
pub struct Dynamics<'a> {
    pub map: &'a AnosovMap,
    pub direction: TimeDirection,
}

impl<'a> Dynamics<'a> {
    pub fn is_backward(&self) -> bool {
        self.direction == TimeDirection::Backward
    }

    /// The same map with time reversed.
    pub fn reversed(&self) -> Dynamics<'a> {
        Dynamics {
            map: self.map,
            direction: match self.direction {
                TimeDirection::Forward => TimeDirection::Backward,
                TimeDirection::Backward => TimeDirection::Forward,
            },
        }
    }

    #[inline]
    pub fn step(&self, x: Vec3) -> Result<Vec3> {
        match self.direction {
            TimeDirection::Forward => Ok(self.map.lift_apply(x)),
            TimeDirection::Backward => self.map.lift_inverse(x, ORBIT_INVERSE_TOL),
        }
    }

    /// One step and the Jacobian of this step evaluated at `x`.
    #[inline]
    pub fn step_with_jacobian(&self, x: Vec3) -> Result<(Vec3, Mat3)> {
        match self.direction {
            TimeDirection::Forward => Ok(self.map.lift_apply_with_jacobian(x)),
            TimeDirection::Backward => {
                let y = self.map.lift_inverse(x, ORBIT_INVERSE_TOL)?;
                let jac = self.map.jacobian_at(y);
                let inv = jac.inverse().ok_or(LabError::NonConvergence {
                    iterations: 0,
                    residual: f64::NAN,
                })?;
                Ok((y, inv))
            }
        }
    }

    #[inline]
    pub fn jacobian(&self, x: Vec3) -> Result<Mat3> {
        match self.direction {
            TimeDirection::Forward => Ok(self.map.jacobian_at(x)),
            TimeDirection::Backward => self.step_with_jacobian(x).map(|(_, j)| j),
        }
    }

    pub fn iterate(&self, x: Vec3, n: usize) -> Result<Vec3> {
        let mut y = x;
        for _ in 0..n {
            y = self.step(y)?;
        }
        Ok(y)
    }

    /// log|α| of the tag's eigenvalue for this time direction.
    pub fn linear_log_rate(&self, tag: BundleTag) -> f64 {
        let l = self.map.spectrum().log_modulus(tag);
        match self.direction {
            TimeDirection::Forward => l,
            TimeDirection::Backward => -l,
        }
    }

    /// Whether leaves of `tag` expand in this time direction.
    pub fn expands(&self, tag: BundleTag) -> bool {
        tag.expanding_direction() == self.direction
    }

    pub fn label(&self) -> &'static str {
        match self.direction {
            TimeDirection::Forward => "f",
            TimeDirection::Backward => "f^-1",
        }
    }
}

fn planar_norm(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

struct ConeSample {
    // eigen-coordinates
    v: Vec3,
}

fn cone_samples(half_angle: f64, kind: usize) -> Vec<ConeSample> {
    // kind 0: around plane (uu,wu); 1: around line s; 2: around line uu; 3: around plane (wu,s)
    let t = half_angle.tan();
    let mut out = Vec::new();
    let n_phi = 24;
    for i in 0..n_phi {
        let full = kind == 1 || kind == 2;
        let phi = if full {
            TAU * i as f64 / n_phi as f64
        } else {
            std::f64::consts::PI * i as f64 / n_phi as f64
        };
        let (s, c) = phi.sin_cos();
        let radii: &[f64] = if full {
            &[0.0, 0.5, 1.0]
        } else {
            &[-1.0, -0.5, 0.0, 0.5, 1.0]
        };
        for &r in radii {
            let v = match kind {
                0 => Vec3::new(c, s, r * t),
                1 => Vec3::new(r * t * c, r * t * s, 1.0),
                2 => Vec3::new(1.0, r * t * c, r * t * s),
                _ => Vec3::new(r * t, c, s),
            };
            out.push(ConeSample { v });
        }
    }
    out
}

/// Checks one-step cone invariance on a `grid_n³` lattice and measures the
/// expansion, contraction and domination factors.
pub fn verify_cone_condition(
    map: &AnosovMap,
    cones: ConeRequest,
    grid_n: usize,
) -> Result<ConeCertificate> {
    if grid_n == 0 {
        return Err(LabError::InvalidConfig("grid_n must be positive".into()));
    }
    let basis = *map.eigenbasis();
    let basis_inv = *map.eigenbasis_inverse();
    let unstable = cone_samples(cones.unstable, 0);
    let stable = cone_samples(cones.stable, 1);
    let strong = cone_samples(cones.strong, 2);
    let cstable = cone_samples(cones.center_stable, 3);
    let (tu, ts, tuu, tcs) = (
        cones.unstable.tan(),
        cones.stable.tan(),
        cones.strong.tan(),
        cones.center_stable.tan(),
    );
    let slack = 1e-12;

    let mut cert = ConeCertificate {
        request: cones,
        grid_n,
        unstable_expansion: f64::INFINITY,
        stable_expansion_inverse: f64::INFINITY,
        stable_expansion_inverse_max: 0.0,
        strong_expansion_min: f64::INFINITY,
        strong_expansion_max: 0.0,
        center_stable_max: 0.0,
        gamma: 0.0,
    };

    let violation = |x: Vec3, detail: String| LabError::ConeViolation { point: x, detail };

    for i in 0..grid_n {
        for j in 0..grid_n {
            for k in 0..grid_n {
                let x = Vec3::new(
                    i as f64 / grid_n as f64,
                    j as f64 / grid_n as f64,
                    k as f64 / grid_n as f64,
                );
                let b = basis_inv.mul_mat(&map.jacobian_at(x)).mul_mat(&basis);
                let b_inv = b
                    .inverse()
                    .ok_or_else(|| violation(x, "singular Jacobian".into()))?;

                let mut u_min = f64::INFINITY;
                for s in &unstable {
                    let w = b.mul_vec(s.v);
                    let wu = planar_norm(w[0], w[1]);
                    if w[2].abs() > tu * wu + slack * w.norm() {
                        return Err(violation(
                            x,
                            "Df does not preserve the unstable cone".into(),
                        ));
                    }
                    u_min = u_min.min(w.norm() / s.v.norm());
                }
                let mut s_min = f64::INFINITY;
                let mut s_max: f64 = 0.0;
                for s in &stable {
                    let w = b_inv.mul_vec(s.v);
                    if planar_norm(w[0], w[1]) > ts * w[2].abs() + slack * w.norm() {
                        return Err(violation(
                            x,
                            "Df⁻¹ does not preserve the stable cone".into(),
                        ));
                    }
                    let r = w.norm() / s.v.norm();
                    s_min = s_min.min(r);
                    s_max = s_max.max(r);
                }
                let mut uu_min = f64::INFINITY;
                let mut uu_max: f64 = 0.0;
                for s in &strong {
                    let w = b.mul_vec(s.v);
                    if planar_norm(w[1], w[2]) > tuu * w[0].abs() + slack * w.norm() {
                        return Err(violation(
                            x,
                            "Df does not preserve the strong unstable cone".into(),
                        ));
                    }
                    let r = w.norm() / s.v.norm();
                    uu_min = uu_min.min(r);
                    uu_max = uu_max.max(r);
                }
                let mut cs_max: f64 = 0.0;
                for s in &cstable {
                    let w = b_inv.mul_vec(s.v);
                    if w[0].abs() > tcs * planar_norm(w[1], w[2]) + slack * w.norm() {
                        return Err(violation(
                            x,
                            "Df⁻¹ does not preserve the centre-stable cone".into(),
                        ));
                    }
                    cs_max = cs_max.max(b.mul_vec(s.v).norm() / s.v.norm());
                }
                if u_min <= 1.0 {
                    return Err(violation(x, format!("unstable expansion {u_min:.6} ≤ 1")));
                }
                if s_min <= 1.0 {
                    return Err(violation(x, format!("stable contraction 1/{s_min:.6} ≥ 1")));
                }
                let gamma = cs_max / uu_min;
                if gamma >= 1.0 {
                    return Err(violation(x, format!("domination ratio {gamma:.6} ≥ 1")));
                }
                cert.unstable_expansion = cert.unstable_expansion.min(u_min);
                cert.stable_expansion_inverse = cert.stable_expansion_inverse.min(s_min);
                cert.stable_expansion_inverse_max = cert.stable_expansion_inverse_max.max(s_max);
                cert.strong_expansion_min = cert.strong_expansion_min.min(uu_min);
                cert.strong_expansion_max = cert.strong_expansion_max.max(uu_max);
                cert.center_stable_max = cert.center_stable_max.max(cs_max);
                cert.gamma = cert.gamma.max(gamma);
            }
        }
    }
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shear_map(eps: f64) -> AnosovMap {
        let p = PerturbationField::new(
            vec![FourierMode::sine([0, 1, 0], Vec3::new(1.0, 0.0, 0.0))],
            eps,
        );
        AnosovMap::new(REFERENCE_MATRIX, p).unwrap()
    }

    #[test]
    fn linear_lift_is_matrix_column() {
        let map = AnosovMap::linear(REFERENCE_MATRIX).unwrap();
        assert_eq!(
            map.lift_apply(Vec3::new(1.0, 0.0, 0.0)),
            Vec3::new(2.0, 1.0, 0.0)
        );
    }

    #[test]
    fn perturbed_lift_direct_evaluation() {
        let map = shear_map(0.05);
        let y = map.lift_apply(Vec3::new(0.0, 0.25, 0.0));
        let expected = Vec3::new(0.25 + 0.05 / TAU, 0.5, 0.25);
        assert!((y - expected).max_abs() < 1e-15, "{y}");
    }

    #[test]
    fn lift_is_equivariant() {
        let map = shear_map(0.05);
        let x = Vec3::new(0.31, 0.72, 0.13);
        for n in [[1, 0, 0], [0, -2, 3], [3, 3, -1]] {
            let shifted = map.lift_apply(x + Vec3::from_ints(n));
            let an = Vec3::from_ints(REFERENCE_MATRIX.mul_int(n));
            assert!((shifted - map.lift_apply(x) - an).max_abs() < 1e-12);
        }
    }

    #[test]
    fn apply_reduces_mod_one() {
        let map = AnosovMap::linear(REFERENCE_MATRIX).unwrap();
        let y = map.apply(&TorusPoint::new(0.5, 0.5, 0.5));
        assert_eq!(y.rep(), Vec3::new(0.5, 0.0, 0.0));
        assert_eq!(map.apply(&TorusPoint::new(0.0, 0.0, 0.0)).rep(), Vec3::ZERO);
    }

    #[test]
    fn from_lift_handles_tiny_negatives() {
        let p = TorusPoint::from_lift(Vec3::new(-1e-20, 2.0, -3.5));
        for v in p.rep().0 {
            assert!((0.0..1.0).contains(&v));
        }
    }

    #[test]
    fn linear_inverse_is_exact_matrix_inverse() {
        let map = AnosovMap::linear(REFERENCE_MATRIX).unwrap();
        let y = TorusPoint::new(0.3, 0.6, 0.9);
        let x = map.inverse_apply(&y, 1e-12).unwrap();
        let direct = TorusPoint::from_lift(map.linear_inverse().mul_vec(y.rep()));
        assert_eq!(x, direct);
    }

    #[test]
    fn spectrum_of_identity_is_rejected() {
        assert!(matches!(
            spectrum(&IntMatrix3::IDENTITY),
            Err(LabError::NotPartiallyHyperbolicAnosov(_))
        ));
    }

    #[test]
    fn spectrum_rejects_complex_roots() {
        // λ³ − 3λ + 1 has three real roots, λ³ − λ − 1 has a complex pair.
        let a = IntMatrix3([[0, 1, 0], [0, 0, 1], [1, 1, 0]]);
        assert!(discriminant(a.char_poly()) < 0);
        assert!(matches!(
            spectrum(&a),
            Err(LabError::NotPartiallyHyperbolicAnosov(_))
        ));
    }

    #[test]
    fn huge_perturbation_violates_cones() {
        let map = shear_map(5.0);
        let err = verify_cone_condition(&map, ConeRequest::uniform(0.3), 8).unwrap_err();
        assert!(matches!(err, LabError::ConeViolation { .. }));
    }

    #[test]
    fn tag_round_trips_through_str() {
        for tag in BundleTag::ALL {
            assert_eq!(tag.short().parse::<BundleTag>().unwrap(), tag);
        }
        assert!("x".parse::<BundleTag>().is_err());
    }
}
