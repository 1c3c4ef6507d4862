//! Test families of perturbations: smoothly conjugate to A, exactly volume
//! preserving, and seeded generic ones.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::linalg::{IntMatrix3, Vec3};
use crate::splitting::stream_rng;
use crate::torus::{AnosovMap, ConeRequest, FourierMode, PerturbationField, REFERENCE_MATRIX};

/// `f = g∘A∘g⁻¹` with the shear `g(x) = x + e₃ (ε/2π) sin 2πx₁`.
///
/// `g⁻¹(x) = x − e₃ (ε/2π) sin 2πx₁` exactly (the shear does not touch x₁),
/// and `h = g⁻¹` solves `h∘f = A∘h` with `h(0) = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothConjugateFamily {
    pub epsilon: f64,
}

impl SmoothConjugateFamily {
    pub fn new(epsilon: f64) -> Self {
        SmoothConjugateFamily { epsilon }
    }

    /// The perturbation of `g∘A∘g⁻¹` for the reference matrix.
    ///
    /// `A(x − e₃s(x₁)) = Ax − (0,1,1)s(x₁)` and its first coordinate is
    /// `2x₁ + x₂`, so `f(x) = Ax − (0,1,1)s(x₁) + e₃ s(2x₁ + x₂)`.
    pub fn perturbation(&self) -> PerturbationField {
        PerturbationField::new(
            vec![
                FourierMode::sine([1, 0, 0], Vec3::new(0.0, -1.0, -1.0)),
                FourierMode::sine([2, 1, 0], Vec3::new(0.0, 0.0, 1.0)),
            ],
            self.epsilon,
        )
    }

    pub fn linear_part(&self) -> IntMatrix3 {
        REFERENCE_MATRIX
    }

    fn shear(&self, x: Vec3) -> Vec3 {
        Vec3::new(0.0, 0.0, self.epsilon / TAU * (TAU * x[0]).sin())
    }

    pub fn g(&self, x: Vec3) -> Vec3 {
        x + self.shear(x)
    }

    pub fn g_inverse(&self, x: Vec3) -> Vec3 {
        x - self.shear(x)
    }

    /// The known conjugacy `H = id + u`, `u(x) = −e₃ (ε/2π) sin 2πx₁`.
    pub fn conjugacy(&self, x: Vec3) -> Vec3 {
        self.g_inverse(x)
    }
}

/// One mode `a sin(2π k·x)` with `a ⊥ k` and `a ⊥ A⁻ᵀk`.
///
/// `Dp = ε cos(…) a kᵀ` has rank one, so
/// `det(A + Dp) = det A · (1 + ε cos(…) kᵀA⁻¹a) = det A` exactly; `a ⊥ k`
/// additionally makes `p` divergence free.
pub fn volume_preserving_mode(a_matrix: &IntMatrix3, k: [i64; 3]) -> FourierMode {
    let inv_t = a_matrix
        .unimodular_inverse()
        .expect("unimodular")
        .transpose()
        .to_real();
    let kv = Vec3::from_ints(k);
    let a = inv_t.mul_vec(kv).cross(kv).normalized();
    FourierMode::sine(k, a)
}

pub const MAX_REDRAWS: u64 = 16;
const CERTIFICATE_GRID: usize = 12;

/// Parameters of the seeded generic family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenericFamily {
    pub seed: u64,
    pub count: usize,
    pub epsilon: f64,
    pub max_frequency: i64,
    pub modes_per_map: usize,
    /// Rescale each member to `sup‖Dp‖ ≤ ε`; otherwise amplitudes keep
    /// their unit scale and ε is the per-mode derivative scale.
    pub normalized: bool,
}

impl Default for GenericFamily {
    fn default() -> Self {
        GenericFamily {
            seed: 2024,
            count: 10,
            epsilon: 0.08,
            max_frequency: 1,
            modes_per_map: 1,
            normalized: false,
        }
    }
}

impl GenericFamily {
    /// Random modes `a sin(2π k·x + φ)` with `a` uniform on the unit sphere
    /// and `φ` uniform; with `normalized`, rescaled so that
    /// `Σ |a||k| = 1`, i.e. `sup‖Dp‖ ≤ ε`.
    pub fn member(&self, index: usize) -> PerturbationField {
        self.draw(index, 0)
    }

    fn draw(&self, index: usize, attempt: u64) -> PerturbationField {
        let mut rng = stream_rng(self.seed, index as u64 | attempt << 32);
        let f = self.max_frequency;
        let mut modes = Vec::with_capacity(self.modes_per_map);
        while modes.len() < self.modes_per_map {
            let k = [
                rng.gen_range(-f..=f),
                rng.gen_range(-f..=f),
                rng.gen_range(-f..=f),
            ];
            if k == [0, 0, 0] {
                continue;
            }
            let a = loop {
                let v = Vec3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                );
                let n = v.norm();
                if n > 1e-3 && n <= 1.0 {
                    break v * (1.0 / n);
                }
            };
            let phase: f64 = rng.gen_range(0.0..TAU);
            modes.push(FourierMode {
                frequency: k,
                sin_amplitude: a * phase.cos(),
                cos_amplitude: a * phase.sin(),
            });
        }
        if self.normalized {
            let scale: f64 = modes
                .iter()
                .map(|m| {
                    m.sin_amplitude.norm().hypot(m.cos_amplitude.norm())
                        * Vec3::from_ints(m.frequency).norm()
                })
                .sum();
            for m in modes.iter_mut() {
                m.sin_amplitude = m.sin_amplitude * (1.0 / scale);
                m.cos_amplitude = m.cos_amplitude * (1.0 / scale);
            }
        }
        PerturbationField::new(modes, self.epsilon)
    }

    pub fn members(&self) -> Vec<PerturbationField> {
        (0..self.count).map(|i| self.member(i)).collect()
    }

    /// Member `index` with a cone certificate for the reference matrix and
    /// `sup‖Dp‖ < 1/‖A⁻¹‖`, which makes `A + Dp` invertible everywhere.
    /// Draws failing either test are replaced by the next substream, at most
    /// [`MAX_REDRAWS`] times.
    pub fn certified_member(&self, index: usize) -> Result<AnosovMap> {
        let sigma_min = 1.0
            / REFERENCE_MATRIX
                .unimodular_inverse()
                .expect("unimodular")
                .to_real()
                .op_norm();
        let mut last = None;
        for attempt in 0..MAX_REDRAWS {
            let p = self.draw(index, attempt);
            if p.derivative_sup_bound() >= sigma_min {
                last = Some(LabError::NotPartiallyHyperbolicAnosov(format!(
                    "sup‖Dp‖ bound {:.3} not below σ_min(A) = {sigma_min:.3}",
                    p.derivative_sup_bound()
                )));
                continue;
            }
            match AnosovMap::certified(
                REFERENCE_MATRIX,
                p,
                ConeRequest::default(),
                CERTIFICATE_GRID,
            ) {
                Ok(map) => return Ok(map),
                Err(e) => last = Some(e),
            }
        }
        Err(last.expect("at least one draw"))
    }

    pub fn certified_members(&self) -> Result<Vec<AnosovMap>> {
        (0..self.count).map(|i| self.certified_member(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_family_is_conjugate() {
        let fam = SmoothConjugateFamily::new(0.05);
        let map = AnosovMap::new(fam.linear_part(), fam.perturbation()).unwrap();
        for x in [Vec3::new(0.1, 0.7, 0.3), Vec3::new(0.9, 0.2, 0.55)] {
            let lhs = map.lift_apply(x);
            let rhs = fam.g(map.linear_real().mul_vec(fam.g_inverse(x)));
            assert!((lhs - rhs).max_abs() < 1e-15);
            let h = fam.conjugacy(lhs) - map.linear_real().mul_vec(fam.conjugacy(x));
            assert!(h.max_abs() < 1e-15);
        }
    }

    #[test]
    fn smooth_family_has_unit_determinant() {
        let fam = SmoothConjugateFamily::new(0.08);
        let map = AnosovMap::new(fam.linear_part(), fam.perturbation()).unwrap();
        for i in 0..50 {
            let x = Vec3::new(i as f64 * 0.137, i as f64 * 0.291, i as f64 * 0.053);
            assert!((map.jacobian_at(x).det() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn volume_mode_is_divergence_free() {
        let m = volume_preserving_mode(&REFERENCE_MATRIX, [1, 2, 0]);
        assert!(m.sin_amplitude.dot(Vec3::from_ints(m.frequency)).abs() < 1e-15);
    }

    #[test]
    fn generic_members_are_normalised_and_reproducible() {
        let fam = GenericFamily {
            normalized: true,
            ..Default::default()
        };
        let a = fam.member(3);
        assert_eq!(a, fam.member(3));
        assert!((a.derivative_sup_bound() - fam.epsilon).abs() < 1e-12);
        assert_ne!(a, fam.member(4));
    }
}
