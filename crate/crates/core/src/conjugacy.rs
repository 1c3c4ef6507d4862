//! The conjugacy `H = id + u` with `H∘F = A∘H`, its foliation images, and
//! leaf-wise regularity probes feeding the rigidity experiment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::foliation::{geometric_growth, grow_leaf, grow_leaf_with, LeafOptions, LeafTracer};
use crate::leaf_entropy::{default_eps_schedule, leaf_entropy};
use crate::linalg::{linear_fit, Mat3, Vec3};
use crate::measures::{build_measure, lebesgue_exponent, MeasureParams};
use crate::splitting::auto_depth;
use crate::torus::{torus_distance, AnosovMap, BundleTag, Dynamics, TorusPoint};

/// Hard cap on series terms per component.
pub const SERIES_TERM_CAP: usize = 10_000;

/// Smallest probe scale is this multiple of the series tolerance.
pub const RESOLUTION_FACTOR: f64 = 1e3;

/// Regularity verdict thresholds.
pub const EXPONENT_BAND: f64 = 0.05;
pub const QUOTIENT_BAND: f64 = 0.05;

/// A periodic vector field sampled on an `n³` lattice, trilinear between
/// lattice points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicField {
    pub n: usize,
    pub values: Vec<Vec3>,
}

impl PeriodicField {
    pub fn zero(n: usize) -> Self {
        PeriodicField {
            n,
            values: vec![Vec3::ZERO; n * n * n],
        }
    }

    /// Samples `f` at the lattice points `(i, j, k)/n`, in parallel.
    pub fn sample<F>(n: usize, f: F) -> Result<Self>
    where
        F: Fn(Vec3) -> Result<Vec3> + Sync,
    {
        let values = (0..n * n * n)
            .into_par_iter()
            .map(|idx| f(Self::lattice_point(n, idx)))
            .collect::<Result<_>>()?;
        Ok(PeriodicField { n, values })
    }

    fn lattice_point(n: usize, idx: usize) -> Vec3 {
        let (i, j, k) = (idx / (n * n), (idx / n) % n, idx % n);
        Vec3::new(i as f64, j as f64, k as f64) * (1.0 / n as f64)
    }

    fn at(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let n = self.n;
        self.values[((i % n) * n + j % n) * n + k % n]
    }

    pub fn eval(&self, x: Vec3) -> Vec3 {
        let n = self.n as f64;
        let r = TorusPoint::from_lift(x).rep();
        let g = [r[0] * n, r[1] * n, r[2] * n];
        let i = g.map(|c| c.floor());
        let f = [g[0] - i[0], g[1] - i[1], g[2] - i[2]];
        let i = i.map(|c| c as usize);
        let mut out = Vec3::ZERO;
        for corner in 0..8 {
            let (a, b, c) = (corner >> 2 & 1, corner >> 1 & 1, corner & 1);
            let w = (if a == 1 { f[0] } else { 1.0 - f[0] })
                * (if b == 1 { f[1] } else { 1.0 - f[1] })
                * (if c == 1 { f[2] } else { 1.0 - f[2] });
            out = out + self.at(i[0] + a, i[1] + b, i[2] + c) * w;
        }
        out
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// `H = id + u` solving `H∘F = A∘H`, evaluated exactly by the eigen-series.
///
/// `u` is cached on a lattice for cheap approximate evaluation; every
/// certified quantity (residuals, foliation images, probes) uses the series.
#[derive(Clone, Debug)]
pub struct ConjugacyMap {
    pub map: AnosovMap,
    pub tol: f64,
    /// Series terms for (uu, wu, s).
    pub terms: [usize; 3],
    pub u: PeriodicField,
    /// `sup ‖H∘F − A∘H‖` on the half-cell-offset grid of the same size.
    pub residual: f64,
    /// `|H(x_F) − 0|` on the torus, `x_F` the fixed point of F near 0.
    pub anchor_error: f64,
    /// Condition number of the eigenbasis used for the component split.
    pub basis_condition: f64,
}

fn series_terms(sup: f64, ratio: f64, tol: f64) -> Result<usize> {
    if sup == 0.0 {
        return Ok(0);
    }
    // term_k = sup · ratio^k must fall below tol · (1 − ratio).
    let mut k = 0usize;
    let mut term = sup;
    let target = tol * (1.0 - ratio);
    while term >= target {
        k += 1;
        term *= ratio;
        if k > SERIES_TERM_CAP {
            let needed = ((target / sup).ln() / ratio.ln()).ceil() as usize;
            return Err(LabError::SeriesStall {
                ratio,
                terms: needed,
                cap: SERIES_TERM_CAP,
            });
        }
    }
    Ok(k)
}

impl ConjugacyMap {
    fn prepare(map: &AnosovMap, tol: f64) -> Result<[usize; 3]> {
        let s = map.spectrum();
        let dual = map.eigenbasis_inverse();
        let p = map.perturbation();
        let mut terms = [0; 3];
        for tag in BundleTag::ALL {
            let a = s.eigenvalue(tag).abs();
            let ratio = if a > 1.0 { 1.0 / a } else { a };
            if ratio >= 1.0 {
                return Err(LabError::NotPartiallyHyperbolicAnosov(format!(
                    "eigenvalue {a} on the unit circle"
                )));
            }
            let sup = p.component_sup_bound(dual.row(tag.index()));
            // Expanding series start at k = 1, contracting ones at k = 0.
            terms[tag.index()] = series_terms(sup, ratio, tol)?;
        }
        Ok(terms)
    }

    /// `u(x)` by the truncated series; exact zero when `p ≡ 0`.
    pub fn u_exact(&self, x: Vec3) -> Result<Vec3> {
        series_u(&self.map, &self.terms, x)
    }

    /// `H(x) = x + u(x)` on lifts.
    pub fn h(&self, x: Vec3) -> Result<Vec3> {
        Ok(x + self.u_exact(x)?)
    }

    /// `H` using the lattice cache.
    pub fn h_cached(&self, x: Vec3) -> Vec3 {
        x + self.u.eval(x)
    }

    /// `sup ‖p(x) + u(Fx) − A u(x)‖` over the half-cell-offset lattice.
    pub fn functional_residual(&self, grid_n: usize) -> Result<f64> {
        let n = grid_n;
        let a = *self.map.linear_real();
        let vals: Vec<f64> = (0..n * n * n)
            .into_par_iter()
            .map(|idx| {
                let x = PeriodicField::lattice_point(n, idx)
                    + Vec3::new(0.5, 0.5, 0.5) * (1.0 / n as f64);
                let fx = self.map.lift_apply(x);
                let r = self.map.perturbation().value(x) + self.u_exact(fx)?
                    - a.mul_vec(self.u_exact(x)?);
                Ok(r.norm())
            })
            .collect::<Result<_>>()?;
        Ok(vals.into_iter().fold(0.0, f64::max))
    }

    /// `sup |u_cached − u_exact|` on the half-cell-offset lattice.
    pub fn interpolation_error(&self, grid_n: usize) -> Result<f64> {
        let n = grid_n;
        let vals: Vec<f64> = (0..n * n * n)
            .into_par_iter()
            .map(|idx| {
                let x = PeriodicField::lattice_point(n, idx)
                    + Vec3::new(0.5, 0.5, 0.5) * (1.0 / n as f64);
                Ok((self.u.eval(x) - self.u_exact(x)?).norm())
            })
            .collect::<Result<_>>()?;
        Ok(vals.into_iter().fold(0.0, f64::max))
    }
}

fn series_u(map: &AnosovMap, terms: &[usize; 3], x: Vec3) -> Result<Vec3> {
    let p = map.perturbation();
    if p.is_zero() {
        return Ok(Vec3::ZERO);
    }
    let s = map.spectrum();
    let dual = map.eigenbasis_inverse();
    let basis = map.eigenbasis();
    let mut coords = [0.0; 3];
    // Expanding components: u_i = Σ_{k≥1} α^{-k} c_i(F^{k-1} x).
    let expanding: Vec<BundleTag> = BundleTag::ALL
        .into_iter()
        .filter(|t| s.eigenvalue(*t).abs() > 1.0)
        .collect();
    let kmax = expanding
        .iter()
        .map(|t| terms[t.index()])
        .max()
        .unwrap_or(0);
    let mut y = TorusPoint::from_lift(x).rep();
    let mut weights: Vec<f64> = expanding.iter().map(|t| 1.0 / s.eigenvalue(*t)).collect();
    for k in 1..=kmax {
        let c = p.value(y);
        for (tag, w) in expanding.iter().zip(weights.iter_mut()) {
            if k <= terms[tag.index()] {
                coords[tag.index()] += *w * dual.row(tag.index()).dot(c);
            }
            *w /= s.eigenvalue(*tag);
        }
        if k < kmax {
            y = TorusPoint::from_lift(map.lift_apply(y)).rep();
        }
    }
    // Contracting components: u_i = −Σ_{k≥0} α^k c_i(F^{-k-1} x).
    for tag in BundleTag::ALL
        .into_iter()
        .filter(|t| s.eigenvalue(*t).abs() < 1.0)
    {
        let a = s.eigenvalue(tag);
        let row = dual.row(tag.index());
        let mut y = TorusPoint::from_lift(x).rep();
        let mut w = 1.0;
        let mut acc = 0.0;
        for _ in 0..terms[tag.index()] {
            y = TorusPoint::from_lift(map.lift_inverse(y, 1e-14)?).rep();
            acc -= w * row.dot(p.value(y));
            w *= a;
        }
        coords[tag.index()] = acc;
    }
    Ok(basis.mul_vec(Vec3::new(coords[0], coords[1], coords[2])))
}

fn condition_number(m: &Mat3) -> f64 {
    match m.inverse() {
        Some(inv) => m.op_norm() * inv.op_norm(),
        None => f64::INFINITY,
    }
}

/// Assembles the series, caches `u` on an `n³` lattice and certifies the
/// functional equation on the offset lattice.
pub fn solve_conjugacy(map: &AnosovMap, grid_n: usize, tol: f64) -> Result<ConjugacyMap> {
    if grid_n == 0 || !(tol > 0.0) {
        return Err(LabError::InvalidConfig(
            "grid_n and tol must be positive".into(),
        ));
    }
    let terms = ConjugacyMap::prepare(map, tol)?;
    let u = if map.perturbation().is_zero() {
        PeriodicField::zero(grid_n)
    } else {
        PeriodicField::sample(grid_n, |x| series_u(map, &terms, x))?
    };
    let mut h = ConjugacyMap {
        map: map.clone(),
        tol,
        terms,
        u,
        residual: 0.0,
        anchor_error: 0.0,
        basis_condition: condition_number(map.eigenbasis()),
    };
    h.residual = h.functional_residual(grid_n)?;
    let xf = map.fixed_point()?;
    h.anchor_error = torus_distance(h.h(xf)?, Vec3::ZERO);
    Ok(h)
}

/// Series-only conjugacy (no lattice cache, no residual sweep).
pub fn conjugacy_series(map: &AnosovMap, tol: f64) -> Result<ConjugacyMap> {
    let terms = ConjugacyMap::prepare(map, tol)?;
    Ok(ConjugacyMap {
        map: map.clone(),
        tol,
        terms,
        u: PeriodicField::zero(1),
        residual: f64::NAN,
        anchor_error: f64::NAN,
        basis_condition: condition_number(map.eigenbasis()),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemiconjugacyReport {
    /// `sup d(h(f x), A h(x))` over the lattice.
    pub residual: f64,
    /// Image pairs closer than 1e-9 whose preimages are farther than 1e-6.
    pub injectivity_violations: usize,
    pub grid_n: usize,
}

/// Checks `h∘f = A∘h` on the `n³` lattice with the series evaluation.
pub fn verify_semiconjugacy(
    h: &ConjugacyMap,
    map: &AnosovMap,
    grid_n: usize,
) -> Result<SemiconjugacyReport> {
    let n = grid_n;
    let a = *map.linear_real();
    let rows: Vec<(Vec3, Vec3, f64)> = (0..n * n * n)
        .into_par_iter()
        .map(|idx| {
            let x = PeriodicField::lattice_point(n, idx);
            let hx = h.h(x)?;
            let hfx = h.h(map.lift_apply(x))?;
            Ok((
                x,
                TorusPoint::from_lift(hx).rep(),
                torus_distance(hfx, a.mul_vec(hx)),
            ))
        })
        .collect::<Result<_>>()?;
    let residual = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    // Sweep images sorted by first coordinate (with wrap-around copies).
    let mut imgs: Vec<(Vec3, Vec3)> = rows.iter().map(|r| (r.1, r.0)).collect();
    let wrapped: Vec<(Vec3, Vec3)> = imgs
        .iter()
        .filter(|(y, _)| y[0] < 1e-9)
        .map(|(y, x)| (*y + Vec3::new(1.0, 0.0, 0.0), *x))
        .collect();
    imgs.extend(wrapped);
    imgs.sort_by(|a, b| a.0[0].total_cmp(&b.0[0]));
    let mut violations = 0;
    for i in 0..imgs.len() {
        for j in i + 1..imgs.len() {
            if imgs[j].0[0] - imgs[i].0[0] > 1e-9 {
                break;
            }
            if torus_distance(imgs[i].0, imgs[j].0) < 1e-9
                && torus_distance(imgs[i].1, imgs[j].1) > 1e-6
            {
                violations += 1;
            }
        }
    }
    Ok(SemiconjugacyReport {
        residual,
        injectivity_violations: violations,
        grid_n,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoliationImageReport {
    pub tag: BundleTag,
    /// Max distance of `H(v) − H(x)` from `span(v_tag)`.
    pub line_deviation: f64,
    /// Max distance of `H(v) − H(x)` from the invariant plane of A holding
    /// the leaf: `E^uu ⊕ E^wu` for unstable tags, `E^wu ⊕ E^s` for `s`.
    pub plane_deviation: f64,
    /// Eigen-coordinate of `H(v) − H(x)` is strictly monotone along the leaf.
    pub monotone: bool,
    pub vertices: usize,
}

/// Maps the leaf ball `W_r(x)` through `H` and measures how far the image
/// is from the corresponding linear leaf.
pub fn foliation_image_check(
    h: &ConjugacyMap,
    tag: BundleTag,
    x: &TorusPoint,
    r: f64,
) -> Result<FoliationImageReport> {
    let map = &h.map;
    let seg = grow_leaf(map, x, tag, r, (r / 100.0).min(5e-3))?;
    let hx = h.h(x.rep())?;
    let images: Vec<Vec3> = seg
        .vertices
        .par_iter()
        .map(|v| Ok(h.h(*v)? - hx))
        .collect::<Result<_>>()?;
    let s = map.spectrum();
    let v = s.eigenvector(tag).normalized();
    let normal = match tag {
        BundleTag::Stable => s.v_wu.cross(s.v_s),
        _ => s.v_uu.cross(s.v_wu),
    }
    .normalized();
    let dual = map.eigenbasis_inverse().row(tag.index());
    let mut line: f64 = 0.0;
    let mut plane: f64 = 0.0;
    for d in &images {
        line = line.max((*d - v * v.dot(*d)).norm());
        plane = plane.max(normal.dot(*d).abs());
    }
    let coords: Vec<f64> = images.iter().map(|d| dual.dot(*d)).collect();
    let increasing = coords.windows(2).all(|w| w[1] > w[0]);
    let decreasing = coords.windows(2).all(|w| w[1] < w[0]);
    Ok(FoliationImageReport {
        tag,
        line_deviation: line,
        plane_deviation: plane,
        monotone: increasing || decreasing,
        vertices: images.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    C1Consistent,
    SubLipschitz,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::C1Consistent => "C1-consistent",
            Verdict::SubLipschitz => "sub-Lipschitz",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub tag: BundleTag,
    pub base: TorusPoint,
    pub scales: Vec<f64>,
    /// Mean of `|⟨v*, H(x ± d) − H(x)⟩| / d` over both sides.
    pub quotients: Vec<f64>,
    /// Fitted log–log slope.
    pub slope: f64,
    /// `min(slope, 1/slope)`: the worse of h and h⁻¹ along the leaf.
    pub exponent: f64,
    pub exponent_std_error: f64,
    /// `|q(finest)/q(second finest) − 1|` within the fit window.
    pub quotient_drift: f64,
    pub fit_window: (usize, usize),
    /// Spread of `⟨v*, H⟩` under 1e-13 moves of the base point.
    pub noise_floor: f64,
    pub verdict: Verdict,
}

/// Probe scales must exceed the evaluation noise by this factor.
pub const NOISE_FACTOR: f64 = 100.0;

/// Rounding in forward orbits grows at the strong rate while the weak
/// series only damps at the weak rate, so `H` carries evaluation noise well
/// above the series tolerance. Measured as the largest change of
/// `⟨v*, H⟩` over eight 1e-13 displacements of `x`.
pub fn evaluation_noise(h: &ConjugacyMap, tag: BundleTag, x: &TorusPoint) -> Result<f64> {
    let dual = h.map.eigenbasis_inverse().row(tag.index());
    let x0 = x.rep();
    let h0 = dual.dot(h.h(x0)?);
    let mut noise: f64 = 0.0;
    for corner in 0..8 {
        let s = |bit: usize| {
            if corner >> bit & 1 == 1 {
                1e-13
            } else {
                -1e-13
            }
        };
        let d = Vec3::new(s(0), s(1), s(2));
        noise = noise.max((dual.dot(h.h(x0 + d)?) - h0).abs());
    }
    Ok(noise)
}

/// Smallest admissible probe scale at `x` and the measured noise floor.
pub fn probe_resolution(h: &ConjugacyMap, tag: BundleTag, x: &TorusPoint) -> Result<(f64, f64)> {
    let noise = evaluation_noise(h, tag, x)?;
    Ok(((RESOLUTION_FACTOR * h.tol).max(NOISE_FACTOR * noise), noise))
}

/// Dyadic ladder `2^{-k}` for `k` in `lo..=hi`.
pub fn dyadic_ladder(lo: u32, hi: u32) -> Vec<f64> {
    (lo..=hi).map(|k| 0.5f64.powi(k as i32)).collect()
}

/// Samples `H` at leaf points at arclength `±d` from `x` for each scale,
/// fits the log–log slope of the eigen-coordinate displacement against `d`
/// and applies the verdict rule: C1-consistent iff the exponent is within
/// 0.05 of 1 and the quotient drifts less than 5% between the two finest
/// fitted scales; sub-Lipschitz iff the exponent is below 0.95.
pub fn leafwise_regularity_probe(
    h: &ConjugacyMap,
    tag: BundleTag,
    x: &TorusPoint,
    scale_ladder: &[f64],
) -> Result<RegularityReport> {
    let (resolution, noise_floor) = probe_resolution(h, tag, x)?;
    let mut scales = scale_ladder.to_vec();
    scales.sort_by(|a, b| b.total_cmp(a));
    if scales.len() < 4 {
        return Err(LabError::InvalidConfig(
            "regularity probe needs at least 4 scales".into(),
        ));
    }
    if let Some(&d) = scales.iter().find(|d| **d < resolution) {
        return Err(LabError::ScaleBelowResolution {
            scale: d,
            resolution,
        });
    }
    let map = &h.map;
    let tracer = LeafTracer::new(map, tag, auto_depth(map, tag, 1e-13));
    let dual = map.eigenbasis_inverse().row(tag.index());
    let x0 = x.rep();
    let hx = h.h(x0)?;
    let quotients: Vec<f64> = scales
        .par_iter()
        .map(|&d| {
            let step = (d / 8.0).min(1e-3);
            let (yp, _) = tracer.walk(x0, d, step)?;
            let (ym, _) = tracer.walk(x0, -d, step)?;
            let dp = dual.dot(h.h(yp)? - hx).abs();
            let dm = dual.dot(h.h(ym)? - hx).abs();
            Ok(0.5 * (dp + dm) / d)
        })
        .collect::<Result<_>>()?;
    let lo = 1;
    let mut hi = scales.len() - 1;
    if scales[hi] < 10.0 * resolution {
        hi -= 1;
    }
    let xs: Vec<f64> = scales[lo..=hi].iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = scales[lo..=hi]
        .iter()
        .zip(&quotients[lo..=hi])
        .map(|(d, q)| (q * d).ln())
        .collect();
    let fit = linear_fit(&xs, &ys);
    let slope = fit.slope;
    let exponent = slope.min(1.0 / slope);
    let exponent_std_error = if slope > 1.0 {
        fit.slope_stderr / (slope * slope)
    } else {
        fit.slope_stderr
    };
    let quotient_drift = (quotients[hi] / quotients[hi - 1] - 1.0).abs();
    let verdict = if (exponent - 1.0).abs() <= EXPONENT_BAND && quotient_drift <= QUOTIENT_BAND {
        Verdict::C1Consistent
    } else if exponent < 1.0 - EXPONENT_BAND {
        Verdict::SubLipschitz
    } else {
        Verdict::Inconclusive
    };
    Ok(RegularityReport {
        tag,
        base: *x,
        scales,
        quotients,
        slope,
        exponent,
        exponent_std_error,
        quotient_drift,
        fit_window: (lo, hi),
        noise_floor,
        verdict,
    })
}

/// A periodic point of `F` with its leaf multiplier.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicProbe {
    pub point: TorusPoint,
    pub period: usize,
    /// `‖DF^n(x) e(x)‖` for the unit leaf tangent `e`.
    pub multiplier: f64,
    /// `min(r, 1/r)` for `r = n log|α| / log multiplier`: the leaf-wise
    /// Hölder exponent of `H` at the point.
    pub predicted_exponent: f64,
}

fn mat_power(a: &Mat3, n: usize) -> Mat3 {
    (1..n).fold(*a, |m, _| m.mul_mat(a))
}

/// Periodic points of period dividing `n`, continued from the linear ones.
///
/// The linear points solve `(Aⁿ − I)x = m` for integer `m`; each is
/// followed by Newton on `Fⁿ(x) − x − m` from the same lift.
pub fn periodic_points(map: &AnosovMap, n: usize) -> Result<Vec<Vec3>> {
    let an = mat_power(map.linear_real(), n);
    let m = an - Mat3::IDENTITY;
    let inv = m
        .inverse()
        .ok_or_else(|| LabError::NotPartiallyHyperbolicAnosov("Aⁿ − I singular".into()))?;
    let mut lo = [0i64; 3];
    let mut hi = [0i64; 3];
    for i in 0..3 {
        let row = m.row(i);
        let (neg, pos): (f64, f64) = (0..3).fold((0.0, 0.0), |(a, b), j| {
            (a + row[j].min(0.0), b + row[j].max(0.0))
        });
        lo[i] = neg.floor() as i64;
        hi[i] = pos.ceil() as i64;
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut linear = Vec::new();
    for a in lo[0]..=hi[0] {
        for b in lo[1]..=hi[1] {
            for c in lo[2]..=hi[2] {
                let mv = Vec3::new(a as f64, b as f64, c as f64);
                let x = inv.mul_vec(mv);
                if (0..3).any(|i| x[i] < -1e-12 || x[i] >= 1.0 - 1e-12) {
                    continue;
                }
                let key = [0, 1, 2].map(|i| (x[i] * 1e9).round() as i64);
                if seen.insert(key) {
                    linear.push((x, mv));
                }
            }
        }
    }
    // Continue in ε so Newton starts inside its basin; retry finer once.
    let staged = |count: usize| -> Result<Vec<AnosovMap>> {
        (1..=count)
            .map(|i| {
                let eps = map.perturbation().epsilon * i as f64 / count as f64;
                AnosovMap::new(*map.linear_part(), map.perturbation().with_epsilon(eps))
            })
            .collect()
    };
    let coarse = staged(8)?;
    let fine = staged(128)?;
    linear
        .into_par_iter()
        .map(|(x0, mv)| {
            coarse
                .iter()
                .try_fold(x0, |x, stage| periodic_newton(stage, x, mv, n))
                .or_else(|_| {
                    fine.iter()
                        .try_fold(x0, |x, stage| periodic_newton(stage, x, mv, n))
                })
        })
        .collect()
}

fn periodic_newton(map: &AnosovMap, x0: Vec3, mv: Vec3, n: usize) -> Result<Vec3> {
    let mut x = x0;
    let mut residual = f64::INFINITY;
    for _ in 0..crate::torus::INVERSE_MAX_ITERATIONS {
        let mut y = x;
        let mut jac = Mat3::IDENTITY;
        for _ in 0..n {
            let (fy, j) = map.lift_apply_with_jacobian(y);
            jac = j.mul_mat(&jac);
            y = fy;
        }
        let r = y - x - mv;
        residual = r.max_abs();
        if residual <= 1e-14 {
            return Ok(x);
        }
        let step = (jac - Mat3::IDENTITY)
            .solve(r)
            .ok_or(LabError::NonConvergence {
                iterations: 0,
                residual,
            })?;
        x -= step;
    }
    if residual <= 1e-12 {
        Ok(x)
    } else {
        Err(LabError::NonConvergence {
            iterations: crate::torus::INVERSE_MAX_ITERATIONS,
            residual,
        })
    }
}

/// Leaf multiplier and predicted exponent at a period-`n` point.
pub fn periodic_probe(map: &AnosovMap, tag: BundleTag, x: Vec3, n: usize) -> Result<PeriodicProbe> {
    let tracer = LeafTracer::new(map, tag, auto_depth(map, tag, 1e-13));
    let e = tracer.tangent(x)?;
    let mut v = e;
    let mut y = x;
    for _ in 0..n {
        let (fy, j) = map.lift_apply_with_jacobian(y);
        v = j.mul_vec(v);
        y = fy;
    }
    let multiplier = v.norm();
    let r = n as f64 * map.spectrum().log_modulus(tag) / multiplier.ln();
    Ok(PeriodicProbe {
        point: TorusPoint::from_lift(x),
        period: n,
        multiplier,
        predicted_exponent: r.min(1.0 / r),
    })
}

/// The periodic point of period at most `max_period` whose leaf multiplier
/// departs most from the linear one; the fixed point wins ties.
pub fn select_probe_base(
    map: &AnosovMap,
    tag: BundleTag,
    max_period: usize,
) -> Result<PeriodicProbe> {
    let mut best = periodic_probe(map, tag, map.fixed_point()?, 1)?;
    for n in 2..=max_period {
        for x in periodic_points(map, n)? {
            let p = periodic_probe(map, tag, x, n)?;
            if p.predicted_exponent < best.predicted_exponent - 1e-12 {
                best = p;
            }
        }
    }
    Ok(best)
}

/// Per-tag growth and entropy knobs for the rigidity experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TagSchedule {
    pub growth_n_max: usize,
    pub entropy_n_max: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidityParams {
    pub measure: MeasureParams,
    pub leaf_radius: f64,
    pub max_step: f64,
    /// Indexed by `BundleTag::index()`.
    pub schedules: [TagSchedule; 3],
    pub series_tol: f64,
    pub ladder: Vec<f64>,
    /// Periodic points up to this period are screened for the probe base.
    pub probe_max_period: usize,
    /// Gaps count as equality when `|gap| ≤ max(3σ, gap_floor)`.
    pub gap_floor: f64,
    /// Skip the leaf-entropy estimate (the slowest stage).
    pub skip_entropy: bool,
}

impl Default for RigidityParams {
    fn default() -> Self {
        RigidityParams {
            measure: MeasureParams::default(),
            leaf_radius: 0.1,
            max_step: 2.5e-4,
            schedules: [
                TagSchedule {
                    growth_n_max: 7,
                    entropy_n_max: 7,
                },
                TagSchedule {
                    growth_n_max: 12,
                    entropy_n_max: 12,
                },
                TagSchedule {
                    growth_n_max: 5,
                    entropy_n_max: 5,
                },
            ],
            series_tol: 1e-13,
            ladder: dyadic_ladder(3, 16),
            probe_max_period: 3,
            gap_floor: 1e-3,
            skip_entropy: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TagReport {
    pub tag: BundleTag,
    pub lambda: f64,
    pub lambda_std_error: f64,
    pub lambda_depth_bias: f64,
    pub chi: f64,
    pub chi_std_error: f64,
    pub entropy: Option<f64>,
    /// `χ − λ`.
    pub gap: f64,
    /// `sqrt(σ_λ² + bias_λ² + σ_χ²)`.
    pub sigma: f64,
    /// `gap > 3σ`.
    pub strict_gap: bool,
    /// `|gap| ≤ max(3σ, gap_floor)`.
    pub within_tolerance: bool,
    pub probe: PeriodicProbe,
    pub regularity: RegularityReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidityReport {
    pub base_point: TorusPoint,
    pub tags: Vec<TagReport>,
    /// Every gap within tolerance.
    pub hypothesis_satisfied: bool,
    /// Hypothesis ⇒ all C1-consistent, and strict gap ⇒ sub-Lipschitz.
    pub consistent: bool,
    pub gap_floor: f64,
    pub exponent_band: f64,
    pub quotient_band: f64,
    pub seed: u64,
    pub conjugacy_terms: [usize; 3],
}

impl RigidityReport {
    pub fn tag(&self, tag: BundleTag) -> &TagReport {
        self.tags
            .iter()
            .find(|t| t.tag == tag)
            .expect("all tags reported")
    }
}

fn expanding_dynamics(map: &AnosovMap, tag: BundleTag) -> Dynamics<'_> {
    map.oriented(tag.expanding_direction())
}

/// λ, χ, h_W and the regularity of h for every tag, probed at the fixed
/// point of F (where the leaf-wise power law is exact), plus the dichotomy
/// verdict.
pub fn rigidity_experiment(map: &AnosovMap, params: &RigidityParams) -> Result<RigidityReport> {
    let h = conjugacy_series(map, params.series_tol)?;
    let base = TorusPoint::from_lift(map.fixed_point()?);
    let opts = LeafOptions::with_max_step(params.max_step);
    let mut tags = Vec::with_capacity(3);
    for tag in BundleTag::ALL {
        let dynamics = expanding_dynamics(map, tag);
        let sched = params.schedules[tag.index()];
        let mu = build_measure(&dynamics, tag, &params.measure)?;
        let lambda = lebesgue_exponent(&dynamics, tag, &mu)?;
        let growth = geometric_growth(
            dynamics,
            tag,
            &base,
            params.leaf_radius,
            sched.growth_n_max,
            None,
            &opts,
        )?;
        let entropy = if params.skip_entropy {
            None
        } else {
            let k = grow_leaf_with(map, &base, tag, params.leaf_radius, &opts)?;
            let est = leaf_entropy(
                dynamics,
                &k,
                &default_eps_schedule(params.leaf_radius),
                sched.entropy_n_max,
                &opts,
            )?;
            Some(est.h)
        };
        let gap = growth.chi - lambda.value;
        let sigma =
            (lambda.std_error.powi(2) + lambda.depth_bias.powi(2) + growth.slope_stderr.powi(2))
                .sqrt();
        let probe = select_probe_base(map, tag, params.probe_max_period)?;
        let (resolution, _) = probe_resolution(&h, tag, &probe.point)?;
        let ladder: Vec<f64> = params
            .ladder
            .iter()
            .copied()
            .filter(|d| *d >= resolution)
            .collect();
        let regularity = leafwise_regularity_probe(&h, tag, &probe.point, &ladder)?;
        tags.push(TagReport {
            tag,
            lambda: lambda.value,
            lambda_std_error: lambda.std_error,
            lambda_depth_bias: lambda.depth_bias,
            chi: growth.chi,
            chi_std_error: growth.slope_stderr,
            entropy,
            gap,
            sigma,
            strict_gap: gap > 3.0 * sigma,
            within_tolerance: gap.abs() <= (3.0 * sigma).max(params.gap_floor),
            probe,
            regularity,
        });
    }
    let hypothesis_satisfied = tags.iter().all(|t| t.within_tolerance);
    let consistent = (!hypothesis_satisfied
        || tags
            .iter()
            .all(|t| t.regularity.verdict == Verdict::C1Consistent))
        && tags
            .iter()
            .filter(|t| t.strict_gap)
            .all(|t| t.regularity.verdict == Verdict::SubLipschitz);
    Ok(RigidityReport {
        base_point: base,
        tags,
        hypothesis_satisfied,
        consistent,
        gap_floor: params.gap_floor,
        exponent_band: EXPONENT_BAND,
        quotient_band: QUOTIENT_BAND,
        seed: params.measure.seed,
        conjugacy_terms: h.terms,
    })
}
