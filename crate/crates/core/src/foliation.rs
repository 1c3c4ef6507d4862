//! One-dimensional invariant leaves as adaptive polylines: growth by
//! integrating the bundle field, iteration with refinement, and the
//! geometric growth rate χ.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::linalg::{linear_fit, Vec3};
use crate::splitting::{auto_depth, bundle_direction};
use crate::torus::{AnosovMap, BundleTag, Dynamics, TimeDirection, TorusPoint};

pub const DEFAULT_MAX_STEP: f64 = 1e-3;
pub const DEFAULT_VERTEX_BUDGET: usize = 20_000_000;

/// Vertex pushes are parallelised above this many vertices.
const PAR_THRESHOLD: usize = 4096;

/// Generation-0 curve sampled finely, with unit tangents, parametrised by
/// signed arclength from the base point.
#[derive(Clone, Debug)]
pub struct SeedCurve {
    start: f64,
    spacing: f64,
    points: Vec<Vec3>,
    tangents: Vec<Vec3>,
}

impl SeedCurve {
    pub fn param_range(&self) -> (f64, f64) {
        (
            self.start,
            self.start + self.spacing * (self.points.len() - 1) as f64,
        )
    }

    /// Cubic Hermite interpolation in the arclength parameter.
    pub fn eval(&self, t: f64) -> Vec3 {
        let n = self.points.len();
        if n == 1 {
            return self.points[0];
        }
        let u = (t - self.start) / self.spacing;
        let i = (u.floor().max(0.0) as usize).min(n - 2);
        let s = u - i as f64;
        let (p0, p1) = (self.points[i], self.points[i + 1]);
        let (m0, m1) = (
            self.tangents[i] * self.spacing,
            self.tangents[i + 1] * self.spacing,
        );
        let s2 = s * s;
        let s3 = s2 * s;
        p0 * (2.0 * s3 - 3.0 * s2 + 1.0)
            + m0 * (s3 - 2.0 * s2 + s)
            + p1 * (-2.0 * s3 + 3.0 * s2)
            + m1 * (s3 - s2)
    }
}

/// A leaf ball `f^g(W_r(x))` stored as a polyline of lift points.
#[derive(Clone, Debug)]
pub struct LeafSegment {
    pub tag: BundleTag,
    pub base: TorusPoint,
    /// Lift points, unreduced so consecutive vertices are close in R³.
    pub vertices: Vec<Vec3>,
    /// Seed-curve parameter of every vertex, strictly increasing.
    pub params: Vec<f64>,
    /// Cumulative polyline length, starting at 0.
    pub arclengths: Vec<f64>,
    pub generation: usize,
    /// Time direction of the iterations applied so far.
    pub time: TimeDirection,
    seed: Option<Arc<SeedCurve>>,
}

fn cumulative(vertices: &[Vec3]) -> Vec<f64> {
    let mut out = Vec::with_capacity(vertices.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in vertices.windows(2) {
        acc += (w[1] - w[0]).norm();
        out.push(acc);
    }
    out
}

impl LeafSegment {
    /// A bare polyline. It cannot be refined under iteration.
    pub fn from_vertices(tag: BundleTag, vertices: Vec<Vec3>) -> Self {
        let params = cumulative(&vertices);
        LeafSegment {
            tag,
            base: TorusPoint::from_lift(vertices[0]),
            arclengths: params.clone(),
            params,
            vertices,
            generation: 0,
            time: tag.expanding_direction(),
            seed: None,
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn seed(&self) -> Option<&SeedCurve> {
        self.seed.as_deref()
    }

    pub fn total_length(&self) -> f64 {
        *self.arclengths.last().unwrap_or(&0.0)
    }

    pub fn max_gap(&self) -> f64 {
        self.arclengths
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Arclength position of seed parameter `t`, linear between vertices.
    pub fn arclength_at(&self, t: f64) -> f64 {
        let k = self.params.partition_point(|&p| p <= t);
        if k == 0 {
            return 0.0;
        }
        if k >= self.params.len() {
            return self.total_length();
        }
        let (t0, t1) = (self.params[k - 1], self.params[k]);
        let (a0, a1) = (self.arclengths[k - 1], self.arclengths[k]);
        a0 + (a1 - a0) * (t - t0) / (t1 - t0)
    }

    /// Vertex position of seed parameter `t`, linear between vertices.
    pub fn point_at(&self, t: f64) -> Vec3 {
        let k = self.params.partition_point(|&p| p <= t);
        if k == 0 {
            return self.vertices[0];
        }
        if k >= self.params.len() {
            return *self.vertices.last().unwrap();
        }
        let (t0, t1) = (self.params[k - 1], self.params[k]);
        let w = (t - t0) / (t1 - t0);
        self.vertices[k - 1] * (1.0 - w) + self.vertices[k] * w
    }

    /// Restriction to the seed-parameter window `[a, b]` (generation 0 only).
    pub fn restrict(&self, a: f64, b: f64) -> Result<LeafSegment> {
        let seed = self
            .seed
            .clone()
            .ok_or_else(|| LabError::InvalidConfig("segment has no seed curve".into()))?;
        if self.generation != 0 || !(a < b) {
            return Err(LabError::InvalidConfig(
                "restrict needs a generation-0 segment and a < b".into(),
            ));
        }
        let (lo, hi) = seed.param_range();
        let (a, b) = (a.max(lo), b.min(hi));
        let mut params = vec![a];
        params.extend(self.params.iter().copied().filter(|&t| t > a && t < b));
        params.push(b);
        let vertices: Vec<Vec3> = params.iter().map(|&t| seed.eval(t)).collect();
        Ok(LeafSegment {
            tag: self.tag,
            base: TorusPoint::from_lift(seed.eval(0.5 * (a + b))),
            arclengths: cumulative(&vertices),
            vertices,
            params,
            generation: 0,
            time: self.time,
            seed: Some(seed),
        })
    }
}

/// Sum of Euclidean gaps between consecutive lift vertices.
pub fn leaf_length(seg: &LeafSegment) -> f64 {
    seg.vertices.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Numerical knobs shared by leaf constructions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafOptions {
    pub max_step: f64,
    pub vertex_budget: usize,
    /// Cocycle depth for direction-field evaluations; `None` picks it from
    /// the spectral gaps.
    pub depth: Option<usize>,
}

impl Default for LeafOptions {
    fn default() -> Self {
        LeafOptions {
            max_step: DEFAULT_MAX_STEP,
            vertex_budget: DEFAULT_VERTEX_BUDGET,
            depth: None,
        }
    }
}

impl LeafOptions {
    pub fn with_max_step(max_step: f64) -> Self {
        LeafOptions {
            max_step,
            ..Default::default()
        }
    }

    fn depth_for(&self, map: &AnosovMap, tag: BundleTag) -> usize {
        self.depth.unwrap_or_else(|| auto_depth(map, tag, 1e-13))
    }
}

struct Field<'a> {
    map: &'a AnosovMap,
    tag: BundleTag,
    depth: usize,
}

impl Field<'_> {
    /// Unit field value oriented against `prev`; errors on a jump > π/4.
    fn oriented(&self, x: Vec3, prev: Vec3) -> Result<Vec3> {
        let e = bundle_direction(self.map, self.tag, x, self.depth)?;
        let e = if e.dot(prev) < 0.0 { -e } else { e };
        let angle = e.angle(prev);
        if angle > std::f64::consts::FRAC_PI_4 {
            return Err(LabError::OrientationJump { point: x, angle });
        }
        Ok(e)
    }
}

/// One RK4 step of length `h` (signed) from `x` with current tangent `e`.
fn rk4_step(field: &Field, x: Vec3, e: Vec3, h: f64) -> Result<(Vec3, Vec3)> {
    let k1 = e;
    let k2 = field.oriented(x + k1 * (0.5 * h), k1)?;
    let k3 = field.oriented(x + k2 * (0.5 * h), k2)?;
    let k4 = field.oriented(x + k3 * h, k3)?;
    let x1 = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    let e1 = field.oriented(x1, k4)?;
    Ok((x1, e1))
}

/// RK4 integration of the unit field for arclength `r`, `m` steps.
fn integrate(
    field: &Field,
    x0: Vec3,
    e0: Vec3,
    r: f64,
    m: usize,
) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    let h = r / m as f64;
    let mut pts = Vec::with_capacity(m + 1);
    let mut tans = Vec::with_capacity(m + 1);
    let mut x = x0;
    let mut e = e0;
    pts.push(x);
    tans.push(e);
    for _ in 0..m {
        let (x1, e1) = rk4_step(field, x, e, h)?;
        x = x1;
        e = e1;
        pts.push(x);
        tans.push(e);
    }
    Ok((pts, tans))
}

/// Walks one leaf at unit speed along the oriented bundle field.
///
/// Tangents are kept in the orientation of [`bundle_direction`], so a
/// negative step length walks backwards along the same orientation.
pub struct LeafTracer<'a> {
    field: Field<'a>,
}

impl<'a> LeafTracer<'a> {
    pub fn new(map: &'a AnosovMap, tag: BundleTag, depth: usize) -> Self {
        LeafTracer {
            field: Field { map, tag, depth },
        }
    }

    pub fn depth(&self) -> usize {
        self.field.depth
    }

    /// The field at `x` in its canonical orientation.
    pub fn tangent(&self, x: Vec3) -> Result<Vec3> {
        bundle_direction(self.field.map, self.field.tag, x, self.field.depth)
    }

    /// The field at `x` oriented like `prev`.
    pub fn tangent_near(&self, x: Vec3, prev: Vec3) -> Result<Vec3> {
        self.field.oriented(x, prev)
    }

    /// One RK4 step of signed length `h`; `e` is the oriented tangent at `x`.
    pub fn step(&self, x: Vec3, e: Vec3, h: f64) -> Result<(Vec3, Vec3)> {
        rk4_step(&self.field, x, e, h)
    }

    /// Endpoint and tangent after signed arclength `sigma`.
    pub fn walk(&self, x: Vec3, sigma: f64, max_step: f64) -> Result<(Vec3, Vec3)> {
        let mut e = self.tangent(x)?;
        let m = (sigma.abs() / max_step).ceil() as usize;
        let mut x = x;
        if m == 0 {
            return Ok((x, e));
        }
        let h = sigma / m as f64;
        for _ in 0..m {
            let (x1, e1) = self.step(x, e, h)?;
            x = x1;
            e = e1;
        }
        Ok((x, e))
    }
}

/// The leaf ball `W_r(x)` of the tag's foliation, arclength `r` each side.
pub fn grow_leaf(
    map: &AnosovMap,
    x: &TorusPoint,
    tag: BundleTag,
    r: f64,
    max_step: f64,
) -> Result<LeafSegment> {
    grow_leaf_with(map, x, tag, r, &LeafOptions::with_max_step(max_step))
}

pub fn grow_leaf_with(
    map: &AnosovMap,
    x: &TorusPoint,
    tag: BundleTag,
    r: f64,
    opts: &LeafOptions,
) -> Result<LeafSegment> {
    if !(r > 0.0 && opts.max_step > 0.0) {
        return Err(LabError::InvalidConfig(
            "leaf radius and max_step must be positive".into(),
        ));
    }
    let field = Field {
        map,
        tag,
        depth: opts.depth_for(map, tag),
    };
    let x0 = x.rep();
    let e0 = bundle_direction(map, tag, x0, field.depth)?;
    let m = (r / opts.max_step).ceil().max(1.0) as usize;
    let (fwd, fwd_t) = integrate(&field, x0, e0, r, m)?;
    let (bwd, bwd_t) = integrate(&field, x0, -e0, r, m)?;
    let mut points = Vec::with_capacity(2 * m + 1);
    let mut tangents = Vec::with_capacity(2 * m + 1);
    for k in (1..=m).rev() {
        points.push(bwd[k]);
        tangents.push(-bwd_t[k]);
    }
    points.extend_from_slice(&fwd);
    tangents.extend_from_slice(&fwd_t);
    let h = r / m as f64;
    let params: Vec<f64> = (0..points.len()).map(|i| -r + h * i as f64).collect();
    let seed = Arc::new(SeedCurve {
        start: -r,
        spacing: h,
        points: points.clone(),
        tangents,
    });
    Ok(LeafSegment {
        tag,
        base: *x,
        arclengths: cumulative(&points),
        vertices: points,
        params,
        generation: 0,
        time: tag.expanding_direction(),
        seed: Some(seed),
    })
}

fn push_all(dynamics: &Dynamics, pts: &[Vec3]) -> Result<Vec<Vec3>> {
    if pts.len() >= PAR_THRESHOLD {
        pts.par_iter().map(|&p| dynamics.step(p)).collect()
    } else {
        pts.iter().map(|&p| dynamics.step(p)).collect()
    }
}

fn refine_gap(
    dynamics: &Dynamics,
    seed: &SeedCurve,
    generation: usize,
    max_step: f64,
    a: (f64, Vec3),
    b: (f64, Vec3),
    out: &mut Vec<(f64, Vec3)>,
) -> Result<()> {
    if (b.1 - a.1).norm() <= max_step || b.0 - a.0 <= 1e-15 * (1.0 + a.0.abs()) {
        return Ok(());
    }
    let t = 0.5 * (a.0 + b.0);
    let p = dynamics.iterate(seed.eval(t), generation)?;
    refine_gap(dynamics, seed, generation, max_step, a, (t, p), out)?;
    out.push((t, p));
    refine_gap(dynamics, seed, generation, max_step, (t, p), b, out)
}

fn step_once(
    dynamics: &Dynamics,
    seg: &LeafSegment,
    max_step: f64,
    budget: usize,
) -> Result<LeafSegment> {
    let pushed = push_all(dynamics, &seg.vertices)?;
    let generation = seg.generation + 1;
    let seed = seg.seed.as_deref();
    let work = |i: usize| -> Result<Vec<(f64, Vec3)>> {
        let mut extra = Vec::new();
        if let Some(seed) = seed {
            refine_gap(
                dynamics,
                seed,
                generation,
                max_step,
                (seg.params[i], pushed[i]),
                (seg.params[i + 1], pushed[i + 1]),
                &mut extra,
            )?;
        }
        Ok(extra)
    };
    let gaps = pushed.len().saturating_sub(1);
    let inserts: Vec<Vec<(f64, Vec3)>> = if gaps >= PAR_THRESHOLD {
        (0..gaps).into_par_iter().map(work).collect::<Result<_>>()?
    } else {
        (0..gaps).map(work).collect::<Result<_>>()?
    };
    let total = pushed.len() + inserts.iter().map(Vec::len).sum::<usize>();
    if total > budget {
        return Err(LabError::VertexBudgetExceeded { budget });
    }
    let mut vertices = Vec::with_capacity(total);
    let mut params = Vec::with_capacity(total);
    for i in 0..pushed.len() {
        vertices.push(pushed[i]);
        params.push(seg.params[i]);
        if i < gaps {
            for &(t, p) in &inserts[i] {
                params.push(t);
                vertices.push(p);
            }
        }
    }
    Ok(LeafSegment {
        tag: seg.tag,
        base: seg.base,
        arclengths: cumulative(&vertices),
        vertices,
        params,
        generation,
        time: dynamics.direction,
        seed: seg.seed.clone(),
    })
}

/// Applies `dynamics` `n` times with refinement after every step.
pub fn iterate_leaf(
    dynamics: Dynamics,
    seg: &LeafSegment,
    n: usize,
    max_step: f64,
    budget: usize,
) -> Result<LeafSegment> {
    if seg.generation > 0 && seg.time != dynamics.direction {
        return Err(LabError::InvalidConfig(
            "cannot mix forward and backward iterations on one segment".into(),
        ));
    }
    let mut current = seg.clone();
    for _ in 0..n {
        current = step_once(&dynamics, &current, max_step, budget)?;
    }
    Ok(current)
}

/// Iterates one step at a time and hands every generation to `visit`.
pub fn iterate_leaf_visit(
    dynamics: Dynamics,
    seg: &LeafSegment,
    n: usize,
    max_step: f64,
    budget: usize,
    mut visit: impl FnMut(&LeafSegment) -> Result<()>,
) -> Result<LeafSegment> {
    let mut current = seg.clone();
    visit(&current)?;
    for _ in 0..n {
        current = iterate_leaf(dynamics, &current, 1, max_step, budget)?;
        visit(&current)?;
    }
    Ok(current)
}

/// Maximal angle between polyline chords and the bundle field at their
/// midpoints, checking every `stride`-th chord.
pub fn tangent_audit(
    map: &AnosovMap,
    seg: &LeafSegment,
    depth: usize,
    stride: usize,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in (0..seg.len() - 1).step_by(stride.max(1)) {
        let chord = seg.vertices[i + 1] - seg.vertices[i];
        let mid = (seg.vertices[i + 1] + seg.vertices[i]) * 0.5;
        let e = bundle_direction(map, seg.tag, mid, depth)?;
        worst = worst.max(chord.line_angle(e));
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthEstimate {
    pub tag: BundleTag,
    pub chi: f64,
    /// (n, log length) for n = 0..=n_max.
    pub per_n: Vec<(usize, f64)>,
    /// Inclusive range of n used for the fit.
    pub window: (usize, usize),
    pub fit_residual: f64,
    pub slope_stderr: f64,
}

impl GrowthEstimate {
    pub const CSV_HEADER: &'static str = "map_id,tag,x1,x2,x3,r,n,log_length";

    pub fn csv_rows(&self, map_id: &str, x: &TorusPoint, r: f64) -> Vec<String> {
        let p = x.rep();
        let mut rows: Vec<String> = self
            .per_n
            .iter()
            .map(|(n, l)| {
                format!(
                    "{map_id},{},{},{},{},{r},{n},{l}",
                    self.tag, p[0], p[1], p[2]
                )
            })
            .collect();
        rows.push(format!(
            "{map_id},{},{},{},{},{r},chi={},residual={}",
            self.tag, p[0], p[1], p[2], self.chi, self.fit_residual
        ));
        rows
    }
}

/// Slope of log length over a trailing window of generations.
///
/// `window` is the number of trailing generations fitted (at least 2);
/// `None` uses the last half of `1..=n_max`.
pub fn geometric_growth(
    dynamics: Dynamics,
    tag: BundleTag,
    x: &TorusPoint,
    r: f64,
    n_max: usize,
    window: Option<usize>,
    opts: &LeafOptions,
) -> Result<GrowthEstimate> {
    if n_max < 2 {
        return Err(LabError::InvalidConfig("n_max must be at least 2".into()));
    }
    let seg = grow_leaf_with(dynamics.map, x, tag, r, opts)?;
    let mut per_n = Vec::with_capacity(n_max + 1);
    iterate_leaf_visit(
        dynamics,
        &seg,
        n_max,
        opts.max_step,
        opts.vertex_budget,
        |s| {
            per_n.push((s.generation, leaf_length(s).ln()));
            Ok(())
        },
    )?;
    growth_from_series(tag, per_n, window)
}

/// Fits χ to an existing (n, log length) series.
pub fn growth_from_series(
    tag: BundleTag,
    per_n: Vec<(usize, f64)>,
    window: Option<usize>,
) -> Result<GrowthEstimate> {
    let n_max = per_n.last().map(|p| p.0).unwrap_or(0);
    let w = window.unwrap_or((n_max + 1) / 2).clamp(2, n_max.max(2));
    let lo = n_max + 1 - w;
    let (xs, ys): (Vec<f64>, Vec<f64>) = per_n
        .iter()
        .filter(|(n, _)| *n >= lo)
        .map(|(n, l)| (*n as f64, *l))
        .unzip();
    if xs.len() < 2 {
        return Err(LabError::InvalidConfig(
            "growth window has fewer than 2 points".into(),
        ));
    }
    let fit = linear_fit(&xs, &ys);
    Ok(GrowthEstimate {
        tag,
        chi: fit.slope,
        per_n,
        window: (lo, n_max),
        fit_residual: fit.rms_residual,
        slope_stderr: fit.slope_stderr,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSup {
    pub sup: f64,
    pub per_point: Vec<f64>,
    pub spread: f64,
}

/// Maximum of χ over sample points, with the per-point values.
pub fn chi_sup(
    dynamics: Dynamics,
    tag: BundleTag,
    sample_points: &[TorusPoint],
    r: f64,
    n_max: usize,
    opts: &LeafOptions,
) -> Result<ChiSup> {
    let per_point: Vec<f64> = sample_points
        .par_iter()
        .map(|x| geometric_growth(dynamics, tag, x, r, n_max, None, opts).map(|g| g.chi))
        .collect::<Result<_>>()?;
    let sup = per_point.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let inf = per_point.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ChiSup {
        sup,
        spread: sup - inf,
        per_point,
    })
}

/// Largest `n` keeping `2r·e^{χn}/max_step` under the vertex budget.
pub fn feasible_n_max(chi: f64, r: f64, max_step: f64, budget: usize) -> usize {
    let n = ((budget as f64 * max_step).ln() - (2.0 * r).ln()) / chi;
    n.floor().max(1.0) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{ConeRequest, FourierMode, PerturbationField, REFERENCE_MATRIX};

    fn perturbed() -> AnosovMap {
        let p = PerturbationField::new(
            vec![
                FourierMode::sine([1, 0, 0], Vec3::new(0.3, -0.5, 0.8)),
                FourierMode::sine([0, 1, 1], Vec3::new(-0.4, 0.1, 0.3)),
            ],
            0.05,
        );
        AnosovMap::certified(REFERENCE_MATRIX, p, ConeRequest::default(), 8).unwrap()
    }

    #[test]
    fn two_vertex_length() {
        let seg = LeafSegment::from_vertices(
            BundleTag::StrongUnstable,
            vec![Vec3::ZERO, Vec3::new(0.5, 0.0, 0.0)],
        );
        assert_eq!(leaf_length(&seg), 0.5);
    }

    #[test]
    fn linear_uu_leaf_is_straight() {
        let map = AnosovMap::linear(REFERENCE_MATRIX).unwrap();
        let x = TorusPoint::new(0.1, 0.2, 0.3);
        let seg = grow_leaf(&map, &x, BundleTag::StrongUnstable, 0.5, 1e-2).unwrap();
        assert!((leaf_length(&seg) - 1.0).abs() < 1e-9);
        let v = map.spectrum().v_uu;
        for p in &seg.vertices {
            let d = *p - x.rep();
            assert!((d - v * d.dot(v)).norm() < 1e-12);
        }
    }

    #[test]
    fn linear_stretch_per_step() {
        let map = AnosovMap::linear(REFERENCE_MATRIX).unwrap();
        let x = TorusPoint::new(0.1, 0.2, 0.3);
        let s = map.spectrum().clone();
        let seg = grow_leaf(&map, &x, BundleTag::StrongUnstable, 0.05, 1e-2).unwrap();
        let img = iterate_leaf(map.forward(), &seg, 2, 1e-2, 1_000_000).unwrap();
        let ratio = leaf_length(&img) / leaf_length(&seg);
        assert!((ratio - s.alpha_uu.powi(2)).abs() < 1e-9);
        assert!(img.max_gap() <= 1e-2);

        let seg = grow_leaf(&map, &x, BundleTag::Stable, 0.05, 1e-2).unwrap();
        let img = iterate_leaf(map.forward(), &seg, 1, 1e-2, 1_000_000).unwrap();
        assert!((leaf_length(&img) / leaf_length(&seg) - s.alpha_s).abs() < 1e-9);
    }

    #[test]
    fn mixing_directions_is_rejected() {
        let map = AnosovMap::linear(REFERENCE_MATRIX).unwrap();
        let seg = grow_leaf(
            &map,
            &TorusPoint::new(0.1, 0.2, 0.3),
            BundleTag::Stable,
            0.05,
            1e-2,
        )
        .unwrap();
        let img = iterate_leaf(map.inverse(), &seg, 1, 1e-2, 1000).unwrap();
        assert!(iterate_leaf(map.forward(), &img, 1, 1e-2, 1000).is_err());
    }

    #[test]
    fn budget_is_enforced() {
        let map = AnosovMap::linear(REFERENCE_MATRIX).unwrap();
        let seg = grow_leaf(
            &map,
            &TorusPoint::new(0.1, 0.2, 0.3),
            BundleTag::StrongUnstable,
            0.1,
            1e-2,
        )
        .unwrap();
        let err = iterate_leaf(map.forward(), &seg, 6, 1e-2, 500).unwrap_err();
        assert_eq!(err, LabError::VertexBudgetExceeded { budget: 500 });
    }

    #[test]
    fn perturbed_leaf_follows_field() {
        let map = perturbed();
        let x = TorusPoint::new(0.37, 0.61, 0.05);
        for tag in BundleTag::ALL {
            let seg = grow_leaf(&map, &x, tag, 0.2, 1e-3).unwrap();
            assert!((leaf_length(&seg) - 0.4).abs() < 4e-3);
            assert!(tangent_audit(&map, &seg, 40, 13).unwrap() < 1e-4, "{tag}");
        }
    }

    #[test]
    fn semigroup_in_length() {
        let map = perturbed();
        let x = TorusPoint::new(0.37, 0.61, 0.05);
        let seg = grow_leaf(&map, &x, BundleTag::StrongUnstable, 0.05, 1e-3).unwrap();
        let a = iterate_leaf(map.forward(), &seg, 3, 1e-3, 10_000_000).unwrap();
        let b = iterate_leaf(
            map.forward(),
            &iterate_leaf(map.forward(), &seg, 1, 1e-3, 10_000_000).unwrap(),
            2,
            1e-3,
            10_000_000,
        )
        .unwrap();
        assert!((leaf_length(&a) - leaf_length(&b)).abs() < 1e-6);
    }

    #[test]
    fn linear_growth_rate() {
        let map = AnosovMap::linear(REFERENCE_MATRIX).unwrap();
        let x = TorusPoint::new(0.3, 0.3, 0.3);
        let g = geometric_growth(
            map.forward(),
            BundleTag::WeakUnstable,
            &x,
            0.1,
            8,
            None,
            &LeafOptions::with_max_step(1e-2),
        )
        .unwrap();
        assert!((g.chi - map.spectrum().lambda_wu).abs() < 1e-9);
        assert!(g.fit_residual < 1e-9);
    }
}
