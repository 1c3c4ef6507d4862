//! Invariant measures absolutely continuous along a one-dimensional
//! expanding foliation: the Δ cocycle, leaf densities, Lebesgue exponents,
//! and the conditional-entropy estimator built on leaf-interval partitions.
//!
//! Everything is phrased for a [`Dynamics`] `g` under which the tag expands:
//! `uu` and `wu` use `f`, `s` uses `f⁻¹`. "Backward" below means `g⁻¹`.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::foliation::{geometric_growth, grow_leaf_with, LeafOptions, LeafSegment, LeafTracer};
use crate::linalg::{mean_and_stderr, CompensatedSum, Vec3};
use crate::splitting::{auto_depth, bundle_direction, stream_rng, Sampler};
use crate::torus::{AnosovMap, BundleTag, Dynamics, TimeDirection, TorusPoint};

/// Default certified tail tolerance for the Δ product (in log).
pub const DEFAULT_DELTA_TOL: f64 = 1e-10;

/// Backward generations intersected in a partition element.
pub const DEFAULT_REFINEMENT_DEPTH: usize = 8;

/// Bundle depth for measure-side evaluations.
fn depth_for(map: &AnosovMap, tag: BundleTag) -> usize {
    auto_depth(map, tag, 1e-13)
}

fn check_expanding(dynamics: &Dynamics, tag: BundleTag) -> Result<()> {
    if !dynamics.expands(tag) {
        return Err(LabError::InvalidConfig(format!(
            "tag {tag} does not expand under {}",
            dynamics.label()
        )));
    }
    Ok(())
}

/// `‖Dg(x) e(x)‖` for the dynamics `g`.
pub fn leaf_jacobian_dyn(dynamics: &Dynamics, tag: BundleTag, x: Vec3) -> Result<f64> {
    let map = dynamics.map;
    let e = bundle_direction(map, tag, x, depth_for(map, tag))?;
    Ok(dynamics.jacobian(x)?.mul_vec(e).norm())
}

/// `‖Df(x) e_tag(x)‖`.
pub fn leaf_jacobian(map: &AnosovMap, x: &TorusPoint, tag: BundleTag) -> Result<f64> {
    leaf_jacobian_dyn(&map.forward(), tag, x.rep())
}

/// `‖D(g⁻¹)(w) e‖`, the backward leaf Jacobian at `w` with leaf tangent `e`.
fn backward_jacobian(back: &Dynamics, w: Vec3, e: Vec3) -> Result<(Vec3, f64, Vec3)> {
    let (pre, jac) = back.step_with_jacobian(w)?;
    let v = jac.mul_vec(e);
    Ok((pre, v.norm(), v))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaOptions {
    /// Certified bound on the neglected log-mass.
    pub tol: f64,
    /// RK4 step along leaves.
    pub max_step: f64,
    pub max_terms: usize,
    /// Multiplier on the measured Lipschitz constant of log J along leaves.
    pub safety: f64,
}

impl Default for DeltaOptions {
    fn default() -> Self {
        DeltaOptions {
            tol: DEFAULT_DELTA_TOL,
            max_step: 2e-3,
            max_terms: 400,
            safety: 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaValue {
    pub value: f64,
    pub log_value: f64,
    pub terms: usize,
    /// Certified bound on the truncated tail of `log Δ`.
    pub tail_bound: f64,
    /// Measured `max |log J(t_j) − log J(y_j)| / σ_j`.
    pub lipschitz: f64,
}

/// Backward Jacobian at the end of a leaf walk, plus
/// the Simpson integral of the backward Jacobian along it.
struct Walk {
    jb_end: f64,
    pushed: f64,
}

fn walk_and_integrate(
    tracer: &LeafTracer,
    back: &Dynamics,
    start: Vec3,
    e_start: Vec3,
    jb_start: f64,
    sigma: f64,
    max_step: f64,
) -> Result<Walk> {
    let m = (sigma.abs() / max_step).ceil().max(1.0) as usize;
    let h = sigma / m as f64;
    let (mut x, mut e, mut jb) = (start, e_start, jb_start);
    let mut integral = CompensatedSum::new();
    for _ in 0..m {
        let (x1, e1) = tracer.step(x, e, h)?;
        // Hermite midpoint of the step, then its own field value.
        let mid = (x + x1) * 0.5 + (e - e1) * (h / 8.0);
        let e_mid = tracer.tangent_near(mid, e)?;
        let (_, jb_mid, _) = backward_jacobian(back, mid, e_mid)?;
        let (_, jb1, _) = backward_jacobian(back, x1, e1)?;
        integral.add(h / 6.0 * (jb + 4.0 * jb_mid + jb1));
        x = x1;
        e = e1;
        jb = jb1;
    }
    Ok(Walk {
        jb_end: jb,
        pushed: integral.value(),
    })
}

/// `Δ(y, t) = Π_{j≥1} J(g^{-j} y) / J(g^{-j} t)` for `t` at signed arclength
/// `sigma` from `y` along the leaf (in the orientation of the bundle field).
pub fn delta_product(
    dynamics: &Dynamics,
    tag: BundleTag,
    y: Vec3,
    sigma: f64,
    opts: &DeltaOptions,
) -> Result<DeltaValue> {
    delta_anchored(dynamics, tag, y, 0.0, sigma, opts)
}

/// `Δ(a, b)` for the leaf points at signed arclengths `sa`, `sb` from
/// `anchor`.
///
/// Backward orbits of `a` and `b` are never iterated directly: rounding
/// errors along the stable direction grow like `|α_s|⁻ʲ` and move them to
/// different leaves, and Δ along a weak leaf is only weakly Hölder
/// transversally. Only the anchor is iterated. At step `j` the points are
/// rebuilt on the leaf through `z_j = g^{-j}(anchor)` at the transported
/// arclengths `σ_{j+1} = ∫_0^{σ_j} J⁻(γ_j)` (Simpson along the RK4 walk),
/// where `J⁻` is the backward leaf Jacobian. Terms are
/// `log J⁻(b_j) − log J⁻(a_j)` and the sum stops once
/// `safety · C |σᵇ_{j+1} − σᵃ_{j+1}| / (1 − 1/λ) < tol`, with `C` the largest
/// measured ratio `|term_j| / |σᵇ_j − σᵃ_j|` and `λ` the certified minimal
/// expansion. Pairs evaluated from one anchor therefore satisfy the cocycle
/// identity up to the truncation tolerance.
pub fn delta_anchored(
    dynamics: &Dynamics,
    tag: BundleTag,
    anchor: Vec3,
    sa: f64,
    sb: f64,
    opts: &DeltaOptions,
) -> Result<DeltaValue> {
    check_expanding(dynamics, tag)?;
    if sa == sb {
        return Ok(DeltaValue {
            value: 1.0,
            log_value: 0.0,
            terms: 0,
            tail_bound: 0.0,
            lipschitz: 0.0,
        });
    }
    let map = dynamics.map;
    let cert = map
        .cone_certificate()
        .ok_or_else(|| LabError::TailBoundUnavailable("map carries no cone certificate".into()))?;
    let lambda = cert.expansion_bounds(tag).0;
    if !(lambda > 1.0) {
        return Err(LabError::TailBoundUnavailable(format!(
            "certified expansion {lambda} is not above 1"
        )));
    }
    let tracer = LeafTracer::new(map, tag, depth_for(map, tag));
    let back = dynamics.reversed();

    let mut z = anchor;
    let mut ez = tracer.tangent(z)?;
    let (mut sig_a, mut sig_b) = (sa, sb);
    let mut sum = CompensatedSum::new();
    let mut lipschitz: f64 = 0.0;
    for j in 0..opts.max_terms {
        let (z_pre, jb_z, vz) = backward_jacobian(&back, z, ez)?;
        let end = |sig: f64| -> Result<(f64, f64)> {
            if sig == 0.0 {
                return Ok((jb_z, 0.0));
            }
            let w = walk_and_integrate(&tracer, &back, z, ez, jb_z, sig, opts.max_step)?;
            Ok((w.jb_end, w.pushed))
        };
        let (jb_a, push_a) = end(sig_a)?;
        let (jb_b, push_b) = end(sig_b)?;
        let term = jb_b.ln() - jb_a.ln();
        sum.add(term);
        lipschitz = lipschitz.max(term.abs() / (sig_b - sig_a).abs());
        // Orientation of the pushed tangent relative to the field at z_pre.
        let e_pre = tracer.tangent(z_pre)?;
        let flip = if vz.dot(e_pre) < 0.0 { -1.0 } else { 1.0 };
        let (next_a, next_b) = (flip * push_a, flip * push_b);
        let bound = opts.safety * lipschitz * (next_b - next_a).abs() / (1.0 - 1.0 / lambda);
        if !bound.is_finite() {
            return Err(LabError::TailBoundUnavailable(format!(
                "non-finite Hölder data at term {j}"
            )));
        }
        if bound < opts.tol {
            let log_value = sum.value();
            return Ok(DeltaValue {
                value: log_value.exp(),
                log_value,
                terms: j + 1,
                tail_bound: bound,
                lipschitz,
            });
        }
        z = TorusPoint::from_lift(z_pre).rep();
        ez = e_pre;
        sig_a = next_a;
        sig_b = next_b;
    }
    Err(LabError::TailBoundUnavailable(format!(
        "tail not certified after {} terms",
        opts.max_terms
    )))
}

/// `Δ(y, t)` for two seed parameters of a generation-0 leaf segment,
/// anchored at the segment's base point.
pub fn delta_between(
    dynamics: &Dynamics,
    seg: &LeafSegment,
    y_param: f64,
    t_param: f64,
    opts: &DeltaOptions,
) -> Result<DeltaValue> {
    let seed = seg.seed().ok_or_else(|| {
        LabError::InvalidConfig("Δ needs a generation-0 segment with a seed curve".into())
    })?;
    delta_anchored(dynamics, seg.tag, seed.eval(0.0), y_param, t_param, opts)
}

/// Conditional density on one leaf segment.
#[derive(Clone, Debug)]
pub struct LeafDensity {
    pub segment: LeafSegment,
    /// Value at each vertex.
    pub rho: Vec<f64>,
    /// `L = ∫ Δ(t, base) dVol(t)`.
    pub normalizer: f64,
    pub base_param: f64,
}

fn trapezoid(arclengths: &[f64], values: &[f64]) -> f64 {
    let mut s = CompensatedSum::new();
    for i in 1..values.len() {
        s.add(0.5 * (values[i] + values[i - 1]) * (arclengths[i] - arclengths[i - 1]));
    }
    s.value()
}

impl LeafDensity {
    pub const CSV_HEADER: &'static str = "arclength,rho";

    /// Trapezoid integral of rho over the segment.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.segment.arclengths, &self.rho)
    }

    /// Linear interpolation of rho at a seed parameter.
    pub fn rho_at(&self, t: f64) -> f64 {
        let p = &self.segment.params;
        let k = p.partition_point(|&q| q <= t).clamp(1, p.len() - 1);
        let w = (t - p[k - 1]) / (p[k] - p[k - 1]);
        self.rho[k - 1] * (1.0 - w) + self.rho[k] * w
    }

    pub fn csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for (s, r) in self.segment.arclengths.iter().zip(&self.rho) {
            let _ = writeln!(out, "{s},{r}");
        }
        out
    }
}

/// `rho(v) = Δ(v, base) / L` on the vertices of `seg`, base given as a seed
/// parameter (the leaf's own base point is parameter 0).
pub fn leaf_density(
    dynamics: &Dynamics,
    seg: &LeafSegment,
    base_param: f64,
    opts: &DeltaOptions,
) -> Result<LeafDensity> {
    let seed = seg.seed().ok_or_else(|| {
        LabError::InvalidConfig("density needs a generation-0 segment with a seed curve".into())
    })?;
    if seg.generation != 0 {
        return Err(LabError::InvalidConfig(
            "density needs a generation-0 segment".into(),
        ));
    }
    let deltas: Vec<f64> = seg
        .params
        .par_iter()
        .map(|&t| {
            delta_anchored(dynamics, seg.tag, seed.eval(0.0), t, base_param, opts).map(|d| d.value)
        })
        .collect::<Result<_>>()?;
    let normalizer = trapezoid(&seg.arclengths, &deltas);
    let rho = deltas.iter().map(|d| d / normalizer).collect();
    Ok(LeafDensity {
        segment: seg.clone(),
        rho,
        normalizer,
        base_param,
    })
}

/// How an empirical measure was built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureConstruction {
    pub pool_leaves: usize,
    pub leaf_radius: f64,
    pub depth: usize,
    pub sample_count: usize,
    pub seed: u64,
    pub time: TimeDirection,
}

#[derive(Clone, Debug)]
pub struct EmpiricalMeasure {
    pub tag: BundleTag,
    pub samples: Vec<(TorusPoint, f64)>,
    /// Number of pushes applied to each sample.
    pub depths: Vec<usize>,
    /// Point on the seed leaf each sample was pushed from.
    pub origins: Vec<Vec3>,
    pub construction: MeasureConstruction,
}

impl EmpiricalMeasure {
    pub const CSV_HEADER: &'static str = "x1,x2,x3,weight";

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.1)
            .collect::<CompensatedSum>()
            .value()
    }

    /// `|∫ e^{2πi k·x} dμ|`.
    pub fn fourier_moment(&self, k: [i64; 3]) -> f64 {
        let kv = Vec3::from_ints(k);
        let (mut re, mut im) = (CompensatedSum::new(), CompensatedSum::new());
        for (p, w) in &self.samples {
            let ph = TAU * kv.dot(p.rep());
            re.add(w * ph.cos());
            im.add(w * ph.sin());
        }
        re.value().hypot(im.value())
    }

    /// Number of cubes of side `1/divisions` that received no sample.
    pub fn empty_cubes(&self, divisions: usize) -> usize {
        let mut hit = vec![false; divisions.pow(3)];
        for (p, _) in &self.samples {
            let x = p.rep();
            let idx = |c: f64| ((c * divisions as f64) as usize).min(divisions - 1);
            hit[(idx(x[0]) * divisions + idx(x[1])) * divisions + idx(x[2])] = true;
        }
        hit.iter().filter(|h| !**h).count()
    }

    pub fn sampler(&self) -> Sampler {
        Sampler::Empirical {
            points: self.samples.iter().map(|s| s.0.rep()).collect(),
            weights: self.samples.iter().map(|s| s.1).collect(),
            label: format!("{}-measure", self.tag),
        }
    }

    pub fn csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for (p, w) in &self.samples {
            let x = p.rep();
            let _ = writeln!(out, "{},{},{},{w}", x[0], x[1], x[2]);
        }
        out
    }
}

/// Frequencies of the invariance-defect battery: `k ∈ {1,2,3}³`.
pub fn test_battery() -> Vec<[i64; 3]> {
    let mut out = Vec::with_capacity(27);
    for a in 1..=3 {
        for b in 1..=3 {
            for c in 1..=3 {
                out.push([a, b, c]);
            }
        }
    }
    out
}

fn battery_defect(pairs: &[(Vec3, Vec3)], weights: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for k in test_battery() {
        let kv = Vec3::from_ints(k);
        let (mut re, mut im) = (CompensatedSum::new(), CompensatedSum::new());
        for ((x, y), w) in pairs.iter().zip(weights) {
            let (a, b) = (TAU * kv.dot(*y), TAU * kv.dot(*x));
            re.add(w * (a.cos() - b.cos()));
            im.add(w * (a.sin() - b.sin()));
        }
        worst = worst.max(re.value().hypot(im.value()));
    }
    worst
}

/// Invariance defect of the construction, `max_k |∫ φ_k d(g_*μ) − ∫ φ_k dμ|`
/// over the battery.
///
/// For `μ = (1/N) Σ_{k<N} g^k_* ν` the difference telescopes to
/// `(∫ φ∘g^N dν − ∫ φ dν) / N`, which is evaluated on the stored origins.
/// This avoids the `1/√samples` floor of comparing the finite sample with its
/// own image, see [`sample_invariance_defect`].
pub fn invariance_defect(dynamics: &Dynamics, mu: &EmpiricalMeasure) -> Result<f64> {
    let n = mu.construction.depth;
    let pairs: Vec<(Vec3, Vec3)> = mu
        .origins
        .par_iter()
        .map(|&o| {
            let mut x = o;
            for _ in 0..n {
                x = TorusPoint::from_lift(dynamics.step(x)?).rep();
            }
            Ok((o, x))
        })
        .collect::<Result<_>>()?;
    let weights: Vec<f64> = mu.samples.iter().map(|s| s.1).collect();
    Ok(battery_defect(&pairs, &weights) / n as f64)
}

/// `max_k |Σ w (φ_k(g x) − φ_k(x))|` over the stored samples themselves.
pub fn sample_invariance_defect(dynamics: &Dynamics, mu: &EmpiricalMeasure) -> Result<f64> {
    let pairs: Vec<(Vec3, Vec3)> = mu
        .samples
        .par_iter()
        .map(|(p, _)| Ok((p.rep(), dynamics.step(p.rep())?)))
        .collect::<Result<_>>()?;
    let weights: Vec<f64> = mu.samples.iter().map(|s| s.1).collect();
    Ok(battery_defect(&pairs, &weights))
}

/// Random leaf balls of the tag with uniformly drawn centres.
pub fn seed_pool(
    map: &AnosovMap,
    tag: BundleTag,
    count: usize,
    radius: f64,
    max_step: f64,
    seed: u64,
) -> Result<Vec<LeafSegment>> {
    let opts = LeafOptions::with_max_step(max_step);
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed ^ 0x5eed_1eaf, i as u64);
            let x = TorusPoint::new(rng.gen(), rng.gen(), rng.gen());
            grow_leaf_with(map, &x, tag, radius, &opts)
        })
        .collect()
}

/// Averaged push-forwards of leaf Lebesgue measure on a pool of seed leaves.
///
/// Each sample picks a leaf with probability proportional to its length, a
/// uniform parameter on it, and a uniform push count in `{0..N−1}`.
pub fn ac_invariant_measure(
    dynamics: &Dynamics,
    tag: BundleTag,
    pool: &[LeafSegment],
    depth: usize,
    samples: usize,
    seed: u64,
) -> Result<EmpiricalMeasure> {
    check_expanding(dynamics, tag)?;
    if pool.is_empty() || depth == 0 || samples == 0 {
        return Err(LabError::InvalidConfig(
            "measure needs seed leaves, depth ≥ 1 and samples ≥ 1".into(),
        ));
    }
    let mut cumulative = Vec::with_capacity(pool.len());
    let mut acc = 0.0;
    for seg in pool {
        if seg.seed().is_none() || seg.tag != tag {
            return Err(LabError::InvalidConfig(
                "seed leaves must be generation-0 segments of the measure's tag".into(),
            ));
        }
        acc += seg.total_length();
        cumulative.push(acc);
    }
    let drawn: Vec<(TorusPoint, usize, Vec3)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let u: f64 = rng.gen::<f64>() * acc;
            let leaf = cumulative.partition_point(|&c| c <= u).min(pool.len() - 1);
            let curve = pool[leaf].seed().expect("checked above");
            let (a, b) = curve.param_range();
            let origin = curve.eval(rng.gen_range(a..=b));
            let k = rng.gen_range(0..depth);
            let mut x = origin;
            for _ in 0..k {
                x = TorusPoint::from_lift(dynamics.step(x)?).rep();
            }
            Ok((TorusPoint::from_lift(x), k, origin))
        })
        .collect::<Result<_>>()?;
    let w = 1.0 / samples as f64;
    let mut points = Vec::with_capacity(samples);
    let mut depths = Vec::with_capacity(samples);
    let mut origins = Vec::with_capacity(samples);
    for (p, k, o) in drawn {
        points.push(p);
        depths.push(k);
        origins.push(o);
    }
    Ok(EmpiricalMeasure {
        tag,
        samples: points.into_iter().map(|p| (p, w)).collect(),
        depths,
        origins,
        construction: MeasureConstruction {
            pool_leaves: pool.len(),
            leaf_radius: pool[0].total_length() / 2.0,
            depth,
            sample_count: samples,
            seed,
            time: if dynamics.is_backward() {
                TimeDirection::Backward
            } else {
                TimeDirection::Forward
            },
        },
    })
}

/// Knobs for building a measure from scratch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureParams {
    pub pool_leaves: usize,
    pub leaf_radius: f64,
    pub leaf_step: f64,
    pub depth: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for MeasureParams {
    fn default() -> Self {
        MeasureParams {
            pool_leaves: 64,
            leaf_radius: 0.05,
            leaf_step: 5e-3,
            depth: 20,
            samples: 20_000,
            seed: 7,
        }
    }
}

/// Seed pool plus [`ac_invariant_measure`] in one call.
pub fn build_measure(
    dynamics: &Dynamics,
    tag: BundleTag,
    params: &MeasureParams,
) -> Result<EmpiricalMeasure> {
    let pool = seed_pool(
        dynamics.map,
        tag,
        params.pool_leaves,
        params.leaf_radius,
        params.leaf_step,
        params.seed,
    )?;
    ac_invariant_measure(
        dynamics,
        tag,
        &pool,
        params.depth,
        params.samples,
        params.seed,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentEstimate {
    pub value: f64,
    pub std_error: f64,
    /// `|λ − λ_{N/2}|` where `λ_{N/2}` uses only samples pushed fewer than
    /// N/2 times: a finite-N bias diagnostic.
    pub depth_bias: f64,
    pub samples: usize,
}

/// Weighted average of `log J` over the measure (the Lebesgue exponent).
pub fn lebesgue_exponent(
    dynamics: &Dynamics,
    tag: BundleTag,
    mu: &EmpiricalMeasure,
) -> Result<ExponentEstimate> {
    check_expanding(dynamics, tag)?;
    let logs: Vec<f64> = mu
        .samples
        .par_iter()
        .map(|(p, _)| leaf_jacobian_dyn(dynamics, tag, p.rep()).map(f64::ln))
        .collect::<Result<_>>()?;
    let total = mu.total_weight();
    let value = mu
        .samples
        .iter()
        .zip(&logs)
        .map(|((_, w), l)| w * l)
        .collect::<CompensatedSum>()
        .value()
        / total;
    let (_, std_error) = mean_and_stderr(&logs);
    let half = mu.construction.depth.div_ceil(2);
    let early: Vec<f64> = logs
        .iter()
        .zip(&mu.depths)
        .filter(|(_, k)| **k < half)
        .map(|(l, _)| *l)
        .collect();
    let depth_bias = if early.is_empty() {
        0.0
    } else {
        (mean_and_stderr(&early).0 - value).abs()
    };
    Ok(ExponentEstimate {
        value,
        std_error,
        depth_bias,
        samples: logs.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaghinXia {
    pub lambda: ExponentEstimate,
    pub chi: f64,
    pub chi_std_error: f64,
    /// `χ − λ`.
    pub slack: f64,
    /// `sqrt(σ_λ² + σ_χ²)`.
    pub combined_std_error: f64,
}

/// Compares the Lebesgue exponent of a freshly built measure with the
/// geometric growth of the leaf ball `W_r(x)`.
pub fn saghin_xia_check(
    dynamics: &Dynamics,
    tag: BundleTag,
    x: &TorusPoint,
    r: f64,
    n_max: usize,
    params: &MeasureParams,
    opts: &LeafOptions,
) -> Result<SaghinXia> {
    let mu = build_measure(dynamics, tag, params)?;
    let lambda = lebesgue_exponent(dynamics, tag, &mu)?;
    let growth = geometric_growth(*dynamics, tag, x, r, n_max, None, opts)?;
    let combined = lambda.std_error.hypot(growth.slope_stderr);
    Ok(SaghinXia {
        lambda,
        chi: growth.chi,
        chi_std_error: growth.slope_stderr,
        slack: growth.chi - lambda.value,
        combined_std_error: combined,
    })
}

/// The element of the leaf-interval partition containing a point.
///
/// Offsets are signed arclengths from the point along the oriented leaf,
/// `lower < 0 < upper`, in the linearisation of the leaf inside each chart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubordinatedPartitionElement {
    pub point: TorusPoint,
    pub lower: f64,
    pub upper: f64,
    /// Index of the chart cube containing the point.
    pub chart: [usize; 3],
}

impl SubordinatedPartitionElement {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Distances from `w` along `±e` to the boundary of its chart cube.
fn chart_exits(w: Vec3, e: Vec3, scale: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::INFINITY);
    for i in 0..3 {
        let c = (w[i] / scale).floor();
        let (a, b) = (c * scale - w[i], (c + 1.0) * scale - w[i]);
        if e[i] > 0.0 {
            hi = hi.min(b / e[i]);
            lo = lo.min(-a / e[i]);
        } else if e[i] < 0.0 {
            hi = hi.min(a / e[i]);
            lo = lo.min(-b / e[i]);
        }
    }
    (lo, hi)
}

/// Partition element `ξ(x) = ∩_{n ≤ depth} g^n(ξ₀(g^{-n}x))`, with ξ₀ the
/// leaf pieces in cubes of side `scale`, and the leaf Jacobian `J(x)`.
pub fn partition_element(
    dynamics: &Dynamics,
    back: &Dynamics,
    tag: BundleTag,
    x: Vec3,
    scale: f64,
    depth: usize,
) -> Result<(SubordinatedPartitionElement, f64, Vec3)> {
    let map = dynamics.map;
    let bd = depth_for(map, tag);
    let e0 = bundle_direction(map, tag, x, bd)?;
    let (mut lo, mut hi) = chart_exits(x, e0, scale);
    let jx = dynamics.jacobian(x)?.mul_vec(e0).norm();
    let mut w = x;
    let mut e_next = e0;
    let mut stretch = 1.0;
    let mut sign = 1.0;
    for _ in 0..depth {
        w = TorusPoint::from_lift(back.step(w)?).rep();
        let e = bundle_direction(map, tag, w, bd)?;
        let v = dynamics.jacobian(w)?.mul_vec(e);
        stretch *= v.norm();
        if v.dot(e_next) < 0.0 {
            sign = -sign;
        }
        let (a, b) = chart_exits(w, e, scale);
        let (a, b) = if sign > 0.0 { (a, b) } else { (b, a) };
        lo = lo.min(stretch * a);
        hi = hi.min(stretch * b);
        e_next = e;
    }
    let chart = [0, 1, 2].map(|i| (x[i] / scale).floor().max(0.0) as usize);
    Ok((
        SubordinatedPartitionElement {
            point: TorusPoint::from_lift(x),
            lower: -lo,
            upper: hi,
            chart,
        },
        jx,
        e0,
    ))
}

/// `d/dσ log ρ` at `x` along the oriented leaf, from the Δ series:
/// `−Σ_i ∂ log J⁻(x_i) Π_{k<i} J⁻(x_k)` with central differences.
pub fn log_density_slope(dynamics: &Dynamics, tag: BundleTag, x: Vec3) -> Result<f64> {
    let map = dynamics.map;
    if map.is_linear() {
        return Ok(0.0);
    }
    let back = dynamics.reversed();
    let bd = depth_for(map, tag);
    let h = 1e-5;
    let mut z = x;
    let mut weight = 1.0;
    let mut sum = 0.0;
    for _ in 0..200 {
        let e = bundle_direction(map, tag, z, bd)?;
        let lj = |w: Vec3| -> Result<f64> {
            let ew = bundle_direction(map, tag, w, bd)?;
            Ok(backward_jacobian(&back, w, ew)?.1.ln())
        };
        let d = (lj(z + e * h)? - lj(z - e * h)?) / (2.0 * h);
        sum -= d * weight;
        let (pre, jb, v) = backward_jacobian(&back, z, e)?;
        let e_pre = bundle_direction(map, tag, pre, bd)?;
        weight *= jb * if v.dot(e_pre) < 0.0 { -1.0 } else { 1.0 };
        z = TorusPoint::from_lift(pre).rep();
        if weight.abs() < 1e-7 {
            break;
        }
    }
    Ok(sum)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalEntropyEstimate {
    pub value: f64,
    pub std_error: f64,
    pub adaptedness_failures: usize,
    pub samples: usize,
    pub chart_scale: f64,
    pub refinement_depth: usize,
}

/// `−∫ log m^ξ_x(C_{g⁻¹ξ}(x)) dμ` for the leaf-interval partition at
/// `chart_scale`.
///
/// `g⁻¹ξ(x)` is obtained by building `ξ(gx)` independently, one generation
/// deeper so both cover the same orbit points, and pulling it back with
/// `J(x)`; it must sit inside `ξ(x)`. Backward orbits drift by roughly
/// `|α|^n` machine epsilons, so deep constraints are ill-conditioned; the
/// default depth 8 keeps the drift near 1e-10. Conditional masses use the
/// density `exp(s · d log ρ/ds)` linearised at `x`.
pub fn conditional_entropy_estimate(
    dynamics: &Dynamics,
    tag: BundleTag,
    mu: &EmpiricalMeasure,
    chart_scale: f64,
    refinement_depth: usize,
) -> Result<ConditionalEntropyEstimate> {
    check_expanding(dynamics, tag)?;
    if !(chart_scale > 0.0 && chart_scale <= 0.5) {
        return Err(LabError::InvalidConfig(
            "chart_scale must lie in (0, 0.5]".into(),
        ));
    }
    let back = dynamics.reversed();
    let rows: Vec<(f64, bool)> = mu
        .samples
        .par_iter()
        .map(|(p, _)| {
            let x = p.rep();
            let (el, jx, e0) =
                partition_element(dynamics, &back, tag, x, chart_scale, refinement_depth)?;
            let (gx, jac) = dynamics.step_with_jacobian(x)?;
            let gx = TorusPoint::from_lift(gx).rep();
            let (img, _, e1) =
                partition_element(dynamics, &back, tag, gx, chart_scale, refinement_depth + 1)?;
            let flip = jac.mul_vec(e0).dot(e1) < 0.0;
            let (b_lo, b_hi) = if flip {
                (-img.upper / jx, -img.lower / jx)
            } else {
                (img.lower / jx, img.upper / jx)
            };
            // Deep constraints inherit the orbit drift, about 1e-7 relative at depth 8.
            let slack = 1e-6 * el.length();
            let adapted = b_lo >= el.lower - slack && b_hi <= el.upper + slack;
            let g = log_density_slope(dynamics, tag, x)?;
            let mass = density_mass(g, b_lo, b_hi) / density_mass(g, el.lower, el.upper);
            Ok((-mass.ln(), adapted))
        })
        .collect::<Result<_>>()?;
    let failures = rows.iter().filter(|r| !r.1).count();
    if failures * 1000 > rows.len() {
        return Err(LabError::AdaptednessViolation {
            failures,
            samples: rows.len(),
        });
    }
    let values: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let weights: Vec<f64> = mu.samples.iter().map(|s| s.1).collect();
    let total: f64 = weights.iter().sum();
    let value = values
        .iter()
        .zip(&weights)
        .map(|(v, w)| v * w)
        .collect::<CompensatedSum>()
        .value()
        / total;
    let (_, std_error) = mean_and_stderr(&values);
    Ok(ConditionalEntropyEstimate {
        value,
        std_error,
        adaptedness_failures: failures,
        samples: values.len(),
        chart_scale,
        refinement_depth,
    })
}

/// `∫_a^b exp(g s) ds`.
fn density_mass(g: f64, a: f64, b: f64) -> f64 {
    if (g * (b - a)).abs() < 1e-12 {
        return b - a;
    }
    ((g * b).exp() - (g * a).exp()) / g
}
