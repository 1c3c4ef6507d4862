//! Leaf-wise topological entropy from (n,ε)-separated and (n,ε)-generating
//! sets on one-dimensional leaf compacts.
//!
//! Every image `f^j(K)` is stored as a map from the seed parameter to
//! arclength, `ℓ_j`. Because `f` maps a 1-d leaf homeomorphically onto its
//! image, each `ℓ_j` is increasing, so for ordered points `y < z < w` we get
//! `d_n(y,z) ≤ d_n(y,w)`. That makes a left-to-right greedy sweep optimal
//! for both counts; the oracle tests check this against exhaustive search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::foliation::{
    grow_leaf_with, growth_from_series, iterate_leaf_visit, leaf_length, GrowthEstimate,
    LeafOptions, LeafSegment,
};
use crate::linalg::linear_fit;
use crate::torus::{BundleTag, Dynamics, TorusPoint};

/// Default ε values as fractions of the leaf-ball radius.
pub const DEFAULT_EPS_FRACTIONS: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

/// Arclength profile of one generation.
#[derive(Clone, Debug)]
pub struct GenerationProfile {
    pub params: Vec<f64>,
    pub arclengths: Vec<f64>,
    pub length: f64,
}

/// The compact `K` and its refined images `f^j(K)`, `j = 0..=last`.
#[derive(Clone, Debug)]
pub struct LeafHistory {
    pub tag: BundleTag,
    pub generations: Vec<GenerationProfile>,
}

impl LeafHistory {
    /// Iterates `K` `generations` times and keeps every arclength profile.
    pub fn build(
        dynamics: Dynamics,
        k: &LeafSegment,
        generations: usize,
        opts: &LeafOptions,
    ) -> Result<Self> {
        let mut out = Vec::with_capacity(generations + 1);
        iterate_leaf_visit(
            dynamics,
            k,
            generations,
            opts.max_step,
            opts.vertex_budget,
            |s| {
                out.push(GenerationProfile {
                    params: s.params.clone(),
                    arclengths: s.arclengths.clone(),
                    length: leaf_length(s),
                });
                Ok(())
            },
        )?;
        Ok(LeafHistory {
            tag: k.tag,
            generations: out,
        })
    }

    /// Largest `n` for which `d_n` is available.
    pub fn n_available(&self) -> usize {
        self.generations.len()
    }

    fn check_n(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.n_available() {
            return Err(LabError::InvalidConfig(format!(
                "n = {n} outside 1..={}",
                self.n_available()
            )));
        }
        Ok(())
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.generations.iter().map(|g| g.length).collect()
    }

    /// Streaming access to `(ℓ_0, …, ℓ_{n-1})` at knots spaced `spacing`
    /// apart in the arclength of `f^{n-1}(K)`, last knot at the endpoint.
    pub fn cursor(&self, n: usize, spacing: f64) -> Result<HistoryCursor<'_>> {
        self.check_n(n)?;
        if !(spacing > 0.0) {
            return Err(LabError::InvalidConfig(
                "knot spacing must be positive".into(),
            ));
        }
        let total = self.generations[n - 1]
            .arclengths
            .last()
            .copied()
            .unwrap_or(0.0);
        let knots = (total / spacing).ceil() as usize + 1;
        Ok(HistoryCursor {
            history: self,
            n,
            spacing,
            total,
            knots,
            pointers: vec![0; n],
            finest_ptr: 0,
            last: 0,
        })
    }

    /// Largest `d_n` between consecutive knots, or the largest vertex gap
    /// of `f^{n-1}(K)` if that is coarser (ℓ_j is only known between
    /// vertices by interpolation).
    pub fn resolution(&self, n: usize, spacing: f64) -> Result<f64> {
        let mut cur = self.cursor(n, spacing)?;
        let vertex_gap = self.generations[n - 1]
            .arclengths
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max);
        let mut prev = vec![0.0; n];
        let mut next = vec![0.0; n];
        cur.load(0, &mut prev);
        let mut worst: f64 = 0.0;
        for k in 1..cur.knots() {
            cur.load(k, &mut next);
            worst = worst.max(dn(&prev, &next));
            std::mem::swap(&mut prev, &mut next);
        }
        Ok(worst.max(vertex_gap))
    }
}

/// Knot spacing is ε divided by this. Not an integer, so that no knot
/// lands at exactly ε from a selected one, where rounding would decide `>`.
pub const KNOTS_PER_EPS: f64 = 10.5;

fn interp(g: &GenerationProfile, ptr: &mut usize, t: f64) -> f64 {
    let p = &g.params;
    while *ptr + 1 < p.len() && p[*ptr + 1] <= t {
        *ptr += 1;
    }
    let i = *ptr;
    if i + 1 >= p.len() || p[i] == t {
        return g.arclengths[i];
    }
    let w = (t - p[i]) / (p[i + 1] - p[i]);
    g.arclengths[i] + w * (g.arclengths[i + 1] - g.arclengths[i])
}

/// Points of the discretization, each carrying its vector `(ℓ_0, …, ℓ_{n-1})`.
pub trait KnotProfiles {
    fn knots(&self) -> usize;
    fn depth(&self) -> usize;
    /// Loads the profile of knot `k`; successive calls have nondecreasing `k`.
    fn load(&mut self, k: usize, out: &mut [f64]);
}

pub struct HistoryCursor<'a> {
    history: &'a LeafHistory,
    n: usize,
    spacing: f64,
    total: f64,
    knots: usize,
    pointers: Vec<usize>,
    finest_ptr: usize,
    last: usize,
}

impl HistoryCursor<'_> {
    /// Seed parameter where `ℓ_{n-1}` reaches `a`.
    fn param_at(&mut self, a: f64) -> f64 {
        let g = &self.history.generations[self.n - 1];
        let ls = &g.arclengths;
        while self.finest_ptr + 1 < ls.len() && ls[self.finest_ptr + 1] <= a {
            self.finest_ptr += 1;
        }
        let i = self.finest_ptr;
        if i + 1 >= ls.len() {
            return g.params[i];
        }
        let w = (a - ls[i]) / (ls[i + 1] - ls[i]);
        g.params[i] + w * (g.params[i + 1] - g.params[i])
    }
}

impl KnotProfiles for HistoryCursor<'_> {
    fn knots(&self) -> usize {
        self.knots
    }

    fn depth(&self) -> usize {
        self.n
    }

    fn load(&mut self, k: usize, out: &mut [f64]) {
        debug_assert!(k >= self.last, "cursor moves forward only");
        self.last = k;
        let a = (k as f64 * self.spacing).min(self.total);
        let t = self.param_at(a);
        for j in 0..self.n - 1 {
            out[j] = interp(&self.history.generations[j], &mut self.pointers[j], t);
        }
        out[self.n - 1] = a;
    }
}

/// Explicit profiles, one row per knot.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileMatrix {
    pub rows: Vec<Vec<f64>>,
}

impl ProfileMatrix {
    /// `knots` points evenly spaced in the arclength of `f^{n-1}(K)`.
    pub fn subsample(history: &LeafHistory, n: usize, knots: usize) -> Result<Self> {
        let total = history.generations[n.max(1) - 1].length;
        let spacing = total / (knots.max(2) - 1) as f64 * (1.0 + 1e-12);
        let mut cur = history.cursor(n, spacing)?;
        let mut rows = Vec::with_capacity(cur.knots());
        let mut buf = vec![0.0; n];
        for k in 0..cur.knots() {
            cur.load(k, &mut buf);
            rows.push(buf.clone());
        }
        Ok(ProfileMatrix { rows })
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        dn(&self.rows[a], &self.rows[b])
    }
}

impl KnotProfiles for ProfileMatrix {
    fn knots(&self) -> usize {
        self.rows.len()
    }
    fn depth(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }
    fn load(&mut self, k: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.rows[k]);
    }
}

#[inline]
fn dn(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `d_n(y, z) = max_{j<n} |ℓ_j(y) − ℓ_j(z)|` for seed parameters `y`, `z`.
pub fn dn_distance(history: &LeafHistory, y: f64, z: f64, n: usize) -> Result<f64> {
    history.check_n(n)?;
    let (a, b) = if y <= z { (y, z) } else { (z, y) };
    let mut worst: f64 = 0.0;
    for g in &history.generations[..n] {
        let (mut pa, mut pb) = (0, 0);
        let la = interp(g, &mut pa, a);
        let lb = interp(g, &mut pb, b);
        worst = worst.max((lb - la).abs());
    }
    Ok(worst)
}

/// Maximal ε-separated set (strict `> ε`) by a left-to-right sweep.
pub fn greedy_separated<P: KnotProfiles>(p: &mut P, eps: f64) -> usize {
    let n = p.knots();
    if n == 0 {
        return 0;
    }
    let mut chosen = vec![0.0; p.depth()];
    let mut buf = vec![0.0; p.depth()];
    p.load(0, &mut chosen);
    let mut count = 1;
    for k in 1..n {
        p.load(k, &mut buf);
        if dn(&chosen, &buf) > eps {
            count += 1;
            std::mem::swap(&mut chosen, &mut buf);
        }
    }
    count
}

/// Minimal cover by closed `d_n`-balls of radius ε centred at knots.
pub fn greedy_generator<P: KnotProfiles>(p: &mut P, eps: f64) -> usize {
    let n = p.knots();
    if n == 0 {
        return 0;
    }
    let d = p.depth();
    let mut first = vec![0.0; d];
    let mut centre = vec![0.0; d];
    let mut buf = vec![0.0; d];
    p.load(0, &mut first);
    let mut k = 0;
    let mut count = 0;
    loop {
        count += 1;
        // push the centre as far right as it can go while still covering `first`
        centre.copy_from_slice(&first);
        let mut next = k + 1;
        loop {
            if next >= n {
                return count;
            }
            p.load(next, &mut buf);
            if dn(&first, &buf) <= eps {
                centre.copy_from_slice(&buf);
                next += 1;
            } else {
                break;
            }
        }
        // everything within ε to the right of the centre is covered
        while dn(&centre, &buf) <= eps {
            next += 1;
            if next >= n {
                return count;
            }
            p.load(next, &mut buf);
        }
        k = next;
        std::mem::swap(&mut first, &mut buf);
    }
}

fn check_resolution(resolution: f64, eps: f64) -> Result<()> {
    // relative slack so a knot spacing of exactly ε/10 passes
    if resolution > eps / 10.0 * (1.0 + 1e-9) {
        return Err(LabError::ResolutionTooCoarse {
            step: resolution,
            limit: eps / 10.0,
        });
    }
    Ok(())
}

/// s(K, n, ε) on knots `ε/KNOTS_PER_EPS` apart along `f^{n-1}(K)`.
pub fn max_separated(history: &LeafHistory, n: usize, eps: f64) -> Result<usize> {
    let spacing = eps / KNOTS_PER_EPS;
    check_resolution(history.resolution(n, spacing)?, eps)?;
    Ok(greedy_separated(&mut history.cursor(n, spacing)?, eps))
}

/// g(K, n, ε) on the same knots as [`max_separated`].
pub fn min_generator(history: &LeafHistory, n: usize, eps: f64) -> Result<usize> {
    let spacing = eps / KNOTS_PER_EPS;
    check_resolution(history.resolution(n, spacing)?, eps)?;
    Ok(greedy_generator(&mut history.cursor(n, spacing)?, eps))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationCell {
    pub n: usize,
    pub eps: f64,
    pub s_count: usize,
    pub g_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationTable {
    pub tag: BundleTag,
    pub compact_length: f64,
    pub cells: Vec<SeparationCell>,
    /// Worst consecutive-knot `d_n` relative to ε, over the whole table.
    pub resolution: f64,
}

impl SeparationTable {
    pub const CSV_HEADER: &'static str = "n,eps,s_count,g_count";

    /// Fills `n = 1..=n_max` for every ε; ε columns run in parallel.
    pub fn build(history: &LeafHistory, n_max: usize, eps_schedule: &[f64]) -> Result<Self> {
        let columns: Vec<(f64, Vec<SeparationCell>)> = eps_schedule
            .par_iter()
            .map(|&eps| -> Result<(f64, Vec<SeparationCell>)> {
                let spacing = eps / KNOTS_PER_EPS;
                let mut worst: f64 = 0.0;
                let mut cells = Vec::with_capacity(n_max);
                for n in 1..=n_max {
                    let res = history.resolution(n, spacing)?;
                    check_resolution(res, eps)?;
                    worst = worst.max(res / eps);
                    cells.push(SeparationCell {
                        n,
                        eps,
                        s_count: greedy_separated(&mut history.cursor(n, spacing)?, eps),
                        g_count: greedy_generator(&mut history.cursor(n, spacing)?, eps),
                    });
                }
                Ok((worst, cells))
            })
            .collect::<Result<Vec<_>>>()?;
        let resolution = columns.iter().map(|c| c.0).fold(0.0, f64::max);
        let mut cells: Vec<SeparationCell> = columns.into_iter().flat_map(|c| c.1).collect();
        cells.sort_by(|a, b| a.n.cmp(&b.n).then(b.eps.total_cmp(&a.eps)));
        Ok(SeparationTable {
            tag: history.tag,
            compact_length: history.generations[0].length,
            cells,
            resolution,
        })
    }

    pub fn cell(&self, n: usize, eps: f64) -> Option<&SeparationCell> {
        self.cells
            .iter()
            .find(|c| c.n == n && (c.eps - eps).abs() <= 1e-12 * eps)
    }

    pub fn eps_values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.cells.iter().map(|c| c.eps).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v.dedup();
        v
    }

    pub fn n_max(&self) -> usize {
        self.cells.iter().map(|c| c.n).max().unwrap_or(0)
    }

    /// Monotonicity in n and ε and the sandwich `g(ε) ≤ s(ε) ≤ g(ε/2)`
    /// wherever ε/2 is in the table. Returns the violated cells.
    pub fn audit(&self) -> Vec<String> {
        let mut bad = Vec::new();
        let eps = self.eps_values();
        for c in &self.cells {
            if c.g_count > c.s_count {
                bad.push(format!("g > s at n={} eps={}", c.n, c.eps));
            }
            if let Some(h) = self.cell(c.n, c.eps / 2.0) {
                if c.s_count > h.g_count {
                    bad.push(format!("s(eps) > g(eps/2) at n={} eps={}", c.n, c.eps));
                }
            }
            if let Some(prev) = self.cell(c.n.wrapping_sub(1), c.eps) {
                if prev.s_count > c.s_count || prev.g_count > c.g_count {
                    bad.push(format!("decrease in n at n={} eps={}", c.n, c.eps));
                }
            }
            if let Some(pos) = eps.iter().position(|&e| e == c.eps) {
                if pos > 0 {
                    if let Some(coarser) = self.cell(c.n, eps[pos - 1]) {
                        if coarser.s_count > c.s_count || coarser.g_count > c.g_count {
                            bad.push(format!("increase in eps at n={} eps={}", c.n, c.eps));
                        }
                    }
                }
            }
        }
        bad
    }

    pub fn csv_rows(&self) -> Vec<String> {
        self.cells
            .iter()
            .map(|c| format!("{},{},{},{}", c.n, c.eps, c.s_count, c.g_count))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsSlope {
    pub eps: f64,
    pub separated_slope: f64,
    pub generator_slope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafEntropyEstimate {
    pub tag: BundleTag,
    /// Separated-set slope at the smallest ε.
    pub h: f64,
    pub slopes: Vec<EpsSlope>,
    pub eps_schedule: Vec<f64>,
    pub window: (usize, usize),
    /// Slopes do not decrease as ε shrinks, within 1e-2.
    pub monotone_in_eps: bool,
    pub table: SeparationTable,
}

fn trailing_slope(points: &[(usize, usize)], lo: usize) -> f64 {
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|(n, _)| *n >= lo)
        .map(|(n, c)| (*n as f64, (*c as f64).ln()))
        .unzip();
    linear_fit(&xs, &ys).slope
}

/// Entropy slopes from a finished table, fitting `n ∈ [lo, n_max]`.
pub fn entropy_from_table(
    table: SeparationTable,
    window: Option<usize>,
) -> Result<LeafEntropyEstimate> {
    let n_max = table.n_max();
    let w = window.unwrap_or((n_max + 1) / 2).clamp(2, n_max.max(2));
    if n_max < 2 {
        return Err(LabError::InvalidConfig("entropy needs n_max ≥ 2".into()));
    }
    let lo = n_max + 1 - w;
    let eps_values = table.eps_values();
    let slopes: Vec<EpsSlope> = eps_values
        .iter()
        .map(|&eps| {
            let cells: Vec<&SeparationCell> = table.cells.iter().filter(|c| c.eps == eps).collect();
            let s: Vec<(usize, usize)> = cells.iter().map(|c| (c.n, c.s_count)).collect();
            let g: Vec<(usize, usize)> = cells.iter().map(|c| (c.n, c.g_count)).collect();
            EpsSlope {
                eps,
                separated_slope: trailing_slope(&s, lo),
                generator_slope: trailing_slope(&g, lo),
            }
        })
        .collect();
    let monotone_in_eps = slopes
        .windows(2)
        .all(|w| w[1].separated_slope >= w[0].separated_slope - 1e-2);
    Ok(LeafEntropyEstimate {
        tag: table.tag,
        h: slopes.last().map(|s| s.separated_slope).unwrap_or(f64::NAN),
        slopes,
        eps_schedule: eps_values,
        window: (lo, n_max),
        monotone_in_eps,
        table,
    })
}

/// h_W on the compact `K`: slope in n of log s(K, n, ε) at the smallest ε.
pub fn leaf_entropy(
    dynamics: Dynamics,
    k: &LeafSegment,
    eps_schedule: &[f64],
    n_max: usize,
    opts: &LeafOptions,
) -> Result<LeafEntropyEstimate> {
    let history = LeafHistory::build(dynamics, k, n_max - 1, opts)?;
    let table = SeparationTable::build(&history, n_max, eps_schedule)?;
    entropy_from_table(table, None)
}

/// ε schedule as fractions of the ball radius.
pub fn default_eps_schedule(r: f64) -> Vec<f64> {
    DEFAULT_EPS_FRACTIONS.iter().map(|f| f * r).collect()
}

/// `1 + Σ_{j=n−1−k}^{n−1} length(f^j K)/ε`, an upper bound for s(K, n, ε).
pub fn separation_length_bound(history: &LeafHistory, n: usize, eps: f64, k: usize) -> f64 {
    let hi = n - 1;
    let lo = hi.saturating_sub(k);
    1.0 + history.generations[lo..=hi]
        .iter()
        .map(|g| g.length / eps)
        .sum::<f64>()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyGrowthGap {
    pub entropy: LeafEntropyEstimate,
    pub growth: GrowthEstimate,
    pub gap: f64,
}

/// h − χ computed on the same leaf ball `W_r(x)`.
pub fn entropy_growth_gap(
    dynamics: Dynamics,
    tag: BundleTag,
    x: &TorusPoint,
    r: f64,
    n_max: usize,
    eps_schedule: &[f64],
    opts: &LeafOptions,
) -> Result<EntropyGrowthGap> {
    let k = grow_leaf_with(dynamics.map, x, tag, r, opts)?;
    let history = LeafHistory::build(dynamics, &k, n_max, opts)?;
    let per_n: Vec<(usize, f64)> = history
        .generations
        .iter()
        .enumerate()
        .map(|(n, g)| (n, g.length.ln()))
        .collect();
    let growth = growth_from_series(tag, per_n, None)?;
    let table = SeparationTable::build(&history, n_max, eps_schedule)?;
    let entropy = entropy_from_table(table, None)?;
    Ok(EntropyGrowthGap {
        gap: entropy.h - growth.chi,
        entropy,
        growth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foliation::grow_leaf;
    use crate::torus::{AnosovMap, REFERENCE_MATRIX};

    fn linear_history(n: usize, step: f64) -> (AnosovMap, LeafHistory) {
        let map = AnosovMap::linear(REFERENCE_MATRIX).unwrap();
        let k = grow_leaf(
            &map,
            &TorusPoint::new(0.2, 0.1, 0.4),
            BundleTag::StrongUnstable,
            0.1,
            step,
        )
        .unwrap();
        let h = LeafHistory::build(map.forward(), &k, n - 1, &LeafOptions::with_max_step(step))
            .unwrap();
        (map, h)
    }

    #[test]
    fn dn_at_n1_is_arclength() {
        let (_, h) = linear_history(3, 1e-3);
        assert!((dn_distance(&h, -0.05, 0.03, 1).unwrap() - 0.08).abs() < 1e-12);
    }

    #[test]
    fn dn_linear_stretch() {
        let (map, h) = linear_history(4, 1e-3);
        let a = map.spectrum().alpha_uu;
        let d = dn_distance(&h, -0.02, 0.01, 4).unwrap();
        assert!((d - a.powi(3) * 0.03).abs() < 1e-9);
        assert!(dn_distance(&h, -0.02, 0.01, 3).unwrap() <= d);
    }

    #[test]
    fn n1_counts_match_interval_arithmetic() {
        let (_, h) = linear_history(1, 1e-4);
        let l: f64 = 0.2;
        for eps in [0.05, 0.03, 0.011] {
            let s = max_separated(&h, 1, eps).unwrap() as f64;
            let floor = (l / eps).floor();
            assert!(s == floor || s == floor + 1.0, "{eps}: {s}");
            let g = min_generator(&h, 1, eps).unwrap() as f64;
            assert!((g - (l / (2.0 * eps)).ceil()).abs() <= 1.0, "{eps}: {g}");
        }
    }

    #[test]
    fn coarse_resolution_rejected() {
        let (_, h) = linear_history(2, 1e-2);
        assert!(matches!(
            max_separated(&h, 2, 0.01),
            Err(LabError::ResolutionTooCoarse { .. })
        ));
    }

    fn exhaustive(m: &ProfileMatrix, eps: f64) -> (usize, usize) {
        let n = m.rows.len();
        let mut best_s = 0;
        let mut best_g = usize::MAX;
        for mask in 1u32..(1 << n) {
            let idx: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            let separated = idx
                .iter()
                .enumerate()
                .all(|(a, &i)| idx[a + 1..].iter().all(|&j| m.distance(i, j) > eps));
            if separated {
                best_s = best_s.max(idx.len());
            }
            let covers = (0..n).all(|z| idx.iter().any(|&y| m.distance(y, z) <= eps));
            if covers {
                best_g = best_g.min(idx.len());
            }
        }
        (best_s, best_g)
    }

    #[test]
    fn greedy_matches_subset_enumeration() {
        let map = AnosovMap::linear(REFERENCE_MATRIX).unwrap();
        let k = grow_leaf(
            &map,
            &TorusPoint::new(0.5, 0.1, 0.9),
            BundleTag::WeakUnstable,
            0.1,
            1e-3,
        )
        .unwrap();
        let h =
            LeafHistory::build(map.forward(), &k, 3, &LeafOptions::with_max_step(1e-3)).unwrap();
        for n in 1..=4 {
            let m = ProfileMatrix::subsample(&h, n, 14).unwrap();
            for eps in [0.01, 0.02, 0.04, 0.08] {
                let (s, g) = exhaustive(&m, eps);
                assert_eq!(
                    greedy_separated(&mut m.clone(), eps),
                    s,
                    "s n={n} eps={eps}"
                );
                assert_eq!(
                    greedy_generator(&mut m.clone(), eps),
                    g,
                    "g n={n} eps={eps}"
                );
            }
        }
    }

    #[test]
    fn linear_entropy_matches_log_alpha() {
        let map = AnosovMap::linear(REFERENCE_MATRIX).unwrap();
        let opts = LeafOptions::with_max_step(2.5e-4);
        let k = grow_leaf_with(
            &map,
            &TorusPoint::new(0.2, 0.1, 0.4),
            BundleTag::StrongUnstable,
            0.1,
            &opts,
        )
        .unwrap();
        let est = leaf_entropy(map.forward(), &k, &default_eps_schedule(0.1), 6, &opts).unwrap();
        assert!(est.table.audit().is_empty(), "{:?}", est.table.audit());
        assert!((est.h - map.spectrum().lambda_uu).abs() < 5e-3, "{}", est.h);
    }
}
