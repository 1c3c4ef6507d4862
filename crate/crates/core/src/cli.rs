//! Scenario runner behind the `anosov-lab` binary.
//!
//! A scenario is a TOML file; every key has a default except `seed`, which
//! must come from the file or `--seed`.
//!
//! ```toml
//! seed = 7
//! threads = 0                 # 0 = all cores
//!
//! [map]
//! matrix = [[2, 1, 0], [1, 2, 1], [0, 1, 1]]
//! epsilon = 0.05
//! modes = [{ k = [1, 0, 0], sin = [0.3, -0.5, 0.8] },
//!          { k = [0, 1, 1], sin = [-0.4, 0.1, 0.3], cos = [0.0, 0.0, 0.1] }]
//! # or a named family instead of modes:
//! # family = { kind = "smooth-conjugate", epsilon = 0.05 }
//! # family = { kind = "generic", member = 0, seed = 2024, epsilon = 0.08 }
//! cone_half_angle = 0.3
//! certificate_grid = 12
//!
//! [growth]
//! tags = ["uu", "wu", "s"]
//! x = [0.1, 0.2, 0.3]
//! radii = [0.1]
//! n_max = { uu = 7, wu = 12, s = 5 }
//! max_step = 2.5e-4
//! ```
//!
//! The other sections (`entropy`, `exponents`, `measure`, `conjugacy`,
//! `rigidity`) are listed field by field on their structs below. Each run
//! writes the resolved `config.toml`, one file per table (`.csv` or
//! `.json`), `summary.json` and `manifest.json` into the output directory.
//! Everything except the manifest's timings is a function of the resolved
//! config.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::conjugacy::{
    dyadic_ladder, foliation_image_check, leafwise_regularity_probe, probe_resolution,
    rigidity_experiment, select_probe_base, solve_conjugacy, verify_semiconjugacy, RigidityParams,
    TagSchedule,
};
use crate::error::{LabError, Result};
use crate::families::{GenericFamily, SmoothConjugateFamily};
use crate::foliation::{geometric_growth, grow_leaf_with, LeafOptions};
use crate::leaf_entropy::{default_eps_schedule, leaf_entropy};
use crate::linalg::{IntMatrix3, Vec3};
use crate::measures::{
    build_measure, conditional_entropy_estimate, invariance_defect, leaf_density,
    lebesgue_exponent, DeltaOptions, MeasureParams,
};
use crate::splitting::{lyapunov_exponent, qr_exponent_estimates, Sampler};
use crate::torus::{
    AnosovMap, BundleTag, ConeRequest, FourierMode, PerturbationField, TorusPoint, REFERENCE_MATRIX,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verb {
    Spectrum,
    Growth,
    Entropy,
    Exponents,
    Measure,
    Conjugacy,
    Rigidity,
}

impl Verb {
    pub const ALL: [Verb; 7] = [
        Verb::Spectrum,
        Verb::Growth,
        Verb::Entropy,
        Verb::Exponents,
        Verb::Measure,
        Verb::Conjugacy,
        Verb::Rigidity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Verb::Spectrum => "spectrum",
            Verb::Growth => "growth",
            Verb::Entropy => "entropy",
            Verb::Exponents => "exponents",
            Verb::Measure => "measure",
            Verb::Conjugacy => "conjugacy",
            Verb::Rigidity => "rigidity",
        }
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Verb {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        Verb::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| LabError::InvalidConfig(format!("unknown verb {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(LabError::InvalidConfig(format!("unknown format {other:?}"))),
        }
    }
}

/// One value per bundle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerTag<T> {
    pub uu: T,
    pub wu: T,
    pub s: T,
}

impl<T: Copy> PerTag<T> {
    pub fn get(&self, tag: BundleTag) -> T {
        match tag {
            BundleTag::StrongUnstable => self.uu,
            BundleTag::WeakUnstable => self.wu,
            BundleTag::Stable => self.s,
        }
    }
}

fn default_n_max() -> PerTag<usize> {
    PerTag {
        uu: 7,
        wu: 12,
        s: 5,
    }
}

fn all_tags() -> Vec<BundleTag> {
    BundleTag::ALL.to_vec()
}

fn default_x() -> [f64; 3] {
    [0.1, 0.2, 0.3]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub k: [i64; 3],
    #[serde(default)]
    pub sin: [f64; 3],
    #[serde(default)]
    pub cos: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilyConfig {
    SmoothConjugate {
        epsilon: f64,
    },
    Generic {
        member: usize,
        #[serde(default = "default_family_seed")]
        seed: u64,
        #[serde(default = "default_family_epsilon")]
        epsilon: f64,
    },
}

fn default_family_seed() -> u64 {
    GenericFamily::default().seed
}

fn default_family_epsilon() -> f64 {
    GenericFamily::default().epsilon
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapConfig {
    pub matrix: [[i64; 3]; 3],
    pub epsilon: f64,
    pub modes: Vec<ModeConfig>,
    pub family: Option<FamilyConfig>,
    pub cone_half_angle: f64,
    pub certificate_grid: usize,
}

impl Default for MapConfig {
    fn default() -> Self {
        MapConfig {
            matrix: REFERENCE_MATRIX.0,
            epsilon: 0.0,
            modes: Vec::new(),
            family: None,
            cone_half_angle: 0.3,
            certificate_grid: 12,
        }
    }
}

impl MapConfig {
    /// Builds and cone-certifies the map.
    pub fn build(&self) -> Result<AnosovMap> {
        let cones = ConeRequest::uniform(self.cone_half_angle);
        match &self.family {
            Some(family) => {
                if !self.modes.is_empty() || self.epsilon != 0.0 {
                    return Err(LabError::InvalidConfig(
                        "map.family excludes map.modes and map.epsilon".into(),
                    ));
                }
                match *family {
                    FamilyConfig::SmoothConjugate { epsilon } => {
                        let fam = SmoothConjugateFamily::new(epsilon);
                        AnosovMap::certified(
                            fam.linear_part(),
                            fam.perturbation(),
                            cones,
                            self.certificate_grid,
                        )
                    }
                    FamilyConfig::Generic {
                        member,
                        seed,
                        epsilon,
                    } => {
                        let fam = GenericFamily {
                            seed,
                            epsilon,
                            count: member + 1,
                            ..Default::default()
                        };
                        let map = fam.certified_member(member)?;
                        AnosovMap::certified(
                            *map.linear_part(),
                            map.perturbation().clone(),
                            cones,
                            self.certificate_grid,
                        )
                    }
                }
            }
            None => {
                let modes = self
                    .modes
                    .iter()
                    .map(|m| FourierMode {
                        frequency: m.k,
                        sin_amplitude: Vec3(m.sin),
                        cos_amplitude: Vec3(m.cos),
                    })
                    .collect();
                AnosovMap::certified(
                    IntMatrix3(self.matrix),
                    PerturbationField::new(modes, self.epsilon),
                    cones,
                    self.certificate_grid,
                )
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrowthConfig {
    pub tags: Vec<BundleTag>,
    pub x: [f64; 3],
    pub radii: Vec<f64>,
    pub n_max: PerTag<usize>,
    pub max_step: f64,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        GrowthConfig {
            tags: all_tags(),
            x: default_x(),
            radii: vec![0.1],
            n_max: default_n_max(),
            max_step: 2.5e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropyConfig {
    pub tags: Vec<BundleTag>,
    pub x: [f64; 3],
    pub r: f64,
    pub n_max: PerTag<usize>,
    /// Empty means fractions 0.2, 0.1, 0.05, 0.025 of `r`.
    pub eps: Vec<f64>,
    pub max_step: f64,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        EntropyConfig {
            tags: all_tags(),
            x: default_x(),
            r: 0.1,
            n_max: default_n_max(),
            eps: Vec::new(),
            max_step: 2.5e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExponentsConfig {
    pub tags: Vec<BundleTag>,
    pub orbit_length: usize,
    pub ensemble: usize,
    /// Also run the QR (Oseledets) estimator on the same orbits.
    pub qr: bool,
}

impl Default for ExponentsConfig {
    fn default() -> Self {
        ExponentsConfig {
            tags: all_tags(),
            orbit_length: 1000,
            ensemble: 64,
            qr: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasureConfig {
    pub tags: Vec<BundleTag>,
    pub pool_leaves: usize,
    pub leaf_radius: f64,
    pub leaf_step: f64,
    pub depth: usize,
    pub samples: usize,
    pub conditional_entropy: bool,
    pub chart_scale: f64,
    pub refinement_depth: usize,
    /// Disintegration density on the leaf through `x`; 0 disables it.
    pub density_radius: f64,
    pub x: [f64; 3],
    pub delta_tol: f64,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        let p = MeasureParams::default();
        MeasureConfig {
            tags: all_tags(),
            pool_leaves: p.pool_leaves,
            leaf_radius: p.leaf_radius,
            leaf_step: p.leaf_step,
            depth: p.depth,
            samples: p.samples,
            conditional_entropy: false,
            chart_scale: 0.1,
            refinement_depth: crate::measures::DEFAULT_REFINEMENT_DEPTH,
            density_radius: 0.1,
            x: default_x(),
            delta_tol: crate::measures::DEFAULT_DELTA_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConjugacyConfig {
    pub grid_n: usize,
    pub tol: f64,
    pub verify_grid: usize,
    pub x: [f64; 3],
    pub leaf_radius: f64,
    pub ladder: [u32; 2],
    pub probe_max_period: usize,
    pub probe_tol: f64,
    /// Also write the cached u on the lattice.
    pub write_field: bool,
}

impl Default for ConjugacyConfig {
    fn default() -> Self {
        ConjugacyConfig {
            grid_n: 32,
            tol: 1e-9,
            verify_grid: 16,
            x: [0.3, 0.6, 0.2],
            leaf_radius: 0.2,
            ladder: [3, 16],
            probe_max_period: 3,
            probe_tol: 1e-13,
            write_field: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RigidityConfig {
    pub samples: usize,
    pub depth: usize,
    pub pool_leaves: usize,
    pub leaf_radius: f64,
    pub growth_radius: f64,
    pub max_step: f64,
    pub growth_n_max: PerTag<usize>,
    pub entropy_n_max: PerTag<usize>,
    pub series_tol: f64,
    pub ladder: [u32; 2],
    pub probe_max_period: usize,
    pub gap_floor: f64,
    pub skip_entropy: bool,
}

impl Default for RigidityConfig {
    fn default() -> Self {
        let p = RigidityParams::default();
        RigidityConfig {
            samples: p.measure.samples,
            depth: p.measure.depth,
            pool_leaves: p.measure.pool_leaves,
            leaf_radius: p.measure.leaf_radius,
            growth_radius: p.leaf_radius,
            max_step: p.max_step,
            growth_n_max: default_n_max(),
            entropy_n_max: default_n_max(),
            series_tol: p.series_tol,
            ladder: [3, 16],
            probe_max_period: p.probe_max_period,
            gap_floor: p.gap_floor,
            skip_entropy: false,
        }
    }
}

impl RigidityConfig {
    pub fn params(&self, seed: u64) -> RigidityParams {
        let schedule = |t: BundleTag| TagSchedule {
            growth_n_max: self.growth_n_max.get(t),
            entropy_n_max: self.entropy_n_max.get(t),
        };
        RigidityParams {
            measure: MeasureParams {
                pool_leaves: self.pool_leaves,
                leaf_radius: self.leaf_radius,
                depth: self.depth,
                samples: self.samples,
                seed,
                ..Default::default()
            },
            leaf_radius: self.growth_radius,
            max_step: self.max_step,
            schedules: BundleTag::ALL.map(schedule),
            series_tol: self.series_tol,
            ladder: dyadic_ladder(self.ladder[0], self.ladder[1]),
            probe_max_period: self.probe_max_period,
            gap_floor: self.gap_floor,
            skip_entropy: self.skip_entropy,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub map: MapConfig,
    #[serde(default)]
    pub growth: GrowthConfig,
    #[serde(default)]
    pub entropy: EntropyConfig,
    #[serde(default)]
    pub exponents: ExponentsConfig,
    #[serde(default)]
    pub measure: MeasureConfig,
    #[serde(default)]
    pub conjugacy: ConjugacyConfig,
    #[serde(default)]
    pub rigidity: RigidityConfig,
}

fn check(cond: bool, what: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(LabError::InvalidConfig(what.to_string()))
    }
}

fn check_point(x: &[f64; 3], what: &str) -> Result<()> {
    check(x.iter().all(|c| c.is_finite()), what)
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| LabError::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| LabError::InvalidConfig(e.to_string()))
    }

    /// The seed, required before any run.
    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| {
            LabError::InvalidConfig("seed is mandatory (config key or --seed)".into())
        })
    }

    /// Range checks for every numeric parameter.
    pub fn validate(&self) -> Result<()> {
        self.seed()?;
        let m = &self.map;
        check(
            m.epsilon.is_finite() && m.epsilon >= 0.0,
            "map.epsilon must be ≥ 0",
        )?;
        check(
            m.cone_half_angle > 0.0 && m.cone_half_angle < std::f64::consts::FRAC_PI_2,
            "map.cone_half_angle must be in (0, π/2)",
        )?;
        check(
            (1..=256).contains(&m.certificate_grid),
            "map.certificate_grid must be in 1..=256",
        )?;
        for mode in &m.modes {
            check(mode.k != [0, 0, 0], "map.modes: zero frequency")?;
            check(
                mode.sin.iter().chain(&mode.cos).all(|c| c.is_finite()),
                "map.modes: non-finite amplitude",
            )?;
        }
        let g = &self.growth;
        check(!g.tags.is_empty(), "growth.tags must not be empty")?;
        check_point(&g.x, "growth.x must be finite")?;
        check(
            !g.radii.is_empty() && g.radii.iter().all(|r| *r > 0.0 && *r <= 0.5),
            "growth.radii must be in (0, 0.5]",
        )?;
        check(
            g.max_step > 0.0 && g.max_step <= 0.05,
            "growth.max_step must be in (0, 0.05]",
        )?;
        for t in BundleTag::ALL {
            check(
                (2..=40).contains(&g.n_max.get(t)),
                "growth.n_max must be in 2..=40",
            )?;
        }
        let e = &self.entropy;
        check(!e.tags.is_empty(), "entropy.tags must not be empty")?;
        check_point(&e.x, "entropy.x must be finite")?;
        check(e.r > 0.0 && e.r <= 0.5, "entropy.r must be in (0, 0.5]")?;
        check(
            e.eps.iter().all(|v| *v > 0.0 && *v <= e.r),
            "entropy.eps must be in (0, r]",
        )?;
        check(
            e.max_step > 0.0 && e.max_step <= 0.05,
            "entropy.max_step must be in (0, 0.05]",
        )?;
        for t in BundleTag::ALL {
            check(
                (2..=40).contains(&e.n_max.get(t)),
                "entropy.n_max must be in 2..=40",
            )?;
        }
        let x = &self.exponents;
        check(!x.tags.is_empty(), "exponents.tags must not be empty")?;
        check(
            x.orbit_length >= 1 && x.ensemble >= 2,
            "exponents: orbit_length ≥ 1, ensemble ≥ 2",
        )?;
        let me = &self.measure;
        check(!me.tags.is_empty(), "measure.tags must not be empty")?;
        check(
            me.pool_leaves >= 1 && me.samples >= 2 && me.depth >= 1,
            "measure: pool_leaves, samples, depth ≥ 1",
        )?;
        check(
            me.leaf_radius > 0.0 && me.leaf_radius <= 0.5,
            "measure.leaf_radius must be in (0, 0.5]",
        )?;
        check(
            me.leaf_step > 0.0 && me.leaf_step < me.leaf_radius,
            "measure.leaf_step must be in (0, leaf_radius)",
        )?;
        check(
            me.chart_scale > 0.0 && me.chart_scale <= 0.5,
            "measure.chart_scale must be in (0, 0.5]",
        )?;
        check(
            me.density_radius >= 0.0 && me.density_radius <= 0.5,
            "measure.density_radius must be in [0, 0.5]",
        )?;
        check(
            me.delta_tol > 0.0 && me.delta_tol < 1e-2,
            "measure.delta_tol must be in (0, 1e-2)",
        )?;
        check_point(&me.x, "measure.x must be finite")?;
        let c = &self.conjugacy;
        check(
            (1..=256).contains(&c.grid_n),
            "conjugacy.grid_n must be in 1..=256",
        )?;
        check(
            (1..=128).contains(&c.verify_grid),
            "conjugacy.verify_grid must be in 1..=128",
        )?;
        check(
            c.tol > 0.0 && c.tol < 1e-2,
            "conjugacy.tol must be in (0, 1e-2)",
        )?;
        check(
            c.probe_tol > 0.0 && c.probe_tol < 1e-2,
            "conjugacy.probe_tol must be in (0, 1e-2)",
        )?;
        check(
            c.leaf_radius > 0.0 && c.leaf_radius <= 0.5,
            "conjugacy.leaf_radius must be in (0, 0.5]",
        )?;
        check(
            c.ladder[0] >= 1 && c.ladder[1] >= c.ladder[0] + 3 && c.ladder[1] <= 40,
            "conjugacy.ladder must span ≥ 4 scales within 1..=40",
        )?;
        check(
            (1..=5).contains(&c.probe_max_period),
            "conjugacy.probe_max_period must be in 1..=5",
        )?;
        check_point(&c.x, "conjugacy.x must be finite")?;
        let r = &self.rigidity;
        check(
            r.samples >= 2 && r.depth >= 2 && r.pool_leaves >= 1,
            "rigidity: samples ≥ 2, depth ≥ 2, pool_leaves ≥ 1",
        )?;
        check(
            r.growth_radius > 0.0 && r.growth_radius <= 0.5,
            "rigidity.growth_radius must be in (0, 0.5]",
        )?;
        check(
            r.leaf_radius > 0.0 && r.leaf_radius <= 0.5,
            "rigidity.leaf_radius must be in (0, 0.5]",
        )?;
        check(
            r.max_step > 0.0 && r.max_step <= 0.05,
            "rigidity.max_step must be in (0, 0.05]",
        )?;
        check(
            r.series_tol > 0.0 && r.series_tol < 1e-2,
            "rigidity.series_tol must be in (0, 1e-2)",
        )?;
        check(r.gap_floor >= 0.0, "rigidity.gap_floor must be ≥ 0")?;
        check(
            r.ladder[0] >= 1 && r.ladder[1] >= r.ladder[0] + 3 && r.ladder[1] <= 40,
            "rigidity.ladder must span ≥ 4 scales within 1..=40",
        )?;
        check(
            (1..=5).contains(&r.probe_max_period),
            "rigidity.probe_max_period must be in 1..=5",
        )?;
        for t in BundleTag::ALL {
            check(
                (2..=40).contains(&r.growth_n_max.get(t)),
                "rigidity.growth_n_max must be in 2..=40",
            )?;
            check(
                (2..=40).contains(&r.entropy_n_max.get(t)),
                "rigidity.entropy_n_max must be in 2..=40",
            )?;
        }
        Ok(())
    }
}

/// A named table; cells are JSON values so both formats share one source.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&'static str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn cell(v: &Value) -> String {
        match v {
            Value::String(s) => s.clone(),
            Value::Null => String::new(),
            other => other.to_string(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Self::cell).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                Value::Object(
                    self.columns
                        .iter()
                        .zip(row)
                        .map(|(c, v)| (c.to_string(), v.clone()))
                        .collect(),
                )
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&rows).expect("tables serialise");
        s.push('\n');
        s
    }
}

/// Tables and a summary produced by one verb.
#[derive(Clone, Debug, Default)]
pub struct VerbOutput {
    pub tables: Vec<Table>,
    pub summary: BTreeMap<String, Value>,
    pub stages: Vec<StageTiming>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub verb: Verb,
    /// SHA-256 of the resolved `config.toml`.
    pub config_hash: String,
    pub tool_version: String,
    pub seed: u64,
    pub threads: usize,
    pub format: OutputFormat,
    pub wall_clock_seconds: f64,
    pub stages: Vec<StageTiming>,
    pub outputs: Vec<OutputFile>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Recomputes the hash of every file listed in the manifest at `dir`;
/// returns the names that no longer match.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>> {
    let manifest: RunManifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)
        .map_err(|e| LabError::InvalidConfig(format!("manifest: {e}")))?;
    let mut bad = Vec::new();
    for f in &manifest.outputs {
        match fs::read(dir.join(&f.file)) {
            Ok(bytes) if sha256_hex(&bytes) == f.sha256 => {}
            _ => bad.push(f.file.clone()),
        }
    }
    Ok(bad)
}

/// Command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub format: OutputFormat,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

struct Timer {
    stages: Vec<StageTiming>,
}

impl Timer {
    fn stage<T>(&mut self, name: impl Into<String>, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f()?;
        self.stages.push(StageTiming {
            stage: name.into(),
            seconds: t.elapsed().as_secs_f64(),
        });
        Ok(out)
    }
}

fn point(x: [f64; 3]) -> TorusPoint {
    TorusPoint::new(x[0], x[1], x[2])
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serialisable")
}

/// Runs `verb` with the resolved config and writes everything to
/// `opts.out_dir`.
pub fn run(verb: Verb, config: &ScenarioConfig, opts: &RunOptions) -> Result<RunManifest> {
    let mut config = config.clone();
    if let Some(seed) = opts.seed {
        config.seed = Some(seed);
    }
    config.validate()?;
    let start = Instant::now();
    // Results do not depend on the pool size, so `--threads` stays out of
    // the resolved config and only shows up in the manifest.
    let threads = match opts.threads.unwrap_or(config.threads) {
        0 => std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1),
        n => n,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| LabError::InvalidConfig(format!("thread pool: {e}")))?;
    let output = pool.install(|| dispatch(verb, &config))?;

    fs::create_dir_all(&opts.out_dir)?;
    let config_text = config.to_toml()?;
    let mut files: Vec<(String, Vec<u8>)> =
        vec![("config.toml".into(), config_text.clone().into_bytes())];
    for t in &output.tables {
        let (ext, body) = match opts.format {
            OutputFormat::Csv => ("csv", t.to_csv()),
            OutputFormat::Json => ("json", t.to_json()),
        };
        files.push((format!("{}.{ext}", t.name), body.into_bytes()));
    }
    let mut summary = serde_json::to_string_pretty(&output.summary).expect("summary serialises");
    summary.push('\n');
    files.push(("summary.json".into(), summary.into_bytes()));
    let mut outputs = Vec::with_capacity(files.len());
    for (name, bytes) in &files {
        fs::write(opts.out_dir.join(name), bytes)?;
        outputs.push(OutputFile {
            file: name.clone(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
    }
    let manifest = RunManifest {
        verb,
        config_hash: sha256_hex(config_text.as_bytes()),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed()?,
        threads,
        format: opts.format,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        stages: output.stages,
        outputs,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    text.push('\n');
    fs::write(opts.out_dir.join(MANIFEST_FILE), text)?;
    Ok(manifest)
}

/// Runs a verb without touching the filesystem.
pub fn dispatch(verb: Verb, config: &ScenarioConfig) -> Result<VerbOutput> {
    let mut timer = Timer { stages: Vec::new() };
    let map = timer.stage("map", || config.map.build())?;
    let mut out = match verb {
        Verb::Spectrum => cmd_spectrum(&map)?,
        Verb::Growth => cmd_growth(&map, &config.growth, &mut timer)?,
        Verb::Entropy => cmd_entropy(&map, &config.entropy, &mut timer)?,
        Verb::Exponents => cmd_exponents(&map, &config.exponents, config.seed()?, &mut timer)?,
        Verb::Measure => cmd_measure(&map, &config.measure, config.seed()?, &mut timer)?,
        Verb::Conjugacy => cmd_conjugacy(&map, &config.conjugacy, &mut timer)?,
        Verb::Rigidity => cmd_rigidity(&map, &config.rigidity, config.seed()?, &mut timer)?,
    };
    out.summary.insert("verb".into(), json!(verb.name()));
    out.summary
        .insert("perturbation".into(), to_value(map.perturbation()));
    out.stages = timer.stages;
    Ok(out)
}

/// Spectrum of the linear part and the cone certificate.
pub fn cmd_spectrum(map: &AnosovMap) -> Result<VerbOutput> {
    let s = map.spectrum();
    let mut t = Table::new(
        "spectrum",
        &["tag", "eigenvalue", "log_modulus", "v1", "v2", "v3"],
    );
    for tag in BundleTag::ALL {
        let v = s.eigenvector(tag);
        t.push(vec![
            json!(tag.short()),
            json!(s.eigenvalue(tag)),
            json!(s.log_modulus(tag)),
            json!(v[0]),
            json!(v[1]),
            json!(v[2]),
        ]);
    }
    let mut out = VerbOutput::default();
    out.summary.insert("spectrum".into(), to_value(s));
    out.summary
        .insert("cone_certificate".into(), to_value(&map.cone_certificate()));
    out.tables.push(t);
    Ok(out)
}

fn cmd_growth(map: &AnosovMap, cfg: &GrowthConfig, timer: &mut Timer) -> Result<VerbOutput> {
    let x = point(cfg.x);
    let opts = LeafOptions::with_max_step(cfg.max_step);
    let mut series = Table::new("growth", &["tag", "r", "n", "log_length"]);
    let mut fits = Table::new(
        "growth_fit",
        &[
            "tag",
            "r",
            "chi",
            "slope_stderr",
            "fit_residual",
            "window_lo",
            "window_hi",
            "log_alpha",
        ],
    );
    let mut chis = BTreeMap::new();
    for &tag in &cfg.tags {
        for &r in &cfg.radii {
            let est = timer.stage(format!("growth {tag} r={r}"), || {
                geometric_growth(
                    map.oriented(tag.expanding_direction()),
                    tag,
                    &x,
                    r,
                    cfg.n_max.get(tag),
                    None,
                    &opts,
                )
            })?;
            for (n, l) in &est.per_n {
                series.push(vec![json!(tag.short()), json!(r), json!(n), json!(l)]);
            }
            fits.push(vec![
                json!(tag.short()),
                json!(r),
                json!(est.chi),
                json!(est.slope_stderr),
                json!(est.fit_residual),
                json!(est.window.0),
                json!(est.window.1),
                json!(map.spectrum().log_modulus(tag).abs()),
            ]);
            chis.entry(tag.short().to_string())
                .or_insert_with(Vec::new)
                .push(json!({ "r": r, "chi": est.chi }));
        }
    }
    let mut out = VerbOutput::default();
    out.summary.insert("chi".into(), to_value(&chis));
    out.tables = vec![series, fits];
    Ok(out)
}

fn cmd_entropy(map: &AnosovMap, cfg: &EntropyConfig, timer: &mut Timer) -> Result<VerbOutput> {
    let x = point(cfg.x);
    let opts = LeafOptions::with_max_step(cfg.max_step);
    let eps = if cfg.eps.is_empty() {
        default_eps_schedule(cfg.r)
    } else {
        cfg.eps.clone()
    };
    let mut cells = Table::new("separation", &["tag", "n", "eps", "s_count", "g_count"]);
    let mut slopes = Table::new(
        "entropy_slopes",
        &["tag", "eps", "separated_slope", "generator_slope"],
    );
    let mut summary = BTreeMap::new();
    for &tag in &cfg.tags {
        let est = timer.stage(format!("entropy {tag}"), || {
            let k = grow_leaf_with(map, &x, tag, cfg.r, &opts)?;
            leaf_entropy(
                map.oriented(tag.expanding_direction()),
                &k,
                &eps,
                cfg.n_max.get(tag),
                &opts,
            )
        })?;
        for c in &est.table.cells {
            cells.push(vec![
                json!(tag.short()),
                json!(c.n),
                json!(c.eps),
                json!(c.s_count),
                json!(c.g_count),
            ]);
        }
        for s in &est.slopes {
            slopes.push(vec![
                json!(tag.short()),
                json!(s.eps),
                json!(s.separated_slope),
                json!(s.generator_slope),
            ]);
        }
        summary.insert(
            tag.short().to_string(),
            json!({
                "h": est.h,
                "log_alpha": map.spectrum().log_modulus(tag).abs(),
                "window": [est.window.0, est.window.1],
                "monotone_in_eps": est.monotone_in_eps,
                "resolution": est.table.resolution,
                "compact_length": est.table.compact_length,
            }),
        );
    }
    let mut out = VerbOutput::default();
    out.summary.insert("entropy".into(), to_value(&summary));
    out.tables = vec![cells, slopes];
    Ok(out)
}

fn cmd_exponents(
    map: &AnosovMap,
    cfg: &ExponentsConfig,
    seed: u64,
    timer: &mut Timer,
) -> Result<VerbOutput> {
    let mut t = Table::new(
        "exponents",
        &[
            "tag",
            "method",
            "value",
            "std_error",
            "orbit_length",
            "ensemble",
            "seed",
            "log_alpha",
        ],
    );
    let mut summary = BTreeMap::new();
    for &tag in &cfg.tags {
        let est = timer.stage(format!("birkhoff {tag}"), || {
            lyapunov_exponent(
                map,
                tag,
                &Sampler::Volume,
                cfg.orbit_length,
                cfg.ensemble,
                seed,
            )
        })?;
        t.push(vec![
            json!(tag.short()),
            json!("bundle"),
            json!(est.value),
            json!(est.std_error),
            json!(cfg.orbit_length),
            json!(cfg.ensemble),
            json!(seed),
            json!(map.spectrum().log_modulus(tag)),
        ]);
        summary.insert(format!("bundle_{tag}"), json!(est.value));
    }
    if cfg.qr {
        let qr = timer.stage("qr", || {
            qr_exponent_estimates(map, &Sampler::Volume, cfg.orbit_length, cfg.ensemble, seed)
        })?;
        for est in qr.iter().filter(|e| cfg.tags.contains(&e.tag)) {
            t.push(vec![
                json!(est.tag.short()),
                json!("qr"),
                json!(est.value),
                json!(est.std_error),
                json!(cfg.orbit_length),
                json!(cfg.ensemble),
                json!(seed),
                json!(map.spectrum().log_modulus(est.tag)),
            ]);
            summary.insert(format!("qr_{}", est.tag), json!(est.value));
        }
    }
    let mut out = VerbOutput::default();
    out.summary.insert("exponents".into(), to_value(&summary));
    out.tables = vec![t];
    Ok(out)
}

fn cmd_measure(
    map: &AnosovMap,
    cfg: &MeasureConfig,
    seed: u64,
    timer: &mut Timer,
) -> Result<VerbOutput> {
    let params = MeasureParams {
        pool_leaves: cfg.pool_leaves,
        leaf_radius: cfg.leaf_radius,
        leaf_step: cfg.leaf_step,
        depth: cfg.depth,
        samples: cfg.samples,
        seed,
    };
    let mut summary_t = Table::new(
        "measure_summary",
        &[
            "tag",
            "lambda",
            "lambda_std_error",
            "lambda_depth_bias",
            "invariance_defect",
            "conditional_entropy",
            "conditional_entropy_std_error",
            "density_integral",
        ],
    );
    let mut out = VerbOutput::default();
    for &tag in &cfg.tags {
        let dynamics = map.oriented(tag.expanding_direction());
        let mu = timer.stage(format!("measure {tag}"), || {
            build_measure(&dynamics, tag, &params)
        })?;
        let lambda = timer.stage(format!("exponent {tag}"), || {
            lebesgue_exponent(&dynamics, tag, &mu)
        })?;
        let defect = timer.stage(format!("defect {tag}"), || {
            invariance_defect(&dynamics, &mu)
        })?;
        let ce = if cfg.conditional_entropy {
            Some(timer.stage(format!("conditional entropy {tag}"), || {
                conditional_entropy_estimate(
                    &dynamics,
                    tag,
                    &mu,
                    cfg.chart_scale,
                    cfg.refinement_depth,
                )
            })?)
        } else {
            None
        };
        let mut samples = Table::new(format!("measure_{tag}"), &["x1", "x2", "x3", "weight"]);
        for (p, w) in &mu.samples {
            let r = p.rep();
            samples.push(vec![json!(r[0]), json!(r[1]), json!(r[2]), json!(w)]);
        }
        out.tables.push(samples);
        let mut integral = Value::Null;
        if cfg.density_radius > 0.0 {
            let density = timer.stage(format!("density {tag}"), || {
                let seg = grow_leaf_with(
                    map,
                    &point(cfg.x),
                    tag,
                    cfg.density_radius,
                    &LeafOptions::with_max_step(cfg.leaf_step),
                )?;
                let opts = DeltaOptions {
                    tol: cfg.delta_tol,
                    ..Default::default()
                };
                leaf_density(&dynamics, &seg, 0.0, &opts)
            })?;
            integral = json!(density.integral());
            let mut t = Table::new(format!("density_{tag}"), &["arclength", "rho"]);
            for (s, r) in density.segment.arclengths.iter().zip(&density.rho) {
                t.push(vec![json!(s), json!(r)]);
            }
            out.tables.push(t);
        }
        summary_t.push(vec![
            json!(tag.short()),
            json!(lambda.value),
            json!(lambda.std_error),
            json!(lambda.depth_bias),
            json!(defect),
            ce.map_or(Value::Null, |c| json!(c.value)),
            ce.map_or(Value::Null, |c| json!(c.std_error)),
            integral,
        ]);
        out.summary.insert(
            format!("lambda_{tag}"),
            json!({ "value": lambda.value, "std_error": lambda.std_error, "depth_bias": lambda.depth_bias }),
        );
    }
    out.tables.insert(0, summary_t);
    Ok(out)
}

fn cmd_conjugacy(map: &AnosovMap, cfg: &ConjugacyConfig, timer: &mut Timer) -> Result<VerbOutput> {
    let h = timer.stage("solve", || solve_conjugacy(map, cfg.grid_n, cfg.tol))?;
    let semi = timer.stage("verify", || verify_semiconjugacy(&h, map, cfg.verify_grid))?;
    let probe_h = crate::conjugacy::conjugacy_series(map, cfg.probe_tol)?;
    let x = point(cfg.x);
    let mut images = Table::new(
        "foliation_images",
        &[
            "tag",
            "line_deviation",
            "plane_deviation",
            "monotone",
            "vertices",
        ],
    );
    let mut probes = Table::new(
        "regularity_summary",
        &[
            "tag",
            "period",
            "b1",
            "b2",
            "b3",
            "predicted_exponent",
            "exponent",
            "exponent_std_error",
            "quotient_drift",
            "noise_floor",
            "verdict",
        ],
    );
    let mut ladder_t = Table::new("regularity", &["tag", "scale", "quotient"]);
    for tag in BundleTag::ALL {
        let img = timer.stage(format!("image {tag}"), || {
            foliation_image_check(&h, tag, &x, cfg.leaf_radius)
        })?;
        images.push(vec![
            json!(tag.short()),
            json!(img.line_deviation),
            json!(img.plane_deviation),
            json!(img.monotone),
            json!(img.vertices),
        ]);
        let (probe, rep) = timer.stage(format!("probe {tag}"), || {
            let probe = select_probe_base(map, tag, cfg.probe_max_period)?;
            let (res, _) = probe_resolution(&probe_h, tag, &probe.point)?;
            let ladder: Vec<f64> = dyadic_ladder(cfg.ladder[0], cfg.ladder[1])
                .into_iter()
                .filter(|d| *d >= res)
                .collect();
            Ok((
                probe,
                leafwise_regularity_probe(&probe_h, tag, &probe.point, &ladder)?,
            ))
        })?;
        let b = probe.point.rep();
        probes.push(vec![
            json!(tag.short()),
            json!(probe.period),
            json!(b[0]),
            json!(b[1]),
            json!(b[2]),
            json!(probe.predicted_exponent),
            json!(rep.exponent),
            json!(rep.exponent_std_error),
            json!(rep.quotient_drift),
            json!(rep.noise_floor),
            json!(rep.verdict.to_string()),
        ]);
        for (d, q) in rep.scales.iter().zip(&rep.quotients) {
            ladder_t.push(vec![json!(tag.short()), json!(d), json!(q)]);
        }
    }
    let mut out = VerbOutput::default();
    out.summary.insert(
        "conjugacy".into(),
        json!({
            "grid_n": cfg.grid_n,
            "tol": cfg.tol,
            "terms": h.terms,
            "residual": h.residual,
            "anchor_error": h.anchor_error,
            "basis_condition": h.basis_condition,
            "u_sup": h.u.sup_norm(),
            "semiconjugacy": to_value(&semi),
        }),
    );
    out.tables = vec![images, probes, ladder_t];
    if cfg.write_field {
        let mut t = Table::new("u_field", &["i", "j", "k", "u1", "u2", "u3"]);
        let n = h.u.n;
        for (idx, v) in h.u.values.iter().enumerate() {
            t.push(vec![
                json!(idx / (n * n)),
                json!((idx / n) % n),
                json!(idx % n),
                json!(v[0]),
                json!(v[1]),
                json!(v[2]),
            ]);
        }
        out.tables.push(t);
    }
    Ok(out)
}

fn cmd_rigidity(
    map: &AnosovMap,
    cfg: &RigidityConfig,
    seed: u64,
    timer: &mut Timer,
) -> Result<VerbOutput> {
    let report = timer.stage("rigidity", || rigidity_experiment(map, &cfg.params(seed)))?;
    let mut t = Table::new(
        "rigidity",
        &[
            "tag",
            "lambda",
            "lambda_std_error",
            "lambda_depth_bias",
            "chi",
            "chi_std_error",
            "entropy",
            "gap",
            "sigma",
            "strict_gap",
            "within_tolerance",
            "probe_period",
            "predicted_exponent",
            "exponent",
            "quotient_drift",
            "verdict",
        ],
    );
    let mut ladder_t = Table::new("regularity", &["tag", "scale", "quotient"]);
    for r in &report.tags {
        t.push(vec![
            json!(r.tag.short()),
            json!(r.lambda),
            json!(r.lambda_std_error),
            json!(r.lambda_depth_bias),
            json!(r.chi),
            json!(r.chi_std_error),
            r.entropy.map_or(Value::Null, |h| json!(h)),
            json!(r.gap),
            json!(r.sigma),
            json!(r.strict_gap),
            json!(r.within_tolerance),
            json!(r.probe.period),
            json!(r.probe.predicted_exponent),
            json!(r.regularity.exponent),
            json!(r.regularity.quotient_drift),
            json!(r.regularity.verdict.to_string()),
        ]);
        for (d, q) in r.regularity.scales.iter().zip(&r.regularity.quotients) {
            ladder_t.push(vec![json!(r.tag.short()), json!(d), json!(q)]);
        }
    }
    let mut out = VerbOutput::default();
    out.summary.insert("report".into(), to_value(&report));
    out.tables = vec![t, ladder_t];
    Ok(out)
}
