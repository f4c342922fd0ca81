use std::path::{Path, PathBuf};

use hriesz::diagnostics::Normalization;
use hriesz::fractal::{IfsConfig, DEFAULT_ATOM_CAP};
use hriesz::subgroups::{HaarGrid, SubgroupSpec};
use hriesz::Tolerances;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::output::Failure;

pub const SCHEMA_VERSION: u32 = 1;

fn geometric(base: f64, from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|j| base.powi(-j)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub n: usize,
    pub seed: u64,
    pub thread_count: Option<usize>,
    pub tolerances: Tolerances,
    pub atom_cap: usize,
    pub output_dir: PathBuf,
    pub quick: bool,
    pub ifs: IfsBlock,
    pub riesz: RieszBlock,
    pub diagnostics: DiagnosticsBlock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IfsBlock {
    pub system: IfsConfig,
    pub level: usize,
    /// Base point of the cylinder measures; the fixed point of the first map
    /// when absent.
    pub base: Option<Vec<f64>>,
    pub phi_resolution: usize,
    pub phi_tol: f64,
    pub verify_samples: usize,
    pub separation_levels: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SubgroupConfig {
    TAxis { n: usize },
    Vertical { n: usize, basis: Vec<Vec<f64>> },
    Horizontal { n: usize, basis: Vec<Vec<f64>> },
}

impl SubgroupConfig {
    pub fn build(&self, tol: &Tolerances) -> hriesz::Result<SubgroupSpec> {
        match self {
            SubgroupConfig::TAxis { n } => SubgroupSpec::vertical(*n, &[]),
            SubgroupConfig::Vertical { n, basis } => SubgroupSpec::vertical(*n, basis),
            SubgroupConfig::Horizontal { n, basis } => SubgroupSpec::horizontal(*n, basis, tol),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub window: f64,
    pub resolution: usize,
    /// Use Korányi-isotropic cells (`2·res` horizontal, `2·res²` vertical).
    pub isotropic: bool,
}

impl GridConfig {
    pub fn build(&self, atom_cap: usize) -> HaarGrid {
        let mut g = if self.isotropic {
            HaarGrid::isotropic(self.window, self.resolution)
        } else {
            HaarGrid::new(self.window, self.resolution)
        };
        g.atom_cap = atom_cap;
        g
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasureSource {
    /// Cylinder measure of the configured IFS.
    Cylinder {
        level: usize,
    },
    /// Atoms from a CSV written by `ifs generate`.
    Csv {
        path: PathBuf,
        spacing: Option<f64>,
    },
    Haar {
        subgroup: SubgroupConfig,
        grid: GridConfig,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PointSelection {
    Identity,
    /// Atoms of the measure, drawn uniformly.
    Atoms {
        count: usize,
    },
    /// Fixed points of uniformly drawn cylinder words.
    CylinderFixedPoints {
        count: usize,
        word_length: usize,
    },
    /// Fixed points of the given 0-based words.
    Words {
        words: Vec<Vec<usize>>,
    },
    Explicit {
        points: Vec<Vec<f64>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum IntegrandConfig {
    One,
    /// 1-based coordinate index.
    Coordinate {
        index: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expectation {
    Diverging,
    Bounded,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformBlock {
    pub s: f64,
    pub measure: MeasureSource,
    pub points: PointSelection,
    pub integrand: IntegrandConfig,
    pub eps: Vec<f64>,
    /// Outer radius; plain truncation when absent.
    pub outer: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivergenceBlock {
    pub s: f64,
    pub measure: MeasureSource,
    pub points: PointSelection,
    pub eps: Vec<f64>,
    pub outer: f64,
    pub threshold: f64,
    pub bounded_slope: f64,
    pub expect: Expectation,
    /// Fraction of points that must carry the expected verdict.
    pub min_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeBlock {
    pub subgroup: SubgroupConfig,
    /// Defaults to the Hausdorff dimension of the subgroup.
    pub s: Option<f64>,
    pub grid: GridConfig,
    pub eps: Vec<f64>,
    pub point_count: usize,
    pub outer: f64,
    pub bounded_slope: f64,
    pub expect: Expectation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RieszBlock {
    pub transform: TransformBlock,
    pub divergence: DivergenceBlock,
    pub probe: ProbeBlock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdBlock {
    pub measure: MeasureSource,
    /// Defaults to the dimension of the measure's source.
    pub a: Option<f64>,
    pub centers: usize,
    pub radii: Vec<f64>,
    pub expect_regular: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeBlock {
    pub measure: MeasureSource,
    pub a: Option<f64>,
    pub delta: f64,
    pub radii: Vec<f64>,
    pub vertices: usize,
    /// Hausdorff dimension `m` of the sampled family `𝒱_{m−1} ∪ 𝒲_m`.
    pub family_dimension: usize,
    pub family_count: usize,
    /// Overrides the sampled family.
    pub subgroups: Option<Vec<SubgroupConfig>>,
    pub expect_positive: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TangentBlock {
    pub measure: MeasureSource,
    pub point: PointSelection,
    pub scales: Vec<f64>,
    pub normalization: Normalization,
    /// Compared against the blow-ups on balls centred at the identity.
    pub subgroup: Option<SubgroupConfig>,
    pub ball_radii: Vec<f64>,
    /// Atoms within this radius of the identity go to the CSV.
    pub csv_window: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorestBlock {
    pub n_values: Vec<usize>,
    pub deltas: Vec<f64>,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsBlock {
    pub ad: AdBlock,
    pub cone: ConeBlock,
    pub tangent: TangentBlock,
    pub horest: HorestBlock,
}

impl RunConfig {
    /// Defaults reproduce the reference experiments; `quick` shrinks them.
    pub fn defaults(quick: bool) -> Self {
        let fine_level = if quick { 5 } else { 6 };
        let cylinder = |level| MeasureSource::Cylinder { level };
        RunConfig {
            schema_version: SCHEMA_VERSION,
            n: 1,
            seed: 0,
            thread_count: None,
            tolerances: Tolerances::default(),
            atom_cap: DEFAULT_ATOM_CAP,
            output_dir: PathBuf::from("out"),
            quick,
            ifs: IfsBlock {
                system: IfsConfig::Strichartz { n: 1, r: 0.25 },
                level: 4,
                base: None,
                phi_resolution: if quick { 65 } else { 257 },
                phi_tol: 1e-12,
                verify_samples: if quick { 10_000 } else { 100_000 },
                separation_levels: if quick { vec![3, 4] } else { vec![4, 5] },
            },
            riesz: RieszBlock {
                transform: TransformBlock {
                    s: 2.0,
                    measure: cylinder(4),
                    points: PointSelection::Identity,
                    integrand: IntegrandConfig::One,
                    eps: geometric(4.0, 1, 3),
                    outer: None,
                },
                divergence: DivergenceBlock {
                    s: 2.0,
                    measure: cylinder(fine_level),
                    points: PointSelection::CylinderFixedPoints {
                        count: 32,
                        word_length: 2,
                    },
                    eps: geometric(4.0, 1, fine_level as i32 - 1),
                    outer: 1.0,
                    threshold: 0.05,
                    bounded_slope: 0.01,
                    expect: Expectation::Diverging,
                    min_fraction: 0.75,
                },
                probe: ProbeBlock {
                    subgroup: SubgroupConfig::TAxis { n: 1 },
                    s: None,
                    grid: GridConfig {
                        window: 2.0,
                        resolution: if quick { 512 } else { 2048 },
                        isotropic: true,
                    },
                    eps: geometric(2.0, 1, if quick { 6 } else { 8 }),
                    point_count: 8,
                    outer: 1.0,
                    bounded_slope: 0.01,
                    expect: Expectation::Bounded,
                },
            },
            diagnostics: DiagnosticsBlock {
                ad: AdBlock {
                    measure: cylinder(5),
                    a: None,
                    centers: 64,
                    radii: geometric(4.0, 1, 4),
                    expect_regular: Some(true),
                },
                cone: ConeBlock {
                    measure: cylinder(fine_level),
                    a: None,
                    delta: 1.0 / 16.0,
                    radii: geometric(4.0, 1, 4),
                    vertices: 8,
                    family_dimension: 2,
                    family_count: 8,
                    subgroups: None,
                    expect_positive: true,
                },
                tangent: TangentBlock {
                    measure: cylinder(5),
                    point: PointSelection::CylinderFixedPoints {
                        count: 1,
                        word_length: 2,
                    },
                    scales: geometric(4.0, 1, 2),
                    normalization: Normalization::BallMass,
                    subgroup: Some(SubgroupConfig::TAxis { n: 1 }),
                    ball_radii: vec![0.5, 1.0],
                    csv_window: 2.0,
                },
                horest: HorestBlock {
                    n_values: vec![1, 2],
                    deltas: vec![0.1, 0.5, 0.9],
                    trials: if quick { 100_000 } else { 1_000_000 },
                },
            },
        }
    }

    /// Reads a config file and lays it over [`RunConfig::defaults`].
    pub fn load(path: Option<&Path>, quick_flag: bool) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::defaults(quick_flag));
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
        let user: Value =
            serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        Self::from_value(user, quick_flag)
    }

    pub fn from_value(user: Value, quick_flag: bool) -> Result<Self, Failure> {
        let version = user.get("schema_version").and_then(Value::as_u64);
        match version {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(v) => {
                return Err(Failure::config(format!(
                    "schema_version {v} is not supported (expected {SCHEMA_VERSION})"
                )))
            }
            None => return Err(Failure::config("config is missing schema_version")),
        }
        let quick = quick_flag || user.get("quick").and_then(Value::as_bool).unwrap_or(false);
        let mut merged = serde_json::to_value(Self::defaults(quick)).expect("defaults serialize");
        merge(&mut merged, user);
        merged["quick"] = Value::Bool(quick);
        let cfg: RunConfig = serde_json::from_value(merged).map_err(|e| Failure::config(e.to_string()))?;
        cfg.tolerances
            .validate()
            .map_err(|e| Failure::config(format!("tolerances: {e}")))?;
        Ok(cfg)
    }
}

/// Recursive object merge. Tagged objects (with a `kind` key) and arrays are
/// replaced wholesale.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() && v.get("kind").is_none() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}
