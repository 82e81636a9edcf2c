//! Simulation configuration read from TOML.
//!
//! ```toml
//! name = "cavity"
//! scenario = "generic"            # or "scattering"
//!
//! [mesh]
//! generator = "quad"              # "quad" | "tri"; or: file = "disk.mesh"
//! nx = 8
//! ny = 8
//! bbox = [0.0, 0.0, 1.0, 1.0]     # xmin, ymin, xmax, ymax
//! refine = 0
//! jitter = 0.0
//! seed = 0
//!
//! [[mesh.half_plane]]             # retag elements whose centroid c has
//! tag = 2                         # (c - point) . normal > 0
//! point = [1.0, 0.0]
//! normal = [1.0, 0.0]
//!
//! [[region]]
//! tag = 2
//! eps = 3.0                       # or eps_tensor = [[a, b], [b, c]]
//! mu = 1.0
//!
//! [time]
//! end = 1.0
//! cfl = 0.9                       # or dt = 1e-3
//!
//! [initial]
//! kind = "cavity"                 # "zero" | "cavity"
//! m = 1
//! n = 1
//!
//! [source]
//! kind = "plane-wave"             # "none" | "plane-wave"
//! x_min = 0.1
//! x_max = 0.2
//! t0 = 0.3
//! sigma = 0.08
//! amplitude = 1.0
//!
//! [output]
//! dir = "out"
//! stride = 0
//! times = [0.8, 1.2]
//!
//! [reference]
//! mode = "auto"                   # "auto" | "exact" | "self"
//! extra_levels = 2
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    #[default]
    Generic,
    /// Requires region tags 1 and 2 and a tagged obstacle boundary (tag 2).
    Scattering,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    Quad,
    Tri,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfPlane {
    pub tag: i64,
    pub point: [f64; 2],
    pub normal: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    pub generator: Option<Generator>,
    /// Relative paths are resolved against the config file's directory.
    pub file: Option<PathBuf>,
    #[serde(default = "default_cells")]
    pub nx: usize,
    #[serde(default = "default_cells")]
    pub ny: usize,
    #[serde(default = "default_bbox")]
    pub bbox: [f64; 4],
    #[serde(default)]
    pub refine: usize,
    #[serde(default)]
    pub jitter: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub half_plane: Vec<HalfPlane>,
}

fn default_cells() -> usize {
    8
}

fn default_bbox() -> [f64; 4] {
    [0.0, 0.0, 1.0, 1.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub tag: i64,
    pub eps: Option<f64>,
    pub eps_tensor: Option<[[f64; 2]; 2]>,
    #[serde(default = "one")]
    pub mu: f64,
}

impl RegionSpec {
    pub fn epsilon(&self) -> Result<[[f64; 2]; 2]> {
        match (self.eps, self.eps_tensor) {
            (Some(e), None) => Ok([[e, 0.0], [0.0, e]]),
            (None, Some(t)) => Ok(t),
            (None, None) => Ok([[1.0, 0.0], [0.0, 1.0]]),
            (Some(_), Some(_)) => Err(Error::Config(format!(
                "region {}: give either eps or eps_tensor, not both",
                self.tag
            ))),
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub end: f64,
    pub dt: Option<f64>,
    /// Fraction of the stability limit; 0.9 when neither `dt` nor `cfl` is set.
    pub cfl: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    #[default]
    Zero,
    Cavity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    #[serde(default)]
    pub kind: InitialKind,
    #[serde(default = "one_u32")]
    pub m: u32,
    #[serde(default = "one_u32")]
    pub n: u32,
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec {
            kind: InitialKind::Zero,
            m: 1,
            n: 1,
        }
    }
}

fn one_u32() -> u32 {
    1
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    #[default]
    None,
    /// Current `(0, a g(t))` in the strip `x_min < x < x_max`, with the
    /// Gaussian pulse `g(t) = exp(-((t - t0) / sigma)^2)`.
    PlaneWave,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    #[serde(default)]
    pub kind: SourceKind,
    #[serde(default)]
    pub x_min: f64,
    #[serde(default)]
    pub x_max: f64,
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

impl Default for SourceSpec {
    fn default() -> Self {
        SourceSpec {
            kind: SourceKind::None,
            x_min: 0.0,
            x_max: 0.0,
            t0: 0.0,
            sigma: 1.0,
            amplitude: 1.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    /// Snapshot every `stride` steps; 0 disables strided output.
    #[serde(default)]
    pub stride: usize,
    /// Additional snapshot times, rounded to the nearest step.
    #[serde(default)]
    pub times: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceMode {
    /// Exact solution when the initial data has one, else self-reference.
    #[default]
    Auto,
    Exact,
    #[serde(rename = "self")]
    SelfReference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    #[serde(default)]
    pub mode: ReferenceMode,
    /// Refinements of the self-reference beyond the finest study level.
    #[serde(default = "two")]
    pub extra_levels: usize,
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        ReferenceSpec {
            mode: ReferenceMode::Auto,
            extra_levels: 2,
        }
    }
}

fn two() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub scenario: ScenarioKind,
    pub mesh: MeshSpec,
    #[serde(default)]
    pub region: Vec<RegionSpec>,
    pub time: TimeSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub source: SourceSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub reference: ReferenceSpec,
    /// Directory that relative paths refer to; set by [`SimConfig::load`].
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_name() -> String {
    "simulation".to_string()
}

impl SimConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Checks everything that does not need the mesh.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.time.end > 0.0 && self.time.end.is_finite()) {
            return bad(format!("time.end must be positive, got {}", self.time.end));
        }
        match (self.time.dt, self.time.cfl) {
            (Some(_), Some(_)) => return bad("give either time.dt or time.cfl, not both".into()),
            (Some(dt), None) if !(dt > 0.0 && dt.is_finite()) => {
                return bad(format!("time.dt must be positive, got {dt}"))
            }
            (None, Some(c)) if !(c > 0.0 && c <= 1.0) => {
                return bad(format!("time.cfl must lie in (0, 1], got {c}"))
            }
            _ => {}
        }
        match (&self.mesh.generator, &self.mesh.file) {
            (Some(_), Some(_)) => {
                return bad("give either mesh.generator or mesh.file, not both".into())
            }
            (None, None) => return bad("mesh needs a generator or a file".into()),
            (Some(_), None) if self.mesh.nx == 0 || self.mesh.ny == 0 => {
                return bad("mesh.nx and mesh.ny must be positive".into())
            }
            _ => {}
        }
        if !(0.0..0.5).contains(&self.mesh.jitter) {
            return bad(format!(
                "mesh.jitter must lie in [0, 0.5), got {}",
                self.mesh.jitter
            ));
        }
        let mut tags: Vec<i64> = self.region.iter().map(|r| r.tag).collect();
        tags.sort_unstable();
        if tags.windows(2).any(|w| w[0] == w[1]) {
            return bad("duplicate region tag".into());
        }
        for r in &self.region {
            r.epsilon()?;
            if !(r.mu > 0.0) {
                return bad(format!("region {}: mu must be positive", r.tag));
            }
        }
        if self.source.kind == SourceKind::PlaneWave
            && !(self.source.x_max > self.source.x_min && self.source.sigma > 0.0)
        {
            return bad("source strip needs x_min < x_max and sigma > 0".into());
        }
        if self
            .output
            .times
            .iter()
            .any(|t| !(*t >= 0.0 && *t <= self.time.end))
        {
            return bad("output.times must lie in [0, time.end]".into());
        }
        Ok(())
    }

    pub fn mesh_path(&self) -> Option<PathBuf> {
        self.mesh.file.as_ref().map(|f| self.base_dir.join(f))
    }

    pub fn output_dir(&self) -> Option<PathBuf> {
        self.output.dir.as_ref().map(|d| self.base_dir.join(d))
    }
}
