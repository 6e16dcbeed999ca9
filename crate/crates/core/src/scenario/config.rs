//! JSON scenario configuration.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::free_space::{RetrievalDirection, MAX_OPTICAL_DEPTH};
use crate::optimizer::AscentConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// Largest number of time nodes a scenario may ask for.
pub const MAX_TIME_NODES: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Cavity,
    FreeSpace,
    CribCavity,
    CribFree,
}

impl ModelKind {
    pub fn is_cavity(self) -> bool {
        matches!(self, ModelKind::Cavity | ModelKind::CribCavity)
    }

    /// Name of the coupling strength: `C` or `d`.
    pub fn strength_name(self) -> &'static str {
        if self.is_cavity() {
            "C"
        } else {
            "d"
        }
    }

    pub fn default_methods(self) -> Vec<Method> {
        match self {
            ModelKind::Cavity | ModelKind::FreeSpace => vec![Method::Optimal],
            ModelKind::CribCavity | ModelKind::CribFree => {
                vec![Method::Fast, Method::Crib, Method::Optimal]
            }
        }
    }
}

/// How a configuration names the storage duration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// `T` in units of `1/γ`.
    Duration,
    /// `TCγ` (cavity) or `Tdγ` (free space).
    ScaledDuration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValues {
    List(Vec<f64>),
    Log {
        from: f64,
        to: f64,
        #[serde(default = "default_per_decade")]
        per_decade: usize,
    },
}

fn default_per_decade() -> usize {
    12
}

impl SweepValues {
    pub fn expand(&self) -> Result<Vec<f64>> {
        match *self {
            SweepValues::List(ref v) => Ok(v.clone()),
            SweepValues::Log { from, to, per_decade } => {
                if !(from > 0.0) || !(to >= from) || !to.is_finite() {
                    return config(format!("log sweep needs 0 < from <= to (got {from}..{to})"));
                }
                if per_decade == 0 {
                    return config("log sweep needs per_decade >= 1");
                }
                let decades = (to / from).log10();
                let n = (decades * per_decade as f64 + 1e-9).floor() as usize;
                let mut v: Vec<f64> =
                    (0..=n).map(|k| from * 10f64.powf(k as f64 / per_decade as f64)).collect();
                if (v[n] / to - 1.0).abs() > 1e-9 {
                    v.push(to);
                }
                Ok(v)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: SweepValues,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InputShape {
    #[default]
    GaussianLike,
    Square,
    /// CSV with columns `t,re[,im]` on `[0, T]`, resampled to the run grid.
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Gradient-ascent control, homogeneous line.
    Optimal,
    /// Best constant control, homogeneous line.
    Constant,
    /// Fast storage and retrieval, homogeneous line.
    Fast,
    /// Fast storage and retrieval with the best reversible profile width.
    Crib,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Optimal => "optimal",
            Method::Constant => "constant",
            Method::Fast => "fast",
            Method::Crib => "crib",
        }
    }
}

/// Units of the initial constant controls in `optimizer.multi_start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitScale {
    Absolute,
    /// Multiples of `1/√T`.
    #[default]
    InverseSqrtDuration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSettings {
    pub nodes_per_unit_time: f64,
    pub min_time_nodes: usize,
    /// Cavity only: nodes per `1/((1+C)γ)`.
    pub steps_per_decay: f64,
    pub space_nodes: usize,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self { nodes_per_unit_time: 40.0, min_time_nodes: 401, steps_per_decay: 50.0, space_nodes: 201 }
    }
}

impl GridSettings {
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            nodes_per_unit_time: self.nodes_per_unit_time * factor,
            min_time_nodes: ((self.min_time_nodes - 1) as f64 * factor).ceil() as usize + 1,
            steps_per_decay: self.steps_per_decay * factor,
            space_nodes: ((self.space_nodes - 1) as f64 * factor).ceil() as usize + 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.nodes_per_unit_time > 0.0) || !(self.steps_per_decay > 0.0) {
            return config("grid densities must be positive");
        }
        if self.min_time_nodes < 3 || self.space_nodes < 3 {
            return config("grids need at least 3 nodes");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    #[default]
    TwoClass,
    Gaussian,
    Lorentzian,
}

/// Width search, widths in units of `1/T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum WidthSearch {
    /// Evaluate every width, then refine between the neighbours of the best.
    Scan { multipliers: Vec<f64> },
    /// Width-gradient ascent from a single start.
    Ascent { start: f64, max_width: f64 },
}

impl Default for WidthSearch {
    fn default() -> Self {
        WidthSearch::Scan { multipliers: vec![0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CribSettings {
    pub profile: ProfileKind,
    /// Ignored for `two_class`.
    pub classes: usize,
    pub width_search: WidthSearch,
}

impl Default for CribSettings {
    fn default() -> Self {
        Self { profile: ProfileKind::TwoClass, classes: 32, width_search: WidthSearch::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub model: ModelKind,
    /// `C` values for cavity models, `d` values for free space.
    pub strengths: Vec<f64>,
    pub sweep: Sweep,
    #[serde(default)]
    pub input: InputShape,
    /// Empty means the model's defaults.
    #[serde(default)]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub optimizer: AscentConfig,
    #[serde(default)]
    pub init_scale: InitScale,
    /// Relative jitter applied to the initial controls, drawn from `seed`.
    #[serde(default)]
    pub init_jitter: f64,
    #[serde(default)]
    pub grid: GridSettings,
    #[serde(default)]
    pub crib: CribSettings,
    /// Free space: direction of the complete retrieval scored by `optimal`
    /// and `constant`. CRIB always retrieves backward.
    #[serde(default = "backward")]
    pub retrieval: RetrievalDirection,
    /// Write optimized controls per sweep point.
    #[serde(default)]
    pub waveforms: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn backward() -> RetrievalDirection {
    RetrievalDirection::Backward
}

impl ScenarioConfig {
    pub fn methods(&self) -> Vec<Method> {
        if self.methods.is_empty() {
            self.model.default_methods()
        } else {
            self.methods.clone()
        }
    }

    /// Initial constants as given in the config (before scaling).
    pub fn initial_controls(&self) -> Vec<f64> {
        if self.optimizer.multi_start.is_empty() {
            vec![1.0, 3.0]
        } else {
            self.optimizer.multi_start.clone()
        }
    }

    /// Durations `T` for strength `s`, in sweep order.
    pub fn durations(&self, strength: f64) -> Result<Vec<f64>> {
        let v = self.sweep.values.expand()?;
        Ok(match self.sweep.axis {
            SweepAxis::Duration => v,
            SweepAxis::ScaledDuration => v.into_iter().map(|x| x / strength).collect(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.name.is_empty()
            || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return config(format!("name {:?} must be nonempty [A-Za-z0-9_-]", self.name));
        }
        if self.strengths.is_empty() {
            return config("strengths list is empty");
        }
        for &s in &self.strengths {
            if !(s > 0.0) || !s.is_finite() {
                return config(format!("{} must be positive (got {s})", self.model.strength_name()));
            }
            if !self.model.is_cavity() && s > MAX_OPTICAL_DEPTH {
                return config(format!("d = {s} exceeds the supported maximum {MAX_OPTICAL_DEPTH}"));
            }
        }
        let values = self.sweep.values.expand()?;
        if values.is_empty() {
            return config("sweep list is empty");
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return config(format!("sweep values must be positive (got {v})"));
        }
        let methods = self.methods();
        for (i, m) in methods.iter().enumerate() {
            if methods[..i].contains(m) {
                return config(format!("method {} listed twice", m.label()));
            }
        }
        if let InputShape::File(ref p) = self.input {
            if !p.is_file() {
                return config(format!("input file {} does not exist", p.display()));
            }
        }
        if !(self.init_jitter >= 0.0) || self.init_jitter >= 1.0 {
            return config("init_jitter must lie in [0, 1)");
        }
        if self.initial_controls().iter().any(|v| !v.is_finite()) {
            return config("initial controls must be finite");
        }
        self.optimizer.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.grid.validate()?;
        let crib_used = methods.iter().any(|m| matches!(m, Method::Fast | Method::Crib));
        if crib_used {
            if self.crib.profile != ProfileKind::TwoClass && self.crib.classes < 2 {
                return config("CRIB profile needs at least 2 classes");
            }
            match self.crib.width_search {
                WidthSearch::Scan { ref multipliers } => {
                    if multipliers.is_empty() {
                        return config("width scan is empty");
                    }
                    if multipliers.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
                        return config("width multipliers must be nonnegative");
                    }
                }
                WidthSearch::Ascent { start, max_width } => {
                    if !(start > 0.0) || !(max_width >= start) || !max_width.is_finite() {
                        return config("width ascent needs 0 < start <= max_width");
                    }
                }
            }
        }
        Ok(())
    }
}

/// Several scenarios tabulated side by side on a shared sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub compare: Vec<ScenarioConfig>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl CompareConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.compare.is_empty() {
            return config("comparison lists no scenarios");
        }
        for c in &self.compare {
            c.validate()?;
        }
        let first = &self.compare[0];
        for c in &self.compare[1..] {
            if c.sweep.axis != first.sweep.axis || c.sweep.values.expand()? != first.sweep.values.expand()? {
                return config(format!("mismatched sweep axes: {} vs {}", first.name, c.name));
            }
            if c.strengths != first.strengths || c.model.is_cavity() != first.model.is_cavity() {
                return config(format!("mismatched strengths: {} vs {}", first.name, c.name));
            }
            if c.input != first.input {
                return config(format!("mismatched input modes: {} vs {}", first.name, c.name));
            }
        }
        for (i, c) in self.compare.iter().enumerate() {
            if self.compare[..i].iter().any(|o| o.name == c.name) {
                return config(format!("scenario name {} used twice", c.name));
            }
        }
        Ok(())
    }
}

/// Contents of a config file.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioFile {
    Single(ScenarioConfig),
    Compare(CompareConfig),
}

impl ScenarioFile {
    pub fn name(&self) -> &str {
        match self {
            ScenarioFile::Single(c) => &c.name,
            ScenarioFile::Compare(c) => &c.name,
        }
    }

    pub fn description(&self) -> &str {
        match self {
            ScenarioFile::Single(c) => &c.description,
            ScenarioFile::Compare(c) => &c.description,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let file = if value.get("compare").is_some() {
            ScenarioFile::Compare(serde_json::from_value(value)?)
        } else {
            ScenarioFile::Single(serde_json::from_value(value)?)
        };
        file.validate()?;
        Ok(file)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(match self {
            ScenarioFile::Single(c) => serde_json::to_string_pretty(c)?,
            ScenarioFile::Compare(c) => serde_json::to_string_pretty(c)?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ScenarioFile::Single(c) => c.validate(),
            ScenarioFile::Compare(c) => c.validate(),
        }
    }

    pub fn output_dir(&self) -> Option<&PathBuf> {
        match self {
            ScenarioFile::Single(c) => c.output_dir.as_ref(),
            ScenarioFile::Compare(c) => c.output_dir.as_ref(),
        }
    }
}

fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
