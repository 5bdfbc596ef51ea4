//! Run configuration: the JSON config file and the settings of one landscape run.
//!
//! ```json
//! {
//!   "backends": [ { "name": "my-device", ... } ],
//!   "noise_profiles": { "harsh": { "p1": 0.01, "p2": 0.1, "p_readout": 0.05 } },
//!   "defaults": { "backend": "mock-iontrap", "shots": 1000, "seed": 7, "workers": 4,
//!                 "step_divisor": 20, "graph": "paper" }
//! }
//! ```
//!
//! Backends in the file replace bundled backends of the same name.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::backends::{registry, AccessLayer, BackendDescriptor};
use crate::error::{Error, Result};
use crate::landscape::{GridSpec, LandscapeRequest, Layer, ShotMode, DEFAULT_DIVISOR, DEFAULT_SHOTS};
use crate::problem::WeightedGraph;
use crate::simulator::NoiseProfile;

pub const DEFAULT_SEED: u64 = 42;

/// `paper` for the bundled instance, anything else is a graph JSON file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphSource {
    Paper,
    File(PathBuf),
}

impl FromStr for GraphSource {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "paper" => GraphSource::Paper,
            path => GraphSource::File(PathBuf::from(path)),
        })
    }
}

impl GraphSource {
    pub fn load(&self) -> Result<WeightedGraph> {
        match self {
            GraphSource::Paper => Ok(WeightedGraph::paper_instance()),
            GraphSource::File(p) => WeightedGraph::from_json(&fs::read_to_string(p)?),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Defaults {
    pub backend: Option<String>,
    pub shots: Option<u64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub step_divisor: Option<usize>,
    pub graph: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub backends: Vec<BackendDescriptor>,
    #[serde(default)]
    pub noise_profiles: BTreeMap<String, NoiseProfile>,
    #[serde(default)]
    pub defaults: Defaults,
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: ConfigFile = serde_json::from_str(text)?;
        for n in c.noise_profiles.values() {
            n.validate()?;
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        ConfigFile::from_json(&fs::read_to_string(path)?)
    }

    /// Bundled backends merged with the configured ones.
    pub fn descriptors(&self) -> Vec<BackendDescriptor> {
        let mut all: BTreeMap<String, BackendDescriptor> =
            registry().into_iter().map(|d| (d.name.clone(), d)).collect();
        for d in &self.backends {
            all.insert(d.name.clone(), d.clone());
        }
        all.into_values().collect()
    }
}

/// Per-run noise changes: a named profile, then individual probabilities.
#[derive(Debug, Clone, Default)]
pub struct NoiseOverride {
    pub profile: Option<String>,
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    pub p_readout: Option<f64>,
}

impl NoiseOverride {
    pub fn is_empty(&self) -> bool {
        self.profile.is_none() && self.p1.is_none() && self.p2.is_none() && self.p_readout.is_none()
    }

    pub fn apply(&self, base: &NoiseProfile, profiles: &BTreeMap<String, NoiseProfile>) -> Result<NoiseProfile> {
        let mut n = match &self.profile {
            Some(name) => profiles
                .get(name)
                .cloned()
                .ok_or_else(|| Error::InvalidNoise(format!("unknown noise profile {name:?}")))?,
            None => base.clone(),
        };
        if let Some(p) = self.p1 {
            n.p1 = p;
        }
        if let Some(p) = self.p2 {
            n.p2 = p;
        }
        if let Some(p) = self.p_readout {
            n.p_readout = p;
        }
        if !self.is_empty() {
            n.label = "custom".into();
        }
        n.validate()?;
        Ok(n)
    }
}

/// Builds the access layer for `config`, with `noise` applied to `backend`.
pub fn build_access(config: &ConfigFile, backend: &str, noise: &NoiseOverride) -> Result<AccessLayer> {
    let mut descriptors = config.descriptors();
    let d = descriptors
        .iter_mut()
        .find(|d| d.name == backend)
        .ok_or_else(|| Error::UnknownBackend(backend.to_string()))?;
    d.noise = noise.apply(&d.noise, &config.noise_profiles)?;
    AccessLayer::new(descriptors)
}

/// Fully resolved settings of one `landscape run`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub graph: GraphSource,
    pub backend: String,
    pub depth: usize,
    pub warm_start: bool,
    pub fixed_layer1: Option<Layer>,
    pub shots: ShotMode,
    pub seed: u64,
    pub step_divisor: usize,
    pub workers: usize,
    pub out: PathBuf,
}

impl RunConfig {
    /// Checks the depth contract and that the backend exists in `access`.
    pub fn validate(&self, access: &AccessLayer) -> Result<()> {
        access.descriptor(&self.backend)?;
        match (self.depth, self.warm_start, self.fixed_layer1.is_some()) {
            (1, false, false) | (2, true, false) | (2, false, true) => Ok(()),
            (1, _, _) => Err(Error::InvalidLandscape(
                "depth 1 takes neither --warm-start nor a fixed first layer".into(),
            )),
            (2, true, true) => Err(Error::InvalidLandscape(
                "--warm-start and a fixed first layer are mutually exclusive".into(),
            )),
            (2, _, _) => Err(Error::InvalidLandscape(
                "depth 2 needs --warm-start or --fixed-gamma/--fixed-beta".into(),
            )),
            (p, _, _) => Err(Error::InvalidLandscape(format!("depth must be 1 or 2, got {p}"))),
        }
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::with_divisor(self.step_divisor)
    }

    /// Request for a single landscape; not meaningful for warm-start runs.
    pub fn request(&self) -> Result<LandscapeRequest> {
        Ok(LandscapeRequest {
            depth: self.depth,
            fixed_layer1: self.fixed_layer1,
            grid: self.grid()?,
            shots: self.shots,
            seed: self.seed,
        })
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            graph: GraphSource::Paper,
            backend: "local-exact".into(),
            depth: 1,
            warm_start: false,
            fixed_layer1: None,
            shots: ShotMode::Shots(DEFAULT_SHOTS),
            seed: DEFAULT_SEED,
            step_divisor: DEFAULT_DIVISOR,
            workers: 0,
            out: PathBuf::from("."),
        }
    }
}
