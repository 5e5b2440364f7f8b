//! The scenario config file: one TOML document with topology, scenario,
//! inference and model defaults, plus a format version.
//!
//! ```toml
//! version = 1
//!
//! [inference]
//! memory_depth = 20
//! space_cap = 15
//! order = 0
//! lambda0 = 2e-5
//!
//! [model]
//! bandwidth = 20.0
//!
//! [scenario]
//! seed = 7
//! population = { count = 10, channels = 3, bins = 64, birth_window = 2.0, lifetime = 30 }
//!
//! [[topology.cameras]]
//! borders = 1
//! traversal = [[1.0]]
//! # ...
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::appearance::{DEFAULT_BANDWIDTH, DEFAULT_LAMBDA0};
use crate::error::{Error, Result};
use crate::inference::InferenceConfig;
use crate::scenario::{
    office_scenario, office_topology, random_population, Deletion, DwellModel, ObjectSpec, PopulationSpec,
    ScenarioSpec, OFFICE_BANDWIDTH, OFFICE_LAMBDA0, OFFICE_VISITS,
};
use crate::topology::Topology;

pub const CONFIG_VERSION: u32 = 1;

/// Directory searched for relative config paths that do not exist as given.
pub const CONFIG_DIR_ENV: &str = "CAMNET_CONFIG_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDefaults {
    /// Appearance kernel bandwidth used when learning.
    #[serde(default = "default_bandwidth")]
    pub bandwidth: f64,
    /// New-object likelihood stored in learned models.
    #[serde(default = "default_lambda0")]
    pub lambda0: f64,
}

fn default_bandwidth() -> f64 {
    DEFAULT_BANDWIDTH
}

fn default_lambda0() -> f64 {
    DEFAULT_LAMBDA0
}

impl Default for ModelDefaults {
    fn default() -> Self {
        Self { bandwidth: DEFAULT_BANDWIDTH, lambda0: DEFAULT_LAMBDA0 }
    }
}

/// Scenario section: explicit objects, a random population, or both.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub population: Option<PopulationSpec>,
    #[serde(default)]
    pub dwell: DwellModel,
    #[serde(default)]
    pub camera_dwell: Vec<DwellModel>,
    #[serde(default = "one")]
    pub travel_sigma_scale: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub missing: Option<Deletion>,
}

fn one() -> f64 {
    1.0
}

impl ScenarioConfig {
    /// Concrete scenario for `seed`; the population, if any, is drawn with the same seed.
    pub fn spec(&self, topo: &Topology, seed: u64) -> Result<ScenarioSpec> {
        let mut objects = self.objects.clone();
        if let Some(pop) = &self.population {
            let offset = objects.len();
            objects.extend(random_population(topo, pop, seed)?.into_iter().map(|mut o| {
                o.identity += offset;
                o
            }));
        }
        if objects.is_empty() {
            return Err(Error::Config("scenario has neither objects nor a population".into()));
        }
        let spec = ScenarioSpec {
            objects,
            dwell: self.dwell,
            camera_dwell: self.camera_dwell.clone(),
            travel_sigma_scale: self.travel_sigma_scale,
            seed,
            missing: self.missing,
        };
        spec.validate(topo)?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    pub topology: Topology,
    #[serde(default)]
    pub scenario: Option<ScenarioConfig>,
    #[serde(default)]
    pub inference: InferenceConfig,
    #[serde(default)]
    pub model: ModelDefaults,
}

impl Config {
    /// The office scenario with its calibrated settings.
    pub fn office() -> Self {
        let topology = office_topology();
        let template = office_scenario(&topology, 10, OFFICE_VISITS, 0).expect("office scenario is valid");
        let population = PopulationSpec {
            count: 10,
            channels: 3,
            bins: 64,
            birth_window: 2.0,
            lifetime: Some(OFFICE_VISITS),
            width: (0.125, 0.22),
            min_separation: 1.0,
            margin: 0.15,
        };
        Self {
            version: CONFIG_VERSION,
            topology,
            scenario: Some(ScenarioConfig {
                objects: Vec::new(),
                population: Some(population),
                dwell: template.dwell,
                camera_dwell: Vec::new(),
                travel_sigma_scale: 1.0,
                seed: 1,
                missing: None,
            }),
            inference: InferenceConfig { lambda0: OFFICE_LAMBDA0, ..InferenceConfig::default() },
            model: ModelDefaults { bandwidth: OFFICE_BANDWIDTH, lambda0: OFFICE_LAMBDA0 },
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| line_of(text, s.start));
            let msg = match text.lines().nth(line.saturating_sub(1)).map(str::trim) {
                Some(src) if line > 0 && !src.is_empty() => format!("{} (`{src}`)", e.message()),
                _ => e.message().to_string(),
            };
            Error::Parse { line, msg }
        })?;
        if cfg.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        cfg.inference.validate()?;
        if !(cfg.model.bandwidth >= 0.0 && cfg.model.lambda0 > 0.0) {
            return Err(Error::Config("model bandwidth must be >= 0 and lambda0 > 0".into()));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = resolve(path.as_ref());
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn scenario(&self) -> Result<&ScenarioConfig> {
        self.scenario.as_ref().ok_or_else(|| Error::Config("config has no [scenario] section".into()))
    }
}

/// `path` as given if it exists or is absolute, otherwise under `$CAMNET_CONFIG_DIR`.
pub fn resolve(path: &Path) -> PathBuf {
    if path.is_absolute() || path.exists() {
        return path.to_path_buf();
    }
    match std::env::var_os(CONFIG_DIR_ENV) {
        Some(dir) => Path::new(&dir).join(path),
        None => path.to_path_buf(),
    }
}

/// 1-based line containing byte offset `pos`.
fn line_of(text: &str, pos: usize) -> usize {
    text[..pos.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}
