use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use faultloc::emtsim::SimConfig;
use faultloc::netmodel::{load_network, NetworkModel, ScenarioGrid};
use faultloc::pipeline::PipelineConfig;

pub const DATA_DIR_ENV: &str = "FAULTLOC_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    Desk,
    Paper,
}

impl Scale {
    pub fn grid(self) -> ScenarioGrid {
        match self {
            Scale::Desk => ScenarioGrid::desk(),
            Scale::Paper => ScenarioGrid::paper(),
        }
    }

    pub fn sim(self) -> SimConfig {
        match self {
            Scale::Desk => SimConfig::desk(),
            Scale::Paper => SimConfig::paper(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scale::Desk => "desk",
            Scale::Paper => "paper",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Robustness {
    /// Out-of-grid fault scenarios.
    Dataset1,
    /// Training grid with loads raised by 30 %.
    Dataset2,
}

impl Robustness {
    pub fn grid(self, base: &ScenarioGrid) -> ScenarioGrid {
        match self {
            Robustness::Dataset1 => ScenarioGrid::robustness_dataset1(),
            Robustness::Dataset2 => ScenarioGrid::robustness_dataset2(base),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Robustness::Dataset1 => "robustness-dataset1",
            Robustness::Dataset2 => "robustness-dataset2",
        }
    }
}

/// Optional overrides read from `--config`. Each present section replaces
/// the corresponding preset wholesale.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub network: Option<PathBuf>,
    pub grid: Option<ScenarioGrid>,
    pub sim: Option<SimConfig>,
    pub pipeline: Option<PipelineConfig>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        let mut cfg: RunConfig = parsed.map_err(|detail| faultloc::Error::Parse {
            what: path.display().to_string(),
            detail,
        })?;
        // network paths are relative to the config file
        if let (Some(net), Some(dir)) = (&cfg.network, path.parent()) {
            if net.is_relative() {
                cfg.network = Some(dir.join(net));
            }
        }
        Ok(cfg)
    }

    pub fn network(&self, flag: Option<&Path>) -> Result<NetworkModel> {
        match flag.or(self.network.as_deref()) {
            Some(p) => Ok(load_network(p)?),
            None => Ok(NetworkModel::bundled()),
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        self.pipeline.clone().unwrap_or_default()
    }
}

/// Root for default output locations.
pub fn data_root() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("faultloc-data"))
}

pub fn output_dir(flag: Option<PathBuf>, default: impl AsRef<Path>) -> PathBuf {
    flag.unwrap_or_else(|| data_root().join(default))
}

/// Creates `dir`, refusing to reuse a directory that already holds a run
/// unless `force` is set.
pub fn prepare_output(dir: &Path, force: bool) -> Result<()> {
    if dir.join(crate::manifest::RunManifest::FILE_NAME).exists() && !force {
        bail!(faultloc::Error::InvalidConfig(format!(
            "{} already holds a run; pass --force to overwrite",
            dir.display()
        )));
    }
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

pub fn dir_name(p: &Path) -> String {
    p.file_name().map_or_else(|| "dataset".into(), |n| n.to_string_lossy().into_owned())
}
