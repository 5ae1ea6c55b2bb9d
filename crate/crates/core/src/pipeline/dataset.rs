use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emtsim::{
    network_digest, read_record, record_id, simulate_fault, write_record, DatasetManifest, ManifestEntry, SimConfig,
    WaveformRecord, RECORD_FORMAT_VERSION,
};
use crate::error::{Error, Result};
use crate::features::StatTable;
use crate::netmodel::{enumerate_fault_locations, FaultScenario, NetworkModel, ScenarioGrid};

/// Statistics of one record together with its labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledStats {
    pub id: String,
    pub scenario: FaultScenario,
    pub stats: StatTable,
}

/// A dataset reduced to per-record statistic tables, sorted by record id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureDataset {
    pub rows: Vec<LabeledStats>,
}

impl FeatureDataset {
    pub fn new(mut rows: Vec<LabeledStats>) -> Result<Self> {
        rows.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = rows.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::Schema(format!("duplicate record id {}", w[0].id)));
        }
        for r in &rows {
            if r.scenario.fault_type().is_none() {
                return Err(Error::Schema(format!("record {} is not a fault record", r.id)));
            }
        }
        Ok(FeatureDataset { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn ids(&self) -> HashSet<&str> {
        self.rows.iter().map(|r| r.id.as_str()).collect()
    }

    /// Rows whose id is in `ids`, in dataset order.
    pub fn subset(&self, ids: &HashSet<&str>) -> FeatureDataset {
        FeatureDataset {
            rows: self.rows.iter().filter(|r| ids.contains(r.id.as_str())).cloned().collect(),
        }
    }
}

fn scenarios(net: &NetworkModel, grid: &ScenarioGrid, cfg: &SimConfig) -> Result<Vec<FaultScenario>> {
    grid.validate()?;
    cfg.validate()?;
    let locations = enumerate_fault_locations(net, grid.spacing_m);
    if locations.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "spacing {} m leaves no fault locations",
            grid.spacing_m
        )));
    }
    Ok(grid.records(&locations))
}

fn simulate_one(net: &NetworkModel, digest: &str, cfg: &SimConfig, sc: &FaultScenario) -> Result<(String, WaveformRecord)> {
    let rec = simulate_fault(net, sc, cfg)?;
    Ok((record_id(digest, cfg, sc), rec))
}

/// Simulates every scenario of `grid` and keeps only the statistic tables.
pub fn generate_in_memory(net: &NetworkModel, grid: &ScenarioGrid, cfg: &SimConfig, jobs: usize) -> Result<FeatureDataset> {
    let list = scenarios(net, grid, cfg)?;
    let digest = network_digest(net);
    let rows = super::with_jobs(jobs, || {
        list.par_iter()
            .map(|sc| {
                let (id, rec) = simulate_one(net, &digest, cfg, sc)?;
                Ok(LabeledStats {
                    id,
                    scenario: sc.clone(),
                    stats: StatTable::from_record(&rec)?,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    FeatureDataset::new(rows)
}

/// Simulates every scenario of `grid` into `out/records/` and writes the
/// manifest, with entries sorted by record id.
pub fn generate_dataset(
    net: &NetworkModel,
    grid: &ScenarioGrid,
    cfg: &SimConfig,
    out: impl AsRef<Path>,
    jobs: usize,
) -> Result<DatasetManifest> {
    let out = out.as_ref();
    let list = scenarios(net, grid, cfg)?;
    let digest = network_digest(net);
    std::fs::create_dir_all(out.join("records"))?;
    let mut entries = super::with_jobs(jobs, || {
        list.par_iter()
            .map(|sc| {
                let (id, rec) = simulate_one(net, &digest, cfg, sc)?;
                let file = format!("records/{id}.flwf");
                write_record(out.join(&file), &id, &rec)?;
                Ok(ManifestEntry {
                    id,
                    file,
                    scenario: sc.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    let manifest = DatasetManifest {
        format_version: RECORD_FORMAT_VERSION,
        network_name: net.name.clone(),
        network_digest: digest,
        sim_config: cfg.clone(),
        grid: Some(grid.clone()),
        records: entries,
    };
    manifest.save(out)?;
    Ok(manifest)
}

/// Reads a generated dataset and computes each record's statistic table.
pub fn load_dataset(dir: impl AsRef<Path>, jobs: usize) -> Result<(DatasetManifest, FeatureDataset)> {
    let dir = dir.as_ref();
    let manifest = DatasetManifest::load(dir)?;
    let rows = super::with_jobs(jobs, || {
        manifest
            .records
            .par_iter()
            .map(|e| {
                let (id, rec) = read_record(dir.join(&e.file))?;
                if id != e.id {
                    return Err(Error::Schema(format!("{} holds record {id}, manifest says {}", e.file, e.id)));
                }
                if rec.scenario != e.scenario {
                    return Err(Error::Schema(format!("record {id} labels differ from the manifest")));
                }
                Ok(LabeledStats {
                    id,
                    scenario: rec.scenario.clone(),
                    stats: StatTable::from_record(&rec)?,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok((manifest, FeatureDataset::new(rows)?))
}
