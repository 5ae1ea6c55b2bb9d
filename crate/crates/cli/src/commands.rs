use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

use faultloc::emtsim::{network_digest, read_record, DatasetManifest};
use faultloc::features::StatTable;
use faultloc::netmodel::{enumerate_fault_locations, NetworkModel};
use faultloc::pipeline::{
    ablation, evaluate, generate_dataset, generate_in_memory, load_dataset, locate, robustness_eval,
    train_pipeline, write_report_files, FaultLocator, FeatureDataset, Mode,
};
use faultloc::Error;

use crate::config::{dir_name, output_dir, prepare_output, Robustness, RunConfig, Scale};
use crate::manifest::{digest_of, RunManifest};

pub struct Common {
    pub seed: Option<u64>,
    pub jobs: usize,
    pub config: RunConfig,
    pub force: bool,
}

#[derive(Serialize)]
struct GenerateDigest<'a> {
    network: String,
    grid: &'a faultloc::netmodel::ScenarioGrid,
    sim: &'a faultloc::emtsim::SimConfig,
}

pub fn generate(
    c: &Common,
    scale: Scale,
    robustness: Option<Robustness>,
    network: Option<&Path>,
    out: Option<PathBuf>,
    dry_run: bool,
) -> Result<()> {
    let net = c.config.network(network)?;
    let base = c.config.grid.clone().unwrap_or_else(|| scale.grid());
    let grid = robustness.map_or_else(|| base.clone(), |r| r.grid(&base));
    let sim = c.config.sim.clone().unwrap_or_else(|| scale.sim());
    grid.validate()?;
    sim.validate()?;
    let locations = enumerate_fault_locations(&net, grid.spacing_m);
    let scenarios = grid.scenario_count();
    println!(
        "{} scenarios x {} locations = {} records at {} Hz",
        scenarios,
        locations.len(),
        scenarios * locations.len(),
        sim.sampling_frequency
    );
    if dry_run {
        return Ok(());
    }
    let name = match robustness {
        Some(r) => format!("{}-{}", scale.name(), r.name()),
        None => scale.name().to_string(),
    };
    let out = output_dir(out, Path::new("datasets").join(name));
    prepare_output(&out, c.force)?;
    let digest = digest_of(&GenerateDigest {
        network: network_digest(&net),
        grid: &grid,
        sim: &sim,
    });
    let mut run = RunManifest::start("generate", digest, c.seed);
    let t0 = Instant::now();
    let manifest = generate_dataset(&net, &grid, &sim, &out, c.jobs)?;
    println!("wrote {} records to {} in {:.1?}", manifest.records.len(), out.display(), t0.elapsed());
    run.outputs.push(out.clone());
    run.finish(&out)
}

fn check_network(net: &NetworkModel, manifest: &DatasetManifest) -> Result<()> {
    if network_digest(net) != manifest.network_digest {
        anyhow::bail!(Error::Schema(format!(
            "dataset was generated for network `{}` with a different configuration; pass the matching --network",
            manifest.network_name
        )));
    }
    Ok(())
}

fn load(dir: &Path, jobs: usize) -> Result<(DatasetManifest, FeatureDataset)> {
    let t0 = Instant::now();
    let out = load_dataset(dir, jobs).with_context(|| format!("loading dataset {}", dir.display()))?;
    log::info!("loaded {} records from {} in {:.1?}", out.1.len(), dir.display(), t0.elapsed());
    Ok(out)
}

fn training_table(loc: &FaultLocator) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<10} {:>4} {:>4} {:>3} {:>7} {:>6} {:>6} {:>7} {:>5}  stop",
        "net", "P", "Q", "T", "trainer", "train", "valid", "epochs", "best"
    );
    for n in &loc.nets {
        let a = n.net.arch;
        let _ = writeln!(
            s,
            "{:<10} {:>4} {:>4} {:>3} {:>7} {:>6} {:>6} {:>7} {:>5}  {:?}",
            n.name, a.inputs, a.hidden, a.outputs, n.trainer, n.train_records, n.validation_records, n.report.epochs, n.report.best_epoch, n.report.stop
        );
    }
    s
}

pub fn train(c: &Common, dataset: &Path, mode: Option<Mode>, network: Option<&Path>, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = c.config.pipeline();
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(mode) = mode {
        cfg.mode = mode;
    }
    cfg.validate()?;
    let net = c.config.network(network)?;
    let (manifest, data) = load(dataset, c.jobs)?;
    check_network(&net, &manifest)?;
    let mode_name = match cfg.mode {
        Mode::MultipleAnn => "multiple-ann",
        Mode::SingleAnn => "single-ann",
    };
    let out = output_dir(out, Path::new("locators").join(format!("{}-{mode_name}-seed{}", dir_name(dataset), cfg.seed)));
    prepare_output(&out, c.force)?;
    let mut run = RunManifest::start("train", cfg.digest(), Some(cfg.seed));
    run.inputs.push(dataset.to_path_buf());
    let t0 = Instant::now();
    let loc = train_pipeline(&data, &cfg, net.max_route_m(), c.jobs)?;
    loc.save(&out)?;
    let table = training_table(&loc);
    std::fs::write(out.join("training.txt"), &table)?;
    print!("{table}");
    println!(
        "trained {} networks on {} records ({} held out) in {:.1?}; saved to {}",
        loc.nets.len(),
        loc.training_ids.len(),
        loc.test_ids.len(),
        t0.elapsed(),
        out.display()
    );
    run.outputs.push(out.clone());
    run.finish(&out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Split {
    /// Records the locator did not see during training.
    HeldOut,
    /// Every record; fails if any was used for training.
    All,
}

fn select(loc: &FaultLocator, data: &FeatureDataset, split: Split) -> FeatureDataset {
    match split {
        Split::All => data.clone(),
        Split::HeldOut => {
            let trained = loc.training_id_set();
            let keep: HashSet<&str> = data.rows.iter().map(|r| r.id.as_str()).filter(|id| !trained.contains(id)).collect();
            data.subset(&keep)
        }
    }
}

pub fn evaluate_cmd(
    c: &Common,
    locator: &Path,
    dataset: &Path,
    split: Split,
    robustness: Option<Robustness>,
    network: Option<&Path>,
    out: Option<PathBuf>,
) -> Result<()> {
    let loc = FaultLocator::load(locator).with_context(|| format!("loading locator {}", locator.display()))?;
    let (manifest, data) = load(dataset, c.jobs)?;
    let test = select(&loc, &data, split);
    let default = format!("{}-on-{}", dir_name(locator), dir_name(dataset));
    let out = output_dir(out, Path::new("reports").join(default));
    prepare_output(&out, c.force)?;
    let mut run = RunManifest::start("evaluate", loc.config.digest(), Some(loc.config.seed));
    run.inputs.extend([locator.to_path_buf(), dataset.to_path_buf()]);
    let report = evaluate(&loc, &test, c.jobs)?;
    print!("{}", report.render());
    let in_grid_dir = if robustness.is_some() { out.join("in-grid") } else { out.clone() };
    write_report_files(&in_grid_dir, &report, &test)?;
    if let Some(r) = robustness {
        let net = c.config.network(network)?;
        check_network(&net, &manifest)?;
        let base = manifest
            .grid
            .clone()
            .ok_or_else(|| Error::Schema("dataset manifest has no grid; cannot derive the robustness set".into()))?;
        let grid = r.grid(&base);
        let t0 = Instant::now();
        let alt = generate_in_memory(&net, &grid, &manifest.sim_config, c.jobs)?;
        log::info!("simulated {} {} records in {:.1?}", alt.len(), r.name(), t0.elapsed());
        let rob = robustness_eval(&loc, &alt, &report.summary, c.jobs)?;
        let dir = out.join(r.name());
        write_report_files(&dir, &rob.alternate, &alt)?;
        std::fs::write(out.join("robustness.json"), serde_json::to_string_pretty(&rob)?)?;
        let summary = format!(
            "{:<22} {:>8} {:>12} {:>14}\n{:<22} {:>8} {:>11.2}% {:>13.2}%\n{:<22} {:>8} {:>11.2}% {:>13.2}%\n",
            "dataset",
            "records",
            "mean e_rel",
            "path accuracy",
            "in-grid",
            rob.in_grid.records,
            100.0 * rob.in_grid.mean_e_rel,
            100.0 * rob.in_grid.path_accuracy,
            r.name(),
            rob.alternate.summary.records,
            100.0 * rob.alternate.summary.mean_e_rel,
            100.0 * rob.alternate.summary.path_accuracy,
        );
        std::fs::write(out.join("robustness.txt"), &summary)?;
        print!("\n{summary}");
    }
    run.outputs.push(out.clone());
    run.finish(&out)
}

#[derive(Serialize)]
struct PredictOutput<'a> {
    record: &'a str,
    prediction: &'a faultloc::pipeline::PredictionResult,
    inference_seconds: f64,
}

pub fn predict(locator: &Path, record: &Path, json: bool) -> Result<()> {
    let loc = FaultLocator::load(locator).with_context(|| format!("loading locator {}", locator.display()))?;
    let (id, rec) = read_record(record).with_context(|| format!("reading {}", record.display()))?;
    let t0 = Instant::now();
    let stats = StatTable::from_record(&rec)?;
    let p = locate(&loc, &stats)?;
    let secs = t0.elapsed().as_secs_f64();
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&PredictOutput {
                record: &id,
                prediction: &p,
                inference_seconds: secs,
            })?
        );
        return Ok(());
    }
    println!("record      {id}");
    println!("fault type  {}", p.fault_type);
    println!("distance    {:.1} m", p.distance_m);
    println!("path        {} (group {})", p.path_id, p.group);
    let probs: Vec<String> = faultloc::netmodel::FaultType::ALL
        .iter()
        .zip(&p.phase_probabilities)
        .map(|(t, q)| format!("{t}={q:.3}"))
        .collect();
    println!("type probs  {}", probs.join(" "));
    let probs: Vec<String> = p.path_probabilities.iter().map(|(k, q)| format!("{k}={q:.3}")).collect();
    println!("path probs  {}", probs.join(" "));
    println!("nets        {}", p.nets.join(" -> "));
    println!("inference   {:.1} ms", 1e3 * secs);
    Ok(())
}

pub fn ablate(c: &Common, dataset: &Path, network: Option<&Path>, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = c.config.pipeline();
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let net = c.config.network(network)?;
    let (manifest, data) = load(dataset, c.jobs)?;
    check_network(&net, &manifest)?;
    let out = output_dir(out, Path::new("reports").join(format!("ablation-{}-seed{}", dir_name(dataset), cfg.seed)));
    prepare_output(&out, c.force)?;
    let mut run = RunManifest::start("ablate", cfg.digest(), Some(cfg.seed));
    run.inputs.push(dataset.to_path_buf());
    let report = ablation(&data, &cfg, net.max_route_m(), c.jobs)?;
    let test_ids: HashSet<&str> = report.multiple.records.iter().map(|r| r.id.as_str()).collect();
    let test = data.subset(&test_ids);
    write_report_files(out.join("multiple-ann"), &report.multiple, &test)?;
    write_report_files(out.join("single-ann"), &report.single, &test)?;
    std::fs::write(out.join("ablation.json"), serde_json::to_string_pretty(&report)?)?;
    let table = report.render();
    std::fs::write(out.join("ablation.txt"), &table)?;
    print!("{table}");
    run.outputs.push(out.clone());
    run.finish(&out)
}
