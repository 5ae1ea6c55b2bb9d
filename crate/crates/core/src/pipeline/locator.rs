use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derived_seed, with_jobs, FeatureDataset, LabeledStats, Mode, PathGroup, PipelineConfig};
use crate::error::{Error, Result};
use crate::features::{distance_spec, feature_spec, path_spec, FeatureSpec, StatTable, Standardizer, SPEC_VERSION};
use crate::neuralnet::{
    argmax, one_hot, split_dataset, Mlp, MlpArchitecture, Samples, TrainOptions, TrainReport, TRAINERS,
};
use crate::netmodel::FaultType;

pub const LOCATOR_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetRole {
    Phase,
    Distance,
    Path,
}

/// One trained network with everything needed to apply it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedNet {
    pub format_version: u32,
    pub name: String,
    pub role: NetRole,
    /// Fault type the net serves; `None` for nets shared by every type.
    pub fault_type: Option<FaultType>,
    pub group: Option<PathGroup>,
    pub spec: FeatureSpec,
    pub spec_version: u32,
    pub net: Mlp,
    pub input_scaler: Standardizer,
    pub target_scaler: Option<Standardizer>,
    /// Output index -> label: fault-type index for the phase net, path id for
    /// path nets; empty for regressors.
    pub classes: Vec<u8>,
    pub trainer: String,
    pub seed: u64,
    pub train_records: usize,
    pub validation_records: usize,
    pub report: TrainReport,
}

impl TrainedNet {
    fn inputs(&self, stats: &StatTable) -> Result<Vec<f64>> {
        self.input_scaler.transform(&self.spec.extract(stats)?)
    }

    /// Predicted label and the class probabilities.
    pub fn classify(&self, stats: &StatTable) -> Result<(u8, Vec<f64>)> {
        let p = self.net.forward(&self.inputs(stats)?)?;
        Ok((self.classes[argmax(&p)], p))
    }

    pub fn regress(&self, stats: &StatTable) -> Result<f64> {
        let z = self.net.forward(&self.inputs(stats)?)?;
        match &self.target_scaler {
            Some(s) => Ok(s.inverse(&z)?[0]),
            None => Ok(z[0]),
        }
    }
}

fn phase_name() -> String {
    "Ph".into()
}

fn distance_name(t: Option<FaultType>) -> String {
    match t {
        Some(t) => format!("D-{}", t.phases()),
        None => "D-all".into(),
    }
}

fn path_name(t: Option<FaultType>, g: Option<PathGroup>) -> String {
    match (t, g) {
        (Some(t), Some(g)) => format!("Pa-{}-{g}", t.phases()),
        _ => "Pa-all".into(),
    }
}

/// The trained set of networks plus the bookkeeping needed to evaluate it.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultLocator {
    pub mode: Mode,
    pub config: PipelineConfig,
    /// Upper clamp for distance estimates.
    pub max_route_m: f64,
    /// Sorted by name.
    pub nets: Vec<TrainedNet>,
    /// Records used for training or validation, sorted.
    pub training_ids: Vec<String>,
    /// Held-out records of the training dataset, sorted.
    pub test_ids: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LocatorIndex {
    format_version: u32,
    mode: Mode,
    config: PipelineConfig,
    max_route_m: f64,
    model_files: Vec<String>,
    training_ids: Vec<String>,
    test_ids: Vec<String>,
}

impl FaultLocator {
    pub const INDEX_FILE: &'static str = "locator.json";

    pub fn net(&self, name: &str) -> Option<&TrainedNet> {
        self.nets.iter().find(|n| n.name == name)
    }

    fn require(&self, name: &str) -> Result<&TrainedNet> {
        self.net(name)
            .ok_or_else(|| Error::InsufficientData(format!("locator has no `{name}` network")))
    }

    pub fn phase_net(&self) -> Result<&TrainedNet> {
        self.require(&phase_name())
    }

    pub fn distance_net(&self, t: FaultType) -> Result<&TrainedNet> {
        match self.mode {
            Mode::MultipleAnn => self.require(&distance_name(Some(t))),
            Mode::SingleAnn => self.require(&distance_name(None)),
        }
    }

    pub fn path_net(&self, t: FaultType, g: PathGroup) -> Result<&TrainedNet> {
        match self.mode {
            Mode::MultipleAnn => self.require(&path_name(Some(t), Some(g))),
            Mode::SingleAnn => self.require(&path_name(None, None)),
        }
    }

    pub fn training_id_set(&self) -> HashSet<&str> {
        self.training_ids.iter().map(String::as_str).collect()
    }

    /// Writes `locator.json` and one `models/<name>.json` per network.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir.join("models"))?;
        let mut files = Vec::new();
        for n in &self.nets {
            let file = format!("models/{}.json", n.name);
            std::fs::write(dir.join(&file), serde_json::to_string_pretty(n)?)?;
            files.push(file);
        }
        let index = LocatorIndex {
            format_version: LOCATOR_FORMAT_VERSION,
            mode: self.mode,
            config: self.config.clone(),
            max_route_m: self.max_route_m,
            model_files: files,
            training_ids: self.training_ids.clone(),
            test_ids: self.test_ids.clone(),
        };
        std::fs::write(dir.join(Self::INDEX_FILE), serde_json::to_string_pretty(&index)?)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(Self::INDEX_FILE);
        let text = std::fs::read_to_string(&path)?;
        let index: LocatorIndex = serde_json::from_str(&text)?;
        if index.format_version != LOCATOR_FORMAT_VERSION {
            return Err(Error::Schema(format!("unsupported locator version {}", index.format_version)));
        }
        let mut nets = Vec::new();
        for f in &index.model_files {
            let n: TrainedNet = serde_json::from_str(&std::fs::read_to_string(dir.join(f))?)?;
            if n.spec_version != SPEC_VERSION || n.format_version != LOCATOR_FORMAT_VERSION {
                return Err(Error::Schema(format!("model {f} was written by an incompatible version")));
            }
            let fresh = feature_spec(&n.spec.name)?;
            if fresh != n.spec {
                return Err(Error::Schema(format!("model {f} uses a stale `{}` feature list", n.spec.name)));
            }
            nets.push(n);
        }
        Ok(FaultLocator {
            mode: index.mode,
            config: index.config,
            max_route_m: index.max_route_m,
            nets,
            training_ids: index.training_ids,
            test_ids: index.test_ids,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    pub fault_type: FaultType,
    pub distance_m: f64,
    pub group: PathGroup,
    pub path_id: u8,
    /// In `FaultType::ALL` order.
    pub phase_probabilities: Vec<f64>,
    pub path_probabilities: Vec<(u8, f64)>,
    pub nets: Vec<String>,
}

/// Runs the three stages. `fault_type` and `group` override the phase-net and
/// distance-based routing decisions when given.
pub fn route(
    loc: &FaultLocator,
    stats: &StatTable,
    fault_type: Option<FaultType>,
    group: Option<PathGroup>,
) -> Result<PredictionResult> {
    let ph = loc.phase_net()?;
    let (cls, phase_probabilities) = ph.classify(stats)?;
    let predicted = FaultType::from_index(cls as usize)
        .ok_or_else(|| Error::Schema(format!("phase net emitted class {cls}")))?;
    let t = fault_type.unwrap_or(predicted);
    let dnet = loc.distance_net(t)?;
    let distance_m = dnet.regress(stats)?.clamp(0.0, loc.max_route_m);
    let g = group.unwrap_or(PathGroup::of_distance(distance_m));
    let pnet = loc.path_net(t, g)?;
    let (path_id, p) = pnet.classify(stats)?;
    Ok(PredictionResult {
        fault_type: t,
        distance_m,
        group: g,
        path_id,
        phase_probabilities,
        path_probabilities: pnet.classes.iter().copied().zip(p).collect(),
        nets: vec![ph.name.clone(), dnet.name.clone(), pnet.name.clone()],
    })
}

pub fn locate(loc: &FaultLocator, stats: &StatTable) -> Result<PredictionResult> {
    route(loc, stats, None, None)
}

#[derive(Debug, Clone, Copy)]
enum Job {
    Phase,
    Distance(Option<FaultType>),
    Path(Option<FaultType>, Option<PathGroup>),
}

fn fault_type_of(r: &LabeledStats) -> FaultType {
    r.scenario.fault_type().expect("dataset rows are fault records")
}

impl Job {
    fn name(self) -> String {
        match self {
            Job::Phase => phase_name(),
            Job::Distance(t) => distance_name(t),
            Job::Path(t, g) => path_name(t, g),
        }
    }

    fn accepts(self, r: &LabeledStats) -> bool {
        let t = fault_type_of(r);
        match self {
            Job::Phase | Job::Distance(None) | Job::Path(None, _) => true,
            Job::Distance(Some(want)) => t == want,
            Job::Path(Some(want), g) => t == want && g.is_none_or(|g| PathGroup::of_distance(r.scenario.distance) == g),
        }
    }

    fn spec(self) -> FeatureSpec {
        match self {
            Job::Phase => feature_spec("Tfp").expect("registered"),
            Job::Distance(Some(t)) => distance_spec(t),
            Job::Distance(None) => feature_spec("Sfd").expect("registered"),
            Job::Path(Some(t), Some(g)) => path_spec(t, g.number()),
            Job::Path(..) => feature_spec("Sfp").expect("registered"),
        }
    }

    fn classes(self) -> Vec<u8> {
        match self {
            Job::Phase => (0..FaultType::ALL.len() as u8).collect(),
            Job::Distance(_) => Vec::new(),
            Job::Path(_, Some(g)) => g.classes().to_vec(),
            Job::Path(_, None) => (1..=6).collect(),
        }
    }

    fn label(self, r: &LabeledStats) -> u8 {
        match self {
            Job::Phase => fault_type_of(r).index() as u8,
            _ => r.scenario.path_id,
        }
    }

    fn hidden(self, cfg: &PipelineConfig) -> usize {
        match self {
            Job::Phase => cfg.phase_hidden,
            Job::Distance(Some(t)) => cfg.distance_hidden[t.index()],
            Job::Distance(None) => cfg.single_distance_hidden,
            Job::Path(Some(t), _) => cfg.path_hidden[t.index()],
            Job::Path(None, _) => cfg.single_path_hidden,
        }
    }

    fn trainer(self, cfg: &PipelineConfig) -> &str {
        match self {
            Job::Phase => &cfg.phase_trainer,
            Job::Distance(_) => &cfg.distance_trainer,
            Job::Path(..) => &cfg.path_trainer,
        }
    }

    fn role(self) -> NetRole {
        match self {
            Job::Phase => NetRole::Phase,
            Job::Distance(_) => NetRole::Distance,
            Job::Path(..) => NetRole::Path,
        }
    }
}

fn inverse_frequency_weights(labels: &[usize]) -> Vec<f64> {
    let mut counts = std::collections::BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0usize) += 1;
    }
    let k = counts.len() as f64;
    let n = labels.len() as f64;
    labels.iter().map(|l| n / (k * counts[l] as f64)).collect()
}

fn train_job(job: Job, train: &[&LabeledStats], val: &[&LabeledStats], cfg: &PipelineConfig) -> Result<TrainedNet> {
    let name = job.name();
    if train.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "network {name} has {} training record(s); add locations or scenarios so every \
             (fault type, path group) cell holds at least 2",
            train.len()
        )));
    }
    let spec = job.spec();
    let raw = |rows: &[&LabeledStats]| rows.iter().map(|r| spec.extract(&r.stats)).collect::<Result<Vec<_>>>();
    let train_raw = raw(train)?;
    let input_scaler = Standardizer::fit(&train_raw)?;
    let scale = |rows: Vec<Vec<f64>>| rows.iter().map(|x| input_scaler.transform(x)).collect::<Result<Vec<_>>>();
    let tx = scale(train_raw)?;
    let vx = scale(raw(val)?)?;
    let classes = job.classes();
    let (ty, vy, target_scaler, arch) = if job.role() == NetRole::Distance {
        let d = |rows: &[&LabeledStats]| rows.iter().map(|r| vec![r.scenario.distance]).collect::<Vec<_>>();
        let ts = Standardizer::fit(&d(train))?;
        let z = |rows: &[&LabeledStats]| d(rows).iter().map(|v| ts.transform(v)).collect::<Result<Vec<_>>>();
        let arch = MlpArchitecture::regressor(spec.len(), job.hidden(cfg));
        (z(train)?, z(val)?, Some(ts), arch)
    } else {
        let enc = |rows: &[&LabeledStats]| {
            rows.iter()
                .map(|r| {
                    let l = job.label(r);
                    let k = classes.iter().position(|&c| c == l).ok_or_else(|| {
                        Error::Schema(format!("record {} label {l} outside the classes of {name}", r.id))
                    })?;
                    Ok(one_hot(k, classes.len()))
                })
                .collect::<Result<Vec<_>>>()
        };
        let arch = MlpArchitecture::classifier(spec.len(), job.hidden(cfg), classes.len());
        (enc(train)?, enc(val)?, None, arch)
    };
    let weights = (cfg.class_weights && job.role() != NetRole::Distance)
        .then(|| inverse_frequency_weights(&ty.iter().map(|y| argmax(y)).collect::<Vec<_>>()));
    let seed = derived_seed(cfg.seed, &name);
    let mut net = Mlp::init(arch, seed)?;
    let trainer = TRAINERS.get(job.trainer(cfg))?;
    let opts = TrainOptions {
        seed,
        ..cfg.train.clone()
    };
    let train_set = match &weights {
        Some(w) => Samples::weighted(&tx, &ty, w),
        None => Samples::new(&tx, &ty),
    };
    let val_set = Samples::new(&vx, &vy);
    let report = trainer.train(&mut net, &train_set, (!vx.is_empty()).then_some(&val_set), &opts)?;
    log::info!(
        "trained {name}: {} inputs, {} hidden, {} train / {} validation records, {} epochs ({:?})",
        spec.len(),
        arch.hidden,
        train.len(),
        val.len(),
        report.epochs,
        report.stop
    );
    let (fault_type, group) = match job {
        Job::Phase => (None, None),
        Job::Distance(t) => (t, None),
        Job::Path(t, g) => (t, g),
    };
    Ok(TrainedNet {
        format_version: LOCATOR_FORMAT_VERSION,
        name,
        role: job.role(),
        fault_type,
        group,
        spec_version: SPEC_VERSION,
        spec,
        net,
        input_scaler,
        target_scaler,
        classes,
        trainer: trainer.name().into(),
        seed,
        train_records: train.len(),
        validation_records: val.len(),
        report,
    })
}

/// Splits `data` 70/15/15 by (fault type, path) and trains every network of
/// the configured mode on the training part, validating on the middle part.
pub fn train_pipeline(data: &FeatureDataset, cfg: &PipelineConfig, max_route_m: f64, jobs: usize) -> Result<FaultLocator> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InsufficientData("empty training dataset".into()));
    }
    let keys: Vec<(usize, u8)> = data
        .rows
        .iter()
        .map(|r| (fault_type_of(r).index(), r.scenario.path_id))
        .collect();
    let split = split_dataset(&keys, cfg.seed)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| &data.rows[i]).collect::<Vec<_>>();
    let (train, val) = (pick(&split.train), pick(&split.validation));

    let mut job_list = vec![Job::Phase];
    match cfg.mode {
        Mode::MultipleAnn => {
            for t in FaultType::ALL {
                if train.iter().any(|r| fault_type_of(r) == t) {
                    job_list.push(Job::Distance(Some(t)));
                }
            }
            for t in FaultType::ALL {
                for g in PathGroup::ALL {
                    let job = Job::Path(Some(t), Some(g));
                    if data.rows.iter().any(|r| job.accepts(r)) {
                        job_list.push(job);
                    }
                }
            }
        }
        Mode::SingleAnn => job_list.extend([Job::Distance(None), Job::Path(None, None)]),
    }
    let mut nets = with_jobs(jobs, || {
        job_list
            .par_iter()
            .map(|&job| {
                let tr: Vec<_> = train.iter().copied().filter(|r| job.accepts(r)).collect();
                let va: Vec<_> = val.iter().copied().filter(|r| job.accepts(r)).collect();
                train_job(job, &tr, &va, cfg)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    nets.sort_by(|a, b| a.name.cmp(&b.name));
    let ids = |idx: &[usize]| {
        let mut v: Vec<String> = idx.iter().map(|&i| data.rows[i].id.clone()).collect();
        v.sort();
        v
    };
    let mut training_ids = ids(&split.train);
    training_ids.extend(ids(&split.validation));
    training_ids.sort();
    Ok(FaultLocator {
        mode: cfg.mode,
        config: cfg.clone(),
        max_route_m,
        nets,
        training_ids,
        test_ids: ids(&split.test),
    })
}
