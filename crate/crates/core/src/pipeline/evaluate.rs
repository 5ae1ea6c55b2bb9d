use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::locator::route;
use super::{train_pipeline, with_jobs, FaultLocator, FeatureDataset, Mode, PathGroup, PipelineConfig, DISTANCE_THRESHOLD_M, REFERENCE_LENGTH_M};
use crate::error::{Error, Result};
use crate::features::{Channel, StatKind};
use crate::netmodel::FaultType;

/// Relative distance error: absolute error over the reference length.
pub fn e_rel(predicted_m: f64, true_m: f64) -> f64 {
    (predicted_m - true_m).abs() / REFERENCE_LENGTH_M
}

/// Per-record predictions, with the oracle-routed variants used by the
/// correlation analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordOutcome {
    pub id: String,
    pub true_type: FaultType,
    pub predicted_type: FaultType,
    pub true_distance_m: f64,
    pub predicted_distance_m: f64,
    pub e_rel: f64,
    pub true_group: PathGroup,
    pub predicted_group: PathGroup,
    pub true_path: u8,
    pub predicted_path: u8,
    pub path_net: String,
    /// Distance error when the true fault type selects the distance net.
    pub oracle_e_rel: f64,
    /// Path when the true fault type and true group select the path net.
    pub oracle_path: u8,
}

impl RecordOutcome {
    pub fn phase_ok(&self) -> bool {
        self.true_type == self.predicted_type
    }

    pub fn path_ok(&self) -> bool {
        self.true_path == self.predicted_path
    }

    pub fn group_ok(&self) -> bool {
        self.true_group == self.predicted_group
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub fault_type: FaultType,
    pub records: usize,
    pub mean_e_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRow {
    pub net: String,
    pub records: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub records: usize,
    pub phase_accuracy: f64,
    pub mean_e_rel: f64,
    pub path_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationStats {
    /// Fraction of records with a misclassified fault type.
    pub phce_rate: f64,
    /// Fraction of records whose predicted and true distance fall in
    /// different groups.
    pub pce_rate: f64,
    pub mean_e_rel_given_phce: Option<f64>,
    pub mean_e_rel_without_phce: Option<f64>,
    pub path_accuracy_given_phce: Option<f64>,
    pub path_accuracy_given_pce: Option<f64>,
    pub path_accuracy_without_errors: Option<f64>,
    /// Scores when the true fault type and group drive the routing.
    pub oracle_mean_e_rel: f64,
    pub oracle_path_accuracy: f64,
    /// Records whose true distance lies within 500 m of the group boundary.
    pub boundary_records: usize,
    pub boundary_pce_rate: Option<f64>,
    pub far_pce_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub mode: Mode,
    pub summary: Summary,
    pub distance_rows: Vec<DistanceRow>,
    pub path_rows: Vec<PathRow>,
    /// Rows true, columns predicted, in `FaultType::ALL` order.
    pub phase_confusion: Vec<Vec<usize>>,
    /// Rows true, columns predicted, paths 1..=6.
    pub path_confusion: Vec<Vec<usize>>,
    pub correlation: CorrelationStats,
    pub records: Vec<RecordOutcome>,
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn rate<'a>(v: impl Iterator<Item = &'a RecordOutcome>, ok: impl Fn(&RecordOutcome) -> bool) -> Option<f64> {
    mean(v.map(|r| if ok(r) { 1.0 } else { 0.0 }))
}

fn predict_record(loc: &FaultLocator, row: &super::LabeledStats) -> Result<RecordOutcome> {
    let t = row.scenario.fault_type().expect("dataset rows are fault records");
    let d = row.scenario.distance;
    let p = route(loc, &row.stats, None, None)?;
    let oracle = route(loc, &row.stats, Some(t), Some(PathGroup::of_distance(d)))?;
    Ok(RecordOutcome {
        id: row.id.clone(),
        true_type: t,
        predicted_type: p.fault_type,
        true_distance_m: d,
        predicted_distance_m: p.distance_m,
        e_rel: e_rel(p.distance_m, d),
        true_group: PathGroup::of_distance(d),
        predicted_group: p.group,
        true_path: row.scenario.path_id,
        predicted_path: p.path_id,
        path_net: p.nets[2].clone(),
        oracle_e_rel: e_rel(oracle.distance_m, d),
        oracle_path: oracle.path_id,
    })
}

/// Builds a report from per-record outcomes.
pub fn summarize(mode: Mode, records: Vec<RecordOutcome>) -> Result<EvaluationReport> {
    if records.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let n = records.len();
    let all = || records.iter();
    let summary = Summary {
        records: n,
        phase_accuracy: rate(all(), RecordOutcome::phase_ok).unwrap_or(0.0),
        mean_e_rel: mean(all().map(|r| r.e_rel)).unwrap_or(0.0),
        path_accuracy: rate(all(), RecordOutcome::path_ok).unwrap_or(0.0),
    };
    let distance_rows = FaultType::ALL
        .iter()
        .filter_map(|&t| {
            let rows: Vec<_> = all().filter(|r| r.true_type == t).collect();
            (!rows.is_empty()).then(|| DistanceRow {
                fault_type: t,
                records: rows.len(),
                mean_e_rel: mean(rows.iter().map(|r| r.e_rel)).unwrap_or(0.0),
            })
        })
        .collect();
    let mut by_net: BTreeMap<&str, Vec<&RecordOutcome>> = BTreeMap::new();
    for r in all() {
        by_net.entry(&r.path_net).or_default().push(r);
    }
    let path_rows = by_net
        .into_iter()
        .map(|(net, rows)| PathRow {
            net: net.into(),
            records: rows.len(),
            accuracy: rate(rows.into_iter(), RecordOutcome::path_ok).unwrap_or(0.0),
        })
        .collect();
    let mut phase_confusion = vec![vec![0; 7]; 7];
    let mut path_confusion = vec![vec![0; 6]; 6];
    for r in all() {
        phase_confusion[r.true_type.index()][r.predicted_type.index()] += 1;
        path_confusion[r.true_path as usize - 1][r.predicted_path as usize - 1] += 1;
    }
    let near = |r: &&RecordOutcome| (r.true_distance_m - DISTANCE_THRESHOLD_M).abs() <= 500.0;
    let correlation = CorrelationStats {
        phce_rate: rate(all(), |r| !r.phase_ok()).unwrap_or(0.0),
        pce_rate: rate(all(), |r| !r.group_ok()).unwrap_or(0.0),
        mean_e_rel_given_phce: mean(all().filter(|r| !r.phase_ok()).map(|r| r.e_rel)),
        mean_e_rel_without_phce: mean(all().filter(|r| r.phase_ok()).map(|r| r.e_rel)),
        path_accuracy_given_phce: rate(all().filter(|r| !r.phase_ok()), RecordOutcome::path_ok),
        path_accuracy_given_pce: rate(all().filter(|r| !r.group_ok()), RecordOutcome::path_ok),
        path_accuracy_without_errors: rate(all().filter(|r| r.phase_ok() && r.group_ok()), RecordOutcome::path_ok),
        oracle_mean_e_rel: mean(all().map(|r| r.oracle_e_rel)).unwrap_or(0.0),
        oracle_path_accuracy: rate(all(), |r| r.oracle_path == r.true_path).unwrap_or(0.0),
        boundary_records: all().filter(near).count(),
        boundary_pce_rate: rate(all().filter(near), |r| !r.group_ok()),
        far_pce_rate: rate(all().filter(|r| !near(r)), |r| !r.group_ok()),
    };
    Ok(EvaluationReport {
        mode,
        summary,
        distance_rows,
        path_rows,
        phase_confusion,
        path_confusion,
        correlation,
        records,
    })
}

/// Scores `loc` on `test`, which must not share records with the locator's
/// training and validation data.
pub fn evaluate(loc: &FaultLocator, test: &FeatureDataset, jobs: usize) -> Result<EvaluationReport> {
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let trained = loc.training_id_set();
    let shared: Vec<&str> = test.rows.iter().map(|r| r.id.as_str()).filter(|id| trained.contains(id)).collect();
    if !shared.is_empty() {
        return Err(Error::Overlap(format!(
            "{} of {} test records were used for training (first: {})",
            shared.len(),
            test.len(),
            shared[0]
        )));
    }
    let records = with_jobs(jobs, || test.rows.par_iter().map(|r| predict_record(loc, r)).collect::<Result<Vec<_>>>())??;
    summarize(loc.mode, records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub in_grid: Summary,
    pub alternate: EvaluationReport,
    /// Alternate minus in-grid mean e_rel.
    pub e_rel_change: f64,
    /// Alternate minus in-grid path accuracy.
    pub path_accuracy_change: f64,
}

pub fn robustness_eval(loc: &FaultLocator, alternate: &FeatureDataset, in_grid: &Summary, jobs: usize) -> Result<RobustnessReport> {
    let alt = evaluate(loc, alternate, jobs)?;
    Ok(RobustnessReport {
        in_grid: *in_grid,
        e_rel_change: alt.summary.mean_e_rel - in_grid.mean_e_rel,
        path_accuracy_change: alt.summary.path_accuracy - in_grid.path_accuracy,
        alternate: alt,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub multiple: EvaluationReport,
    pub single: EvaluationReport,
}

impl AblationReport {
    pub fn render(&self) -> String {
        let (m, s) = (&self.multiple.summary, &self.single.summary);
        let mut out = String::new();
        let _ = writeln!(out, "{:<16} {:>12} {:>12}", "", "Multiple ANN", "Single ANN");
        let _ = writeln!(out, "{:<16} {:>11.2}% {:>11.2}%", "Fault Distance", 100.0 * m.mean_e_rel, 100.0 * s.mean_e_rel);
        let _ = writeln!(out, "{:<16} {:>11.2}% {:>11.2}%", "Faulted Path", 100.0 * m.path_accuracy, 100.0 * s.path_accuracy);
        out
    }
}

/// Trains both modes on the same split and seeds and scores each on the
/// held-out records.
pub fn ablation(data: &FeatureDataset, cfg: &PipelineConfig, max_route_m: f64, jobs: usize) -> Result<AblationReport> {
    let run = |mode| -> Result<EvaluationReport> {
        let cfg = PipelineConfig { mode, ..cfg.clone() };
        let loc = train_pipeline(data, &cfg, max_route_m, jobs)?;
        let test = data.subset(&loc.test_ids.iter().map(String::as_str).collect());
        evaluate(&loc, &test, jobs)
    };
    Ok(AblationReport {
        multiple: run(Mode::MultipleAnn)?,
        single: run(Mode::SingleAnn)?,
    })
}

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{:.2}%", 100.0 * v))
}

impl EvaluationReport {
    /// Plain-text table of the headline results.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let s = &self.summary;
        let _ = writeln!(out, "records: {}   mode: {:?}", s.records, self.mode);
        let _ = writeln!(out, "\nFaulted phase(s)   accuracy {:.2}%", 100.0 * s.phase_accuracy);
        let _ = writeln!(out, "\nFault distance     {:>8} {:>10}", "records", "mean e_rel");
        for r in &self.distance_rows {
            let _ = writeln!(out, "  {:<16} {:>8} {:>9.2}%", r.fault_type.label(), r.records, 100.0 * r.mean_e_rel);
        }
        let _ = writeln!(out, "  {:<16} {:>8} {:>9.2}%", "Total", s.records, 100.0 * s.mean_e_rel);
        let _ = writeln!(out, "\nFaulted path       {:>8} {:>10}", "records", "accuracy");
        for r in &self.path_rows {
            let _ = writeln!(out, "  {:<16} {:>8} {:>9.2}%", r.net, r.records, 100.0 * r.accuracy);
        }
        let _ = writeln!(out, "  {:<16} {:>8} {:>9.2}%", "Total", s.records, 100.0 * s.path_accuracy);
        let c = &self.correlation;
        let _ = writeln!(out, "\nCorrelation errors");
        let _ = writeln!(out, "  PhCE rate                      {}", pct(Some(c.phce_rate)));
        let _ = writeln!(out, "  PCE rate                       {}", pct(Some(c.pce_rate)));
        let _ = writeln!(out, "  mean e_rel given PhCE          {}", pct(c.mean_e_rel_given_phce));
        let _ = writeln!(out, "  mean e_rel without PhCE        {}", pct(c.mean_e_rel_without_phce));
        let _ = writeln!(out, "  path accuracy given PhCE       {}", pct(c.path_accuracy_given_phce));
        let _ = writeln!(out, "  path accuracy given PCE        {}", pct(c.path_accuracy_given_pce));
        let _ = writeln!(out, "  path accuracy without errors   {}", pct(c.path_accuracy_without_errors));
        let _ = writeln!(out, "  oracle-routed mean e_rel       {}", pct(Some(c.oracle_mean_e_rel)));
        let _ = writeln!(out, "  oracle-routed path accuracy    {}", pct(Some(c.oracle_path_accuracy)));
        let _ = writeln!(
            out,
            "  PCE within 500 m of boundary   {} ({} records), elsewhere {}",
            pct(c.boundary_pce_rate),
            c.boundary_records,
            pct(c.far_pce_rate)
        );
        out
    }
}

fn write_matrix(path: &Path, labels: &[String], m: &[Vec<usize>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["true\\predicted".to_string()];
    header.extend(labels.iter().cloned());
    w.write_record(&header)?;
    for (label, row) in labels.iter().zip(m) {
        let mut rec = vec![label.clone()];
        rec.extend(row.iter().map(usize::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `report.json`, `report.txt`, the two confusion matrices and the
/// plot-data files. `data` supplies the per-record CD8 statistics.
pub fn write_report_files(dir: impl AsRef<Path>, report: &EvaluationReport, data: &FeatureDataset) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    std::fs::write(dir.join("report.txt"), report.render())?;
    let types: Vec<String> = FaultType::ALL.iter().map(|t| t.label()).collect();
    write_matrix(&dir.join("phase_confusion.csv"), &types, &report.phase_confusion)?;
    let paths: Vec<String> = (1..=6).map(|p| p.to_string()).collect();
    write_matrix(&dir.join("path_confusion.csv"), &paths, &report.path_confusion)?;

    let mut w = csv::Writer::from_path(dir.join("erel_vs_distance.csv"))?;
    w.write_record(["id", "fault_type", "path", "true_distance_m", "predicted_distance_m", "e_rel"])?;
    for r in &report.records {
        w.write_record(&[
            r.id.clone(),
            r.true_type.label(),
            r.true_path.to_string(),
            r.true_distance_m.to_string(),
            r.predicted_distance_m.to_string(),
            r.e_rel.to_string(),
        ])?;
    }
    w.flush()?;

    let cd8: Vec<Channel> = (6..9).map(|i| Channel::from_index(i).expect("detail channels")).collect();
    let mut w = csv::Writer::from_path(dir.join("cd8_stats.csv"))?;
    let mut header: Vec<String> = ["id", "fault_type", "path", "distance_m"].map(String::from).to_vec();
    for kind in [StatKind::Var, StatKind::Skn] {
        header.extend(cd8.iter().map(|c| format!("{}({c})", kind.name())));
    }
    w.write_record(&header)?;
    for row in &data.rows {
        let mut rec = vec![
            row.id.clone(),
            row.scenario.fault_type().map(|t| t.label()).unwrap_or_default(),
            row.scenario.path_id.to_string(),
            row.scenario.distance.to_string(),
        ];
        for kind in [StatKind::Var, StatKind::Skn] {
            rec.extend(cd8.iter().map(|&c| row.stats.get(kind, c).to_string()));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
