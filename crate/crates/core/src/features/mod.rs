//! Statistical and wavelet-energy features of substation voltage records.
//!
//! Each record yields 18 source channels: the six time-domain channels
//! (three phases, three modal) plus the level-8 detail and approximation
//! coefficients of each. Six statistics over the 18 channels form a
//! [`StatTable`]; a [`FeatureSpec`] picks an ordered subset of it.

mod specs;
mod stats;

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::emtsim::{WaveformRecord, CHANNEL_NAMES};
use crate::error::{Error, Result};
use crate::netmodel::FaultScenario;
use crate::wavelet::{dwt_multilevel, WaveletFilter, DEFAULT_LEVELS};

pub use specs::{distance_spec, lookup as feature_spec, path_spec, FEATURE_SPECS, SPEC_VERSION};
pub use stats::{all_stats, compute_stat, histogram_mode, StatKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Band {
    Time,
    Detail,
    Approximation,
}

/// One of the 18 source channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Channel {
    /// Index into `CHANNEL_NAMES`.
    pub signal: usize,
    pub band: Band,
}

impl Channel {
    pub const COUNT: usize = 18;

    pub const fn new(signal: usize, band: Band) -> Self {
        Channel { signal, band }
    }

    pub fn index(self) -> usize {
        let b = match self.band {
            Band::Time => 0,
            Band::Detail => 1,
            Band::Approximation => 2,
        };
        b * 6 + self.signal
    }

    pub fn from_index(i: usize) -> Option<Self> {
        let band = match i / 6 {
            0 => Band::Time,
            1 => Band::Detail,
            2 => Band::Approximation,
            _ => return None,
        };
        Some(Channel::new(i % 6, band))
    }

    pub fn all() -> impl Iterator<Item = Channel> {
        (0..Self::COUNT).filter_map(Channel::from_index)
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let suffix = match self.band {
            Band::Time => "",
            Band::Detail => "CD8",
            Band::Approximation => "CA8",
        };
        write!(f, "{}{}", CHANNEL_NAMES[self.signal], suffix)
    }
}

impl std::str::FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Channel::all()
            .find(|c| c.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::MissingChannel(s.to_string()))
    }
}

impl TryFrom<String> for Channel {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Channel> for String {
    fn from(c: Channel) -> String {
        c.to_string()
    }
}

/// The 18 arrays of one record, indexed by [`Channel::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub arrays: Vec<Vec<f64>>,
    pub fs: f64,
}

impl ChannelSet {
    pub fn get(&self, ch: Channel) -> Result<&[f64]> {
        match self.arrays.get(ch.index()) {
            Some(a) if !a.is_empty() => Ok(a),
            _ => Err(Error::MissingChannel(ch.to_string())),
        }
    }
}

pub fn build_channel_set(record: &WaveformRecord) -> Result<ChannelSet> {
    build_channel_set_with(record, &WaveletFilter::db4(), DEFAULT_LEVELS)
}

pub fn build_channel_set_with(record: &WaveformRecord, filter: &WaveletFilter, levels: usize) -> Result<ChannelSet> {
    record.validate()?;
    let mut arrays = vec![Vec::new(); Channel::COUNT];
    for (s, x) in record.channels().into_iter().enumerate() {
        let dec = dwt_multilevel(x, filter, levels)?;
        arrays[Channel::new(s, Band::Time).index()] = x.to_vec();
        arrays[Channel::new(s, Band::Detail).index()] = dec.details[levels - 1].clone();
        arrays[Channel::new(s, Band::Approximation).index()] = dec.approximation;
    }
    Ok(ChannelSet { arrays, fs: record.fs })
}

/// Every statistic of every channel of one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatTable {
    /// `values[stat * 18 + channel]`.
    pub values: Vec<f64>,
}

impl StatTable {
    pub fn from_channels(set: &ChannelSet) -> Result<Self> {
        let mut values = vec![0.0; StatKind::ALL.len() * Channel::COUNT];
        for ch in Channel::all() {
            let stats = all_stats(set.get(ch)?);
            for (k, v) in stats.into_iter().enumerate() {
                values[k * Channel::COUNT + ch.index()] = v;
            }
        }
        Ok(StatTable { values })
    }

    pub fn from_record(record: &WaveformRecord) -> Result<Self> {
        Self::from_channels(&build_channel_set(record)?)
    }

    pub fn get(&self, stat: StatKind, ch: Channel) -> f64 {
        self.values[stat.index() * Channel::COUNT + ch.index()]
    }
}

/// Named, ordered list of (statistic, channel) pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub items: Vec<(StatKind, Channel)>,
}

impl FeatureSpec {
    pub fn new(name: impl Into<String>, items: Vec<(StatKind, Channel)>) -> Result<Self> {
        let name = name.into();
        if items.is_empty() {
            return Err(Error::InvalidConfig(format!("feature spec `{name}` is empty")));
        }
        let mut seen = std::collections::HashSet::new();
        for (k, c) in &items {
            if !seen.insert((*k, *c)) {
                return Err(Error::InvalidConfig(format!(
                    "feature spec `{name}` repeats {}({c})",
                    k.name()
                )));
            }
        }
        Ok(FeatureSpec { name, items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Column names such as `std(VaCD8)`.
    pub fn feature_names(&self) -> Vec<String> {
        self.items.iter().map(|(k, c)| format!("{}({c})", k.name())).collect()
    }

    pub fn extract(&self, table: &StatTable) -> Result<Vec<f64>> {
        self.items
            .iter()
            .map(|&(k, c)| {
                let v = table.get(k, c);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Degenerate(format!("{}({c}) is not finite in spec `{}`", k.name(), self.name)))
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub spec: String,
    pub values: Vec<f64>,
    pub label: FaultScenario,
}

/// Raw (unscaled) feature values of `spec` for one record.
pub fn assemble_features(set: &ChannelSet, spec: &FeatureSpec, label: &FaultScenario) -> Result<FeatureVector> {
    let values = spec
        .items
        .iter()
        .map(|&(k, c)| compute_stat(k, set.get(c)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureVector {
        spec: spec.name.clone(),
        values,
        label: label.clone(),
    })
}

/// Per-column z-score with statistics from a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::InsufficientData("cannot fit a scaler on zero rows".into()));
        };
        let p = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; p];
        for r in rows {
            if r.len() != p {
                return Err(Error::Dimension(format!("row of {} values, expected {p}", r.len())));
            }
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; p];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let std = var
            .into_iter()
            .zip(&mean)
            .map(|(v, m)| {
                let s = v.sqrt();
                // constant columns pass through centred
                if s > 1e-12 * m.abs().max(f64::MIN_POSITIVE) { s } else { 1.0 }
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn identity(p: usize) -> Self {
        Standardizer {
            mean: vec![0.0; p],
            std: vec![1.0; p],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!("{} features, scaler expects {}", x.len(), self.dim())));
        }
        Ok(x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect())
    }

    pub fn inverse(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.dim() {
            return Err(Error::Dimension(format!("{} values, scaler expects {}", z.len(), self.dim())));
        }
        Ok(z.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| v * s + m).collect())
    }
}

/// Writes one row per vector: `spec,phases,path,distance_m,<feature columns>`.
pub fn write_feature_csv(w: impl Write, spec: &FeatureSpec, rows: &[FeatureVector]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["spec".to_string(), "phases".into(), "path".into(), "distance_m".into()];
    header.extend(spec.feature_names());
    out.write_record(&header)?;
    for r in rows {
        if r.values.len() != spec.len() {
            return Err(Error::Dimension(format!(
                "row has {} values, spec `{}` has {}",
                r.values.len(),
                spec.name,
                spec.len()
            )));
        }
        let mut rec = vec![
            r.spec.clone(),
            r.label.faulted_phases.to_string(),
            r.label.path_id.to_string(),
            r.label.distance.to_string(),
        ];
        rec.extend(r.values.iter().map(|v| format!("{v:e}")));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests;
