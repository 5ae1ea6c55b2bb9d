//! Binary waveform container and dataset manifest.
//!
//! Record layout (little-endian):
//!
//! ```text
//! b"FLWF"  u32 version
//! u16 id length, id bytes (utf-8)
//! f64 dg_penetration, u8 phase bits, f64 fault_impedance, f64 inception_angle,
//! u8 path_id, f64 distance, f64 fault_time, f64 load_scale
//! f64 fs, u64 N, u32 channel count (6)
//! channel-major payload: Va, Vb, Vc, V0, V1, V2, each N x f64
//! ```

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{SimConfig, WaveformRecord};
use crate::error::{Error, Result};
use crate::netmodel::{FaultScenario, NetworkModel, PhaseSet, ScenarioGrid};

const MAGIC: &[u8; 4] = b"FLWF";
pub const RECORD_FORMAT_VERSION: u32 = 1;
const CHANNELS: u32 = 6;

/// Hex SHA-256 of the network's canonical JSON form.
pub fn network_digest(network: &NetworkModel) -> String {
    let json = serde_json::to_vec(network).expect("network serialises");
    hex::encode(Sha256::digest(&json))
}

/// Stable identifier of a simulated record.
pub fn record_id(network_digest: &str, cfg: &SimConfig, scenario: &FaultScenario) -> String {
    let mut h = Sha256::new();
    h.update(network_digest.as_bytes());
    h.update(serde_json::to_vec(cfg).expect("config serialises"));
    h.update(serde_json::to_vec(scenario).expect("scenario serialises"));
    let d = h.finalize();
    format!("r{}", &hex::encode(d)[..16])
}

pub fn write_record(path: impl AsRef<Path>, id: &str, rec: &WaveformRecord) -> Result<()> {
    rec.validate()?;
    let n = rec.sample_count();
    let mut buf = Vec::with_capacity(128 + 48 * n);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&RECORD_FORMAT_VERSION.to_le_bytes());
    let idb = id.as_bytes();
    let len = u16::try_from(idb.len()).map_err(|_| Error::Schema("record id too long".into()))?;
    buf.extend_from_slice(&len.to_le_bytes());
    buf.extend_from_slice(idb);
    let s = &rec.scenario;
    buf.extend_from_slice(&s.dg_penetration.to_le_bytes());
    buf.push(s.faulted_phases.bits());
    buf.extend_from_slice(&s.fault_impedance.to_le_bytes());
    buf.extend_from_slice(&s.inception_angle.to_le_bytes());
    buf.push(s.path_id);
    buf.extend_from_slice(&s.distance.to_le_bytes());
    buf.extend_from_slice(&s.fault_time.to_le_bytes());
    buf.extend_from_slice(&s.load_scale.to_le_bytes());
    buf.extend_from_slice(&rec.fs.to_le_bytes());
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    buf.extend_from_slice(&CHANNELS.to_le_bytes());
    for ch in rec.channels() {
        for x in ch {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::Schema(format!(
                "record truncated at byte {} (needed {n} more)",
                self.pos
            )));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Reads a record file, returning its id and contents.
pub fn read_record(path: impl AsRef<Path>) -> Result<(String, WaveformRecord)> {
    let mut data = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut data)?;
    let mut c = Cursor { data: &data, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Schema("not a waveform record (bad magic)".into()));
    }
    let version = c.u32()?;
    if version != RECORD_FORMAT_VERSION {
        return Err(Error::Schema(format!("unsupported record version {version}")));
    }
    let len = c.u16()? as usize;
    let id = String::from_utf8(c.take(len)?.to_vec())
        .map_err(|_| Error::Schema("record id is not utf-8".into()))?;
    let scenario = FaultScenario {
        dg_penetration: c.f64()?,
        faulted_phases: PhaseSet::from_bits(c.u8()?)?,
        fault_impedance: c.f64()?,
        inception_angle: c.f64()?,
        path_id: c.u8()?,
        distance: c.f64()?,
        fault_time: c.f64()?,
        load_scale: c.f64()?,
    };
    let fs = c.f64()?;
    let n = usize::try_from(c.u64()?).map_err(|_| Error::Schema("sample count overflows".into()))?;
    let channels = c.u32()?;
    if channels != CHANNELS {
        return Err(Error::Schema(format!("expected 6 channels, found {channels}")));
    }
    if data.len() - c.pos != 8 * 6 * n {
        return Err(Error::Schema(format!(
            "payload is {} bytes, expected {}",
            data.len() - c.pos,
            48 * n
        )));
    }
    let mut chans: Vec<Vec<f64>> = Vec::with_capacity(6);
    for _ in 0..6 {
        let raw = c.take(8 * n)?;
        chans.push(
            raw.chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect(),
        );
    }
    let mut it = chans.into_iter();
    let mut next = || it.next().unwrap();
    let rec = WaveformRecord {
        scenario,
        va: next(),
        vb: next(),
        vc: next(),
        v0: next(),
        v1: next(),
        v2: next(),
        fs,
    };
    rec.validate()?;
    Ok((id, rec))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    /// File name relative to the manifest's directory.
    pub file: String,
    pub scenario: FaultScenario,
}

/// Index of a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub network_name: String,
    pub network_digest: String,
    pub sim_config: SimConfig,
    pub grid: Option<ScenarioGrid>,
    pub records: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub const FILE_NAME: &'static str = "manifest.json";

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let path = dir.as_ref().join(Self::FILE_NAME);
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(Self::FILE_NAME);
        let text = std::fs::read_to_string(&path).map_err(|e| {
            Error::Schema(format!("cannot read dataset manifest {}: {e}", path.display()))
        })?;
        let m: DatasetManifest = serde_json::from_str(&text)?;
        if m.format_version != RECORD_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported dataset format version {}",
                m.format_version
            )));
        }
        Ok(m)
    }
}
