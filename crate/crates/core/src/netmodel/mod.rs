//! Test feeder description: topology, electrical data and the fault scenario
//! grid. The bundled config mirrors the reference 11-bus feeder; loading
//! any config enforces the reference invariants (section count, per-path
//! lengths, total load, radial topology).

mod geometry;
mod line;
mod scenario;

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use geometry::{enumerate_fault_locations, FaultLocation, PathGeometry, ResolvedLocation};
pub use line::{LineConductor, PhaseDomain, SequenceParams};
pub use scenario::{
    scenario_grid, FaultScenario, FaultType, PhaseSet, ScenarioGrid, DEFAULT_FAULT_TIME,
};

use crate::error::{Error, Result};

pub type BusId = u32;

/// Bundled reference feeder configuration.
pub const BUNDLED_NETWORK_TOML: &str = include_str!("../../data/network.toml");

const EXPECTED_SECTIONS: usize = 10;
const EXPECTED_BUSES: usize = 11;
/// Own line length per path id 1..=6, km.
const EXPECTED_PATH_KM: [f64; 6] = [10.0, 2.0, 1.0, 1.0, 2.0, 3.0];
const EXPECTED_LOAD_MW: f64 = 37.2;
const EXPECTED_LOAD_KVAR: f64 = 195.0;
const TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSource {
    pub line_kv: f64,
    pub x_over_r: f64,
    /// Three-phase short-circuit level behind the grid transformer.
    pub short_circuit_mva: f64,
    /// Scale the grid EMF so the substation sits at nominal voltage in the
    /// pre-fault steady state (on-load tap changer behaviour).
    #[serde(default = "yes")]
    pub regulate_substation_voltage: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgSource {
    pub bus: BusId,
    pub rated_kv: f64,
    pub rated_mva: f64,
    pub transient_reactance_pu: f64,
    pub x_over_r: f64,
    #[serde(default)]
    pub reactive_power_mvar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformerKind {
    Grid,
    Dg,
    Load,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transformer {
    pub name: String,
    pub kind: TransformerKind,
    pub bus: BusId,
    pub mva: f64,
    pub hv_kv: f64,
    pub lv_kv: f64,
    pub connection: String,
    #[serde(default = "default_tx_z")]
    pub impedance_pu: f64,
    #[serde(default = "default_tx_xr")]
    pub x_over_r: f64,
}

fn default_tx_z() -> f64 {
    0.06
}
fn default_tx_xr() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineSection {
    pub from_bus: BusId,
    pub to_bus: BusId,
    pub path_id: u8,
    pub length_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Load {
    pub bus: BusId,
    pub p_mw: f64,
    pub q_kvar: f64,
    #[serde(default = "default_load_conn")]
    pub connection: String,
}

fn default_load_conn() -> String {
    "Yg".into()
}

/// Series R (ohm) and L (H) of a per-phase branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRl {
    pub r: f64,
    pub l: f64,
}

impl SeriesRl {
    fn from_ohms(z: f64, x_over_r: f64, omega: f64) -> Self {
        let r = z / (1.0 + x_over_r * x_over_r).sqrt();
        SeriesRl {
            r,
            l: r * x_over_r / omega,
        }
    }

    fn plus(self, other: SeriesRl) -> SeriesRl {
        SeriesRl {
            r: self.r + other.r,
            l: self.l + other.l,
        }
    }
}

/// Per-phase constant-impedance load: transformer series branch feeding a
/// parallel R-L shunt, all referred to the network voltage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadBranch {
    pub series: SeriesRl,
    pub shunt_r: f64,
    /// `None` when the load draws no reactive power.
    pub shunt_l: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub name: String,
    pub frequency_hz: f64,
    pub nominal_kv: f64,
    pub substation_bus: BusId,
    pub buses: Vec<BusId>,
    pub grid: GridSource,
    pub dg: DgSource,
    pub line: LineConductor,
    pub transformers: Vec<Transformer>,
    pub lines: Vec<LineSection>,
    pub loads: Vec<Load>,
}

/// Reads and validates a network config file.
pub fn load_network(config_file: impl AsRef<Path>) -> Result<NetworkModel> {
    let path = config_file.as_ref();
    let text = std::fs::read_to_string(path)?;
    NetworkModel::from_toml_str(&text).map_err(|e| match e {
        Error::Parse { detail, .. } => Error::Parse {
            what: path.display().to_string(),
            detail,
        },
        other => other,
    })
}

impl NetworkModel {
    /// The bundled reference feeder.
    pub fn bundled() -> Self {
        Self::from_toml_str(BUNDLED_NETWORK_TOML).expect("bundled network config is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let model: NetworkModel = toml::from_str(text).map_err(|e| Error::Parse {
            what: "network config".into(),
            detail: e.to_string(),
        })?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("network model serializes")
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI * self.frequency_hz
    }

    /// Peak phase-to-ground voltage at nominal, volts.
    pub fn nominal_phase_peak(&self) -> f64 {
        self.nominal_kv * 1e3 * 2f64.sqrt() / 3f64.sqrt()
    }

    pub fn bus_index(&self, bus: BusId) -> Option<usize> {
        self.buses.iter().position(|&b| b == bus)
    }

    /// Total connected load (MW, kvar) at nominal voltage.
    pub fn total_load(&self) -> (f64, f64) {
        self.loads
            .iter()
            .fold((0.0, 0.0), |(p, q), l| (p + l.p_mw, q + l.q_kvar))
    }

    pub fn sequence_params(&self) -> SequenceParams {
        self.line.sequence_params(self.frequency_hz)
    }

    fn transformer(&self, kind: TransformerKind, bus: BusId) -> Option<&Transformer> {
        self.transformers
            .iter()
            .find(|t| t.kind == kind && t.bus == bus)
    }

    fn transformer_rl(&self, t: &Transformer) -> SeriesRl {
        let z = t.impedance_pu * self.nominal_kv * self.nominal_kv / t.mva;
        SeriesRl::from_ohms(z, t.x_over_r, self.omega())
    }

    /// Grid Thevenin impedance plus grid transformer, per phase.
    pub fn grid_branch(&self) -> SeriesRl {
        let zsc = self.nominal_kv * self.nominal_kv / self.grid.short_circuit_mva;
        let src = SeriesRl::from_ohms(zsc, self.grid.x_over_r, self.omega());
        match self.transformers.iter().find(|t| t.kind == TransformerKind::Grid) {
            Some(t) => src.plus(self.transformer_rl(t)),
            None => src,
        }
    }

    /// DG transient impedance plus its step-up transformer, per phase.
    pub fn dg_branch(&self) -> SeriesRl {
        let zbase = self.nominal_kv * self.nominal_kv / self.dg.rated_mva;
        let machine =
            SeriesRl::from_ohms(self.dg.transient_reactance_pu * zbase, self.dg.x_over_r, self.omega());
        match self.transformer(TransformerKind::Dg, self.dg.bus) {
            Some(t) => machine.plus(self.transformer_rl(t)),
            None => machine,
        }
    }

    pub fn load_branch(&self, load: &Load, scale: f64) -> LoadBranch {
        let v2 = (self.nominal_kv * 1e3).powi(2);
        let series = self
            .transformer(TransformerKind::Load, load.bus)
            .map(|t| self.transformer_rl(t))
            .unwrap_or(SeriesRl { r: 0.0, l: 0.0 });
        let q = load.q_kvar * 1e3 * scale;
        LoadBranch {
            series,
            shunt_r: v2 / (load.p_mw * 1e6 * scale),
            shunt_l: (q > 0.0).then(|| v2 / (q * self.omega())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frequency_hz > 0.0) || !(self.nominal_kv > 0.0) {
            return Err(Error::invariant("ratings", "frequency and voltage must be > 0"));
        }
        let mut sorted = self.buses.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.buses.len() {
            return Err(Error::invariant("buses", "duplicate bus id"));
        }
        if self.buses.len() != EXPECTED_BUSES {
            return Err(Error::invariant(
                "buses",
                format!("expected {EXPECTED_BUSES} buses, found {}", self.buses.len()),
            ));
        }
        if self.bus_index(self.substation_bus).is_none() {
            return Err(Error::invariant("buses", "substation bus is not a bus"));
        }
        self.validate_lines()?;
        self.validate_paths()?;
        self.validate_loads()?;
        self.validate_sources()
    }

    fn validate_lines(&self) -> Result<()> {
        if self.lines.len() != EXPECTED_SECTIONS {
            return Err(Error::invariant(
                "line_sections",
                format!("expected {EXPECTED_SECTIONS} sections, found {}", self.lines.len()),
            ));
        }
        let mut incoming = vec![0usize; self.buses.len()];
        for l in &self.lines {
            if !(l.length_km > 0.0) {
                return Err(Error::invariant(
                    "line_length",
                    format!("section {}-{} has length {}", l.from_bus, l.to_bus, l.length_km),
                ));
            }
            let (Some(_), Some(t)) = (self.bus_index(l.from_bus), self.bus_index(l.to_bus)) else {
                return Err(Error::invariant(
                    "line_buses",
                    format!("section {}-{} references an unknown bus", l.from_bus, l.to_bus),
                ));
            };
            incoming[t] += 1;
        }
        let root = self.bus_index(self.substation_bus).unwrap();
        for (i, &n) in incoming.iter().enumerate() {
            let want = usize::from(i != root);
            if n != want {
                return Err(Error::invariant(
                    "tree",
                    format!("bus {} has {n} feeding sections", self.buses[i]),
                ));
            }
        }
        if self.bus_distances_km().iter().any(|d| !d.is_finite()) {
            return Err(Error::invariant("tree", "not every bus is reachable from the substation"));
        }
        Ok(())
    }

    fn validate_paths(&self) -> Result<()> {
        let paths = self.paths();
        let ids: Vec<u8> = paths.iter().map(|p| p.path_id).collect();
        if ids != [1, 2, 3, 4, 5, 6] {
            return Err(Error::invariant("paths", format!("expected paths 1..=6, found {ids:?}")));
        }
        for p in &paths {
            let want = EXPECTED_PATH_KM[p.path_id as usize - 1];
            if (p.own_length_km() - want).abs() > TOL {
                return Err(Error::invariant(
                    "path_length",
                    format!("path {} is {} km, expected {want} km", p.path_id, p.own_length_km()),
                ));
            }
            for w in p.sections.windows(2) {
                if self.lines[w[0]].to_bus != self.lines[w[1]].from_bus {
                    return Err(Error::invariant(
                        "path_chain",
                        format!("path {} is not a contiguous chain", p.path_id),
                    ));
                }
            }
        }
        if paths[0].start_km != 0.0 {
            return Err(Error::invariant("path_chain", "path 1 must start at the substation"));
        }
        Ok(())
    }

    fn validate_loads(&self) -> Result<()> {
        for l in &self.loads {
            if self.bus_index(l.bus).is_none() {
                return Err(Error::invariant("loads", format!("load on unknown bus {}", l.bus)));
            }
            if !(l.p_mw > 0.0) || l.q_kvar < 0.0 {
                return Err(Error::invariant("loads", format!("load at bus {} has bad P/Q", l.bus)));
            }
        }
        let (p, q) = self.total_load();
        if (p - EXPECTED_LOAD_MW).abs() > TOL || (q - EXPECTED_LOAD_KVAR).abs() > TOL {
            return Err(Error::invariant(
                "total_load",
                format!("total load {p} MW / {q} kvar, expected {EXPECTED_LOAD_MW} MW / {EXPECTED_LOAD_KVAR} kvar"),
            ));
        }
        Ok(())
    }

    fn validate_sources(&self) -> Result<()> {
        if self.bus_index(self.dg.bus).is_none() {
            return Err(Error::invariant("dg", format!("DG on unknown bus {}", self.dg.bus)));
        }
        let positive = [
            self.grid.short_circuit_mva,
            self.grid.x_over_r,
            self.dg.rated_mva,
            self.dg.transient_reactance_pu,
            self.dg.x_over_r,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::invariant("sources", "source ratings must be > 0"));
        }
        for t in &self.transformers {
            if !(t.mva > 0.0) || !(t.impedance_pu > 0.0) || self.bus_index(t.bus).is_none() {
                return Err(Error::invariant("transformers", format!("bad transformer `{}`", t.name)));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_model_matches_reference_tables() {
        let net = NetworkModel::bundled();
        assert_eq!(net.buses.len(), 11);
        assert_eq!(net.lines.len(), 10);
        assert_eq!(net.loads.len(), 6);
        let (p, q) = net.total_load();
        assert!((p - 37.2).abs() < 1e-9);
        assert!((q - 195.0).abs() < 1e-9);
    }

    #[test]
    fn corrupted_load_total_is_rejected() {
        let mut net = NetworkModel::bundled();
        net.loads[0].p_mw = 0.3; // 30 MW total
        let text = net.to_toml_string();
        match NetworkModel::from_toml_str(&text) {
            Err(Error::Invariant { check, .. }) => assert_eq!(check, "total_load"),
            other => panic!("expected invariant error, got {other:?}"),
        }
    }

    #[test]
    fn path6_terminus_with_3km_section() {
        let net = NetworkModel::bundled();
        let s = net
            .lines
            .iter()
            .find(|l| l.from_bus == 9 && l.to_bus == 10)
            .unwrap();
        assert_eq!(s.length_km, 3.0);
        // 2 + 1.5 + 1.5 + 3 shared trunk, then the 3 km lateral
        assert_eq!(net.path(6).unwrap().end_km, 2.0 + 1.5 + 1.5 + 3.0 + 3.0);
    }

    #[test]
    fn wrong_path_length_is_rejected() {
        let mut net = NetworkModel::bundled();
        net.lines[9].length_km = 2.5;
        assert!(matches!(
            net.validate(),
            Err(Error::Invariant { check: "path_length", .. })
        ));
    }

    #[test]
    fn cycle_is_rejected() {
        let mut net = NetworkModel::bundled();
        net.lines[6].to_bus = 3; // bus 3 fed twice, bus 4 orphaned
        assert!(matches!(net.validate(), Err(Error::Invariant { check: "tree", .. })));
    }

    #[test]
    fn toml_round_trip() {
        let net = NetworkModel::bundled();
        let back = NetworkModel::from_toml_str(&net.to_toml_string()).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn parse_error_is_reported() {
        assert!(matches!(
            NetworkModel::from_toml_str("name = "),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn load_branch_values() {
        let net = NetworkModel::bundled();
        let b = net.load_branch(&net.loads[0], 1.0);
        assert!((b.shunt_r - 400e6 / 7.5e6).abs() < 1e-9);
        let xl = b.shunt_l.unwrap() * net.omega();
        assert!((xl - 400e6 / 42.5e3).abs() < 1e-6);
        let scaled = net.load_branch(&net.loads[0], 1.3);
        assert!(scaled.shunt_r < b.shunt_r);
    }
}
