use std::fmt;

use serde::{Deserialize, Serialize};

use super::geometry::FaultLocation;
use crate::error::{Error, Result};

/// Set of phases taking part in a fault, stored as a bitmask (a = 1, b = 2, c = 4).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PhaseSet(u8);

impl PhaseSet {
    pub const NONE: PhaseSet = PhaseSet(0);
    pub const A: PhaseSet = PhaseSet(1);
    pub const B: PhaseSet = PhaseSet(2);
    pub const C: PhaseSet = PhaseSet(4);

    pub fn from_bits(bits: u8) -> Result<Self> {
        if bits > 7 {
            return Err(Error::InvalidConfig(format!("phase mask {bits} out of range")));
        }
        Ok(PhaseSet(bits))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, phase: usize) -> bool {
        phase < 3 && self.0 & (1 << phase) != 0
    }

    /// Phase indices (0 = a, 1 = b, 2 = c) in ascending order.
    pub fn phases(self) -> Vec<usize> {
        (0..3).filter(|&p| self.contains(p)).collect()
    }

    pub fn fault_type(self) -> Option<FaultType> {
        FaultType::ALL.iter().copied().find(|t| t.phases() == self)
    }
}

impl fmt::Display for PhaseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("none");
        }
        for p in self.phases() {
            f.write_str(["a", "b", "c"][p])?;
        }
        Ok(())
    }
}

impl std::str::FromStr for PhaseSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "none" || s.is_empty() {
            return Ok(PhaseSet::NONE);
        }
        let s = s.strip_suffix('g').unwrap_or(&s);
        let mut bits = 0u8;
        for ch in s.chars() {
            let bit = match ch {
                'a' => 1,
                'b' => 2,
                'c' => 4,
                _ => return Err(Error::InvalidConfig(format!("bad phase set `{s}`"))),
            };
            if bits & bit != 0 {
                return Err(Error::InvalidConfig(format!("repeated phase in `{s}`")));
            }
            bits |= bit;
        }
        Ok(PhaseSet(bits))
    }
}

impl TryFrom<String> for PhaseSet {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PhaseSet> for String {
    fn from(p: PhaseSet) -> String {
        p.to_string()
    }
}

/// The seven ground-fault types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FaultType {
    #[serde(rename = "ag")]
    Ag,
    #[serde(rename = "bg")]
    Bg,
    #[serde(rename = "cg")]
    Cg,
    #[serde(rename = "abg")]
    Abg,
    #[serde(rename = "acg")]
    Acg,
    #[serde(rename = "bcg")]
    Bcg,
    #[serde(rename = "abcg")]
    Abcg,
}

impl FaultType {
    pub const ALL: [FaultType; 7] = [
        FaultType::Ag,
        FaultType::Bg,
        FaultType::Cg,
        FaultType::Abg,
        FaultType::Acg,
        FaultType::Bcg,
        FaultType::Abcg,
    ];

    pub fn phases(self) -> PhaseSet {
        PhaseSet(match self {
            FaultType::Ag => 1,
            FaultType::Bg => 2,
            FaultType::Cg => 4,
            FaultType::Abg => 3,
            FaultType::Acg => 5,
            FaultType::Bcg => 6,
            FaultType::Abcg => 7,
        })
    }

    pub fn index(self) -> usize {
        FaultType::ALL.iter().position(|&t| t == self).unwrap()
    }

    pub fn from_index(i: usize) -> Option<Self> {
        FaultType::ALL.get(i).copied()
    }

    /// Short label such as `ag` or `abcg`.
    pub fn label(self) -> String {
        format!("{}g", self.phases())
    }
}

impl fmt::Display for FaultType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

pub const DEFAULT_FAULT_TIME: f64 = 0.025;

/// One fault to simulate: operating state, fault parameters and location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultScenario {
    /// Fraction of total load supplied by the DG unit.
    pub dg_penetration: f64,
    pub faulted_phases: PhaseSet,
    /// Fault resistance in ohm.
    pub fault_impedance: f64,
    /// Phase-a source angle at fault inception, degrees.
    pub inception_angle: f64,
    pub path_id: u8,
    /// Meters from the substation along the path.
    pub distance: f64,
    pub fault_time: f64,
    /// Multiplier applied to every load (1.0 = nominal).
    #[serde(default = "one")]
    pub load_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl FaultScenario {
    /// Unfaulted control run.
    pub fn control(dg_penetration: f64) -> Self {
        FaultScenario {
            dg_penetration,
            faulted_phases: PhaseSet::NONE,
            fault_impedance: 1.0,
            inception_angle: 0.0,
            path_id: 1,
            distance: 0.0,
            fault_time: DEFAULT_FAULT_TIME,
            load_scale: 1.0,
        }
    }

    pub fn fault_type(&self) -> Option<FaultType> {
        self.faulted_phases.fault_type()
    }

    pub fn location(&self) -> FaultLocation {
        FaultLocation {
            path_id: self.path_id,
            distance_m: self.distance,
        }
    }

    pub fn is_control(&self) -> bool {
        self.faulted_phases.is_empty()
    }

    /// Checks the scenario-local invariants. Location validity against a
    /// network is checked separately by `NetworkModel::resolve_location`.
    pub fn validate(&self) -> Result<()> {
        if !self.is_control() && self.fault_type().is_none() {
            return Err(Error::InvalidConfig(format!(
                "faulted phases `{}` is not a ground-fault type",
                self.faulted_phases
            )));
        }
        if !(self.fault_impedance > 0.0) || !self.fault_impedance.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "fault impedance must be > 0, got {}",
                self.fault_impedance
            )));
        }
        if !(0.0..1.0).contains(&self.dg_penetration) {
            return Err(Error::InvalidConfig(format!(
                "DG penetration {} outside [0, 1)",
                self.dg_penetration
            )));
        }
        if !(self.load_scale > 0.0) {
            return Err(Error::InvalidConfig("load scale must be > 0".into()));
        }
        if !(self.fault_time >= 0.0) {
            return Err(Error::InvalidConfig("fault time must be >= 0".into()));
        }
        if !(self.distance >= 0.0) {
            return Err(Error::InvalidLocation(format!(
                "negative distance {}",
                self.distance
            )));
        }
        Ok(())
    }
}

/// Parameter grid for dataset generation.
///
/// The record set is the Cartesian product `dg x phases x (impedance, angle) x
/// locations`, where the impedance/angle axis is either a full product or,
/// with `pair_impedance_angle`, the element-wise zip of the two lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioGrid {
    pub dg_levels: Vec<f64>,
    pub phase_sets: Vec<PhaseSet>,
    pub impedances: Vec<f64>,
    pub angles: Vec<f64>,
    #[serde(default)]
    pub pair_impedance_angle: bool,
    #[serde(default = "one")]
    pub load_scale: f64,
    #[serde(default = "default_fault_time")]
    pub fault_time: f64,
    /// Location spacing in meters.
    pub spacing_m: f64,
}

fn default_fault_time() -> f64 {
    DEFAULT_FAULT_TIME
}

fn all_phase_sets() -> Vec<PhaseSet> {
    FaultType::ALL.iter().map(|t| t.phases()).collect()
}

impl ScenarioGrid {
    /// 2 DG levels x 7 phase sets x 4 impedances x 3 angles, every 500 m.
    pub fn paper() -> Self {
        ScenarioGrid {
            dg_levels: vec![0.10, 0.50],
            phase_sets: all_phase_sets(),
            impedances: vec![0.01, 0.1, 1.0, 10.0],
            angles: vec![45.0, 90.0, 135.0],
            pair_impedance_angle: false,
            load_scale: 1.0,
            fault_time: DEFAULT_FAULT_TIME,
            spacing_m: 500.0,
        }
    }

    /// Reduced grid for desk runs: 1 DG level x 7 x 2 impedances x 1 angle.
    pub fn desk() -> Self {
        ScenarioGrid {
            dg_levels: vec![0.10],
            phase_sets: all_phase_sets(),
            impedances: vec![0.1, 1.0],
            angles: vec![90.0],
            pair_impedance_angle: false,
            load_scale: 1.0,
            fault_time: DEFAULT_FAULT_TIME,
            spacing_m: 500.0,
        }
    }

    /// Out-of-grid fault scenarios: DG 30 %, (0.5 ohm, 70 deg) and (5 ohm, 110 deg).
    pub fn robustness_dataset1() -> Self {
        ScenarioGrid {
            dg_levels: vec![0.30],
            phase_sets: all_phase_sets(),
            impedances: vec![0.5, 5.0],
            angles: vec![70.0, 110.0],
            pair_impedance_angle: true,
            load_scale: 1.0,
            fault_time: DEFAULT_FAULT_TIME,
            spacing_m: 500.0,
        }
    }

    /// In-grid fault scenarios of `base` with every load raised by 30 %.
    ///
    /// For the full-scale grid the in-grid scenarios are DG 10 %,
    /// (0.1 ohm, 45 deg) and (1 ohm, 90 deg); for other grids the whole base
    /// grid is reused.
    pub fn robustness_dataset2(base: &ScenarioGrid) -> Self {
        if *base == ScenarioGrid::paper() {
            ScenarioGrid {
                dg_levels: vec![0.10],
                phase_sets: all_phase_sets(),
                impedances: vec![0.1, 1.0],
                angles: vec![45.0, 90.0],
                pair_impedance_angle: true,
                load_scale: 1.3,
                fault_time: DEFAULT_FAULT_TIME,
                spacing_m: 500.0,
            }
        } else {
            ScenarioGrid {
                load_scale: base.load_scale * 1.3,
                ..base.clone()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let axes: [(&str, usize); 4] = [
            ("dg_levels", self.dg_levels.len()),
            ("phase_sets", self.phase_sets.len()),
            ("impedances", self.impedances.len()),
            ("angles", self.angles.len()),
        ];
        for (name, len) in axes {
            if len == 0 {
                return Err(Error::InvalidConfig(format!("grid axis `{name}` is empty")));
            }
        }
        if self.pair_impedance_angle && self.impedances.len() != self.angles.len() {
            return Err(Error::InvalidConfig(
                "paired impedance/angle axes must have equal length".into(),
            ));
        }
        if !(self.spacing_m > 0.0) {
            return Err(Error::InvalidConfig("location spacing must be > 0".into()));
        }
        for p in &self.phase_sets {
            if p.fault_type().is_none() {
                return Err(Error::InvalidConfig(format!("phase set `{p}` is not a fault type")));
            }
        }
        Ok(())
    }

    fn impedance_angle_pairs(&self) -> Vec<(f64, f64)> {
        if self.pair_impedance_angle {
            self.impedances
                .iter()
                .copied()
                .zip(self.angles.iter().copied())
                .collect()
        } else {
            let mut out = Vec::new();
            for &z in &self.impedances {
                for &a in &self.angles {
                    out.push((z, a));
                }
            }
            out
        }
    }

    /// Number of scenarios before multiplying by locations.
    pub fn scenario_count(&self) -> usize {
        self.dg_levels.len() * self.phase_sets.len() * self.impedance_angle_pairs().len()
    }

    /// Expands the grid over the given locations.
    pub fn records(&self, locations: &[FaultLocation]) -> Vec<FaultScenario> {
        scenario_grid_with(self, locations)
    }
}

/// Cartesian product of the scenario axes and the locations.
pub fn scenario_grid(
    dg_levels: &[f64],
    phase_sets: &[PhaseSet],
    impedances: &[f64],
    angles: &[f64],
    locations: &[FaultLocation],
) -> Vec<FaultScenario> {
    let grid = ScenarioGrid {
        dg_levels: dg_levels.to_vec(),
        phase_sets: phase_sets.to_vec(),
        impedances: impedances.to_vec(),
        angles: angles.to_vec(),
        pair_impedance_angle: false,
        load_scale: 1.0,
        fault_time: DEFAULT_FAULT_TIME,
        spacing_m: 500.0,
    };
    scenario_grid_with(&grid, locations)
}

fn scenario_grid_with(grid: &ScenarioGrid, locations: &[FaultLocation]) -> Vec<FaultScenario> {
    let pairs = grid.impedance_angle_pairs();
    let mut out = Vec::with_capacity(grid.scenario_count() * locations.len());
    for &dg in &grid.dg_levels {
        for &phases in &grid.phase_sets {
            for &(zf, angle) in &pairs {
                for loc in locations {
                    out.push(FaultScenario {
                        dg_penetration: dg,
                        faulted_phases: phases,
                        fault_impedance: zf,
                        inception_angle: angle,
                        path_id: loc.path_id,
                        distance: loc.distance_m,
                        fault_time: grid.fault_time,
                        load_scale: grid.load_scale,
                    });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_set_parsing() {
        assert_eq!("abg".parse::<PhaseSet>().unwrap(), FaultType::Abg.phases());
        assert_eq!("c".parse::<PhaseSet>().unwrap(), PhaseSet::C);
        assert!("aa".parse::<PhaseSet>().is_err());
        assert!("d".parse::<PhaseSet>().is_err());
        assert_eq!(FaultType::Abcg.label(), "abcg");
        for t in FaultType::ALL {
            assert_eq!(t.phases().fault_type(), Some(t));
            assert_eq!(FaultType::from_index(t.index()), Some(t));
        }
    }

    #[test]
    fn degenerate_grid_is_single_scenario() {
        let loc = [FaultLocation {
            path_id: 1,
            distance_m: 500.0,
        }];
        let recs = scenario_grid(&[0.1], &[PhaseSet::A], &[1.0], &[90.0], &loc);
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].fault_type(), Some(FaultType::Ag));
    }

    #[test]
    fn paper_grid_has_168_scenarios() {
        assert_eq!(ScenarioGrid::paper().scenario_count(), 168);
        assert_eq!(ScenarioGrid::desk().scenario_count(), 14);
        assert_eq!(ScenarioGrid::robustness_dataset1().scenario_count(), 14);
        let d2 = ScenarioGrid::robustness_dataset2(&ScenarioGrid::paper());
        assert_eq!(d2.scenario_count(), 14);
        assert_eq!(d2.load_scale, 1.3);
    }

    #[test]
    fn empty_axis_is_rejected() {
        let mut g = ScenarioGrid::desk();
        g.impedances.clear();
        assert!(g.validate().is_err());
    }

    #[test]
    fn scenario_validation() {
        let mut s = FaultScenario::control(0.1);
        assert!(s.validate().is_ok());
        s.faulted_phases = PhaseSet::A;
        s.fault_impedance = 0.0;
        assert!(s.validate().is_err());
    }
}
