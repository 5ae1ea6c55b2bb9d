//! Electromagnetic-transient simulation of the feeder.
//!
//! The feeder is discretised into coupled three-phase pi-sections and
//! integrated with trapezoidal companion models at the sampling step. States
//! start from the fundamental-frequency phasor solution, so the pre-fault
//! interval is already in steady state.

mod blocktree;
mod circuit;
mod modal;
mod phasor;
mod record_io;
mod transient;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{FaultScenario, NetworkModel};

pub use blocktree::{BlockTree, BlockTreeFactor};
pub use circuit::{Circuit, RlElement, Terminal, DG_SOURCE, GRID_SOURCE};
pub use modal::{
    modal_transform, ClarkeAmplitudeInvariant, ClarkePowerInvariant, ModalTransform,
    DEFAULT_MODAL_TRANSFORM, MODAL_TRANSFORMS,
};
pub use phasor::{steady_state_for_circuit, steady_state_phasors, SteadyState};
pub use record_io::{
    network_digest, read_record, record_id, write_record, DatasetManifest, ManifestEntry,
    RECORD_FORMAT_VERSION,
};

pub const DEFAULT_SECTIONS_PER_KM: f64 = 2.0;

/// Lowest sampling rate that still resolves the level-7 detail band.
pub const MIN_SAMPLING_FREQUENCY: f64 = 10.4e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub sampling_frequency: f64,
    pub duration: f64,
    pub fault_time: f64,
    pub sections_per_km: f64,
    pub modal_transform: String,
    /// Damp the numerical oscillation trapezoidal integration produces at
    /// the switching instant with two backward-Euler half steps.
    pub critical_damping: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            sampling_frequency: PAPER_SAMPLING_FREQUENCY,
            duration: 0.1,
            fault_time: crate::netmodel::DEFAULT_FAULT_TIME,
            sections_per_km: DEFAULT_SECTIONS_PER_KM,
            modal_transform: DEFAULT_MODAL_TRANSFORM.to_string(),
            critical_damping: true,
        }
    }
}

/// Sampling rate of the full-resolution preset.
pub const PAPER_SAMPLING_FREQUENCY: f64 = 0.67e6;
/// Decimation of the desk preset relative to the full-resolution rate.
pub const DESK_DECIMATION: f64 = 16.0;

impl SimConfig {
    /// Full-resolution sampling.
    pub fn paper() -> Self {
        SimConfig::default()
    }

    /// Sampling reduced 16-fold for quick runs.
    pub fn desk() -> Self {
        SimConfig {
            sampling_frequency: PAPER_SAMPLING_FREQUENCY / DESK_DECIMATION,
            ..SimConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::InvalidConfig(format!("duration {} must be > 0", self.duration)));
        }
        if !(self.fault_time >= 0.0 && self.fault_time < self.duration) {
            return Err(Error::InvalidConfig(format!(
                "fault time {} must lie in [0, duration {})",
                self.fault_time, self.duration
            )));
        }
        if !(self.sampling_frequency >= MIN_SAMPLING_FREQUENCY) || !self.sampling_frequency.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "sampling frequency {} Hz is below {} Hz",
                self.sampling_frequency, MIN_SAMPLING_FREQUENCY
            )));
        }
        if !(self.sections_per_km > 0.0) || !self.sections_per_km.is_finite() {
            return Err(Error::InvalidConfig("sections_per_km must be > 0".into()));
        }
        MODAL_TRANSFORMS.get(&self.modal_transform)?;
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        (self.duration * self.sampling_frequency).round() as usize
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sampling_frequency
    }
}

/// Substation voltages of one simulated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformRecord {
    pub scenario: FaultScenario,
    pub va: Vec<f64>,
    pub vb: Vec<f64>,
    pub vc: Vec<f64>,
    pub v0: Vec<f64>,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub fs: f64,
}

/// Channel order used everywhere a record is flattened.
pub const CHANNEL_NAMES: [&str; 6] = ["Va", "Vb", "Vc", "V0", "V1", "V2"];

impl WaveformRecord {
    pub fn sample_count(&self) -> usize {
        self.va.len()
    }

    pub fn channels(&self) -> [&[f64]; 6] {
        [&self.va, &self.vb, &self.vc, &self.v0, &self.v1, &self.v2]
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        CHANNEL_NAMES
            .iter()
            .position(|c| c.eq_ignore_ascii_case(name))
            .map(|k| self.channels()[k])
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.va.len();
        for (name, ch) in CHANNEL_NAMES.iter().zip(self.channels()) {
            if ch.len() != n {
                return Err(Error::LengthMismatch(format!(
                    "channel {name} has {} samples, expected {n}",
                    ch.len()
                )));
            }
            if ch.iter().any(|x| !x.is_finite()) {
                return Err(Error::NumericalInstability(format!("channel {name} has non-finite samples")));
            }
        }
        Ok(())
    }
}

/// Phase-a grid EMF angle in degrees at time `t`.
fn source_angle_deg(steady: &SteadyState, omega: f64, t: f64) -> f64 {
    (omega * t + steady.grid_emf.arg()).to_degrees().rem_euclid(360.0)
}

/// First instant at or after `fault_time` at which the phase-a source angle
/// equals `angle_deg`.
pub fn switching_time(steady: &SteadyState, frequency_hz: f64, fault_time: f64, angle_deg: f64) -> f64 {
    let omega = 2.0 * std::f64::consts::PI * frequency_hz;
    let now = source_angle_deg(steady, omega, fault_time);
    let mut lag = (angle_deg - now).rem_euclid(360.0);
    if lag > 360.0 - 1e-9 {
        lag = 0.0;
    }
    fault_time + lag / 360.0 / frequency_hz
}

/// Simulates one scenario and returns the substation voltages.
pub fn simulate_fault(
    network: &NetworkModel,
    scenario: &FaultScenario,
    cfg: &SimConfig,
) -> Result<WaveformRecord> {
    cfg.validate()?;
    scenario.validate()?;
    if !scenario.is_control() {
        network.resolve_location(scenario.location())?;
        if scenario.fault_time >= cfg.duration {
            return Err(Error::InvalidConfig(format!(
                "fault time {} is not inside the {} s window",
                scenario.fault_time, cfg.duration
            )));
        }
    }
    let modal = MODAL_TRANSFORMS.get(&cfg.modal_transform)?;
    let circuit = Circuit::build(network, Some(scenario), cfg.sections_per_km)?;
    let steady = steady_state_for_circuit(network, &circuit, scenario.dg_penetration, scenario.load_scale)?;

    let fault = if scenario.is_control() {
        None
    } else {
        let t_sw = switching_time(&steady, network.frequency_hz, scenario.fault_time, scenario.inception_angle);
        let k = ((t_sw * cfg.sampling_frequency) - 1e-9).ceil().max(1.0) as usize;
        let g = 1.0 / scenario.fault_impedance;
        let mut m = Matrix3::zeros();
        for p in scenario.faulted_phases.phases() {
            m[(p, p)] = g;
        }
        Some((k, m))
    };

    let input = transient::TransientInput {
        circuit: &circuit,
        steady: &steady,
        dt: cfg.dt(),
        samples: cfg.sample_count(),
        fault,
        critical_damping: cfg.critical_damping,
        probe: 0,
        abort_above: 100.0 * network.nominal_phase_peak(),
    };
    let [va, vb, vc] = transient::run(&input)?;
    let [v0, v1, v2] = modal.forward(&va, &vb, &vc)?;
    Ok(WaveformRecord {
        scenario: scenario.clone(),
        va,
        vb,
        vc,
        v0,
        v1,
        v2,
        fs: cfg.sampling_frequency,
    })
}
