use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

const EPS0: f64 = 8.854_187_812_8e-12;
/// mu0 / (2 pi) in H/km.
const MU0_2PI_PER_KM: f64 = 2.0e-4;

/// Conductor data shared by every line section, plus optional overrides for
/// the derived sequence parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineConductor {
    pub dc_resistance_ohm_per_km: f64,
    pub inner_radius_cm: f64,
    pub outer_radius_cm: f64,
    #[serde(default = "default_gmd")]
    pub gmd_m: f64,
    #[serde(default = "default_height")]
    pub height_m: f64,
    #[serde(default = "default_rho")]
    pub earth_resistivity_ohm_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r1_ohm_per_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l1_mh_per_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1_nf_per_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0_ohm_per_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l0_mh_per_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0_nf_per_km: Option<f64>,
}

fn default_gmd() -> f64 {
    1.0
}
fn default_height() -> f64 {
    10.0
}
fn default_rho() -> f64 {
    100.0
}

/// Positive- and zero-sequence per-km parameters in SI units (ohm, H, F).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceParams {
    pub r1: f64,
    pub l1: f64,
    pub c1: f64,
    pub r0: f64,
    pub l0: f64,
    pub c0: f64,
}

impl SequenceParams {
    /// Self/mutual split of the series resistance, inductance and shunt
    /// capacitance for a transposed section of `km` kilometres.
    pub fn phase_matrices(&self, km: f64) -> PhaseDomain {
        PhaseDomain {
            r_self: (self.r0 + 2.0 * self.r1) / 3.0 * km,
            r_mut: (self.r0 - self.r1) / 3.0 * km,
            l_self: (self.l0 + 2.0 * self.l1) / 3.0 * km,
            l_mut: (self.l0 - self.l1) / 3.0 * km,
            c_self: (self.c0 + 2.0 * self.c1) / 3.0 * km,
            c_mut: (self.c0 - self.c1) / 3.0 * km,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseDomain {
    pub r_self: f64,
    pub r_mut: f64,
    pub l_self: f64,
    pub l_mut: f64,
    /// Maxwell capacitance matrix entries (c_mut is negative).
    pub c_self: f64,
    pub c_mut: f64,
}

impl LineConductor {
    /// Geometric mean radius of a tubular conductor, metres.
    pub fn gmr_m(&self) -> f64 {
        let r2 = self.outer_radius_cm / 100.0;
        let r1 = self.inner_radius_cm / 100.0;
        if r1 <= 0.0 {
            return r2 * (-0.25f64).exp();
        }
        let a = r2 * r2 - r1 * r1;
        let k = r1.powi(4) * (r2 / r1).ln() / (a * a) - (3.0 * r1 * r1 - r2 * r2) / (4.0 * a);
        r2 * (-k).exp()
    }

    /// Carson equivalent earth-return depth, metres.
    pub fn earth_return_depth_m(&self, frequency_hz: f64) -> f64 {
        658.5 * (self.earth_resistivity_ohm_m / frequency_hz).sqrt()
    }

    /// Sequence parameters from single-conductor geometry with Carson's
    /// earth-return correction; explicit overrides in the config win.
    pub fn sequence_params(&self, frequency_hz: f64) -> SequenceParams {
        let gmr = self.gmr_m();
        let de = self.earth_return_depth_m(frequency_hz);
        let r = self.dc_resistance_ohm_per_km;
        let r_earth = PI * PI * frequency_hz * 1e-4;

        let l1 = MU0_2PI_PER_KM * (self.gmd_m / gmr).ln();
        let l0 = MU0_2PI_PER_KM * ((de / gmr).ln() + 2.0 * (de / self.gmd_m).ln());

        let radius = self.outer_radius_cm / 100.0;
        let h2 = 2.0 * self.height_m;
        let p_self = (h2 / radius).ln();
        let p_mut = ((h2 * h2 + self.gmd_m * self.gmd_m).sqrt() / self.gmd_m).ln();
        let k = 2.0 * PI * EPS0 * 1000.0;
        let c1 = k / (p_self - p_mut);
        let c0 = k / (p_self + 2.0 * p_mut);

        SequenceParams {
            r1: self.r1_ohm_per_km.unwrap_or(r),
            l1: self.l1_mh_per_km.map_or(l1, |v| v * 1e-3),
            c1: self.c1_nf_per_km.map_or(c1, |v| v * 1e-9),
            r0: self.r0_ohm_per_km.unwrap_or(r + 3.0 * r_earth),
            l0: self.l0_mh_per_km.map_or(l0, |v| v * 1e-3),
            c0: self.c0_nf_per_km.map_or(c0, |v| v * 1e-9),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conductor() -> LineConductor {
        LineConductor {
            dc_resistance_ohm_per_km: 0.065,
            inner_radius_cm: 0.14,
            outer_radius_cm: 0.8,
            gmd_m: 1.0,
            height_m: 10.0,
            earth_resistivity_ohm_m: 100.0,
            r1_ohm_per_km: None,
            l1_mh_per_km: None,
            c1_nf_per_km: None,
            r0_ohm_per_km: None,
            l0_mh_per_km: None,
            c0_nf_per_km: None,
        }
    }

    #[test]
    fn solid_conductor_gmr() {
        let mut c = conductor();
        c.inner_radius_cm = 0.0;
        assert!((c.gmr_m() - 0.008 * 0.778_800_783).abs() < 1e-9);
        // a thin inner bore barely moves the GMR
        let tube = conductor().gmr_m();
        assert!(tube > c.gmr_m() && tube < 0.008);
    }

    #[test]
    fn typical_overhead_values() {
        let p = conductor().sequence_params(60.0);
        // ~1 mH/km, ~11 nF/km positive sequence for a 1 m spacing
        assert!(p.l1 > 0.9e-3 && p.l1 < 1.1e-3, "l1 = {}", p.l1);
        assert!(p.c1 > 10e-9 && p.c1 < 13e-9, "c1 = {}", p.c1);
        assert!(p.l0 > 2.0 * p.l1);
        assert!(p.c0 < p.c1);
        assert!((p.r0 - (0.065 + 3.0 * PI * PI * 60.0 * 1e-4)).abs() < 1e-12);
    }

    #[test]
    fn overrides_take_precedence() {
        let mut c = conductor();
        c.l1_mh_per_km = Some(1.5);
        c.r0_ohm_per_km = Some(0.3);
        let p = c.sequence_params(60.0);
        assert_eq!(p.l1, 1.5e-3);
        assert_eq!(p.r0, 0.3);
    }

    #[test]
    fn phase_split_recovers_sequences() {
        let p = conductor().sequence_params(60.0);
        let m = p.phase_matrices(2.0);
        assert!(((m.r_self - m.r_mut) - 2.0 * p.r1).abs() < 1e-12);
        assert!(((m.l_self + 2.0 * m.l_mut) - 2.0 * p.l0).abs() < 1e-15);
        assert!(((m.c_self - m.c_mut) - 2.0 * p.c1).abs() < 1e-20);
    }
}
