//! Multi-level discrete wavelet transform.
//!
//! Each level filters the previous approximation with the decomposition
//! low/high-pass pair and keeps every second output. The default boundary
//! handling is periodization, which makes the transform orthogonal.

mod cwt;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::Registry;

pub use cwt::{cwt_reference, scale_energies, WaveletFunction};

pub const DEFAULT_LEVELS: usize = 8;
pub const DEFAULT_WAVELET: &str = "db4";

/// Orthonormal two-channel filter bank.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletFilter {
    pub name: &'static str,
    pub dec_lo: Vec<f64>,
    pub dec_hi: Vec<f64>,
    pub rec_lo: Vec<f64>,
    pub rec_hi: Vec<f64>,
    /// Dominant frequency of the mother wavelet, cycles per unit time.
    pub center_frequency: f64,
}

const DB4_DEC_LO: [f64; 8] = [
    -0.010597401784997278,
    0.032883011666982945,
    0.030841381835986965,
    -0.18703481171888114,
    -0.02798376941698385,
    0.6308807679295904,
    0.7148465705525415,
    0.23037781330885523,
];

impl WaveletFilter {
    /// Builds the bank from the low-pass decomposition taps; the other three
    /// filters follow from the quadrature-mirror relations.
    pub fn from_lowpass(name: &'static str, dec_lo: &[f64], center_frequency: f64) -> Result<Self> {
        let n = dec_lo.len();
        let dec_hi: Vec<f64> = (0..n)
            .map(|k| if k % 2 == 0 { -dec_lo[n - 1 - k] } else { dec_lo[n - 1 - k] })
            .collect();
        let f = WaveletFilter {
            name,
            dec_lo: dec_lo.to_vec(),
            rec_lo: dec_lo.iter().rev().copied().collect(),
            rec_hi: dec_hi.iter().rev().copied().collect(),
            dec_hi,
            center_frequency,
        };
        f.check()?;
        Ok(f)
    }

    pub fn db4() -> Self {
        Self::from_lowpass("db4", &DB4_DEC_LO, 0.7142857142857143).expect("db4 taps are orthonormal")
    }

    pub fn len(&self) -> usize {
        self.dec_lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dec_lo.is_empty()
    }

    /// Orthonormality: unit norm, orthogonal to even shifts, taps sum to sqrt 2.
    pub fn check(&self) -> Result<()> {
        let h = &self.dec_lo;
        let n = h.len();
        if n < 2 || n % 2 != 0 {
            return Err(Error::InvalidConfig(format!("{}: filter length {n} must be even", self.name)));
        }
        let sum: f64 = h.iter().sum();
        if (sum - std::f64::consts::SQRT_2).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!("{}: low-pass taps sum to {sum}", self.name)));
        }
        for shift in (0..n).step_by(2) {
            let dot: f64 = (0..n - shift).map(|k| h[k] * h[k + shift]).sum();
            let want = if shift == 0 { 1.0 } else { 0.0 };
            if (dot - want).abs() > 1e-12 {
                return Err(Error::InvalidConfig(format!(
                    "{}: taps not orthonormal at shift {shift} ({dot})",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

pub static WAVELETS: Registry<WaveletFilter> = Registry::new("wavelet", &[("db4", || Box::new(WaveletFilter::db4()))]);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Periodic,
    Symmetric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DwtDecomposition {
    pub levels: usize,
    /// `details[j - 1]` holds CD_j.
    pub details: Vec<Vec<f64>>,
    /// CA_J.
    pub approximation: Vec<f64>,
    /// CA_1 .. CA_{J-1}, when requested.
    pub intermediate: Option<Vec<Vec<f64>>>,
    /// Input length at each level (`input_lengths[0]` is the signal length).
    pub input_lengths: Vec<usize>,
    pub boundary: Boundary,
    pub fs: Option<f64>,
}

impl DwtDecomposition {
    pub fn source_len(&self) -> usize {
        self.input_lengths[0]
    }

    pub fn detail(&self, level: usize) -> &[f64] {
        &self.details[level - 1]
    }

    /// Text dump, one `level kind index value` line per coefficient.
    pub fn write_dump(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "# level kind index value")?;
        for (j, d) in self.details.iter().enumerate() {
            for (i, x) in d.iter().enumerate() {
                writeln!(w, "{} CD {} {:.17e}", j + 1, i, x)?;
            }
        }
        for (i, x) in self.approximation.iter().enumerate() {
            writeln!(w, "{} CA {} {:.17e}", self.levels, i, x)?;
        }
        Ok(())
    }
}

fn sym_index(i: isize, n: usize) -> usize {
    // half-sample symmetric extension: ... x1 x0 | x0 x1 ... x(n-1) | x(n-1) ...
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// One analysis step: returns (approximation, detail).
pub fn dwt_step(x: &[f64], f: &WaveletFilter, boundary: Boundary) -> (Vec<f64>, Vec<f64>) {
    let l = f.len();
    match boundary {
        Boundary::Periodic => {
            let mut buf;
            let x = if x.len() % 2 == 1 {
                buf = x.to_vec();
                buf.push(*x.last().unwrap());
                &buf[..]
            } else {
                x
            };
            let n = x.len();
            let half = n / 2;
            let mut a = vec![0.0; half];
            let mut d = vec![0.0; half];
            for k in 0..half {
                let (mut sa, mut sd) = (0.0, 0.0);
                for j in 0..l {
                    let idx = (2 * k + l / 2 + n * l - j) % n;
                    sa += f.dec_lo[j] * x[idx];
                    sd += f.dec_hi[j] * x[idx];
                }
                a[k] = sa;
                d[k] = sd;
            }
            (a, d)
        }
        Boundary::Symmetric => {
            let n = x.len();
            let out = (n + l - 1) / 2;
            let mut a = vec![0.0; out];
            let mut d = vec![0.0; out];
            for k in 0..out {
                let (mut sa, mut sd) = (0.0, 0.0);
                for j in 0..l {
                    let v = x[sym_index(2 * k as isize + 1 - j as isize, n)];
                    sa += f.dec_lo[j] * v;
                    sd += f.dec_hi[j] * v;
                }
                a[k] = sa;
                d[k] = sd;
            }
            (a, d)
        }
    }
}

/// One synthesis step producing `n` samples.
pub fn idwt_step(a: &[f64], d: &[f64], f: &WaveletFilter, boundary: Boundary, n: usize) -> Vec<f64> {
    let l = f.len();
    match boundary {
        Boundary::Periodic => {
            let m = 2 * a.len();
            let mut x = vec![0.0; m];
            for k in 0..a.len() {
                for j in 0..l {
                    let idx = (2 * k + l / 2 + m * l - j) % m;
                    x[idx] += f.dec_lo[j] * a[k] + f.dec_hi[j] * d[k];
                }
            }
            x.truncate(n);
            x
        }
        Boundary::Symmetric => {
            let mut x = vec![0.0; n];
            for (t, xt) in x.iter_mut().enumerate() {
                // y[m] = sum_k a[k] rec[m - 2k] evaluated at m = t + l - 2
                let m = t + l - 2;
                let mut s = 0.0;
                let k_lo = (m + 1).saturating_sub(l).div_ceil(2);
                let k_hi = (m / 2).min(a.len() - 1);
                for k in k_lo..=k_hi {
                    let i = m - 2 * k;
                    s += a[k] * f.rec_lo[i] + d[k] * f.rec_hi[i];
                }
                *xt = s;
            }
            x
        }
    }
}

pub fn dwt_multilevel(signal: &[f64], filter: &WaveletFilter, levels: usize) -> Result<DwtDecomposition> {
    dwt_multilevel_with(signal, filter, levels, Boundary::Periodic, false)
}

pub fn dwt_multilevel_with(
    signal: &[f64],
    filter: &WaveletFilter,
    levels: usize,
    boundary: Boundary,
    keep_intermediate: bool,
) -> Result<DwtDecomposition> {
    if levels == 0 || levels >= usize::BITS as usize || signal.len() < (1usize << levels) {
        return Err(Error::SignalTooShort {
            len: signal.len(),
            levels,
        });
    }
    let mut details = Vec::with_capacity(levels);
    let mut inter = keep_intermediate.then(Vec::new);
    let mut input_lengths = Vec::with_capacity(levels);
    let mut cur = signal.to_vec();
    for j in 0..levels {
        input_lengths.push(cur.len());
        let (a, d) = dwt_step(&cur, filter, boundary);
        details.push(d);
        if j + 1 < levels {
            if let Some(v) = inter.as_mut() {
                v.push(a.clone());
            }
        }
        cur = a;
    }
    Ok(DwtDecomposition {
        levels,
        details,
        approximation: cur,
        intermediate: inter,
        input_lengths,
        boundary,
        fs: None,
    })
}

pub fn idwt_multilevel(dec: &DwtDecomposition, filter: &WaveletFilter) -> Result<Vec<f64>> {
    if dec.levels == 0
        || dec.details.len() != dec.levels
        || dec.input_lengths.len() != dec.levels
    {
        return Err(Error::LengthMismatch(format!(
            "decomposition claims {} levels but holds {} detail arrays",
            dec.levels,
            dec.details.len()
        )));
    }
    let mut a = dec.approximation.clone();
    for j in (0..dec.levels).rev() {
        let d = &dec.details[j];
        if d.len() != a.len() {
            return Err(Error::LengthMismatch(format!(
                "level {}: {} detail vs {} approximation coefficients",
                j + 1,
                d.len(),
                a.len()
            )));
        }
        let n = dec.input_lengths[j];
        let expect = match dec.boundary {
            Boundary::Periodic => n.div_ceil(2),
            Boundary::Symmetric => (n + filter.len() - 1) / 2,
        };
        if expect != a.len() {
            return Err(Error::LengthMismatch(format!(
                "level {}: {} coefficients cannot come from {n} samples",
                j + 1,
                a.len()
            )));
        }
        a = idwt_step(&a, d, filter, dec.boundary, n);
    }
    Ok(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandKind {
    Detail,
    Approximation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub level: usize,
    pub kind: BandKind,
    pub lo_hz: f64,
    pub hi_hz: f64,
}

/// Nominal frequency band covered by a level's coefficients.
pub fn band_frequencies(level: usize, kind: BandKind, fs: f64) -> BandSpec {
    let hi_detail = fs / 2f64.powi(level as i32);
    let lo_detail = fs / 2f64.powi(level as i32 + 1);
    let (lo_hz, hi_hz) = match kind {
        BandKind::Detail => (lo_detail, hi_detail),
        BandKind::Approximation => (0.0, lo_detail),
    };
    BandSpec {
        level,
        kind,
        lo_hz,
        hi_hz,
    }
}

/// Sum of squared coefficients.
pub fn wavelet_energy(coeffs: &[f64]) -> f64 {
    coeffs.iter().map(|c| c * c).sum()
}
