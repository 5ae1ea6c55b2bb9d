//! Population statistics of a sample array.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wavelet::wavelet_energy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatKind {
    Std,
    Var,
    /// Third central moment.
    Mom3,
    /// Skewness.
    Skn,
    Mode,
    Energy,
}

impl StatKind {
    pub const ALL: [StatKind; 6] = [
        StatKind::Std,
        StatKind::Var,
        StatKind::Mom3,
        StatKind::Skn,
        StatKind::Mode,
        StatKind::Energy,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            StatKind::Std => "std",
            StatKind::Var => "var",
            StatKind::Mom3 => "mom3",
            StatKind::Skn => "skn",
            StatKind::Mode => "mode",
            StatKind::Energy => "energy",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s || (s == "cm3" && *k == StatKind::Mom3))
            .ok_or_else(|| Error::Unknown {
                kind: "statistic",
                name: s.to_string(),
            })
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Second and third central moments.
fn central_moments(x: &[f64]) -> (f64, f64) {
    let m = mean(x);
    let n = x.len() as f64;
    let (mut m2, mut m3) = (0.0, 0.0);
    for v in x {
        let d = v - m;
        m2 += d * d;
        m3 += d * d * d;
    }
    (m2 / n, m3 / n)
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Centre of the most populated histogram bin.
///
/// Bin width follows the Freedman-Diaconis rule over the sample range; when
/// the interquartile range is zero Sturges' bin count is used instead, and
/// the count is capped at the sample size. Ties go to the bin whose centre is
/// nearest zero.
pub fn histogram_mode(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let (lo, hi) = (s[0], s[s.len() - 1]);
    let range = hi - lo;
    if range == 0.0 {
        return lo;
    }
    let n = s.len();
    let iqr = quantile(&s, 0.75) - quantile(&s, 0.25);
    let bins = if iqr > 0.0 {
        let width = 2.0 * iqr / (n as f64).cbrt();
        let fd = (range / width).ceil() as usize;
        if fd > n {
            log::debug!("mode: {fd} bins capped at sample count {n}");
        }
        fd.clamp(1, n)
    } else {
        log::debug!("mode: zero interquartile range over {n} samples, using Sturges bins");
        ((n as f64).log2().ceil() as usize + 1).min(n)
    };
    let width = range / bins as f64;
    let mut counts = vec![0usize; bins];
    for v in &s {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let centre = |b: usize| lo + (b as f64 + 0.5) * width;
    let mut best = 0;
    for b in 1..bins {
        let better = counts[b] > counts[best]
            || (counts[b] == counts[best] && centre(b).abs() < centre(best).abs());
        if better {
            best = b;
        }
    }
    centre(best)
}

pub fn compute_stat(kind: StatKind, x: &[f64]) -> Result<f64> {
    let min_len = match kind {
        StatKind::Std | StatKind::Var | StatKind::Skn => 2,
        _ => 1,
    };
    if x.len() < min_len {
        return Err(Error::Degenerate(format!(
            "{} needs at least {min_len} samples, got {}",
            kind.name(),
            x.len()
        )));
    }
    Ok(match kind {
        StatKind::Std => central_moments(x).0.sqrt(),
        StatKind::Var => central_moments(x).0,
        StatKind::Mom3 => central_moments(x).1,
        StatKind::Skn => {
            let (m2, m3) = central_moments(x);
            if m2 == 0.0 {
                return Err(Error::Degenerate("skewness of constant data".into()));
            }
            m3 / m2.powf(1.5)
        }
        StatKind::Mode => histogram_mode(x),
        StatKind::Energy => wavelet_energy(x),
    })
}

/// All six statistics of one array in `StatKind::ALL` order. Skewness of
/// constant data is NaN here; assembling a feature that needs it fails.
pub fn all_stats(x: &[f64]) -> [f64; 6] {
    let (m2, m3) = central_moments(x);
    let skn = if m2 > 0.0 { m3 / m2.powf(1.5) } else { f64::NAN };
    [m2.sqrt(), m2, m3, skn, histogram_mode(x), wavelet_energy(x)]
}
