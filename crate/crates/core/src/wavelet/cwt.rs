//! Direct continuous wavelet transform, kept as a cross-check for the DWT.

use super::WaveletFilter;

/// Mother wavelet sampled on a dyadic grid by the cascade algorithm.
#[derive(Debug, Clone)]
pub struct WaveletFunction {
    /// psi(k * step) for k = 0..len.
    pub psi: Vec<f64>,
    pub step: f64,
}

impl WaveletFunction {
    pub fn cascade(filter: &WaveletFilter, iterations: u32) -> Self {
        let h: Vec<f64> = filter.rec_lo.iter().map(|x| x * std::f64::consts::SQRT_2).collect();
        let g: Vec<f64> = filter.rec_hi.iter().map(|x| x * std::f64::consts::SQRT_2).collect();
        let refine = |phi: &[f64], taps: &[f64], stride: usize| {
            let mut out = vec![0.0; phi.len() + (taps.len() - 1) * stride];
            for (k, &t) in taps.iter().enumerate() {
                for (n, &p) in phi.iter().enumerate() {
                    out[n + k * stride] += t * p;
                }
            }
            out
        };
        // phi_{i+1}[n] = sum_k h[k] phi_i[n - k 2^i], with phi_i sampled on
        // the grid 2^-i and phi_0 the unit box.
        let mut phi = vec![1.0];
        for i in 0..iterations.saturating_sub(1) {
            phi = refine(&phi, &h, 1usize << i);
        }
        let psi = refine(&phi, &g, 1usize << iterations.saturating_sub(1));
        WaveletFunction {
            psi,
            step: 1.0 / f64::from(1u32 << iterations),
        }
    }

    pub fn support(&self) -> f64 {
        (self.psi.len() - 1) as f64 * self.step
    }

    /// Linear interpolation; zero outside the support.
    pub fn eval(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let pos = t / self.step;
        let k = pos.floor() as usize;
        if k + 1 >= self.psi.len() {
            return if k + 1 == self.psi.len() && pos == k as f64 { self.psi[k] } else { 0.0 };
        }
        let w = pos - k as f64;
        self.psi[k] * (1.0 - w) + self.psi[k + 1] * w
    }

    /// Frequency (cycles per unit time) at which |Psi(f)| peaks.
    pub fn peak_frequency(&self) -> f64 {
        let mut best = (0.0, 0.0);
        let mut f = 0.01;
        while f < 3.0 {
            let (mut re, mut im) = (0.0, 0.0);
            for (k, &p) in self.psi.iter().enumerate() {
                let ph = -2.0 * std::f64::consts::PI * f * k as f64 * self.step;
                re += p * ph.cos();
                im += p * ph.sin();
            }
            let mag = re.hypot(im);
            if mag > best.1 {
                best = (f, mag);
            }
            f += 0.001;
        }
        best.0
    }
}

/// Coefficients `C[s][i] = Ts / sqrt(a) * sum_n psi((n - i) Ts / a) x[n]`
/// with `a = scales[s] * Ts`, so scales are given in samples.
pub fn cwt_reference(signal: &[f64], scales: &[f64], filter: &WaveletFilter, fs: f64) -> Vec<Vec<f64>> {
    let psi = WaveletFunction::cascade(filter, 10);
    let ts = 1.0 / fs;
    let support = psi.support();
    scales
        .iter()
        .map(|&a| {
            let norm = ts / (a * ts).sqrt();
            (0..signal.len())
                .map(|i| {
                    let last = (i as f64 + support * a).ceil() as usize;
                    let mut s = 0.0;
                    for (n, &x) in signal.iter().enumerate().take(last.min(signal.len() - 1) + 1).skip(i) {
                        s += psi.eval((n - i) as f64 / a) * x;
                    }
                    norm * s
                })
                .collect()
        })
        .collect()
}

/// Per-scale energy of a CWT coefficient matrix.
pub fn scale_energies(coeffs: &[Vec<f64>]) -> Vec<f64> {
    coeffs.iter().map(|row| super::wavelet_energy(row)).collect()
}
