//! Cepstral and vocal-tract descriptors: MFCC, delta MFCC, LPC by
//! Levinson-Durbin, LPC cepstrum and formants from LPC polynomial roots.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;

use crate::dsp::Spectrum;
use crate::error::{Error, Result};

pub const N_MEL_FILTERS: usize = 26;
pub const N_MFCC: usize = 12;
pub const N_LPCC: usize = 11;
pub const N_FORMANTS: usize = 5;
pub const LPC_ORDER: usize = 12;
pub const LOG_FLOOR: f64 = 1e-10;
const ROOT_TOLERANCE: f64 = 1e-14;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters equally spaced on the mel scale from 0 Hz to Nyquist.
/// Each filter is stored sparsely as a first bin plus contiguous weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    filters: Vec<(usize, Vec<f64>)>,
    n_bins: usize,
    bin_hz: f64,
    dct: Vec<Vec<f64>>,
}

impl MelFilterbank {
    pub fn new(n_filters: usize, n_bins: usize, sample_rate: u32) -> Result<Self> {
        if n_filters <= N_MFCC || n_bins < 2 {
            return Err(Error::InvalidParameter(format!(
                "filterbank needs more than {N_MFCC} filters and 2 bins"
            )));
        }
        let n_fft = 2 * (n_bins - 1);
        let bin_hz = sample_rate as f64 / n_fft as f64;
        let top = hz_to_mel(sample_rate as f64 / 2.0);
        let edges: Vec<f64> = (0..n_filters + 2)
            .map(|i| mel_to_hz(top * i as f64 / (n_filters + 1) as f64))
            .collect();
        let filters = (0..n_filters)
            .map(|m| {
                let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                let weights: Vec<(usize, f64)> = (0..n_bins)
                    .filter_map(|k| {
                        let f = k as f64 * bin_hz;
                        let w = if f > lo && f <= mid {
                            (f - lo) / (mid - lo)
                        } else if f > mid && f < hi {
                            (hi - f) / (hi - mid)
                        } else {
                            0.0
                        };
                        (w > 0.0).then_some((k, w))
                    })
                    .collect();
                let first = weights.first().map_or(0, |w| w.0);
                (first, weights.into_iter().map(|w| w.1).collect())
            })
            .collect();
        // orthonormal DCT-II rows 1..=N_MFCC
        let scale = (2.0 / n_filters as f64).sqrt();
        let dct = (1..=N_MFCC)
            .map(|i| {
                (0..n_filters)
                    .map(|m| scale * (PI * i as f64 * (m as f64 + 0.5) / n_filters as f64).cos())
                    .collect()
            })
            .collect();
        Ok(Self {
            filters,
            n_bins,
            bin_hz,
            dct,
        })
    }

    pub fn standard(sample_rate: u32) -> Self {
        Self::new(N_MEL_FILTERS, crate::dsp::N_FFT / 2 + 1, sample_rate)
            .expect("standard filterbank parameters are valid")
    }

    pub fn n_filters(&self) -> usize {
        self.filters.len()
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn bin_hz(&self) -> f64 {
        self.bin_hz
    }

    /// Dense weight of filter `m` at bin `k`.
    pub fn weight(&self, m: usize, k: usize) -> f64 {
        let (first, w) = &self.filters[m];
        if k < *first {
            0.0
        } else {
            w.get(k - first).copied().unwrap_or(0.0)
        }
    }

    /// Filter energies `sum_k w_m(k) |X_k|^2`.
    pub fn energies(&self, spec: &Spectrum) -> Vec<f64> {
        self.filters
            .iter()
            .map(|(first, w)| {
                w.iter()
                    .zip(&spec.magnitudes[*first..])
                    .map(|(w, m)| w * m * m)
                    .sum()
            })
            .collect()
    }
}

/// Cepstral coefficients c1..c12 of the log mel energies.
pub fn mfcc(spec: &Spectrum, fb: &MelFilterbank) -> Result<[f64; N_MFCC]> {
    if spec.magnitudes.len() != fb.n_bins {
        return Err(Error::DimensionMismatch {
            expected: fb.n_bins,
            got: spec.magnitudes.len(),
        });
    }
    let logs: Vec<f64> = fb
        .energies(spec)
        .into_iter()
        .map(|e| e.max(LOG_FLOOR).ln())
        .collect();
    let mut out = [0.0; N_MFCC];
    for (c, row) in out.iter_mut().zip(&fb.dct) {
        *c = row.iter().zip(&logs).map(|(a, b)| a * b).sum();
    }
    Ok(out)
}

/// Regression deltas over a +-2 frame window with edge replication.
pub fn delta<const D: usize>(series: &[[f64; D]]) -> Vec<[f64; D]> {
    let n = series.len();
    if n == 0 {
        return Vec::new();
    }
    let at = |t: isize| &series[t.clamp(0, n as isize - 1) as usize];
    (0..n as isize)
        .map(|t| {
            let mut d = [0.0; D];
            for (i, v) in d.iter_mut().enumerate() {
                *v = (1..=2)
                    .map(|k| k as f64 * (at(t + k)[i] - at(t - k)[i]))
                    .sum::<f64>()
                    / 10.0;
            }
            d
        })
        .collect()
}

/// Linear predictor `x[n] ~ sum_k a_k x[n-k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpcModel {
    pub coefficients: Vec<f64>,
    pub reflection: Vec<f64>,
    /// Square root of the final prediction error power.
    pub gain: f64,
}

impl LpcModel {
    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    pub fn zeros(order: usize) -> Self {
        Self {
            coefficients: vec![0.0; order],
            reflection: vec![0.0; order],
            gain: 0.0,
        }
    }
}

/// Biased autocorrelation `r_k = (1/N) sum_n x[n] x[n+k]` for `k = 0..=max_lag`.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len().max(1) as f64;
    (0..=max_lag)
        .map(|k| {
            if k >= x.len() {
                0.0
            } else {
                x[k..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / n
            }
        })
        .collect()
}

/// Levinson-Durbin recursion on `r_0..r_order`. Stops early (leaving the
/// remaining coefficients at zero) if the error power vanishes.
pub fn levinson_durbin(r: &[f64], order: usize) -> Result<LpcModel> {
    if r.len() < order + 1 {
        return Err(Error::DimensionMismatch {
            expected: order + 1,
            got: r.len(),
        });
    }
    if r[0] <= 0.0 {
        return Ok(LpcModel::zeros(order));
    }
    let mut a = vec![0.0; order];
    let mut refl = vec![0.0; order];
    let mut err = r[0];
    for i in 0..order {
        let acc = r[i + 1] - (0..i).map(|j| a[j] * r[i - j]).sum::<f64>();
        let k = acc / err;
        let prev = a.clone();
        a[i] = k;
        for j in 0..i {
            a[j] = prev[j] - k * prev[i - 1 - j];
        }
        refl[i] = k;
        err *= 1.0 - k * k;
        if err <= r[0] * 1e-14 {
            err = err.max(0.0);
            break;
        }
    }
    Ok(LpcModel {
        coefficients: a,
        reflection: refl,
        gain: err.sqrt(),
    })
}

/// LPC of an (already emphasized and windowed) frame.
pub fn lpc(frame: &[f64], order: usize) -> Result<LpcModel> {
    if frame.is_empty() {
        return Err(Error::Empty("lpc frame"));
    }
    levinson_durbin(&autocorrelation(frame, order), order)
}

/// LPC cepstrum: `c_1 = a_1`, `c_n = a_n + sum_{k<n} (k/n) c_k a_{n-k}`.
pub fn lpcc(model: &LpcModel, n_coeffs: usize) -> Vec<f64> {
    let a = |j: usize| model.coefficients.get(j - 1).copied().unwrap_or(0.0);
    let mut c = Vec::with_capacity(n_coeffs);
    for n in 1..=n_coeffs {
        let mut v = a(n);
        for k in 1..n {
            v += (k as f64 / n as f64) * c[k - 1] * a(n - k);
        }
        c.push(v);
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormantConfig {
    pub max_bandwidth_hz: f64,
    pub min_hz: f64,
    /// Distance kept from Nyquist.
    pub nyquist_margin_hz: f64,
    pub max_iterations: usize,
}

impl Default for FormantConfig {
    fn default() -> Self {
        Self {
            max_bandwidth_hz: 400.0,
            min_hz: 90.0,
            nyquist_margin_hz: 50.0,
            max_iterations: 500,
        }
    }
}

/// Roots of `1 - sum_k a_k z^-k` as `(re, im)` pairs, found by
/// simultaneous Aberth-Ehrlich iteration on `z^p - a_1 z^(p-1) - ... - a_p`.
/// Trailing zero coefficients (roots at the origin) are stripped first.
/// `None` if the iteration does not converge.
pub fn lpc_roots(coefficients: &[f64], max_iterations: usize) -> Option<Vec<(f64, f64)>> {
    let p = coefficients
        .iter()
        .rposition(|&a| a != 0.0)
        .map_or(0, |i| i + 1);
    if p == 0 {
        return Some(Vec::new());
    }
    // monic polynomial, highest degree first
    let poly: Vec<f64> = std::iter::once(1.0)
        .chain(coefficients[..p].iter().map(|a| -a))
        .collect();
    let eval = |z: Complex<f64>| {
        let (mut v, mut d) = (Complex::new(0.0, 0.0), Complex::new(0.0, 0.0));
        for &c in &poly {
            d = d * z + v;
            v = v * z + c;
        }
        (v, d)
    };
    // initial guesses spread over the unit circle
    let mut z: Vec<Complex<f64>> = (0..p)
        .map(|k| Complex::from_polar(1.0, 2.0 * PI * k as f64 / p as f64 + 0.4))
        .collect();
    let mut done = vec![false; p];
    for _ in 0..max_iterations {
        for k in 0..p {
            if done[k] {
                continue;
            }
            let (v, d) = eval(z[k]);
            if v == Complex::new(0.0, 0.0) {
                done[k] = true;
                continue;
            }
            let ratio = v / d;
            let repulsion: Complex<f64> = (0..p)
                .filter(|&j| j != k)
                .map(|j| (z[k] - z[j]).inv())
                .sum();
            let step = ratio / (Complex::new(1.0, 0.0) - ratio * repulsion);
            if !step.re.is_finite() || !step.im.is_finite() {
                return None;
            }
            z[k] -= step;
            if step.norm() <= ROOT_TOLERANCE * z[k].norm().max(1.0) {
                done[k] = true;
            }
        }
        if done.iter().all(|&d| d) {
            return Some(z.into_iter().map(|c| (c.re, c.im)).collect());
        }
    }
    None
}

/// First five formant frequencies in Hz, ascending, zero-padded.
pub fn formants(model: &LpcModel, sample_rate: u32, cfg: &FormantConfig) -> [f64; N_FORMANTS] {
    let mut out = [0.0; N_FORMANTS];
    let Some(roots) = lpc_roots(&model.coefficients, cfg.max_iterations) else {
        log::debug!("formant root finding did not converge");
        return out;
    };
    let rate = sample_rate as f64;
    let upper = rate / 2.0 - cfg.nyquist_margin_hz;
    let mut freqs: Vec<f64> = roots
        .into_iter()
        .filter(|&(_, im)| im > 0.0)
        .filter_map(|(re, im)| {
            let radius = re.hypot(im);
            let bandwidth = -(rate / PI) * radius.ln();
            let freq = rate / (2.0 * PI) * im.atan2(re);
            (bandwidth < cfg.max_bandwidth_hz && freq >= cfg.min_hz && freq <= upper)
                .then_some(freq)
        })
        .collect();
    freqs.sort_by(f64::total_cmp);
    for (slot, f) in out.iter_mut().zip(freqs) {
        *slot = f;
    }
    out
}

/// Per-frame cepstral descriptors.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CepstralFrame {
    pub mfcc: [f64; N_MFCC],
    pub delta_mfcc: [f64; N_MFCC],
    pub lpcc: [f64; N_LPCC],
    pub formants: [f64; N_FORMANTS],
}
