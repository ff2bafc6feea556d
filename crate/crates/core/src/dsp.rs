//! Frame-level time and frequency descriptors: spectral centroid, band
//! energy ratio, delta spectrum magnitude, zero crossing rate, short-time
//! energy, autocorrelation pitch and the utterance silence ratio.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::dataset::FrameSeries;
use crate::error::{Error, Result};

pub const N_FFT: usize = 256;
pub const PRE_EMPHASIS: f64 = 0.97;

/// `y[n] = x[n] - coef * x[n-1]` followed by a Hamming window.
pub fn emphasize_and_window(frame: &[f64], coef: f64) -> Vec<f64> {
    let len = frame.len();
    let denom = (len.max(2) - 1) as f64;
    (0..len)
        .map(|n| {
            let prev = if n == 0 { 0.0 } else { frame[n - 1] };
            let w = if len == 1 {
                1.0
            } else {
                0.54 - 0.46 * (2.0 * PI * n as f64 / denom).cos()
            };
            (frame[n] - coef * prev) * w
        })
        .collect()
}

/// One-sided magnitude spectrum, bins `0..=N_FFT/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub magnitudes: Vec<f64>,
    pub bin_hz: f64,
}

impl Spectrum {
    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_hz
    }

    pub fn nyquist(&self) -> f64 {
        self.frequency(self.magnitudes.len() - 1)
    }
}

/// Reusable FFT front end.
#[derive(Clone)]
pub struct SpectrumAnalyzer {
    fft: Arc<dyn Fft<f64>>,
    pre_emphasis: f64,
}

impl std::fmt::Debug for SpectrumAnalyzer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectrumAnalyzer")
            .field("n_fft", &N_FFT)
            .field("pre_emphasis", &self.pre_emphasis)
            .finish()
    }
}

impl Default for SpectrumAnalyzer {
    fn default() -> Self {
        Self::with_pre_emphasis(PRE_EMPHASIS)
    }
}

impl SpectrumAnalyzer {
    pub fn with_pre_emphasis(pre_emphasis: f64) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(N_FFT);
        Self { fft, pre_emphasis }
    }

    pub fn pre_emphasis(&self) -> f64 {
        self.pre_emphasis
    }

    /// Pre-emphasis, Hamming window, zero-padding to [`N_FFT`] and FFT.
    pub fn spectrum(&self, frame: &[f64], sample_rate: u32) -> Result<Spectrum> {
        if frame.len() > N_FFT {
            return Err(Error::InvalidParameter(format!(
                "frame of {} samples exceeds FFT size {N_FFT}",
                frame.len()
            )));
        }
        let mut buf: Vec<Complex<f64>> = emphasize_and_window(frame, self.pre_emphasis)
            .into_iter()
            .map(|v| Complex::new(v, 0.0))
            .collect();
        buf.resize(N_FFT, Complex::new(0.0, 0.0));
        self.fft.process(&mut buf);
        Ok(Spectrum {
            magnitudes: buf[..=N_FFT / 2].iter().map(|c| c.norm()).collect(),
            bin_hz: sample_rate as f64 / N_FFT as f64,
        })
    }
}

pub fn spectrum(frame: &[f64], sample_rate: u32) -> Result<Spectrum> {
    SpectrumAnalyzer::default().spectrum(frame, sample_rate)
}

/// Magnitude-weighted mean frequency, DC excluded; 0 for an empty spectrum.
pub fn spectral_centroid(spec: &Spectrum) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (k, &m) in spec.magnitudes.iter().enumerate().skip(1) {
        num += spec.frequency(k) * m;
        den += m;
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Share of (non-DC) spectral energy below `split_hz`.
pub fn band_energy_ratio(spec: &Spectrum, split_hz: f64) -> Result<f64> {
    if !(split_hz > 0.0 && split_hz < spec.nyquist()) {
        return Err(Error::InvalidParameter(format!(
            "band split {split_hz} Hz outside (0, {})",
            spec.nyquist()
        )));
    }
    let (mut low, mut total) = (0.0, 0.0);
    for (k, &m) in spec.magnitudes.iter().enumerate().skip(1) {
        let e = m * m;
        total += e;
        if spec.frequency(k) < split_hz {
            low += e;
        }
    }
    Ok(if total == 0.0 { 0.0 } else { low / total })
}

/// L1 distance between consecutive magnitude spectra; 0 for the first frame.
pub fn delta_spectrum_magnitude(spec: &Spectrum, prev: Option<&Spectrum>) -> Result<f64> {
    let Some(prev) = prev else { return Ok(0.0) };
    if prev.magnitudes.len() != spec.magnitudes.len() {
        return Err(Error::DimensionMismatch {
            expected: prev.magnitudes.len(),
            got: spec.magnitudes.len(),
        });
    }
    Ok(spec
        .magnitudes
        .iter()
        .zip(&prev.magnitudes)
        .map(|(a, b)| (a - b).abs())
        .sum())
}

/// Fraction of adjacent sample pairs whose signs differ (0 counts as +).
pub fn zero_crossing_rate(frame: &[f64]) -> f64 {
    if frame.len() < 2 {
        return 0.0;
    }
    let crossings = frame
        .windows(2)
        .filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0))
        .count();
    crossings as f64 / (frame.len() - 1) as f64
}

pub fn short_time_energy(frame: &[f64]) -> f64 {
    if frame.is_empty() {
        return 0.0;
    }
    frame.iter().map(|x| x * x).sum::<f64>() / frame.len() as f64
}

pub fn rms(frame: &[f64]) -> f64 {
    short_time_energy(frame).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchConfig {
    pub min_hz: f64,
    pub max_hz: f64,
    pub voicing_threshold: f64,
}

impl Default for PitchConfig {
    fn default() -> Self {
        Self {
            min_hz: 50.0,
            max_hz: 500.0,
            voicing_threshold: 0.3,
        }
    }
}

impl PitchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_hz > 0.0 && self.min_hz < self.max_hz) {
            return Err(Error::InvalidParameter(format!(
                "pitch range [{}, {}] Hz",
                self.min_hz, self.max_hz
            )));
        }
        if !(0.0..=1.0).contains(&self.voicing_threshold) {
            return Err(Error::InvalidParameter(format!(
                "voicing threshold {}",
                self.voicing_threshold
            )));
        }
        Ok(())
    }
}

/// Autocorrelation pitch. Lags run over `[rate/max_hz, rate/min_hz]`, lags
/// past the frame end are skipped, and a peak normalized autocorrelation
/// below the voicing threshold yields 0 (unvoiced).
pub fn pitch(frame: &[f64], sample_rate: u32, cfg: &PitchConfig) -> f64 {
    let energy: f64 = frame.iter().map(|x| x * x).sum();
    if energy == 0.0 {
        return 0.0;
    }
    let rate = sample_rate as f64;
    let min_lag = ((rate / cfg.max_hz).ceil() as usize).max(1);
    let max_lag = ((rate / cfg.min_hz).floor() as usize).min(frame.len().saturating_sub(1));
    let mut best = (0usize, f64::NEG_INFINITY);
    for lag in min_lag..=max_lag {
        let r: f64 = frame[lag..]
            .iter()
            .zip(frame)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / energy;
        if r > best.1 {
            best = (lag, r);
        }
    }
    if best.0 == 0 || best.1 < cfg.voicing_threshold {
        0.0
    } else {
        rate / best.0 as f64
    }
}

/// Fraction of frames whose RMS is below half the mean frame RMS.
/// An all-silent utterance scores 1.
pub fn silence_ratio(frames: &FrameSeries) -> f64 {
    if frames.is_empty() {
        return 1.0;
    }
    let levels: Vec<f64> = frames.frames.iter().map(|f| rms(f)).collect();
    let mean = levels.iter().sum::<f64>() / levels.len() as f64;
    if mean == 0.0 {
        return 1.0;
    }
    let threshold = 0.5 * mean;
    levels.iter().filter(|&&r| r < threshold).count() as f64 / levels.len() as f64
}

/// The six low-level descriptors of one frame.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LowLevelFrame {
    pub spectral_centroid: f64,
    pub band_energy_ratio: f64,
    pub delta_spectrum_magnitude: f64,
    pub zero_crossing_rate: f64,
    pub short_time_energy: f64,
    pub pitch: f64,
}
