//! The 76-dimensional utterance descriptor and the extractor that builds it
//! from a signal.
//!
//! Layout (mean before variance within each feature):
//!
//! | index  | content                                                    |
//! |--------|------------------------------------------------------------|
//! | 0..12  | centroid, BER, delta spectrum, ZCR, energy, pitch          |
//! | 12     | silence ratio                                              |
//! | 13..37 | MFCC c1..c12 means, then variances                         |
//! | 37..49 | delta MFCC means                                           |
//! | 49..71 | LPCC 1..11 means, then variances                           |
//! | 71..76 | formant F1..F5 means                                       |

use std::sync::OnceLock;

use crate::cepstral::{
    self, CepstralFrame, FormantConfig, MelFilterbank, LPC_ORDER, N_FORMANTS, N_LPCC, N_MFCC,
};
use crate::dataset::{frame_signal, FrameConfig, FrameSeries, Signal};
use crate::dsp::{self, LowLevelFrame, PitchConfig, SpectrumAnalyzer};
use crate::error::{Error, Result};

pub const N_FEATURES: usize = 76;

/// Number of slots per feature category, in layout order.
pub const CATEGORY_COUNTS: [(&str, usize); 6] = [
    ("low_level", 12),
    ("silence_ratio", 1),
    ("mfcc", 24),
    ("delta_mfcc", 12),
    ("lpcc", 22),
    ("formant", 5),
];

pub const LOW_LEVEL_NAMES: [&str; 6] = [
    "centroid",
    "ber",
    "delta_spectrum",
    "zcr",
    "energy",
    "pitch",
];

/// Column names `f00_centroid_mean` .. `f75_formant5_mean`.
pub fn feature_names() -> &'static [String; N_FEATURES] {
    static NAMES: OnceLock<[String; N_FEATURES]> = OnceLock::new();
    NAMES.get_or_init(|| {
        let mut raw = Vec::with_capacity(N_FEATURES);
        for name in LOW_LEVEL_NAMES {
            raw.push(format!("{name}_mean"));
            raw.push(format!("{name}_var"));
        }
        raw.push("silence_ratio".to_string());
        for stat in ["mean", "var"] {
            raw.extend((1..=N_MFCC).map(|i| format!("mfcc{i:02}_{stat}")));
        }
        raw.extend((1..=N_MFCC).map(|i| format!("dmfcc{i:02}_mean")));
        for stat in ["mean", "var"] {
            raw.extend((1..=N_LPCC).map(|i| format!("lpcc{i:02}_{stat}")));
        }
        raw.extend((1..=N_FORMANTS).map(|i| format!("formant{i}_mean")));
        let named: Vec<String> = raw
            .into_iter()
            .enumerate()
            .map(|(i, n)| format!("f{i:02}_{n}"))
            .collect();
        named.try_into().expect("layout has 76 slots")
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; N_FEATURES]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn mean_var(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Reduces per-frame descriptors to the fixed utterance layout using
/// population statistics. Pitch statistics use voiced frames only and
/// formant means use frames where that formant was found.
pub fn aggregate_utterance(
    frames: &FrameSeries,
    lowlevel: &[LowLevelFrame],
    cepstral: &[CepstralFrame],
) -> Result<FeatureVector> {
    if lowlevel.len() != frames.len() || cepstral.len() != frames.len() {
        return Err(Error::DimensionMismatch {
            expected: frames.len(),
            got: if lowlevel.len() != frames.len() {
                lowlevel.len()
            } else {
                cepstral.len()
            },
        });
    }
    if frames.is_empty() {
        return Err(Error::Empty("utterance has no frames"));
    }
    let mut out = [0.0; N_FEATURES];
    let getters: [fn(&LowLevelFrame) -> f64; 6] = [
        |f| f.spectral_centroid,
        |f| f.band_energy_ratio,
        |f| f.delta_spectrum_magnitude,
        |f| f.zero_crossing_rate,
        |f| f.short_time_energy,
        |f| f.pitch,
    ];
    for (i, get) in getters.iter().enumerate() {
        let (m, v) = if i == 5 {
            mean_var(lowlevel.iter().map(get).filter(|&p| p > 0.0))
        } else {
            mean_var(lowlevel.iter().map(get))
        };
        out[2 * i] = m;
        out[2 * i + 1] = v;
    }
    out[12] = dsp::silence_ratio(frames);
    for c in 0..N_MFCC {
        let (m, v) = mean_var(cepstral.iter().map(|f| f.mfcc[c]));
        out[13 + c] = m;
        out[25 + c] = v;
        out[37 + c] = mean_var(cepstral.iter().map(|f| f.delta_mfcc[c])).0;
    }
    for c in 0..N_LPCC {
        let (m, v) = mean_var(cepstral.iter().map(|f| f.lpcc[c]));
        out[49 + c] = m;
        out[60 + c] = v;
    }
    for i in 0..N_FORMANTS {
        out[71 + i] = mean_var(cepstral.iter().map(|f| f.formants[i]).filter(|&x| x > 0.0)).0;
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("utterance features"));
    }
    Ok(FeatureVector(out))
}

/// Settings for the whole extraction chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractorConfig {
    pub frame: FrameConfig,
    pub band_split_hz: f64,
    pub pitch: PitchConfig,
    pub formant: FormantConfig,
    pub pre_emphasis: f64,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        Self {
            frame: FrameConfig::default(),
            band_split_hz: 2000.0,
            pitch: PitchConfig::default(),
            formant: FormantConfig::default(),
            pre_emphasis: dsp::PRE_EMPHASIS,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FrameFeatures {
    pub frames: FrameSeries,
    pub lowlevel: Vec<LowLevelFrame>,
    pub cepstral: Vec<CepstralFrame>,
}

#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    cfg: ExtractorConfig,
    analyzer: SpectrumAnalyzer,
    filterbank: MelFilterbank,
    sample_rate: u32,
}

impl FeatureExtractor {
    pub fn new(cfg: ExtractorConfig, sample_rate: u32) -> Result<Self> {
        if cfg.frame.hop == 0 || cfg.frame.hop > cfg.frame.window_len {
            return Err(Error::InvalidParameter("frame hop".into()));
        }
        if cfg.frame.window_len > dsp::N_FFT {
            return Err(Error::InvalidParameter(format!(
                "window of {} samples exceeds FFT size {}",
                cfg.frame.window_len,
                dsp::N_FFT
            )));
        }
        if !(cfg.band_split_hz > 0.0 && cfg.band_split_hz < sample_rate as f64 / 2.0) {
            return Err(Error::InvalidParameter(format!(
                "band split {} Hz",
                cfg.band_split_hz
            )));
        }
        cfg.pitch.validate()?;
        Ok(Self {
            cfg,
            analyzer: SpectrumAnalyzer::with_pre_emphasis(cfg.pre_emphasis),
            filterbank: MelFilterbank::new(
                cepstral::N_MEL_FILTERS,
                dsp::N_FFT / 2 + 1,
                sample_rate,
            )?,
            sample_rate,
        })
    }

    pub fn config(&self) -> &ExtractorConfig {
        &self.cfg
    }

    /// Per-frame descriptors for a signal at the extractor's sample rate.
    pub fn frame_features(&self, signal: &Signal) -> Result<FrameFeatures> {
        if signal.sample_rate != self.sample_rate {
            return Err(Error::InvalidParameter(format!(
                "signal rate {} Hz, extractor built for {} Hz",
                signal.sample_rate, self.sample_rate
            )));
        }
        if signal.samples.is_empty() {
            return Err(Error::Empty("signal"));
        }
        let frames = frame_signal(signal, self.cfg.frame);
        let rate = self.sample_rate;
        let mut lowlevel = Vec::with_capacity(frames.len());
        let mut cep = Vec::with_capacity(frames.len());
        let mut prev = None;
        for frame in &frames.frames {
            let spec = self.analyzer.spectrum(frame, rate)?;
            lowlevel.push(LowLevelFrame {
                spectral_centroid: dsp::spectral_centroid(&spec),
                band_energy_ratio: dsp::band_energy_ratio(&spec, self.cfg.band_split_hz)?,
                delta_spectrum_magnitude: dsp::delta_spectrum_magnitude(&spec, prev.as_ref())?,
                zero_crossing_rate: dsp::zero_crossing_rate(frame),
                short_time_energy: dsp::short_time_energy(frame),
                pitch: dsp::pitch(frame, rate, &self.cfg.pitch),
            });
            let windowed = dsp::emphasize_and_window(frame, self.cfg.pre_emphasis);
            let model = cepstral::lpc(&windowed, LPC_ORDER)?;
            let mut lpcc = [0.0; N_LPCC];
            lpcc.copy_from_slice(&cepstral::lpcc(&model, N_LPCC));
            cep.push(CepstralFrame {
                mfcc: cepstral::mfcc(&spec, &self.filterbank)?,
                delta_mfcc: [0.0; N_MFCC],
                lpcc,
                formants: cepstral::formants(&model, rate, &self.cfg.formant),
            });
            prev = Some(spec);
        }
        let mfccs: Vec<[f64; N_MFCC]> = cep.iter().map(|c| c.mfcc).collect();
        for (c, d) in cep.iter_mut().zip(cepstral::delta(&mfccs)) {
            c.delta_mfcc = d;
        }
        Ok(FrameFeatures {
            frames,
            lowlevel,
            cepstral: cep,
        })
    }

    pub fn extract(&self, signal: &Signal) -> Result<FeatureVector> {
        let ff = self.frame_features(signal)?;
        aggregate_utterance(&ff.frames, &ff.lowlevel, &ff.cepstral)
    }
}
