//! Manifest loading, WAV ingestion and framing.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Sample rate every signal is resampled to on ingestion.
pub const CANONICAL_RATE: u32 = 16_000;

pub const MANIFEST_HEADER: [&str; 5] = ["utterance_id", "wav_path", "split", "arousal", "valence"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn is_labeled(self) -> bool {
        !matches!(self, Split::Test)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidParameter(format!("unknown split `{other}`"))),
        }
    }
}

/// Regression target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    Arousal,
    Valence,
}

impl Target {
    pub const ALL: [Target; 2] = [Target::Arousal, Target::Valence];

    pub fn as_str(self) -> &'static str {
        match self {
            Target::Arousal => "arousal",
            Target::Valence => "valence",
        }
    }

    /// Admissible label interval.
    pub fn range(self) -> (f64, f64) {
        match self {
            Target::Arousal => (0.0, 1.0),
            Target::Valence => (-1.0, 1.0),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arousal" => Ok(Target::Arousal),
            "valence" => Ok(Target::Valence),
            other => Err(Error::InvalidParameter(format!("unknown target `{other}`"))),
        }
    }
}

/// One labeled (or, for the test split, possibly unlabeled) clip.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub wav_path: PathBuf,
    pub split: Split,
    pub arousal: Option<f64>,
    pub valence: Option<f64>,
}

impl Utterance {
    pub fn label(&self, target: Target) -> Option<f64> {
        match target {
            Target::Arousal => self.arousal,
            Target::Valence => self.valence,
        }
    }
}

fn parse_label(cell: &str, target: Target, line: usize) -> Result<Option<f64>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    let v: f64 = cell.parse().map_err(|_| Error::Manifest {
        line,
        message: format!("unparseable {target} label `{cell}`"),
    })?;
    let (lo, hi) = target.range();
    if !(lo..=hi).contains(&v) {
        return Err(Error::LabelOutOfRange(format!(
            "line {line}: {target} = {v} outside [{lo}, {hi}]"
        )));
    }
    Ok(Some(v))
}

/// Reads a manifest CSV. Relative `wav_path` entries are resolved against
/// the manifest's directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<Utterance>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    parse_manifest(&text, base)
}

pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<Vec<Utterance>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.iter().map(str::trim).ne(MANIFEST_HEADER) {
        return Err(Error::Manifest {
            line: 1,
            message: format!(
                "header must be `{}`, found `{}`",
                MANIFEST_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record?;
        if record.len() != MANIFEST_HEADER.len() {
            return Err(Error::Manifest {
                line,
                message: format!("expected 5 columns, found {}", record.len()),
            });
        }
        let id = record[0].trim().to_string();
        if id.is_empty() {
            return Err(Error::Manifest {
                line,
                message: "empty utterance id".into(),
            });
        }
        let split: Split = record[2].trim().parse().map_err(|_| Error::Manifest {
            line,
            message: format!("unknown split `{}`", &record[2]),
        })?;
        let arousal = parse_label(&record[3], Target::Arousal, line)?;
        let valence = parse_label(&record[4], Target::Valence, line)?;
        if split.is_labeled() && (arousal.is_none() || valence.is_none()) {
            return Err(Error::Manifest {
                line,
                message: format!("{split} utterance `{id}` must carry both labels"),
            });
        }
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        let raw = Path::new(record[1].trim());
        let wav_path = if raw.is_absolute() {
            raw.to_path_buf()
        } else {
            base_dir.join(raw)
        };
        out.push(Utterance {
            id,
            wav_path,
            split,
            arousal,
            valence,
        });
    }
    Ok(out)
}

/// Mono audio at a known sample rate, amplitudes in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

/// Reads a 16-bit PCM WAV file, downmixes to mono, scales by `1/32768` and
/// resamples to [`CANONICAL_RATE`] by linear interpolation.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Signal> {
    let path = path.as_ref();
    let wav_err = |message: String| Error::Wav {
        path: path.to_path_buf(),
        message,
    };
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => wav_err(other.to_string()),
    })?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(wav_err(format!(
            "unsupported encoding {:?} {}-bit, expected 16-bit PCM",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    let channels = spec.channels as usize;
    if channels == 0 || channels > 2 {
        return Err(wav_err(format!("unsupported channel count {channels}")));
    }
    let raw = reader
        .into_samples::<i16>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| wav_err(e.to_string()))?;
    if raw.is_empty() {
        return Err(wav_err("zero-length data chunk".into()));
    }
    if raw.len() % channels != 0 {
        return Err(wav_err("truncated data chunk".into()));
    }
    let mono: Vec<f64> = raw
        .chunks_exact(channels)
        .map(|c| c.iter().map(|&s| s as f64 / 32768.0).sum::<f64>() / channels as f64)
        .collect();
    Ok(Signal {
        samples: resample_linear(&mono, spec.sample_rate, CANONICAL_RATE),
        sample_rate: CANONICAL_RATE,
    })
}

/// Linear-interpolation resampler that keeps both endpoints: `n` input
/// samples map to `floor((n - 1) * to / from) + 1` output samples.
pub fn resample_linear(samples: &[f64], from: u32, to: u32) -> Vec<f64> {
    if from == to || samples.len() < 2 {
        return samples.to_vec();
    }
    let n = samples.len();
    let span = (n - 1) as u64 * to as u64;
    let out_len = (span / from as u64) as usize + 1;
    (0..out_len)
        .map(|j| {
            // position in input samples, exact rational j * from / to
            let num = j as u64 * from as u64;
            let idx = (num / to as u64) as usize;
            let frac = (num % to as u64) as f64 / to as f64;
            if idx + 1 >= n {
                samples[n - 1]
            } else {
                samples[idx] * (1.0 - frac) + samples[idx + 1] * frac
            }
        })
        .collect()
}

/// Writes mono 16-bit PCM. Samples are clamped to `[-1, 1)` before scaling.
pub fn write_wav(path: impl AsRef<Path>, samples: &[f64], sample_rate: u32) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let to_err = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Wav {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(to_err)?;
    for &s in samples {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v).map_err(to_err)?;
    }
    writer.finalize().map_err(to_err)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameConfig {
    pub window_len: usize,
    pub hop: usize,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            window_len: 200,
            hop: 80,
        }
    }
}

impl FrameConfig {
    pub fn new(window_len: usize, hop: usize) -> Result<Self> {
        if hop == 0 || hop > window_len {
            return Err(Error::InvalidParameter(format!(
                "frame hop {hop} must satisfy 0 < hop <= window {window_len}"
            )));
        }
        Ok(Self { window_len, hop })
    }

    /// Frames produced for a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        if len <= self.window_len {
            1
        } else {
            (len - self.window_len) / self.hop + 1
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSeries {
    pub frames: Vec<Vec<f64>>,
    pub sample_rate: u32,
}

impl FrameSeries {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Cuts `signal` into windows starting every `hop` samples. A trailing
/// partial window is dropped; a signal shorter than one window becomes a
/// single zero-padded frame.
pub fn frame_signal(signal: &Signal, cfg: FrameConfig) -> FrameSeries {
    let len = signal.samples.len();
    let frames = if len < cfg.window_len {
        let mut f = signal.samples.clone();
        f.resize(cfg.window_len, 0.0);
        vec![f]
    } else {
        (0..cfg.frame_count(len))
            .map(|t| signal.samples[t * cfg.hop..t * cfg.hop + cfg.window_len].to_vec())
            .collect()
    };
    FrameSeries {
        frames,
        sample_rate: signal.sample_rate,
    }
}
