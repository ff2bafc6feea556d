//! Deterministic synthetic mini-dataset: harmonic tones with noise and
//! pauses whose arousal follows loudness and whose valence follows pitch,
//! plus simulated predictions from external (non-audio) base models.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::{write_wav, Split, Target, Utterance, CANONICAL_RATE};
use crate::error::{Error, Result};
use crate::pipeline::write_predictions;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_train: usize,
    pub n_validation: usize,
    pub n_test: usize,
    pub min_seconds: f64,
    pub max_seconds: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_train: 48,
            n_validation: 24,
            n_test: 8,
            min_seconds: 0.5,
            max_seconds: 0.9,
            seed: 7,
        }
    }
}

/// Simulated external base models as `(name, label noise std)`.
pub const EXTERNAL_MODELS: [(&str, f64); 3] = [
    ("cnn_face", 0.18),
    ("cnn_visual", 0.30),
    ("lstm_visual", 0.22),
];

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub manifest: PathBuf,
    pub utterances: Vec<Utterance>,
}

fn gauss(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// One synthetic utterance: a three-harmonic tone at `f0` and peak level
/// `level`, with a pause and background noise.
pub fn tone(f0: f64, level: f64, seconds: f64, pause_fraction: f64, rng: &mut impl Rng) -> Vec<f64> {
    let n = (seconds * CANONICAL_RATE as f64) as usize;
    let pause_len = (pause_fraction * n as f64) as usize;
    let pause_start = rng.gen_range(0..=n - pause_len);
    let rate = CANONICAL_RATE as f64;
    (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            let voiced = !(pause_start..pause_start + pause_len).contains(&i);
            let s = if voiced {
                let ph = 2.0 * PI * f0 * t;
                level * (ph.sin() + 0.5 * (2.0 * ph).sin() + 0.25 * (3.0 * ph).sin()) / 1.75
            } else {
                0.0
            };
            (s + 0.003 * gauss(rng)).clamp(-0.99, 0.99)
        })
        .collect()
}

/// Writes `wav/<id>.wav` files and `manifest.csv` under `dir`.
pub fn generate_dataset(dir: impl AsRef<Path>, spec: &SynthSpec) -> Result<SynthDataset> {
    let dir = dir.as_ref();
    let wav_dir = dir.join("wav");
    std::fs::create_dir_all(&wav_dir).map_err(|e| Error::io(&wav_dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let splits = std::iter::repeat(Split::Train)
        .take(spec.n_train)
        .chain(std::iter::repeat(Split::Validation).take(spec.n_validation))
        .chain(std::iter::repeat(Split::Test).take(spec.n_test));

    let mut manifest = String::from("utterance_id,wav_path,split,arousal,valence\n");
    let mut utterances = Vec::new();
    for (i, split) in splits.enumerate() {
        let id = format!("utt{i:03}");
        let f0 = rng.gen_range(100.0..320.0);
        let level = rng.gen_range(0.05..0.6);
        let seconds = rng.gen_range(spec.min_seconds..=spec.max_seconds);
        let pause = rng.gen_range(0.0..0.3);
        let samples = tone(f0, level, seconds, pause, &mut rng);
        let rel = format!("wav/{id}.wav");
        write_wav(dir.join(&rel), &samples, CANONICAL_RATE)?;

        let arousal = ((level - 0.05) / 0.55 + 0.05 * gauss(&mut rng)).clamp(0.0, 1.0);
        let valence = ((f0 - 210.0) / 110.0 + 0.1 * gauss(&mut rng)).clamp(-1.0, 1.0);
        // round labels so the manifest text is their exact representation
        let arousal = (arousal * 1e4).round() / 1e4;
        let valence = (valence * 1e4).round() / 1e4;
        manifest.push_str(&format!("{id},{rel},{split},{arousal},{valence}\n"));
        utterances.push(Utterance {
            id,
            wav_path: dir.join(rel),
            split,
            arousal: Some(arousal),
            valence: Some(valence),
        });
    }
    let path = dir.join("manifest.csv");
    std::fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    Ok(SynthDataset {
        manifest: path,
        utterances,
    })
}

/// Writes `<dir>/<target>/<model>.csv` for every [`EXTERNAL_MODELS`] entry,
/// covering the validation and test utterances. Predictions are the label
/// plus Gaussian noise, clamped to the label range.
pub fn write_external_predictions(
    dir: impl AsRef<Path>,
    utterances: &[Utterance],
    seed: u64,
) -> Result<()> {
    let dir = dir.as_ref();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let scored: Vec<&Utterance> = utterances.iter().filter(|u| u.split != Split::Train).collect();
    for target in Target::ALL {
        let (lo, hi) = target.range();
        for (name, sd) in EXTERNAL_MODELS {
            let rows: Vec<(String, f64)> = scored
                .iter()
                .map(|u| {
                    let y = u.label(target).unwrap_or(0.5 * (lo + hi));
                    (u.id.clone(), (y + sd * gauss(&mut rng)).clamp(lo, hi))
                })
                .collect();
            let target_dir = dir.join(target.as_str());
            std::fs::create_dir_all(&target_dir).map_err(|e| Error::io(&target_dir, e))?;
            write_predictions(target_dir.join(format!("{name}.csv")), &rows)?;
        }
    }
    Ok(())
}
