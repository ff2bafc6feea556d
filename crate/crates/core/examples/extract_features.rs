//! Extracts the 76-feature vector from a WAV file, or from a generated tone
//! when no path is given.
//!
//! cargo run --example extract_features -- speech.wav

use emofuse::dataset::{read_wav, Signal, CANONICAL_RATE};
use emofuse::features::{feature_names, ExtractorConfig, FeatureExtractor};

fn main() -> emofuse::Result<()> {
    let signal = match std::env::args().nth(1) {
        Some(path) => read_wav(path)?,
        None => {
            let rate = CANONICAL_RATE as f64;
            let samples = (0..CANONICAL_RATE)
                .map(|i| {
                    let t = i as f64 / rate;
                    0.4 * (2.0 * std::f64::consts::PI * 180.0 * t).sin() * (1.0 + 0.3 * (6.0 * t).sin())
                })
                .collect();
            Signal {
                samples,
                sample_rate: CANONICAL_RATE,
            }
        }
    };
    let extractor = FeatureExtractor::new(ExtractorConfig::default(), signal.sample_rate)?;
    let v = extractor.extract(&signal)?;
    for (name, value) in feature_names().iter().zip(v.as_slice()) {
        println!("{name:<22} {value:>14.6}");
    }
    Ok(())
}
