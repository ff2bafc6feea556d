//! Writes the synthetic dataset (WAV files, manifest and external-model
//! predictions) used by the tests, for inspection or for driving the
//! `emofuse` binary.
//!
//! cargo run --example synthetic_dataset -- /tmp/emofuse_data

use emofuse::synth::{generate_dataset, write_external_predictions, SynthSpec};

fn main() -> emofuse::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "emofuse_data".into());
    let spec = SynthSpec::default();
    let data = generate_dataset(&dir, &spec)?;
    write_external_predictions(format!("{dir}/predictions"), &data.utterances, spec.seed)?;
    println!("{} utterances, manifest at {}", data.utterances.len(), data.manifest.display());
    for u in data.utterances.iter().take(5) {
        println!(
            "{} {:<10} arousal {:.3} valence {:+.3}",
            u.id,
            u.split.to_string(),
            u.arousal.unwrap_or(f64::NAN),
            u.valence.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
