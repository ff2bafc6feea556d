//! Full pipeline on a generated dataset: extract, train, predict, fuse and
//! evaluate, printing the validation table.
//!
//! cargo run --release --example end_to_end [-- <work dir>]

use std::path::PathBuf;
use std::time::Instant;

use emofuse::dataset::{Split, Target};
use emofuse::pipeline::{self, PipelineConfig};
use emofuse::synth::{self, SynthSpec};

fn main() -> emofuse::Result<()> {
    let work = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("emofuse_end_to_end"));
    let start = Instant::now();
    let spec = SynthSpec::default();
    let data = synth::generate_dataset(work.join("data"), &spec)?;
    let preds = work.join("predictions");
    synth::write_external_predictions(&preds, &data.utterances, spec.seed)?;

    let mut cfg = PipelineConfig::default();
    // CNN-Visual is left out of the arousal fusion
    cfg.exclude_arousal.push("cnn_visual".into());

    let features = work.join("features.csv");
    let report = pipeline::extract(&data.manifest, &features, &cfg)?;
    println!("extracted {} utterances", report.table.ids.len());

    let models = work.join("models");
    for t in pipeline::train(&features, &data.manifest, &models, &cfg, &Target::ALL)? {
        println!(
            "{}: k = {}, {} C = {} eps = {}",
            t.target, t.selection.k, t.selection.hyper.kernel, t.selection.hyper.c, t.selection.hyper.epsilon
        );
    }

    let scored: std::collections::HashSet<String> = data
        .utterances
        .iter()
        .filter(|u| u.split != Split::Train)
        .map(|u| u.id.clone())
        .collect();
    pipeline::predict(&models, &features, &preds, &Target::ALL, Some(&scored))?;

    let fused = work.join("fused");
    for (target, result) in pipeline::fuse(&preds, &fused, &cfg, &Target::ALL)? {
        for (name, w) in result.model_names.iter().zip(&result.weights) {
            println!("{target:<8} {name:<12} weight {w:.3}");
        }
    }

    let rows = pipeline::evaluate(
        &[preds, fused],
        &data.manifest,
        &work.join("report.csv"),
        &Target::ALL,
        Some(Split::Validation),
    )?;
    println!("\n{:<12} {:<8} {:>7} {:>7}", "model", "target", "CCC", "MSE");
    for r in rows {
        println!("{:<12} {:<8} {:>7.4} {:>7.4}", r.model, r.target, r.eval.ccc, r.eval.mse);
    }
    println!("\ndone in {:.1?}, outputs in {}", start.elapsed(), work.display());
    Ok(())
}
