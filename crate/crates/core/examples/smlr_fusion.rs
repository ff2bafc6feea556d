//! Unsupervised fusion of four noisy regressors. The fusion never sees the
//! labels; they are only used to score the result.

use emofuse::fusion::{smlr_fuse, PredictionSet};
use emofuse::metrics;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> emofuse::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 2000;
    let y: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
    let sigmas = [0.1, 0.2, 0.4, 0.8];
    let preds: Vec<Vec<f64>> = sigmas
        .iter()
        .map(|&s| {
            let noise = Normal::new(0.0, s).unwrap();
            y.iter().map(|v| v + noise.sample(&mut rng)).collect()
        })
        .collect();
    let names = sigmas.iter().map(|s| format!("sigma_{s}")).collect();
    let ids = (0..n).map(|i| format!("u{i}")).collect();
    let set = PredictionSet::new(names, ids, preds.clone())?;

    let fused = smlr_fuse(&set, &[])?;
    println!("{:<10} {:>8} {:>10} {:>8}", "model", "weight", "accuracy", "MSE");
    for (i, name) in fused.model_names.iter().enumerate() {
        println!(
            "{name:<10} {:>8.4} {:>10.3} {:>8.4}",
            fused.weights[i],
            fused.accuracy_estimates[i],
            metrics::evaluate(&y, &preds[i])?.mse
        );
    }
    println!("{:<10} {:>8} {:>10} {:>8.4}", "fused", "", "", metrics::evaluate(&y, &fused.fused)?.mse);
    Ok(())
}
