//! Epsilon-SVR on a noisy sine, with grid search over features and
//! hyperparameters against a held-out validation set.

use emofuse::metrics;
use emofuse::relieff::FeatureRanking;
use emofuse::svr::{self, Kernel, LabeledSet, SvrGrid, SvrHyper};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample(n: usize, rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<f64>) {
    let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen(), rng.gen()]).collect();
    let y = x
        .iter()
        .map(|r| (6.0 * r[0]).sin() * 0.5 + 0.5 + rng.gen_range(-0.05..0.05))
        .collect();
    (x, y)
}

fn main() -> emofuse::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (tx, ty) = sample(120, &mut rng);
    let (vx, vy) = sample(60, &mut rng);

    let hyper = SvrHyper {
        kernel: Kernel::Rbf { gamma: 5.0 },
        c: 10.0,
        epsilon: 0.05,
    };
    let model = svr::train_svr(&tx, &ty, hyper)?;
    let pred = svr::predict(&model, &vx)?;
    println!(
        "single fit: {} support vectors, KKT violation {:.2e}, validation CCC {:.4}",
        model.support_vectors.len(),
        model.kkt_violation,
        metrics::evaluate(&vy, &pred)?.ccc
    );

    // feature 0 carries the signal; a flat ranking would keep the given order
    let ranking = FeatureRanking::from_weights(vec![1.0, 0.0]);
    let grid = SvrGrid {
        k_values: vec![1, 2],
        ..SvrGrid::default()
    };
    let sel = svr::model_select(
        LabeledSet { x: &tx, y: &ty },
        LabeledSet { x: &vx, y: &vy },
        &ranking,
        &grid,
    )?;
    let best = sel
        .log
        .iter()
        .map(|r| r.validation_ccc)
        .fold(f64::NEG_INFINITY, f64::max);
    println!(
        "grid search over {} configurations: k = {}, {} C = {} eps = {}, CCC {best:.4}",
        sel.log.len(),
        sel.k,
        sel.hyper.kernel,
        sel.hyper.c,
        sel.hyper.epsilon
    );
    Ok(())
}
