//! RReliefF on a toy regression problem: the label depends on two of six
//! attributes, one of them strongly.

use emofuse::relieff::{rrelieff, RReliefFParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> emofuse::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: Vec<Vec<f64>> = (0..300)
        .map(|_| (0..6).map(|_| rng.gen::<f64>()).collect())
        .collect();
    let y: Vec<f64> = x.iter().map(|r| 0.8 * r[2] + 0.2 * r[4]).collect();

    let ranking = rrelieff(&x, &y, &RReliefFParams::default())?;
    println!("rank  feature  weight");
    for (rank, &f) in ranking.order.iter().enumerate() {
        println!("{:>4}  x{f:<7} {:+.4}", rank + 1, ranking.weights[f]);
    }
    println!("top 2: {:?}", ranking.top_k(2)?);
    Ok(())
}
