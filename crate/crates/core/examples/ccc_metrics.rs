//! Agreement metrics on a few prediction patterns: a biased predictor keeps
//! its Pearson correlation but loses concordance.

use emofuse::metrics::evaluate;

fn main() -> emofuse::Result<()> {
    let y: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
    let cases: [(&str, Vec<f64>); 4] = [
        ("exact", y.clone()),
        ("shifted", y.iter().map(|v| v + 0.5).collect()),
        ("shrunk", y.iter().map(|v| 0.3 * v).collect()),
        ("reversed", y.iter().map(|v| -v).collect()),
    ];
    println!("{:<9} {:>7} {:>8} {:>7}", "case", "CCC", "Pearson", "MSE");
    for (name, pred) in cases {
        let e = evaluate(&y, &pred)?;
        println!("{name:<9} {:>7.4} {:>8.4} {:>7.4}", e.ccc, e.pearson, e.mse);
    }
    Ok(())
}
