#![allow(dead_code)]

//! Reference implementations written straight from the textbook
//! definitions, with no shared code paths with the library.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sine(freq: f64, rate: f64, n: usize, amp: f64) -> Vec<f64> {
    (0..n)
        .map(|i| amp * (2.0 * PI * freq * i as f64 / rate).sin())
        .collect()
}

pub fn white_noise(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let d = Normal::new(0.0, 1.0).unwrap();
    (0..n).map(|_| d.sample(&mut r)).collect()
}

/// Pre-emphasis then Hamming window.
pub fn preprocess_frame(frame: &[f64], coef: f64) -> Vec<f64> {
    let n = frame.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let prev = if i > 0 { frame[i - 1] } else { 0.0 };
        let w = 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos();
        out.push((frame[i] - coef * prev) * w);
    }
    out
}

/// `|X_k|` for `k = 0..=n_fft/2` by direct summation, zero padded.
pub fn naive_dft(x: &[f64], n_fft: usize) -> Vec<f64> {
    (0..=n_fft / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, &v) in x.iter().enumerate() {
                let ang = -2.0 * PI * (k * n) as f64 / n_fft as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            (re * re + im * im).sqrt()
        })
        .collect()
}

pub fn mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn inv_mel(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Dense triangular filter matrix, `n_filters x (n_fft/2 + 1)`.
pub fn mel_matrix(n_filters: usize, n_fft: usize, rate: f64) -> DMatrix<f64> {
    let bins = n_fft / 2 + 1;
    let top = mel(rate / 2.0);
    let pts: Vec<f64> = (0..n_filters + 2)
        .map(|i| inv_mel(i as f64 * top / (n_filters + 1) as f64))
        .collect();
    DMatrix::from_fn(n_filters, bins, |m, k| {
        let f = k as f64 * rate / n_fft as f64;
        let rise = (f - pts[m]) / (pts[m + 1] - pts[m]);
        let fall = (pts[m + 2] - f) / (pts[m + 2] - pts[m + 1]);
        rise.min(fall).max(0.0)
    })
}

/// MFCC c1..c12 from the definition: power spectrum, filter matrix
/// product, floored log, orthonormal DCT-II.
pub fn mfcc_definition(frame: &[f64], rate: f64) -> Vec<f64> {
    let mags = naive_dft(&preprocess_frame(frame, 0.97), 256);
    let power = DVector::from_iterator(mags.len(), mags.iter().map(|m| m * m));
    let energies = mel_matrix(26, 256, rate) * power;
    let logs: Vec<f64> = energies.iter().map(|e| e.max(1e-10).ln()).collect();
    let m = logs.len() as f64;
    (1..=12)
        .map(|i| {
            (2.0 / m).sqrt()
                * logs
                    .iter()
                    .enumerate()
                    .map(|(j, l)| l * (PI * i as f64 * (2 * j + 1) as f64 / (2.0 * m)).cos())
                    .sum::<f64>()
        })
        .collect()
}

pub fn sample_autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len() as f64;
    (0..=max_lag)
        .map(|k| (0..x.len() - k).map(|i| x[i] * x[i + k]).sum::<f64>() / n)
        .collect()
}

/// Solves the Toeplitz normal equations `R a = r` directly.
pub fn yule_walker(r: &[f64], order: usize) -> Vec<f64> {
    let m = DMatrix::from_fn(order, order, |i, j| r[i.abs_diff(j)]);
    let rhs = DVector::from_iterator(order, r[1..=order].iter().copied());
    m.lu().solve(&rhs).expect("nonsingular").iter().copied().collect()
}

/// `x[n] = a1 x[n-1] + a2 x[n-2] + e[n]` after a burn-in.
pub fn ar2(a1: f64, a2: f64, n: usize, seed: u64) -> Vec<f64> {
    let e = white_noise(n + 500, seed);
    let mut x = vec![0.0; n + 500];
    for i in 2..x.len() {
        x[i] = a1 * x[i - 1] + a2 * x[i - 2] + e[i];
    }
    x.split_off(500)
}

pub fn svr_dual(k: &[Vec<f64>], y: &[f64], beta: &[f64], eps: f64) -> f64 {
    let n = y.len();
    let mut v = 0.0;
    for i in 0..n {
        v += y[i] * beta[i] - eps * beta[i].abs();
        for j in 0..n {
            v -= 0.5 * beta[i] * beta[j] * k[i][j];
        }
    }
    v
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..200 {
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    0.5 * (a + b)
}

/// Best dual value found by pairwise coordinate ascent with a golden
/// section line search on every `(i, j)` pair, `beta_i += t, beta_j -= t`.
pub fn svr_dual_pairwise(k: &[Vec<f64>], y: &[f64], c: f64, eps: f64) -> f64 {
    let n = y.len();
    let mut beta = vec![0.0; n];
    let mut best = svr_dual(k, y, &beta, eps);
    for _ in 0..400 {
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let lo = (-c - beta[i]).max(beta[j] - c);
                let hi = (c - beta[i]).min(beta[j] + c);
                if hi <= lo {
                    continue;
                }
                let eval = |t: f64| {
                    let mut b = beta.clone();
                    b[i] += t;
                    b[j] -= t;
                    svr_dual(k, y, &b, eps)
                };
                let mut t = golden_max(eval, lo, hi);
                // the optimum often sits on a kink of |beta|
                for cand in [-beta[i], beta[j], lo, hi, 0.0] {
                    if cand >= lo && cand <= hi && eval(cand) > eval(t) {
                        t = cand;
                    }
                }
                if eval(t) > svr_dual(k, y, &beta, eps) {
                    beta[i] += t;
                    beta[j] -= t;
                }
            }
        }
        let v = svr_dual(k, y, &beta, eps);
        if v - best < 1e-13 {
            best = best.max(v);
            break;
        }
        best = v;
    }
    best
}

/// Dense grid maximum of the dual for `n = 3`, parametrized by
/// `(beta_1, beta_2)` with `beta_3 = -beta_1 - beta_2`.
pub fn svr_dual_grid3(k: &[Vec<f64>], y: &[f64], c: f64, eps: f64, steps: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for a in 0..=steps {
        let b1 = -c + 2.0 * c * a as f64 / steps as f64;
        for b in 0..=steps {
            let b2 = -c + 2.0 * c * b as f64 / steps as f64;
            let b3 = -b1 - b2;
            if b3.abs() > c {
                continue;
            }
            best = best.max(svr_dual(k, y, &[b1, b2, b3], eps));
        }
    }
    best
}

/// Primal objective `1/2 |w|^2 + C sum max(0, |y - f| - eps)` for the
/// model `f = K beta + b`.
pub fn svr_primal(k: &[Vec<f64>], y: &[f64], beta: &[f64], bias: f64, c: f64, eps: f64) -> f64 {
    let n = y.len();
    let mut reg = 0.0;
    let mut loss = 0.0;
    for i in 0..n {
        let mut f = bias;
        for j in 0..n {
            reg += 0.5 * beta[i] * beta[j] * k[i][j];
            f += beta[j] * k[i][j];
        }
        loss += ((y[i] - f).abs() - eps).max(0.0);
    }
    reg + c * loss
}

/// RReliefF as in the original pseudocode, one sequential pass.
pub fn relieff_literal(x: &[Vec<f64>], y: &[f64], instances: &[usize], k: usize, sigma: f64) -> Vec<f64> {
    let n = x.len();
    let a = x[0].len();
    let span = |vals: Vec<f64>| {
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    };
    let y_span = span(y.to_vec());
    let spans: Vec<f64> = (0..a).map(|f| span(x.iter().map(|r| r[f]).collect())).collect();
    let diff_a = |f: usize, i: usize, j: usize| {
        if spans[f] == 0.0 {
            0.0
        } else {
            (x[i][f] - x[j][f]).abs() / spans[f]
        }
    };
    let mut n_dc = 0.0;
    let mut n_da = vec![0.0; a];
    let mut n_dcda = vec![0.0; a];
    for &i in instances {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let dist = |j: usize| (0..a).map(|f| diff_a(f, i, j)).sum::<f64>();
        others.sort_by(|&p, &q| dist(p).partial_cmp(&dist(q)).unwrap().then(p.cmp(&q)));
        let d1: Vec<f64> = (1..=k).map(|r| (-(r as f64 / sigma).powi(2)).exp()).collect();
        let norm: f64 = d1.iter().sum();
        for (rank, &j) in others.iter().take(k).enumerate() {
            let d = d1[rank] / norm;
            let dy = (y[i] - y[j]).abs() / y_span;
            n_dc += dy * d;
            for f in 0..a {
                n_da[f] += diff_a(f, i, j) * d;
                n_dcda[f] += dy * diff_a(f, i, j) * d;
            }
        }
    }
    let m = instances.len() as f64;
    (0..a)
        .map(|f| n_dcda[f] / n_dc - (n_da[f] - n_dcda[f]) / (m - n_dc))
        .collect()
}

/// Label-copy column at index 0 followed by `noise` uniform columns.
pub fn planted_copy(n: usize, noise: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut r = rng(seed);
    let y: Vec<f64> = (0..n).map(|_| r.gen()).collect();
    let x = y
        .iter()
        .map(|&v| {
            let mut row = vec![v];
            row.extend((0..noise).map(|_| r.gen::<f64>()));
            row
        })
        .collect();
    (x, y)
}

/// `P_i = y + N(0, sigma_i^2)` with `y ~ U[0, 1]`.
pub fn planted_ensemble(n: usize, sigmas: &[f64], seed: u64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut r = rng(seed);
    let y: Vec<f64> = (0..n).map(|_| r.gen()).collect();
    let preds = sigmas
        .iter()
        .map(|&s| {
            let d = Normal::new(0.0, s).unwrap();
            y.iter().map(|v| v + d.sample(&mut r)).collect()
        })
        .collect();
    (y, preds)
}

pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

/// CCC written out as in its usual definition:
/// `2 rho s_x s_y / (s_x^2 + s_y^2 + (m_x - m_y)^2)`.
pub fn ccc_definition(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sx = (x.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / n).sqrt();
    let sy = (y.iter().map(|v| (v - my).powi(2)).sum::<f64>() / n).sqrt();
    let cov = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n;
    let rho = cov / (sx * sy);
    2.0 * rho * sx * sy / (sx * sx + sy * sy + (mx - my).powi(2))
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_emofuse")
}

/// Runs the binary, returning its exit code.
pub fn run(args: &[&dyn AsRef<std::ffi::OsStr>]) -> i32 {
    let out = std::process::Command::new(bin())
        .args(args.iter().map(|a| a.as_ref()))
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs");
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    out.status.code().unwrap_or(-1)
}

pub fn read(path: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

pub struct PipelineRun {
    pub work: PathBuf,
    pub elapsed: std::time::Duration,
    pub codes: Vec<i32>,
}

/// Synthetic dataset, then extract, train, predict, fuse and eval through
/// the binary. Fusion leaves `cnn_visual` out of arousal.
pub fn full_pipeline(work: &Path, spec: &emofuse::synth::SynthSpec) -> PipelineRun {
    let data = emofuse::synth::generate_dataset(work.join("data"), spec).unwrap();
    let preds = work.join("predictions");
    emofuse::synth::write_external_predictions(&preds, &data.utterances, spec.seed).unwrap();
    let features = work.join("features.csv");
    let models = work.join("models");
    let fused = work.join("fused");
    let seed = spec.seed.to_string();
    let start = std::time::Instant::now();
    let codes = vec![
        run(&[&"extract", &"--manifest", &data.manifest, &"--out", &features]),
        run(&[&"train", &"--features", &features, &"--manifest", &data.manifest, &"--out", &models, &"--seed", &seed]),
        run(&[
            &"predict", &"--models", &models, &"--features", &features, &"--out", &preds,
            &"--manifest", &data.manifest, &"--split", &"validation", &"--split", &"test",
        ]),
        run(&[&"fuse", &"--predictions", &preds, &"--out", &fused, &"--exclude", &"arousal:cnn_visual"]),
        run(&[
            &"eval", &"--predictions", &preds, &"--predictions", &fused, &"--manifest", &data.manifest,
            &"--split", &"validation", &"--out", &work.join("report.csv"),
        ]),
    ];
    PipelineRun {
        work: work.to_path_buf(),
        elapsed: start.elapsed(),
        codes,
    }
}

/// Eigenvalues of the companion matrix of `z^p - a_1 z^(p-1) - ... - a_p`.
pub fn companion_roots(a: &[f64]) -> Vec<(f64, f64)> {
    let p = a.len();
    let m = DMatrix::from_fn(p, p, |i, j| if i == 0 { a[j] } else if i == j + 1 { 1.0 } else { 0.0 });
    m.complex_eigenvalues().iter().map(|c| (c.re, c.im)).collect()
}
