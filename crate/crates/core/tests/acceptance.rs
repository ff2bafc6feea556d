//! One test per acceptance criterion. Each prints a PASS/FAIL line to the
//! real stdout (bypassing the harness capture) before asserting.

mod common;

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use common::*;
use emofuse::cepstral::{self, FormantConfig, LpcModel, MelFilterbank};
use emofuse::dataset::{Signal, CANONICAL_RATE};
use emofuse::dsp::{self, PitchConfig};
use emofuse::features::{feature_names, ExtractorConfig, FeatureExtractor, CATEGORY_COUNTS, N_FEATURES};
use emofuse::fusion::{estimate_accuracies, rank_one_completion, smlr_fuse, CompletionOptions, PredictionSet};
use emofuse::metrics::{ccc, PairedSeries};
use emofuse::relieff::{rrelieff, FeatureRanking, RReliefFParams};
use emofuse::svr::{self, Kernel, LabeledSet, SmoOptions, SvrGrid, SvrHyper};
use emofuse::synth::{self, SynthSpec};
use rand::Rng;

const RATE: u32 = CANONICAL_RATE;

struct Checks(Vec<(String, bool)>);

impl Checks {
    fn new() -> Self {
        Self(Vec::new())
    }

    fn check(&mut self, what: impl Into<String>, ok: bool) {
        self.0.push((what.into(), ok));
    }

    fn finish(self, n: u32, title: &str) {
        let ok = self.0.iter().all(|c| c.1);
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "criterion {n} {}: {title}", if ok { "PASS" } else { "FAIL" });
        for (what, pass) in &self.0 {
            let _ = writeln!(out, "    [{}] {what}", if *pass { "ok" } else { "FAILED" });
        }
        drop(out);
        assert!(ok, "criterion {n} failed");
    }
}

#[test]
fn criterion_1_feature_layout_and_speed() {
    let mut c = Checks::new();
    let counts: Vec<usize> = CATEGORY_COUNTS.iter().map(|p| p.1).collect();
    c.check(format!("category counts {counts:?}"), counts == [12, 1, 24, 12, 22, 5]);
    c.check("76 slots", counts.iter().sum::<usize>() == N_FEATURES && feature_names().len() == 76);
    let numbered = feature_names()
        .iter()
        .enumerate()
        .all(|(i, n)| n.starts_with(&format!("f{i:02}_")));
    c.check("names f00..f75 in layout order", numbered);
    let layout = [
        (0, "f00_centroid_mean"),
        (11, "f11_pitch_var"),
        (12, "f12_silence_ratio"),
        (13, "f13_mfcc01_mean"),
        (25, "f25_mfcc01_var"),
        (37, "f37_dmfcc01_mean"),
        (49, "f49_lpcc01_mean"),
        (60, "f60_lpcc01_var"),
        (71, "f71_formant1_mean"),
        (75, "f75_formant5_mean"),
    ];
    c.check(
        "category boundaries",
        layout.iter().all(|(i, name)| feature_names()[*i] == *name),
    );

    let mut r = rng(5);
    let samples = synth::tone(160.0, 0.4, 60.0, 0.2, &mut r);
    let signal = Signal {
        samples,
        sample_rate: RATE,
    };
    let extractor = FeatureExtractor::new(ExtractorConfig::default(), RATE).unwrap();
    let start = Instant::now();
    let v = extractor.extract(&signal).unwrap();
    let secs = start.elapsed().as_secs_f64();
    c.check("every value finite", v.as_slice().iter().all(|x| x.is_finite()));
    c.check(format!("one minute of audio in {secs:.3} s (< 1 s)"), secs < 1.0);
    c.finish(1, "76 features with the expected category layout, < 1 s per audio minute");
}

#[test]
fn criterion_2_dsp_oracles() {
    let mut c = Checks::new();
    let mut r = rng(2);
    let mut fft_err = 0.0f64;
    for len in [2usize, 50, 128, 200, 255, 256] {
        for _ in 0..5 {
            let frame: Vec<f64> = (0..len).map(|_| r.gen_range(-1.0..1.0)).collect();
            let fast = dsp::spectrum(&frame, RATE).unwrap().magnitudes;
            let slow = naive_dft(&preprocess_frame(&frame, 0.97), 256);
            let scale = slow.iter().cloned().fold(0.0, f64::max);
            let e = fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
            fft_err = fft_err.max(e);
        }
    }
    c.check(format!("FFT vs naive DFT max relative error {fft_err:.2e} (<= 1e-9)"), fft_err <= 1e-9);

    let fb = MelFilterbank::standard(RATE);
    let mut mfcc_err = 0.0f64;
    for seed in 0..10 {
        let frame = white_noise(200, 60 + seed);
        let fast = cepstral::mfcc(&dsp::spectrum(&frame, RATE).unwrap(), &fb).unwrap();
        let slow = mfcc_definition(&frame, RATE as f64);
        mfcc_err = fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(mfcc_err, f64::max);
    }
    c.check(format!("MFCC vs definition max abs error {mfcc_err:.2e} (<= 1e-8)"), mfcc_err <= 1e-8);

    let mut lpc_err = 0.0f64;
    for seed in 0..10 {
        let x = preprocess_frame(&white_noise(200, 80 + seed), 0.97);
        let fast = cepstral::lpc(&x, 12).unwrap().coefficients;
        let slow = yule_walker(&sample_autocorrelation(&x, 12), 12);
        lpc_err = fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(lpc_err, f64::max);
    }
    c.check(format!("LPC vs Yule-Walker max abs error {lpc_err:.2e} (<= 1e-8)"), lpc_err <= 1e-8);

    let a = cepstral::lpc(&ar2(1.0, -0.5, 4096, 2), 2).unwrap().coefficients;
    c.check(
        format!("AR(2) (1.0, -0.5) recovered as ({:.4}, {:.4}) (+-0.02)", a[0], a[1]),
        (a[0] - 1.0).abs() <= 0.02 && (a[1] + 0.5).abs() <= 0.02,
    );
    c.finish(2, "FFT, MFCC, LPC and AR(2) against independent oracles");
}

#[test]
fn criterion_3_pitch_and_formant() {
    let mut c = Checks::new();
    let frame = sine(200.0, RATE as f64, 200, 0.8);
    let f0 = dsp::pitch(&frame, RATE, &PitchConfig::default());
    c.check(format!("200 Hz sine gives {f0} Hz"), f0 == 200.0);

    let theta = 2.0 * PI * 500.0 / RATE as f64;
    let model = LpcModel {
        coefficients: vec![2.0 * 0.98 * theta.cos(), -0.98 * 0.98],
        reflection: vec![0.0; 2],
        gain: 1.0,
    };
    let f = cepstral::formants(&model, RATE, &FormantConfig::default());
    c.check(format!("pole pair at 500 Hz gives F1 = {:.4} Hz (+-1)", f[0]), (f[0] - 500.0).abs() <= 1.0);
    c.check("F2..F5 empty", f[1..].iter().all(|&v| v == 0.0));
    c.finish(3, "pitch and formant synthetic checks");
}

#[test]
fn criterion_4_ccc() {
    let mut c = Checks::new();
    let eval = |y: &[f64], p: &[f64]| ccc(&PairedSeries::new(y, p).unwrap());
    c.check("identical series give 1", eval(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]) == 1.0);
    c.check("reversed series give -1", (eval(&[-1.0, 0.0, 1.0], &[1.0, 0.0, -1.0]) + 1.0).abs() < 1e-15);
    let y = [0.0, 1.0, 2.0, 3.0];
    let p = [0.5, 1.5, 2.0, 3.5];
    let v = eval(&y, &p);
    let oracle = ccc_definition(&y, &p);
    c.check(
        format!("worked example {v:.6} vs oracle {oracle:.6} and 0.9268"),
        (v - oracle).abs() < 1e-4 && (v - 0.9268).abs() < 1e-4,
    );

    let mut r = rng(4);
    let (mut in_range, mut shift_ok) = (0, 0);
    for _ in 0..1000 {
        let n = r.gen_range(2..50);
        let y: Vec<f64> = (0..n).map(|_| r.gen_range(-10.0..10.0)).collect();
        let p: Vec<f64> = y.iter().map(|v| r.gen_range(-1.0..1.0) * v + r.gen_range(-5.0..5.0)).collect();
        let v = eval(&y, &p);
        if (-1.0..=1.0).contains(&v) {
            in_range += 1;
        }
        let s = r.gen_range(-100.0..100.0);
        let ys: Vec<f64> = y.iter().map(|a| a + s).collect();
        let ps: Vec<f64> = p.iter().map(|a| a + s).collect();
        if (eval(&ys, &ps) - v).abs() < 1e-9 {
            shift_ok += 1;
        }
    }
    c.check(format!("{in_range}/1000 random pairs in [-1, 1]"), in_range == 1000);
    c.check(format!("{shift_ok}/1000 random pairs shift invariant"), shift_ok == 1000);
    c.finish(4, "CCC examples and properties");
}

#[test]
fn criterion_5_svr_optimality() {
    let mut c = Checks::new();
    let hypers: Vec<SvrHyper> = [Kernel::Linear, Kernel::Rbf { gamma: 0.5 }, Kernel::Rbf { gamma: 2.0 }]
        .into_iter()
        .flat_map(|kernel| {
            [(0.1, 0.01), (1.0, 0.1), (10.0, 0.01), (100.0, 0.1)]
                .into_iter()
                .map(move |(c, epsilon)| SvrHyper { kernel, c, epsilon })
        })
        .collect();
    let mut r = rng(55);
    let (mut problems, mut worst_gap, mut worst_kkt) = (0, f64::NEG_INFINITY, 0.0f64);
    for n in 2..=8 {
        for _ in 0..5 {
            let x: Vec<Vec<f64>> = (0..n).map(|_| vec![r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)]).collect();
            let y: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
            for h in &hypers {
                let k = svr::gram(&x, h.kernel);
                let sol = svr::solve_dual(&k, &y, h.c, h.epsilon, &SmoOptions::default(), |_| {});
                let smo = svr_dual(&k, &y, &sol.beta, h.epsilon);
                let mut oracle = svr_dual_pairwise(&k, &y, h.c, h.epsilon);
                if n == 3 && h.c <= 10.0 {
                    oracle = oracle.max(svr_dual_grid3(&k, &y, h.c, h.epsilon, 400));
                }
                worst_gap = worst_gap.max(oracle - smo);
                let model = svr::train_svr(&x, &y, *h).unwrap();
                worst_kkt = worst_kkt.max(model.kkt_violation);
                problems += 1;
            }
        }
    }
    c.check(
        format!("{problems} problems with n <= 8: oracle - SMO dual <= {worst_gap:.2e} (<= 1e-4)"),
        worst_gap <= 1e-4,
    );

    let x: Vec<Vec<f64>> = (0..60).map(|_| (0..6).map(|_| r.gen::<f64>()).collect()).collect();
    let y: Vec<f64> = x.iter().map(|v| v[0] - 0.5 * v[3] + 0.1 * r.gen::<f64>()).collect();
    let ranking = rrelieff(&x, &y, &RReliefFParams::default()).unwrap();
    let grid = SvrGrid {
        k_values: vec![2, 4, 6],
        ..SvrGrid::default()
    };
    let sel = svr::model_select(
        LabeledSet { x: &x[..40], y: &y[..40] },
        LabeledSet { x: &x[40..], y: &y[40..] },
        &ranking,
        &grid,
    )
    .unwrap();
    worst_kkt = sel.log.iter().map(|l| l.kkt_violation).fold(worst_kkt, f64::max);
    c.check(
        format!("KKT residual of {} trained models <= {worst_kkt:.2e} (< 1e-3)", problems + sel.log.len()),
        worst_kkt < 1e-3,
    );
    c.finish(5, "SMO reaches the dual optimum with KKT residual below tolerance");
}

#[test]
fn criterion_6_relieff() {
    let mut c = Checks::new();
    let wins = (0..20)
        .filter(|&s| {
            let (x, y) = planted_copy(200, 5, 600 + s);
            rrelieff(&x, &y, &RReliefFParams::default()).unwrap().order[0] == 0
        })
        .count();
    c.check(format!("label copy ranked first in {wins}/20 seeds (>= 19)"), wins >= 19);
    let (x, _) = planted_copy(50, 5, 1);
    let flat: FeatureRanking = rrelieff(&x, &[0.7; 50], &RReliefFParams::default()).unwrap();
    c.check("constant label gives all-zero weights", flat.weights.iter().all(|&w| w == 0.0));
    c.finish(6, "RReliefF planted feature and degenerate label");
}

#[test]
fn criterion_7_smlr() {
    let mut c = Checks::new();
    let r = [0.9, 0.6, 0.3];
    let q: Vec<Vec<f64>> = (0..3)
        .map(|i| (0..3).map(|j| if i == j { 1.0 } else { r[i] * r[j] }).collect())
        .collect();
    let (est, _) = rank_one_completion(&q, &CompletionOptions::default()).unwrap();
    let err = est.iter().zip(r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    c.check(format!("rank-1 recovery error {err:.2e} (<= 1e-8)"), err <= 1e-8);

    let sigmas = [0.1, 0.2, 0.4, 0.8];
    let (mut ordered, mut worst) = (0, 0.0f64);
    for seed in 0..50 {
        let (y, preds) = planted_ensemble(5000, &sigmas, 800 + seed);
        let acc = estimate_accuracies(&preds).unwrap().accuracies;
        if acc.windows(2).all(|w| w[0] > w[1]) {
            ordered += 1;
        }
        let names = (0..4).map(|i| format!("m{i}")).collect();
        let ids = (0..5000).map(|i| format!("u{i}")).collect();
        let fused = smlr_fuse(&PredictionSet::new(names, ids, preds.clone()).unwrap(), &[]).unwrap();
        let best = preds.iter().map(|p| mse(&y, p)).fold(f64::INFINITY, f64::min);
        worst = worst.max(mse(&y, &fused.fused) / best);
    }
    c.check(format!("accuracy ordering correct in {ordered}/50 seeds (>= 48)"), ordered >= 48);
    c.check(format!("worst fused / best base MSE = {worst:.4} (<= 1.05)"), worst <= 1.05);
    c.finish(7, "SMLR rank-1 recovery and planted ensemble");
}

fn report_rows(path: &std::path::Path) -> Vec<(String, String, f64, f64)> {
    String::from_utf8(read(path))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].to_string(), f[2].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect()
}

#[test]
fn criterion_8_end_to_end() {
    let mut c = Checks::new();
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec::default();
    c.check(
        format!("dataset has {} train / {} validation utterances", spec.n_train, spec.n_validation),
        spec.n_train >= 40 && spec.n_validation >= 10,
    );
    let run = full_pipeline(dir.path(), &spec);
    c.check(format!("exit codes {:?}", run.codes), run.codes.iter().all(|&x| x == 0));
    let secs = run.elapsed.as_secs_f64();
    c.check(format!("pipeline took {secs:.2} s (< 60 s)"), secs < 60.0);
    let report = run.work.join("report.csv");
    if report.exists() {
        let rows = report_rows(&report);
        c.check(
            format!("{} report rows, all CCC/MSE finite", rows.len()),
            !rows.is_empty() && rows.iter().all(|r| r.2.is_finite() && r.3.is_finite()),
        );
        for target in ["arousal", "valence"] {
            let mut base: Vec<f64> = rows.iter().filter(|r| r.1 == target && r.0 != "smlr").map(|r| r.2).collect();
            base.sort_by(f64::total_cmp);
            let median = if base.len() % 2 == 1 {
                base[base.len() / 2]
            } else {
                0.5 * (base[base.len() / 2 - 1] + base[base.len() / 2])
            };
            let fused = rows.iter().find(|r| r.1 == target && r.0 == "smlr").map_or(f64::NAN, |r| r.2);
            c.check(
                format!("{target}: fused CCC {fused:.4} >= median base CCC {median:.4}"),
                fused >= median,
            );
        }
    } else {
        c.check("report written", false);
    }
    c.finish(8, "extract, train, predict, fuse, eval on the synthetic dataset");
}

#[test]
fn criterion_9_determinism() {
    let mut c = Checks::new();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let spec = SynthSpec::default();
    full_pipeline(a.path(), &spec);
    full_pipeline(b.path(), &spec);
    let mut files = vec!["features.csv".to_string(), "report.csv".to_string()];
    for t in ["arousal", "valence"] {
        files.push(format!("models/selection_{t}.csv"));
        files.push(format!("models/ranking_{t}.csv"));
        files.push(format!("models/svr_{t}.model"));
        files.push(format!("predictions/{t}/svr_audio.csv"));
        files.push(format!("fused/{t}/smlr.csv"));
        files.push(format!("fused/smlr_weights_{t}.csv"));
    }
    files.push("models/scaler.csv".into());
    for f in files {
        let (pa, pb) = (a.path().join(&f), b.path().join(&f));
        let same = pa.exists() && pb.exists() && read(&pa) == read(&pb);
        c.check(format!("{f} byte-identical"), same);
    }
    c.finish(9, "two identical runs produce byte-identical outputs");
}
