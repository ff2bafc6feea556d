//! Spectral meta-learner fusion of base regressors.
//!
//! Base-model predictions on the same unlabeled utterances are treated as
//! noisy views of one latent target. Their covariance then has rank-one
//! off-diagonal structure, `Q_ij ~ r_i r_j`, which is recovered by iterating
//! diagonal completion with the leading eigenpair. The loading `r_i` is the
//! covariance of model `i` with the shared signal and `Q_ii - r_i^2` is its
//! unexplained (error) variance; a model's accuracy is `r_i / psi_i`, and the
//! fused estimate is the accuracy-weighted average of raw predictions.

use crate::error::{Error, Result};

/// Predictions of `M` models for `N` utterances, one row per model.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub model_names: Vec<String>,
    pub utterance_ids: Vec<String>,
    pub predictions: Vec<Vec<f64>>,
}

impl PredictionSet {
    pub fn new(
        model_names: Vec<String>,
        utterance_ids: Vec<String>,
        predictions: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if model_names.is_empty() || model_names.len() != predictions.len() {
            return Err(Error::Contract(format!(
                "{} model names for {} prediction rows",
                model_names.len(),
                predictions.len()
            )));
        }
        if utterance_ids.len() < 2 {
            return Err(Error::Empty("prediction set needs at least 2 utterances"));
        }
        if let Some(row) = predictions.iter().find(|r| r.len() != utterance_ids.len()) {
            return Err(Error::DimensionMismatch {
                expected: utterance_ids.len(),
                got: row.len(),
            });
        }
        if predictions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("prediction set"));
        }
        Ok(Self {
            model_names,
            utterance_ids,
            predictions,
        })
    }

    pub fn n_models(&self) -> usize {
        self.model_names.len()
    }

    pub fn n_utterances(&self) -> usize {
        self.utterance_ids.len()
    }
}

/// Sample covariance (divide by `N - 1`) between prediction rows.
pub fn covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.first().map_or(0, Vec::len);
    let centered: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let mean = r.iter().sum::<f64>() / n as f64;
            r.iter().map(|v| v - mean).collect()
        })
        .collect();
    let denom = (n.max(2) - 1) as f64;
    let m = rows.len();
    let mut q = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in i..m {
            let v = centered[i]
                .iter()
                .zip(&centered[j])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / denom;
            q[i][j] = v;
            q[j][i] = v;
        }
    }
    q
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompletionOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub max_power_steps: usize,
}

impl Default for CompletionOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_iterations: 1000,
            max_power_steps: 10_000,
        }
    }
}

/// Largest (algebraic) eigenpair of a symmetric matrix by shifted power
/// iteration, started from `start` or the all-ones vector.
pub fn leading_eigenpair(
    q: &[Vec<f64>],
    start: Option<&[f64]>,
    max_steps: usize,
) -> Result<(f64, Vec<f64>)> {
    let m = q.len();
    // Gershgorin shift makes the spectrum non-negative so the dominant
    // eigenvalue of the shifted matrix is the largest algebraic one.
    let shift = q
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row[i]
                - row
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, v)| v.abs())
                    .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
        .min(0.0)
        .abs();
    let mut v = match start {
        Some(s) if s.len() == m && s.iter().any(|&x| x != 0.0) => s.to_vec(),
        _ => vec![1.0 / (m as f64).sqrt(); m],
    };
    for _ in 0..max_steps {
        let mut w: Vec<f64> = (0..m)
            .map(|i| q[i].iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() + shift * v[i])
            .collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok((0.0, v));
        }
        w.iter_mut().for_each(|x| *x /= norm);
        let change = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = w;
        if change < 1e-14 {
            let lambda = rayleigh(q, &v);
            return Ok((lambda, v));
        }
    }
    Err(Error::NoConvergence(format!(
        "power iteration exceeded {max_steps} steps"
    )))
}

fn rayleigh(q: &[Vec<f64>], v: &[f64]) -> f64 {
    q.iter()
        .zip(v)
        .map(|(row, vi)| vi * row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>())
        .sum()
}

/// Recovers `r` with `Q_ij ~ r_i r_j` for `i != j`. The sign is fixed so
/// that `sum r_i > 0`. Returns `r` and the number of completion sweeps.
pub fn rank_one_completion(q: &[Vec<f64>], opts: &CompletionOptions) -> Result<(Vec<f64>, usize)> {
    let m = q.len();
    if m < 3 {
        return Err(Error::InvalidParameter(format!(
            "rank-one completion needs at least 3 models, got {m}"
        )));
    }
    let mut work: Vec<Vec<f64>> = q.to_vec();
    for (i, row) in work.iter_mut().enumerate() {
        row[i] = q[i]
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max);
    }
    let mut sweeps = 0;
    let (mut lambda, mut v) = leading_eigenpair(&work, None, opts.max_power_steps)?;
    while sweeps < opts.max_iterations {
        sweeps += 1;
        let mut change: f64 = 0.0;
        for i in 0..m {
            let d = lambda * v[i] * v[i];
            change = change.max((d - work[i][i]).abs());
            work[i][i] = d;
        }
        (lambda, v) = leading_eigenpair(&work, Some(&v), opts.max_power_steps)?;
        if change < opts.tolerance {
            break;
        }
    }
    let scale = lambda.max(0.0).sqrt();
    let sign = if v.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    Ok((v.iter().map(|x| sign * scale * x).collect(), sweeps))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyEstimate {
    /// Covariance of each model with the shared latent signal.
    pub loadings: Vec<f64>,
    /// Unexplained variance `Q_ii - r_i^2`, floored at a tiny fraction of `Q_ii`.
    pub error_variances: Vec<f64>,
    /// `max(r_i, 0) / psi_i`.
    pub accuracies: Vec<f64>,
    pub sweeps: usize,
}

const ERROR_VARIANCE_FLOOR: f64 = 1e-9;

pub fn estimate_from_covariance(q: &[Vec<f64>], opts: &CompletionOptions) -> Result<AccuracyEstimate> {
    let (loadings, sweeps) = rank_one_completion(q, opts)?;
    let error_variances: Vec<f64> = loadings
        .iter()
        .enumerate()
        .map(|(i, r)| (q[i][i] - r * r).max(ERROR_VARIANCE_FLOOR * q[i][i]))
        .collect();
    let accuracies = loadings
        .iter()
        .zip(&error_variances)
        .map(|(r, psi)| r.max(0.0) / psi)
        .collect();
    Ok(AccuracyEstimate {
        loadings,
        error_variances,
        accuracies,
        sweeps,
    })
}

/// Unsupervised accuracy estimates for the rows of `predictions`.
pub fn estimate_accuracies(predictions: &[Vec<f64>]) -> Result<AccuracyEstimate> {
    if predictions.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "accuracy estimation needs at least 3 models, got {}",
            predictions.len()
        )));
    }
    for (i, row) in predictions.iter().enumerate() {
        if row.windows(2).all(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter(format!(
                "prediction row {i} is constant"
            )));
        }
    }
    estimate_from_covariance(&covariance(predictions), &CompletionOptions::default())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionResult {
    pub model_names: Vec<String>,
    pub weights: Vec<f64>,
    pub accuracy_estimates: Vec<f64>,
    pub fused: Vec<f64>,
}

/// Accuracy-weighted average of the models left after `exclude`.
///
/// With three or more models the weights are the normalized accuracy
/// estimates (uniform if all are zero). Two models are averaged uniformly;
/// a single model passes through.
pub fn smlr_fuse(preds: &PredictionSet, exclude: &[String]) -> Result<FusionResult> {
    if let Some(unknown) = exclude.iter().find(|e| !preds.model_names.contains(e)) {
        return Err(Error::Contract(format!(
            "excluded model `{unknown}` is not among the base models"
        )));
    }
    let kept: Vec<usize> = (0..preds.n_models())
        .filter(|&i| !exclude.contains(&preds.model_names[i]))
        .collect();
    if kept.is_empty() {
        return Err(Error::Contract("every base model was excluded".into()));
    }
    let rows: Vec<Vec<f64>> = kept.iter().map(|&i| preds.predictions[i].clone()).collect();
    let names: Vec<String> = kept.iter().map(|&i| preds.model_names[i].clone()).collect();
    let m = rows.len();

    let (weights, accuracy_estimates) = match m {
        1 => (vec![1.0], vec![1.0]),
        2 => {
            log::warn!("only two base models; averaging uniformly");
            (vec![0.5; 2], vec![0.5; 2])
        }
        _ => {
            let est = estimate_accuracies(&rows)?;
            let total: f64 = est.accuracies.iter().sum();
            let weights = if total > 0.0 && total.is_finite() {
                est.accuracies.iter().map(|a| a / total).collect()
            } else {
                vec![1.0 / m as f64; m]
            };
            (weights, est.accuracies)
        }
    };

    let n = preds.n_utterances();
    let fused = (0..n)
        .map(|j| {
            let v: f64 = rows.iter().zip(&weights).map(|(r, w)| w * r[j]).sum();
            // keep the convex-combination bound exact under rounding
            let (lo, hi) = rows
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                    (lo.min(r[j]), hi.max(r[j]))
                });
            v.clamp(lo, hi)
        })
        .collect();
    Ok(FusionResult {
        model_names: names,
        weights,
        accuracy_estimates,
        fused,
    })
}
