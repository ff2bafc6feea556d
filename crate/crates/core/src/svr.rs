//! Epsilon-insensitive support vector regression trained by SMO, and the
//! validation-driven search over feature count and hyperparameters.
//!
//! The dual is solved in the combined variable `beta = alpha - alpha*`:
//!
//! ```text
//! maximize  -1/2 beta' K beta - eps * sum|beta_i| + y' beta
//! s.t.      sum beta_i = 0,  -C <= beta_i <= C
//! ```
//!
//! Each step moves the maximal KKT-violating pair along `(+t, -t)` and
//! maximizes the piecewise quadratic objective along that direction exactly,
//! so the dual objective never decreases.

use std::fmt;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics;
use crate::relieff::FeatureRanking;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Linear => "linear",
            Kernel::Rbf { .. } => "rbf",
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match *self {
            Kernel::Linear => None,
            Kernel::Rbf { gamma } => Some(gamma),
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Linear => f.write_str("linear"),
            Kernel::Rbf { gamma } => write!(f, "rbf(gamma={gamma})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvrHyper {
    pub kernel: Kernel,
    pub c: f64,
    pub epsilon: f64,
}

impl SvrHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !(self.epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "SVR needs C > 0 and epsilon >= 0, got C = {}, epsilon = {}",
                self.c, self.epsilon
            )));
        }
        if let Kernel::Rbf { gamma } = self.kernel {
            if !(gamma > 0.0) {
                return Err(Error::InvalidParameter(format!("rbf gamma {gamma}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoOptions {
    /// Stop when the maximal pair violation drops below this.
    pub tolerance: f64,
    /// Pair-update budget per training sample.
    pub updates_per_sample: usize,
}

impl Default for SmoOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            updates_per_sample: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvrModel {
    pub support_vectors: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    pub bias: f64,
    pub hyper: SvrHyper,
    /// Columns of the full feature vector this model reads, in order.
    pub feature_indices: Vec<usize>,
    /// Maximal KKT pair violation at termination.
    pub kkt_violation: f64,
    pub converged: bool,
}

impl SvrModel {
    pub fn n_features(&self) -> usize {
        self.feature_indices.len()
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        let k = self.hyper.kernel;
        self.support_vectors
            .iter()
            .zip(&self.beta)
            .map(|(sv, b)| b * k.eval(sv, x))
            .sum::<f64>()
            + self.bias
    }

    /// Picks this model's columns out of full-width rows.
    pub fn select(&self, full: &[f64]) -> Result<Vec<f64>> {
        self.feature_indices
            .iter()
            .map(|&i| {
                full.get(i).copied().ok_or(Error::DimensionMismatch {
                    expected: i + 1,
                    got: full.len(),
                })
            })
            .collect()
    }
}

/// Predictions for rows already restricted to the model's features.
pub fn predict(model: &SvrModel, x: &[Vec<f64>]) -> Result<Vec<f64>> {
    x.iter()
        .map(|row| {
            if row.len() != model.n_features() {
                return Err(Error::DimensionMismatch {
                    expected: model.n_features(),
                    got: row.len(),
                });
            }
            Ok(model.decision(row))
        })
        .collect()
}

pub fn gram(x: &[Vec<f64>], kernel: Kernel) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval(&x[i], &x[j]);
            k[i][j] = v;
            k[j][i] = v;
        }
    }
    k
}

/// `-1/2 beta' K beta - eps sum|beta| + y' beta`
pub fn dual_objective(k: &[Vec<f64>], y: &[f64], beta: &[f64], epsilon: f64) -> f64 {
    let mut quad = 0.0;
    for (i, bi) in beta.iter().enumerate() {
        if *bi == 0.0 {
            continue;
        }
        quad += bi * k[i].iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
    }
    -0.5 * quad - epsilon * beta.iter().map(|b| b.abs()).sum::<f64>()
        + y.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>()
}

/// Raw solver output, before support vectors are extracted.
#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub beta: Vec<f64>,
    pub bias: f64,
    pub violation: f64,
    pub updates: usize,
    pub converged: bool,
}

struct Smo<'a> {
    k: &'a [Vec<f64>],
    beta: Vec<f64>,
    /// `y - K beta`
    grad: Vec<f64>,
    c: f64,
    eps: f64,
}

impl Smo<'_> {
    fn up_rate(&self, i: usize) -> f64 {
        if self.beta[i] >= 0.0 {
            self.grad[i] - self.eps
        } else {
            self.grad[i] + self.eps
        }
    }

    fn down_rate(&self, j: usize) -> f64 {
        if self.beta[j] <= 0.0 {
            -self.grad[j] - self.eps
        } else {
            -self.grad[j] + self.eps
        }
    }

    /// Maximal violating pair `(up, down, violation)`.
    fn select(&self) -> Option<(usize, usize, f64)> {
        let mut up: Option<(usize, f64)> = None;
        let mut down: Option<(usize, f64)> = None;
        for i in 0..self.beta.len() {
            if self.beta[i] < self.c {
                let r = self.up_rate(i);
                if up.map_or(true, |u| r > u.1) {
                    up = Some((i, r));
                }
            }
            if self.beta[i] > -self.c {
                let r = self.down_rate(i);
                if down.map_or(true, |d| r > d.1) {
                    down = Some((i, r));
                }
            }
        }
        let (i, ru) = up?;
        let (j, rd) = down?;
        Some((i, j, ru + rd))
    }

    /// Exact line search along `beta_i += t, beta_j -= t`, `t >= 0`.
    fn step(&mut self, i: usize, j: usize) -> f64 {
        let (bi, bj) = (self.beta[i], self.beta[j]);
        let eta = (self.k[i][i] + self.k[j][j] - 2.0 * self.k[i][j]).max(0.0);
        let t_max = (self.c - bi).min(bj + self.c);
        let mut breaks: Vec<f64> = Vec::with_capacity(3);
        if bi < 0.0 {
            breaks.push(-bi);
        }
        if bj > 0.0 {
            breaks.push(bj);
        }
        breaks.push(t_max);
        breaks.sort_by(f64::total_cmp);

        let g0 = self.grad[i] - self.grad[j];
        let mut t = 0.0;
        for &end in breaks.iter().filter(|&&b| b <= t_max) {
            if end <= t {
                continue;
            }
            let si = if bi + t >= 0.0 { 1.0 } else { -1.0 };
            let sj = if bj - t > 0.0 { -1.0 } else { 1.0 };
            let slope = g0 - t * eta - self.eps * si - self.eps * sj;
            if slope <= 0.0 {
                break;
            }
            if eta > 0.0 && t + slope / eta < end {
                t += slope / eta;
                break;
            }
            t = end;
        }
        if t <= 0.0 {
            return 0.0;
        }

        let new_i = if bi < 0.0 && t == -bi {
            0.0
        } else {
            (bi + t).min(self.c)
        };
        let new_j = if bj > 0.0 && t == bj {
            0.0
        } else {
            (bj - t).max(-self.c)
        };
        let di = new_i - bi;
        let dj = new_j - bj;
        self.beta[i] = new_i;
        self.beta[j] = new_j;
        for (g, (ki, kj)) in self.grad.iter_mut().zip(self.k[i].iter().zip(&self.k[j])) {
            *g -= di * ki + dj * kj;
        }
        t
    }

    fn bias(&self) -> f64 {
        let (mut free_sum, mut free_n) = (0.0, 0usize);
        let (mut lower, mut upper) = (f64::NEG_INFINITY, f64::INFINITY);
        for (&b, &g) in self.beta.iter().zip(&self.grad) {
            if b == 0.0 {
                lower = lower.max(g - self.eps);
                upper = upper.min(g + self.eps);
            } else if b >= self.c {
                upper = upper.min(g - self.eps);
            } else if b <= -self.c {
                lower = lower.max(g + self.eps);
            } else {
                free_sum += g - self.eps * b.signum();
                free_n += 1;
            }
        }
        if free_n > 0 {
            free_sum / free_n as f64
        } else if lower.is_finite() && upper.is_finite() {
            0.5 * (lower + upper)
        } else if lower.is_finite() {
            lower
        } else if upper.is_finite() {
            upper
        } else {
            0.0
        }
    }
}

/// Runs SMO on a precomputed Gram matrix. `on_step` sees the iterate after
/// every pair update.
pub fn solve_dual(
    k: &[Vec<f64>],
    y: &[f64],
    c: f64,
    epsilon: f64,
    opts: &SmoOptions,
    mut on_step: impl FnMut(&[f64]),
) -> SmoSolution {
    let n = y.len();
    let mut smo = Smo {
        k,
        beta: vec![0.0; n],
        grad: y.to_vec(),
        c,
        eps: epsilon,
    };
    let budget = opts.updates_per_sample.saturating_mul(n).max(1);
    let mut updates = 0;
    let mut violation = 0.0;
    let mut converged = false;
    while updates < budget {
        let Some((i, j, v)) = smo.select() else {
            converged = true;
            violation = 0.0;
            break;
        };
        violation = v.max(0.0);
        if i == j || v < opts.tolerance {
            converged = true;
            break;
        }
        if smo.step(i, j) == 0.0 {
            // numerically stuck on this pair
            converged = v < opts.tolerance;
            break;
        }
        updates += 1;
        on_step(&smo.beta);
    }
    if !converged {
        violation = smo.select().map_or(0.0, |s| s.2.max(0.0));
        converged = violation < opts.tolerance;
    }
    SmoSolution {
        bias: smo.bias(),
        beta: smo.beta,
        violation,
        updates,
        converged,
    }
}

fn check_inputs(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::Empty("SVR training set"));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let d = x[0].len();
    if let Some(bad) = x.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("SVR training data"));
    }
    Ok(d)
}

pub fn train_svr(x: &[Vec<f64>], y: &[f64], hyper: SvrHyper) -> Result<SvrModel> {
    train_svr_with(x, y, hyper, &SmoOptions::default())
}

/// Trains on `x`, whose columns are taken to be features `0..d`. A model
/// that misses the tolerance is still returned, with `converged = false`.
pub fn train_svr_with(
    x: &[Vec<f64>],
    y: &[f64],
    hyper: SvrHyper,
    opts: &SmoOptions,
) -> Result<SvrModel> {
    let d = check_inputs(x, y)?;
    hyper.validate()?;
    let k = gram(x, hyper.kernel);
    let sol = solve_dual(&k, y, hyper.c, hyper.epsilon, opts, |_| {});
    if !sol.converged {
        log::warn!(
            "SMO stopped after {} updates with violation {:.3e}",
            sol.updates,
            sol.violation
        );
    }
    let (support_vectors, beta) = x
        .iter()
        .zip(&sol.beta)
        .filter(|(_, &b)| b != 0.0)
        .map(|(row, &b)| (row.clone(), b))
        .unzip();
    Ok(SvrModel {
        support_vectors,
        beta,
        bias: sol.bias,
        hyper,
        feature_indices: (0..d).collect(),
        kkt_violation: sol.violation,
        converged: sol.converged,
    })
}

/// How an rbf gamma grid entry is resolved for a given feature count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSpec {
    Fixed(f64),
    /// `1 / d` for `d` selected features.
    InverseDim,
}

impl GammaSpec {
    pub fn resolve(&self, d: usize) -> f64 {
        match *self {
            GammaSpec::Fixed(g) => g,
            GammaSpec::InverseDim => 1.0 / d as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum KernelKind {
    Linear,
    Rbf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvrGrid {
    pub k_values: Vec<usize>,
    pub c_values: Vec<f64>,
    pub epsilon_values: Vec<f64>,
    pub gamma_values: Vec<GammaSpec>,
    pub kernels: Vec<KernelKind>,
}

impl Default for SvrGrid {
    fn default() -> Self {
        let mut k_values: Vec<usize> = (5..=75).step_by(5).collect();
        k_values.push(76);
        Self {
            k_values,
            c_values: vec![0.1, 1.0, 10.0, 100.0],
            epsilon_values: vec![0.01, 0.1],
            gamma_values: vec![
                GammaSpec::Fixed(0.01),
                GammaSpec::Fixed(0.1),
                GammaSpec::InverseDim,
            ],
            kernels: vec![KernelKind::Rbf],
        }
    }
}

impl SvrGrid {
    /// Hyperparameter configurations for `d` features, in tie-break order:
    /// smaller C, then smaller epsilon, then kernel, then smaller gamma.
    pub fn configurations(&self, d: usize) -> Vec<SvrHyper> {
        let mut cs = self.c_values.clone();
        cs.sort_by(f64::total_cmp);
        cs.dedup();
        let mut eps = self.epsilon_values.clone();
        eps.sort_by(f64::total_cmp);
        eps.dedup();
        let mut gammas: Vec<f64> = self.gamma_values.iter().map(|g| g.resolve(d)).collect();
        gammas.sort_by(f64::total_cmp);
        gammas.dedup();
        let mut kernels = self.kernels.clone();
        kernels.sort();
        kernels.dedup();

        let mut out = Vec::new();
        for &c in &cs {
            for &epsilon in &eps {
                for kind in &kernels {
                    match kind {
                        KernelKind::Linear => out.push(SvrHyper {
                            kernel: Kernel::Linear,
                            c,
                            epsilon,
                        }),
                        KernelKind::Rbf => out.extend(gammas.iter().map(|&gamma| SvrHyper {
                            kernel: Kernel::Rbf { gamma },
                            c,
                            epsilon,
                        })),
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.k_values.is_empty()
            || self.c_values.is_empty()
            || self.epsilon_values.is_empty()
            || self.kernels.is_empty()
            || (self.kernels.contains(&KernelKind::Rbf) && self.gamma_values.is_empty())
        {
            return Err(Error::InvalidParameter("empty SVR grid".into()));
        }
        if let Some(&k) = self.k_values.iter().find(|&&k| k == 0 || k > n_features) {
            return Err(Error::InvalidParameter(format!(
                "feature count {k} outside 1..={n_features}"
            )));
        }
        Ok(())
    }
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRecord {
    pub k: usize,
    pub hyper: SvrHyper,
    pub validation_ccc: f64,
    pub kkt_violation: f64,
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub k: usize,
    pub hyper: SvrHyper,
    pub model: SvrModel,
    pub log: Vec<SelectionRecord>,
}

/// A split's (already scaled) feature rows and labels.
#[derive(Debug, Clone, Copy)]
pub struct LabeledSet<'a> {
    pub x: &'a [Vec<f64>],
    pub y: &'a [f64],
}

fn restrict(rows: &[Vec<f64>], cols: &[usize]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| cols.iter().map(|&c| r[c]).collect())
        .collect()
}

/// Grid search over `(k, hyper)`: trains on the top-`k` ranked features of
/// the training split and keeps the configuration with the highest
/// validation CCC. Ties go to fewer features, then smaller C, then smaller
/// epsilon.
pub fn model_select(
    train: LabeledSet<'_>,
    val: LabeledSet<'_>,
    ranking: &FeatureRanking,
    grid: &SvrGrid,
) -> Result<Selection> {
    if val.x.is_empty() {
        return Err(Error::Empty("validation split"));
    }
    let d = check_inputs(train.x, train.y)?;
    check_inputs(val.x, val.y)?;
    if ranking.order.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: ranking.order.len(),
        });
    }
    grid.validate(d)?;

    let mut ks = grid.k_values.clone();
    ks.sort_unstable();
    ks.dedup();
    let mut jobs = Vec::new();
    for &k in &ks {
        let cols = ranking.top_k(k)?;
        for hyper in grid.configurations(k) {
            jobs.push((k, cols.clone(), hyper));
        }
    }

    let results: Vec<Result<(SelectionRecord, SvrModel)>> = jobs
        .par_iter()
        .map(|(k, cols, hyper)| {
            let tx = restrict(train.x, cols);
            let vx = restrict(val.x, cols);
            let mut model = train_svr(&tx, train.y, *hyper)?;
            model.feature_indices = cols.clone();
            let pred = predict(&model, &vx)?;
            let ccc = metrics::ccc(&metrics::PairedSeries::new(val.y, &pred)?);
            Ok((
                SelectionRecord {
                    k: *k,
                    hyper: *hyper,
                    validation_ccc: ccc,
                    kkt_violation: model.kkt_violation,
                },
                model,
            ))
        })
        .collect();

    let mut log = Vec::with_capacity(results.len());
    let mut best: Option<(usize, SvrModel)> = None;
    let mut best_ccc = f64::NEG_INFINITY;
    for r in results {
        let (rec, model) = r?;
        // strict: earlier (smaller) configurations win ties
        if best.is_none() || rec.validation_ccc > best_ccc {
            best_ccc = rec.validation_ccc;
            best = Some((log.len(), model));
        }
        log.push(rec);
    }
    let (idx, model) = best.ok_or(Error::InvalidParameter("empty SVR grid".into()))?;
    Ok(Selection {
        k: log[idx].k,
        hyper: log[idx].hyper,
        model,
        log,
    })
}

const MODEL_MAGIC: &str = "svr-model v1";

impl SvrModel {
    /// Plain-text bundle; see the README for the layout.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut s = format!("{MODEL_MAGIC}\n");
        match self.hyper.kernel {
            Kernel::Linear => s.push_str("kernel linear\n"),
            Kernel::Rbf { gamma } => s.push_str(&format!("kernel rbf {gamma}\n")),
        }
        s.push_str(&format!("c {}\n", self.hyper.c));
        s.push_str(&format!("epsilon {}\n", self.hyper.epsilon));
        s.push_str(&format!("bias {}\n", self.bias));
        s.push_str(&format!("kkt_violation {}\n", self.kkt_violation));
        s.push_str(&format!("converged {}\n", self.converged));
        let feats: Vec<String> = self.feature_indices.iter().map(|i| i.to_string()).collect();
        s.push_str(&format!("features {}\n", feats.join(" ")));
        s.push_str(&format!("support {}\n", self.beta.len()));
        for (b, sv) in self.beta.iter().zip(&self.support_vectors) {
            s.push_str(&b.to_string());
            for v in sv {
                s.push(' ');
                s.push_str(&v.to_string());
            }
            s.push('\n');
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(s.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_model(&text).map_err(|m| Error::format(path, m))
    }
}

fn parse_model(text: &str) -> std::result::Result<SvrModel, String> {
    let mut lines = text.lines();
    if lines.next() != Some(MODEL_MAGIC) {
        return Err("missing model header".into());
    }
    let mut field = |key: &str| -> std::result::Result<Vec<String>, String> {
        let line = lines.next().ok_or(format!("missing `{key}` line"))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(format!("expected `{key}` line, found `{line}`"));
        }
        Ok(parts.map(str::to_string).collect())
    };
    let num = |s: &str| s.parse::<f64>().map_err(|_| format!("bad number `{s}`"));
    let one = |v: Vec<String>| -> std::result::Result<f64, String> {
        v.first().ok_or("missing value".to_string()).and_then(|s| num(s))
    };

    let kernel = field("kernel")?;
    let kernel = match kernel.first().map(String::as_str) {
        Some("linear") => Kernel::Linear,
        Some("rbf") => Kernel::Rbf {
            gamma: num(kernel.get(1).ok_or("rbf without gamma")?)?,
        },
        other => return Err(format!("unknown kernel {other:?}")),
    };
    let c = one(field("c")?)?;
    let epsilon = one(field("epsilon")?)?;
    let bias = one(field("bias")?)?;
    let kkt_violation = one(field("kkt_violation")?)?;
    let converged = field("converged")?.first().map(String::as_str) == Some("true");
    let feature_indices = field("features")?
        .iter()
        .map(|s| s.parse::<usize>().map_err(|_| format!("bad feature index `{s}`")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let count = one(field("support")?)? as usize;
    let mut beta = Vec::with_capacity(count);
    let mut support_vectors = Vec::with_capacity(count);
    for _ in 0..count {
        let line = lines.next().ok_or("truncated support vectors")?;
        let vals = line
            .split_whitespace()
            .map(num)
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if vals.len() != feature_indices.len() + 1 {
            return Err("support vector width does not match features".into());
        }
        beta.push(vals[0]);
        support_vectors.push(vals[1..].to_vec());
    }
    Ok(SvrModel {
        support_vectors,
        beta,
        bias,
        hyper: SvrHyper { kernel, c, epsilon },
        feature_indices,
        kkt_violation,
        converged,
    })
}
