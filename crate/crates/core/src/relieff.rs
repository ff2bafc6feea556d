//! RReliefF feature weighting for regression targets.
//!
//! For each sampled instance the `k` nearest neighbours (Manhattan distance
//! over range-normalized attributes) contribute, with weights decaying as
//! `exp(-(rank/sigma)^2)`, to three accumulators: the probability of a
//! different label, of a different attribute value, and of both. The
//! attribute weight contrasts the last two conditioned on label change.

use std::io::Write;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RReliefFParams {
    /// Sampled instances; `None` uses every instance in order.
    pub m: Option<usize>,
    pub k: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for RReliefFParams {
    fn default() -> Self {
        Self {
            m: None,
            k: 10,
            sigma: 20.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRanking {
    pub weights: Vec<f64>,
    /// Feature indices by descending weight, ties by ascending index.
    pub order: Vec<usize>,
}

impl FeatureRanking {
    pub fn from_weights(weights: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..weights.len()).collect();
        order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
        Self { weights, order }
    }

    pub fn top_k(&self, k: usize) -> Result<Vec<usize>> {
        if k == 0 || k > self.order.len() {
            return Err(Error::InvalidParameter(format!(
                "top-k {k} outside 1..={}",
                self.order.len()
            )));
        }
        Ok(self.order[..k].to_vec())
    }

    /// `rank,feature_index,feature_name,weight`
    pub fn save(&self, path: impl AsRef<Path>, names: &[String]) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("rank,feature_index,feature_name,weight\n");
        for (rank, &f) in self.order.iter().enumerate() {
            let name = names.get(f).map_or("", String::as_str);
            out.push_str(&format!("{},{f},{name},{}\n", rank + 1, self.weights[f]));
        }
        std::fs::File::create(path)
            .and_then(|mut file| file.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path)?;
        let mut entries = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let idx: usize = rec[1]
                .parse()
                .map_err(|_| Error::format(path, "bad feature index"))?;
            let w: f64 = rec[3]
                .parse()
                .map_err(|_| Error::format(path, "bad weight"))?;
            entries.push((idx, w));
        }
        let mut weights = vec![f64::NAN; entries.len()];
        for &(i, w) in &entries {
            if i >= weights.len() {
                return Err(Error::format(path, "feature index out of range"));
            }
            weights[i] = w;
        }
        if weights.iter().any(|w| w.is_nan()) {
            return Err(Error::format(path, "ranking is not a permutation"));
        }
        Ok(Self {
            weights,
            order: entries.into_iter().map(|e| e.0).collect(),
        })
    }
}

pub fn top_k(ranking: &FeatureRanking, k: usize) -> Result<Vec<usize>> {
    ranking.top_k(k)
}

struct Accumulators {
    dc: f64,
    da: Vec<f64>,
    dcda: Vec<f64>,
}

fn ranges<'a>(values: impl Iterator<Item = &'a f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    hi - lo
}

pub fn rrelieff(x: &[Vec<f64>], y: &[f64], params: &RReliefFParams) -> Result<FeatureRanking> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if params.k == 0 || !(params.sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "k = {}, sigma = {}",
            params.k, params.sigma
        )));
    }
    if n <= params.k {
        return Err(Error::InvalidParameter(format!(
            "RReliefF needs more than k = {} instances, got {n}",
            params.k
        )));
    }
    let d = x[0].len();
    if let Some(bad) = x.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.len(),
        });
    }

    let instances: Vec<usize> = match params.m {
        None => (0..n).collect(),
        Some(m) if m == 0 || m > n => {
            return Err(Error::InvalidParameter(format!("m = {m} outside 1..={n}")))
        }
        Some(m) if m == n => (0..n).collect(),
        Some(m) => {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            sample(&mut rng, n, m).into_vec()
        }
    };
    weigh_instances(x, y, &instances, params.k, params.sigma)
}

/// RReliefF accumulation over an explicit list of sampled instances.
pub fn weigh_instances(
    x: &[Vec<f64>],
    y: &[f64],
    instances: &[usize],
    k: usize,
    sigma: f64,
) -> Result<FeatureRanking> {
    let n = x.len();
    if y.len() != n || instances.iter().any(|&i| i >= n) || instances.is_empty() {
        return Err(Error::InvalidParameter("instance list".into()));
    }
    if k == 0 || n <= k || !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("k = {k}, sigma = {sigma}, n = {n}")));
    }
    let d = x[0].len();
    let y_range = ranges(y.iter());
    if y_range == 0.0 {
        // no label variation: nothing to attribute
        return Ok(FeatureRanking::from_weights(vec![0.0; d]));
    }
    let col_range: Vec<f64> = (0..d).map(|j| ranges(x.iter().map(|r| &r[j]))).collect();
    let diff = |j: usize, a: usize, b: usize| -> f64 {
        if col_range[j] == 0.0 {
            0.0
        } else {
            (x[a][j] - x[b][j]).abs() / col_range[j]
        }
    };
    let m_used = instances.len() as f64;

    let raw: Vec<f64> = (1..=k)
        .map(|rank| (-(rank as f64 / sigma).powi(2)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    let influence: Vec<f64> = raw.iter().map(|w| w / total).collect();

    let partial: Vec<Accumulators> = instances
        .par_iter()
        .map(|&i| {
            let mut dists: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| ((0..d).map(|f| diff(f, i, j)).sum::<f64>(), j))
                .collect();
            dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut acc = Accumulators {
                dc: 0.0,
                da: vec![0.0; d],
                dcda: vec![0.0; d],
            };
            for (&(_, j), &w) in dists.iter().zip(&influence) {
                let dy = (y[i] - y[j]).abs() / y_range;
                acc.dc += dy * w;
                for f in 0..d {
                    let da = diff(f, i, j);
                    acc.da[f] += da * w;
                    acc.dcda[f] += dy * da * w;
                }
            }
            acc
        })
        .collect();

    let mut total = Accumulators {
        dc: 0.0,
        da: vec![0.0; d],
        dcda: vec![0.0; d],
    };
    for p in &partial {
        total.dc += p.dc;
        for f in 0..d {
            total.da[f] += p.da[f];
            total.dcda[f] += p.dcda[f];
        }
    }

    let weights = (0..d)
        .map(|f| {
            let same_label = if total.dc == 0.0 {
                0.0
            } else {
                total.dcda[f] / total.dc
            };
            let rest = m_used - total.dc;
            let diff_label = if rest == 0.0 {
                0.0
            } else {
                (total.da[f] - total.dcda[f]) / rest
            };
            same_label - diff_label
        })
        .collect();
    Ok(FeatureRanking::from_weights(weights))
}
