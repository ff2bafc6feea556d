//! Percentile clipping followed by min-max scaling, fitted on one split and
//! applied to every split.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnScale {
    pub p_low: f64,
    pub p_high: f64,
    pub min: f64,
    pub max: f64,
}

impl ColumnScale {
    pub fn apply(&self, x: f64) -> f64 {
        let clipped = x.clamp(self.p_low, self.p_high);
        if self.max == self.min {
            0.0
        } else {
            ((clipped - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalerParams {
    pub columns: Vec<ColumnScale>,
    pub fitted_on: String,
}

/// Nearest-rank percentile of sorted data: the value at 1-based index
/// `ceil(p/100 * n)`, clamped to `[1, n]`.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

pub fn fit_scaler(train: &[Vec<f64>], low_pct: f64, high_pct: f64) -> Result<ScalerParams> {
    fit_scaler_on(train, low_pct, high_pct, "train")
}

pub fn fit_scaler_on(
    rows: &[Vec<f64>],
    low_pct: f64,
    high_pct: f64,
    fitted_on: &str,
) -> Result<ScalerParams> {
    let Some(first) = rows.first() else {
        return Err(Error::Empty("scaler training matrix"));
    };
    if !(0.0..=100.0).contains(&low_pct) || !(low_pct..=100.0).contains(&high_pct) {
        return Err(Error::InvalidParameter(format!(
            "percentile bounds [{low_pct}, {high_pct}]"
        )));
    }
    let d = first.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    let columns = (0..d)
        .map(|j| {
            let mut col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            col.sort_by(f64::total_cmp);
            let p_low = nearest_rank(&col, low_pct);
            let p_high = nearest_rank(&col, high_pct);
            let clipped = col.iter().map(|v| v.clamp(p_low, p_high));
            let (min, max) = clipped.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
            ColumnScale {
                p_low,
                p_high,
                min,
                max,
            }
        })
        .collect();
    Ok(ScalerParams {
        columns,
        fitted_on: fitted_on.to_string(),
    })
}

pub fn transform(rows: &[Vec<f64>], params: &ScalerParams) -> Result<Vec<Vec<f64>>> {
    rows.iter().map(|r| transform_row(r, params)).collect()
}

pub fn transform_row(row: &[f64], params: &ScalerParams) -> Result<Vec<f64>> {
    if row.len() != params.columns.len() {
        return Err(Error::DimensionMismatch {
            expected: params.columns.len(),
            got: row.len(),
        });
    }
    Ok(row
        .iter()
        .zip(&params.columns)
        .map(|(&x, c)| c.apply(x))
        .collect())
}

impl ScalerParams {
    /// `feature_index,p_low,p_high,min,max`
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("feature_index,p_low,p_high,min,max\n");
        for (i, c) in self.columns.iter().enumerate() {
            out.push_str(&format!("{i},{},{},{},{}\n", c.p_low, c.p_high, c.min, c.max));
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path)?;
        let header = reader.headers()?.clone();
        if header.iter().ne(["feature_index", "p_low", "p_high", "min", "max"]) {
            return Err(Error::format(path, "unexpected scaler header"));
        }
        let mut columns = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let num = |j: usize| -> Result<f64> {
                rec.get(j)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::format(path, format!("bad number in row {}", i + 1)))
            };
            if num(0)? as usize != i {
                return Err(Error::format(path, "feature indices out of order"));
            }
            columns.push(ColumnScale {
                p_low: num(1)?,
                p_high: num(2)?,
                min: num(3)?,
                max: num(4)?,
            });
        }
        Ok(Self {
            columns,
            fitted_on: "train".into(),
        })
    }
}
