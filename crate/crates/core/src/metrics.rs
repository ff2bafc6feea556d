//! Agreement metrics between reference labels and estimates.
//!
//! All moments are population moments (divide by `N`). With that convention
//! the concordance correlation coefficient can be written with the covariance
//! in the numerator, which stays well defined when one series is constant.

use crate::error::{Error, Result};

/// Reference values `y` paired with estimates `y_hat`.
#[derive(Debug, Clone, Copy)]
pub struct PairedSeries<'a> {
    y: &'a [f64],
    y_hat: &'a [f64],
}

impl<'a> PairedSeries<'a> {
    pub fn new(y: &'a [f64], y_hat: &'a [f64]) -> Result<Self> {
        if y.len() != y_hat.len() {
            return Err(Error::DimensionMismatch {
                expected: y.len(),
                got: y_hat.len(),
            });
        }
        if y.len() < 2 {
            return Err(Error::Empty("paired series needs at least 2 samples"));
        }
        if y.iter().chain(y_hat).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("paired series"));
        }
        Ok(Self { y, y_hat })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn truth(&self) -> &'a [f64] {
        self.y
    }

    pub fn estimate(&self) -> &'a [f64] {
        self.y_hat
    }

    fn moments(&self) -> Moments {
        let n = self.len() as f64;
        let m = self.y.iter().sum::<f64>() / n;
        let m_hat = self.y_hat.iter().sum::<f64>() / n;
        let mut var = 0.0;
        let mut var_hat = 0.0;
        let mut cov = 0.0;
        for (&a, &b) in self.y.iter().zip(self.y_hat) {
            let da = a - m;
            let db = b - m_hat;
            var += da * da;
            var_hat += db * db;
            cov += da * db;
        }
        Moments {
            m,
            m_hat,
            var: var / n,
            var_hat: var_hat / n,
            cov: cov / n,
        }
    }
}

struct Moments {
    m: f64,
    m_hat: f64,
    var: f64,
    var_hat: f64,
    cov: f64,
}

/// Concordance correlation coefficient,
/// `2 cov(y, y_hat) / (var(y) + var(y_hat) + (mean(y) - mean(y_hat))^2)`.
///
/// A zero denominator only happens when both series are constant with the
/// same mean, i.e. identical; that case scores 1.
pub fn ccc(s: &PairedSeries<'_>) -> f64 {
    let mo = s.moments();
    let diff = mo.m - mo.m_hat;
    let denom = mo.var + mo.var_hat + diff * diff;
    if denom == 0.0 {
        return if s.y == s.y_hat { 1.0 } else { 0.0 };
    }
    (2.0 * mo.cov / denom).clamp(-1.0, 1.0)
}

/// Pearson correlation together with a flag that is set when either series
/// has zero variance (the value is then reported as 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pearson {
    pub value: f64,
    pub degenerate: bool,
}

pub fn pearson(s: &PairedSeries<'_>) -> Pearson {
    let mo = s.moments();
    if mo.var == 0.0 || mo.var_hat == 0.0 {
        return Pearson {
            value: 0.0,
            degenerate: true,
        };
    }
    Pearson {
        value: (mo.cov / (mo.var.sqrt() * mo.var_hat.sqrt())).clamp(-1.0, 1.0),
        degenerate: false,
    }
}

pub fn mse(s: &PairedSeries<'_>) -> f64 {
    let n = s.len() as f64;
    s.y.iter()
        .zip(s.y_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n
}

/// One row of an evaluation report.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub ccc: f64,
    pub mse: f64,
    pub pearson: f64,
    pub n: usize,
}

pub fn evaluate(y: &[f64], y_hat: &[f64]) -> Result<Evaluation> {
    let s = PairedSeries::new(y, y_hat)?;
    Ok(Evaluation {
        ccc: ccc(&s),
        mse: mse(&s),
        pearson: pearson(&s).value,
        n: s.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series<'a>(y: &'a [f64], y_hat: &'a [f64]) -> PairedSeries<'a> {
        PairedSeries::new(y, y_hat).unwrap()
    }

    #[test]
    fn ccc_examples() {
        let y = [1.0, 2.0, 3.0];
        assert!((ccc(&series(&y, &y)) - 1.0).abs() < 1e-15);

        let y = [-1.0, 0.0, 1.0];
        let y_hat = [1.0, 0.0, -1.0];
        assert!((ccc(&series(&y, &y_hat)) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn ccc_constant_series() {
        let c = [2.0, 2.0, 2.0];
        assert_eq!(ccc(&series(&c, &c)), 1.0);
        let y = [1.0, 2.0, 3.0];
        assert_eq!(ccc(&series(&y, &c)), 0.0);
    }

    #[test]
    fn pearson_examples() {
        let y = [0.3, 1.2, -0.7, 4.0];
        assert!((pearson(&series(&y, &y)).value - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = y.iter().map(|v| 7.0 - v).collect();
        assert!((pearson(&series(&y, &neg)).value + 1.0).abs() < 1e-12);
        let flat = [0.5; 4];
        let p = pearson(&series(&y, &flat));
        assert_eq!(p.value, 0.0);
        assert!(p.degenerate);
    }

    #[test]
    fn mse_examples() {
        let y = [0.1, 0.2];
        assert_eq!(mse(&series(&y, &y)), 0.0);
        assert_eq!(mse(&series(&[0.0, 0.0], &[1.0, 1.0])), 1.0);
        assert_eq!(mse(&series(&[0.0, 2.0], &[1.0, 1.0])), 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            PairedSeries::new(&[1.0, 2.0], &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(PairedSeries::new(&[1.0], &[1.0]).is_err());
        assert!(PairedSeries::new(&[1.0, f64::NAN], &[1.0, 2.0]).is_err());
    }
}
