use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An observed sample: `n` points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    data: Vec<f64>,
    n: usize,
    d: usize,
    /// Seed that generated the sample, when it was drawn by this crate.
    pub seed: Option<u64>,
}

impl Sample {
    /// Builds a sample from row-major data. Requires `n >= 2` and finite entries.
    pub fn new(data: Vec<f64>, d: usize) -> Result<Self> {
        let s = Self::from_raw(data, d)?;
        if s.n < 2 {
            return Err(Error::SampleSize { got: s.n, need: 2 });
        }
        Ok(s)
    }

    /// Like [`Sample::new`] but admits a single row (used for train/test pieces and tiny fixtures).
    pub fn from_raw(data: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidSample("dimension must be at least 1".into()));
        }
        if !data.len().is_multiple_of(d) {
            return Err(Error::InvalidSample(format!(
                "{} values cannot be split into rows of length {d}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSample(format!(
                "non-finite entry at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        let n = data.len() / d;
        Ok(Self { data, n, d, seed: None })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::Dimension { expected: d, got: r.len() });
        }
        Self::new(rows.concat(), d)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Picks the given rows, in order.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self::from_raw(data, self.d)
    }

    /// Column means.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for r in self.rows() {
            for (a, b) in m.iter_mut().zip(r) {
                *a += b;
            }
        }
        m.iter_mut().for_each(|a| *a /= self.n as f64);
        m
    }

    /// Biased (1/n) sample covariance, row-major `d x d`.
    pub fn covariance(&self) -> Vec<f64> {
        let d = self.d;
        let m = self.mean();
        let mut c = vec![0.0; d * d];
        for r in self.rows() {
            for a in 0..d {
                let da = r[a] - m[a];
                for b in a..d {
                    c[a * d + b] += da * (r[b] - m[b]);
                }
            }
        }
        for a in 0..d {
            for b in a..d {
                c[a * d + b] /= self.n as f64;
                c[b * d + a] = c[a * d + b];
            }
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_tiny() {
        assert!(Sample::new(vec![1.0, f64::NAN, 2.0, 3.0], 2).is_err());
        assert!(matches!(
            Sample::new(vec![1.0, 2.0], 2),
            Err(Error::SampleSize { got: 1, need: 2 })
        ));
        assert!(Sample::new(vec![1.0, 2.0, 3.0], 2).is_err());
    }

    #[test]
    fn mean_and_covariance() {
        let s = Sample::from_rows(&[vec![0.0, 1.0], vec![2.0, 3.0]]).unwrap();
        assert_eq!(s.mean(), vec![1.0, 2.0]);
        assert_eq!(s.covariance(), vec![1.0, 1.0, 1.0, 1.0]);
    }
}
