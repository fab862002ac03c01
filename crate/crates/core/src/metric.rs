//! Diagonal positive definite metrics.

use ndarray::{Array1, ArrayView1, Zip};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    diag: Array1<f64>,
    min: f64,
    max: f64,
}

impl Metric {
    pub fn new(diag: Array1<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidArgument("metric must be non-empty".into()));
        }
        if let Some(bad) = diag.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "metric weights must be finite and positive, found {bad}"
            )));
        }
        let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
        let max = diag.iter().copied().fold(0.0, f64::max);
        Ok(Metric { diag, min, max })
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    /// `c * I`; panics unless `c > 0`.
    pub fn scaled_identity(n: usize, c: f64) -> Self {
        assert!(n > 0 && c > 0.0 && c.is_finite());
        Metric {
            diag: Array1::from_elem(n, c),
            min: c,
            max: c,
        }
    }

    /// Block-constant weights: `(weight, len)` pairs laid out in order.
    pub fn blocks(parts: &[(f64, usize)]) -> Result<Self> {
        let mut diag = Vec::new();
        for &(w, len) in parts {
            diag.extend(std::iter::repeat_n(w, len));
        }
        Self::new(Array1::from(diag))
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &Array1<f64> {
        &self.diag
    }

    /// Smallest weight (lambda).
    pub fn min_eig(&self) -> f64 {
        self.min
    }

    /// Largest weight (Lambda).
    pub fn max_eig(&self) -> f64 {
        self.max
    }

    pub fn norm(&self, v: ArrayView1<f64>) -> Result<f64> {
        check_dim("metric norm", self.dim(), v.len())?;
        Ok(self.norm_sq_unchecked(v).sqrt())
    }

    pub fn inner(&self, u: ArrayView1<f64>, v: ArrayView1<f64>) -> Result<f64> {
        check_dim("metric inner", self.dim(), u.len())?;
        check_dim("metric inner", self.dim(), v.len())?;
        Ok(Zip::from(&self.diag)
            .and(u)
            .and(v)
            .fold(0.0, |acc, d, a, b| acc + d * a * b))
    }

    pub(crate) fn norm_sq_unchecked(&self, v: ArrayView1<f64>) -> f64 {
        Zip::from(&self.diag)
            .and(v)
            .fold(0.0, |acc, d, a| acc + d * a * a)
    }

    /// `D v`.
    pub fn apply(&self, v: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_dim("metric apply", self.dim(), v.len())?;
        Ok(&self.diag * &v)
    }

    /// `D^{-1} v`.
    pub fn apply_inverse(&self, v: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_dim("metric inverse", self.dim(), v.len())?;
        Ok(&v / &self.diag)
    }
}
