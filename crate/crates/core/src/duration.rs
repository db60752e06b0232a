//! Segment-duration prior: a Poisson pmf clamped to `[1, max_len]` and
//! renormalized over that support.

use crate::error::{Error, Result};
use crate::math::{ln_factorial_table, logsumexp};

#[derive(Debug, Clone)]
pub struct DurationModel {
    mean: f64,
    max_len: usize,
    log_pmf: Vec<f64>,
}

impl DurationModel {
    pub fn new(mean: f64, max_len: usize) -> Result<Self> {
        if !(mean > 0.0) {
            return Err(Error::validation("duration_mean", "must be > 0"));
        }
        if max_len == 0 {
            return Err(Error::validation("max_len", "must be ≥ 1"));
        }
        let ln_fact = ln_factorial_table(max_len);
        let ln_mean = mean.ln();
        let mut log_pmf: Vec<f64> =
            (1..=max_len).map(|k| k as f64 * ln_mean - mean - ln_fact[k]).collect();
        let norm = logsumexp(&log_pmf);
        for v in &mut log_pmf {
            *v -= norm;
        }
        Ok(DurationModel { mean, max_len, log_pmf })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    /// Log pmf of duration `k`; `k` must lie in `[1, max_len]`.
    #[inline]
    pub fn log_pmf(&self, k: usize) -> f64 {
        assert!(k >= 1 && k <= self.max_len, "duration {k} outside [1, {}]", self.max_len);
        self.log_pmf[k - 1]
    }
}
