//! Class-transition statistics with symmetric Dirichlet smoothing.
//!
//! Used for both layers: element-to-element transitions in the lower sampler
//! and unit-to-unit transitions in the upper one. Counts are kept exactly so
//! a sequence's contribution can be removed before it is resampled.

use serde::{Deserialize, Serialize};

/// Raw transition and initial-state counts over `n` classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionCounts {
    n: usize,
    /// counts[prev * n + next]
    counts: Vec<u64>,
    initial: Vec<u64>,
}

impl TransitionCounts {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        TransitionCounts { n, counts: vec![0; n * n], initial: vec![0; n] }
    }

    pub fn n_classes(&self) -> usize {
        self.n
    }

    /// Adds one path's initial class and adjacent transitions.
    pub fn add_path(&mut self, classes: &[u16]) {
        if classes.is_empty() {
            return;
        }
        self.initial[classes[0] as usize] += 1;
        for w in classes.windows(2) {
            self.counts[w[0] as usize * self.n + w[1] as usize] += 1;
        }
    }

    /// Removes a previously added path. Underflow means the path was never
    /// added; counts are exact bookkeeping, so that is a bug in the caller.
    pub fn remove_path(&mut self, classes: &[u16]) {
        if classes.is_empty() {
            return;
        }
        self.initial[classes[0] as usize] = self.initial[classes[0] as usize]
            .checked_sub(1)
            .expect("remove_path: initial count underflow");
        for w in classes.windows(2) {
            let slot = &mut self.counts[w[0] as usize * self.n + w[1] as usize];
            *slot = slot.checked_sub(1).expect("remove_path: transition count underflow");
        }
    }

    pub fn total_transitions(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn total_initial(&self) -> u64 {
        self.initial.iter().sum()
    }

    /// Smoothed log probabilities: each row (and the initial distribution)
    /// gets `smoothing` pseudo-count per class and normalizes to 1.
    pub fn log_probs(&self, smoothing: f64) -> LogTransitions {
        let n = self.n;
        let mut log_pi = vec![0.0; n * n];
        for prev in 0..n {
            let row = &self.counts[prev * n..(prev + 1) * n];
            let total: u64 = row.iter().sum();
            let denom = (total as f64 + smoothing * n as f64).ln();
            for next in 0..n {
                log_pi[prev * n + next] = (row[next] as f64 + smoothing).ln() - denom;
            }
        }
        let init_total: u64 = self.initial.iter().sum();
        let denom = (init_total as f64 + smoothing * n as f64).ln();
        let log_initial =
            self.initial.iter().map(|&c| (c as f64 + smoothing).ln() - denom).collect();
        LogTransitions { n, log_pi, log_initial }
    }
}

/// Smoothed, normalized transition table in the log domain.
#[derive(Debug, Clone)]
pub struct LogTransitions {
    n: usize,
    log_pi: Vec<f64>,
    log_initial: Vec<f64>,
}

impl LogTransitions {
    pub fn n_classes(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn log_pi(&self, prev: usize, next: usize) -> f64 {
        self.log_pi[prev * self.n + next]
    }

    #[inline]
    pub fn row(&self, prev: usize) -> &[f64] {
        &self.log_pi[prev * self.n..(prev + 1) * self.n]
    }

    #[inline]
    pub fn log_initial(&self, c: usize) -> f64 {
        self.log_initial[c]
    }

    pub fn initial(&self) -> &[f64] {
        &self.log_initial
    }

    /// Uniform table, handy for tests and decode-only runs.
    pub fn uniform(n: usize) -> Self {
        let v = -(n as f64).ln();
        LogTransitions { n, log_pi: vec![v; n * n], log_initial: vec![v; n] }
    }
}
