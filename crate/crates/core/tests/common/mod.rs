//! Shared brute-force oracles: path enumeration over tiny instances, with
//! every probability recomputed from first principles in linear domain so the
//! checks stay independent of the library's lattice code.

#![allow(dead_code)]

use motionseg::emission::EmissionCounts;

/// All compositions of `total` into parts of size 1..=k_max, in a stable
/// order.
pub fn compositions(total: usize, k_max: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut stack = Vec::new();
    fn recurse(remaining: usize, k_max: usize, stack: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if remaining == 0 {
            out.push(stack.clone());
            return;
        }
        for k in 1..=k_max.min(remaining) {
            stack.push(k);
            recurse(remaining - k, k_max, stack, out);
            stack.pop();
        }
    }
    recurse(total, k_max, &mut stack, &mut out);
    out
}

/// All labelings of `m` slots over `n` classes (n^m of them).
pub fn labelings(m: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..m {
        let mut next = Vec::with_capacity(out.len() * n);
        for prefix in &out {
            for c in 0..n {
                let mut l = prefix.clone();
                l.push(c);
                next.push(l);
            }
        }
        out = next;
    }
    out
}

/// Poisson pmf renormalized over 1..=k_max, computed directly.
pub fn poisson_renormalized(mean: f64, k_max: usize) -> Vec<f64> {
    let mut pmf = Vec::with_capacity(k_max);
    let mut ln_fact = 0.0;
    for k in 1..=k_max {
        ln_fact += (k as f64).ln();
        pmf.push((k as f64 * mean.ln() - mean - ln_fact).exp());
    }
    let total: f64 = pmf.iter().sum();
    for p in &mut pmf {
        *p /= total;
    }
    pmf
}

/// Smoothed row-normalized probabilities from raw counts.
pub fn smooth_rows(counts: &[u64], n: usize, smoothing: f64) -> Vec<Vec<f64>> {
    counts
        .chunks(n)
        .map(|row| {
            let total: u64 = row.iter().sum();
            let denom = total as f64 + smoothing * n as f64;
            row.iter().map(|&c| (c as f64 + smoothing) / denom).collect()
        })
        .collect()
}

pub fn smooth_vec(counts: &[u64], smoothing: f64) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    let denom = total as f64 + smoothing * counts.len() as f64;
    counts.iter().map(|&c| (c as f64 + smoothing) / denom).collect()
}

/// One fully-specified tiny lower-layer instance in linear domain.
pub struct LowerInstance {
    pub t_len: usize,
    pub k_max: usize,
    pub n_classes: usize,
    /// linear-domain segment likelihood, indexed (start, len, class)
    pub seg_lik: Vec<f64>,
    pub duration: Vec<f64>,
    pub initial: Vec<f64>,
    /// pi[prev][next]
    pub pi: Vec<Vec<f64>>,
    /// prior[t][c]
    pub prior: Vec<Vec<f64>>,
}

impl LowerInstance {
    pub fn seg_lik(&self, start: usize, len: usize, class: usize) -> f64 {
        self.seg_lik[(start * self.k_max + (len - 1)) * self.n_classes + class]
    }

    /// Probability of one (composition, labeling) path, from the generative
    /// factors: segment likelihood × duration × PoE-normalized transitions.
    pub fn path_probability(&self, comp: &[usize], labels: &[usize]) -> f64 {
        let mut p = 1.0;
        let mut start = 0usize;
        for (i, (&len, &class)) in comp.iter().zip(labels).enumerate() {
            p *= self.seg_lik(start, len, class);
            p *= self.duration[len - 1];
            let prior_row = &self.prior[start];
            if i == 0 {
                let z: f64 =
                    (0..self.n_classes).map(|c| self.initial[c] * prior_row[c]).sum();
                p *= self.initial[class] * prior_row[class] / z;
            } else {
                let prev = labels[i - 1];
                let z: f64 =
                    (0..self.n_classes).map(|c| self.pi[prev][c] * prior_row[c]).sum();
                p *= self.pi[prev][class] * prior_row[class] / z;
            }
            start += len;
        }
        p
    }

    /// Every path with its probability, in a stable order.
    pub fn enumerate(&self) -> Vec<(Vec<usize>, Vec<usize>, f64)> {
        let mut out = Vec::new();
        for comp in compositions(self.t_len, self.k_max) {
            for labels in labelings(comp.len(), self.n_classes) {
                let p = self.path_probability(&comp, &labels);
                out.push((comp.clone(), labels, p));
            }
        }
        out
    }

    pub fn total_mass(&self) -> f64 {
        self.enumerate().into_iter().map(|(_, _, p)| p).sum()
    }
}

/// One tiny upper-layer instance; emissions are queried from the real count
/// store (the oracle checks the lattice, not the emission arithmetic, which
/// has its own closed-form tests).
pub struct UpperInstance<'a> {
    pub classes: Vec<u16>,
    pub k_max: usize,
    pub n_units: usize,
    pub emission: &'a EmissionCounts,
    pub duration: Vec<f64>,
    pub initial: Vec<f64>,
    pub pi: Vec<Vec<f64>>,
}

impl UpperInstance<'_> {
    pub fn path_probability(&self, comp: &[usize], labels: &[usize]) -> f64 {
        let mut p = 1.0;
        let mut start = 0usize;
        for (i, (&len, &b)) in comp.iter().zip(labels).enumerate() {
            let sub = &self.classes[start..start + len];
            p *= match self.emission.kind() {
                motionseg::emission::EmissionKind::WordSeg => self.emission.ws_emission(sub),
                motionseg::emission::EmissionKind::Unigram => self.emission.meu_emission(sub, b),
                motionseg::emission::EmissionKind::Bigram => self.emission.meb_emission(sub, b),
            };
            p *= self.duration[len - 1];
            p *= if i == 0 { self.initial[b] } else { self.pi[labels[i - 1]][b] };
            start += len;
        }
        p
    }

    pub fn enumerate(&self) -> Vec<(Vec<usize>, Vec<usize>, f64)> {
        let mut out = Vec::new();
        for comp in compositions(self.classes.len(), self.k_max) {
            for labels in labelings(comp.len(), self.n_units) {
                let p = self.path_probability(&comp, &labels);
                out.push((comp.clone(), labels, p));
            }
        }
        out
    }

    pub fn total_mass(&self) -> f64 {
        self.enumerate().into_iter().map(|(_, _, p)| p).sum()
    }
}

/// 3σ multinomial bound check: every path's empirical frequency within three
/// standard errors of its posterior probability.
pub fn within_multinomial_bounds(
    posterior: &[f64],
    hits: &[usize],
    draws: usize,
) -> Result<(), String> {
    for (i, (&p, &h)) in posterior.iter().zip(hits).enumerate() {
        let freq = h as f64 / draws as f64;
        let sigma = (p * (1.0 - p) / draws as f64).sqrt();
        // tiny-probability paths get a absolute floor so 0 observed hits pass
        let bound = (3.0 * sigma).max(1e-4);
        if (freq - p).abs() > bound {
            return Err(format!(
                "path {i}: posterior {p:.6}, frequency {freq:.6}, bound {bound:.6}"
            ));
        }
    }
    Ok(())
}
