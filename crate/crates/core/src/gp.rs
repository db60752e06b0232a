//! Per-class Gaussian-process regression over within-segment timesteps.
//!
//! Each motion-element class keeps the pool of (timestep, value) pairs from
//! every segment currently assigned to it, one pool per output dimension.
//! Within-segment timesteps restart at 0 for every segment, so a class models
//! the shape of an element independently of where it occurs in a series; note
//! that this makes the linear kernel term (`theta3·p·q`) act on the offset
//! into the segment, not on absolute time.
//!
//! Predictive densities use the textbook conditional, mean = kᵀC⁻¹x and
//! var = k(t̂,t̂) − kᵀC⁻¹k, with C carrying the observation-noise variance on
//! its diagonal. Dimensions are scored independently and a segment's log
//! likelihood is the sum of per-point predictive log densities.

use rand::seq::index::sample as index_sample;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng;
use crate::types::KernelParams;

/// Kernel function on a pair of timesteps.
#[inline]
pub fn kernel_eval(p: f64, q: f64, k: &KernelParams) -> f64 {
    let d = p - q;
    k.theta0 * (-0.5 * k.theta1 * d * d).exp() + k.theta2 + k.theta3 * p * q
}

/// Dense symmetric matrix in row-major storage.
#[derive(Debug, Clone)]
pub struct DenseMatrix {
    pub n: usize,
    pub values: Vec<f64>,
}

impl DenseMatrix {
    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.n + c]
    }
}

/// Covariance matrix over `ts`: entry (p, q) is `kernel(t_p, t_q)` plus the
/// noise variance on the diagonal.
pub fn covariance_matrix(ts: &[f64], k: &KernelParams) -> DenseMatrix {
    let n = ts.len();
    let mut values = vec![0.0; n * n];
    for p in 0..n {
        for q in 0..=p {
            let v = kernel_eval(ts[p], ts[q], k);
            values[p * n + q] = v;
            values[q * n + p] = v;
        }
        values[p * n + p] += k.noise_var;
    }
    DenseMatrix { n, values }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factorizes `a`; a non-positive pivot at row `i` means the leading
    /// principal minor of order `i + 1` is not positive definite.
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        let n = a.n;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = a.at(i, j);
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if sum <= 0.0 || !sum.is_finite() {
                        return Err(Error::Factorization { minor: i + 1 });
                    }
                    l[i * n + i] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        Ok(Cholesky { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place via the two triangular systems.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        for i in 0..n {
            let mut sum = b[i];
            for k in 0..i {
                sum -= self.l[i * n + k] * b[k];
            }
            b[i] = sum / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut sum = b[i];
            for k in (i + 1)..n {
                sum -= self.l[k * n + i] * b[k];
            }
            b[i] = sum / self.l[i * n + i];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// One training segment: `len × dims` values, row-major.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SegmentData {
    pub len: usize,
    pub values: Vec<f64>,
}

impl SegmentData {
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let len = rows.len();
        let mut values = Vec::with_capacity(len * rows.first().map_or(0, |r| r.len()));
        for r in rows {
            values.extend_from_slice(r);
        }
        SegmentData { len, values }
    }

    #[inline]
    pub fn row(&self, t: usize, dims: usize) -> &[f64] {
        &self.values[t * dims..(t + 1) * dims]
    }
}

#[derive(Debug, Clone)]
struct GpCache {
    /// Retained training timesteps after cap subsampling.
    ts: Vec<f64>,
    chol: Cholesky,
    /// Per dimension: C⁻¹ x_d over the retained points.
    weights: Vec<Vec<f64>>,
}

/// Gaussian-process model for one motion-element class.
///
/// Training data is the multiset of segments assigned to the class; the
/// factorization over the (possibly subsampled) point pool is rebuilt lazily
/// after any add/remove.
#[derive(Debug, Clone)]
pub struct GpClassModel {
    kernel: KernelParams,
    dims: usize,
    cap: usize,
    var_floor: f64,
    segments: Vec<SegmentData>,
    rng: ChaCha8Rng,
    cache: Option<GpCache>,
}

impl GpClassModel {
    pub fn new(kernel: KernelParams, dims: usize, cap: usize, var_floor: f64, seed: u64) -> Self {
        GpClassModel {
            kernel,
            dims,
            cap,
            var_floor,
            segments: Vec::new(),
            rng: rng::stream(seed, &[]),
            cache: None,
        }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Total pooled training points per dimension (before cap subsampling).
    pub fn training_len(&self) -> usize {
        self.segments.iter().map(|s| s.len).sum()
    }

    pub fn segments(&self) -> &[SegmentData] {
        &self.segments
    }

    /// Points actually retained by the current factorization.
    pub fn retained_len(&mut self) -> usize {
        self.ensure_cache();
        self.cache.as_ref().map_or(0, |c| c.ts.len())
    }

    pub fn add_segment(&mut self, seg: SegmentData) {
        debug_assert_eq!(seg.values.len(), seg.len * self.dims);
        self.segments.push(seg);
        self.cache = None;
    }

    /// Removes a previously added segment; removing data that was never added
    /// is a contract violation.
    pub fn remove_segment(&mut self, seg: &SegmentData) {
        let pos = self
            .segments
            .iter()
            .position(|s| s == seg)
            .expect("remove_segment: segment was never added to this class");
        self.segments.swap_remove(pos);
        self.cache = None;
    }

    /// Rebuilds the factorization if any segment changed since the last call.
    pub fn ensure_cache(&mut self) {
        if self.cache.is_some() || self.segments.is_empty() {
            return;
        }
        let total = self.training_len();
        let keep: Vec<usize> = if total > self.cap {
            let mut idx = index_sample(&mut self.rng, total, self.cap).into_vec();
            idx.sort_unstable();
            idx
        } else {
            (0..total).collect()
        };

        let mut ts = Vec::with_capacity(keep.len());
        let mut xs = vec![Vec::with_capacity(keep.len()); self.dims];
        let mut cursor = keep.iter().peekable();
        let mut flat = 0usize;
        'outer: for seg in &self.segments {
            for t in 0..seg.len {
                match cursor.peek() {
                    Some(&&want) if want == flat => {
                        cursor.next();
                        ts.push(t as f64);
                        let row = seg.row(t, self.dims);
                        for (d, x) in xs.iter_mut().enumerate() {
                            x.push(row[d]);
                        }
                    }
                    None => break 'outer,
                    _ => {}
                }
                flat += 1;
            }
        }

        let cov = covariance_matrix(&ts, &self.kernel);
        let chol = Cholesky::new(&cov)
            .expect("noise variance > 0 keeps the covariance positive definite");
        let weights = xs.iter().map(|x| chol.solve(x)).collect();
        self.cache = Some(GpCache { ts, chol, weights });
    }

    /// Predictive mean and variance at within-segment timestep `t_hat` for
    /// one output dimension. An empty class falls back to the prior.
    pub fn predict(&mut self, t_hat: f64, dim: usize) -> (f64, f64) {
        self.ensure_cache();
        let prior_var = kernel_eval(t_hat, t_hat, &self.kernel);
        let Some(cache) = &self.cache else {
            return (0.0, prior_var.max(self.var_floor));
        };
        let k: Vec<f64> = cache.ts.iter().map(|&t| kernel_eval(t, t_hat, &self.kernel)).collect();
        let mean = dot(&k, &cache.weights[dim]);
        let solved = cache.chol.solve(&k);
        let var = prior_var - dot(&k, &solved);
        (mean, var.max(self.var_floor))
    }

    /// Log likelihood of a whole segment under the current model: the sum of
    /// per-point predictive log densities over every dimension.
    pub fn segment_loglik(&mut self, seg: &SegmentData) -> f64 {
        let table = self.prediction_table(seg.len);
        let mut total = 0.0;
        for t in 0..seg.len {
            total += table.point_loglik(t, seg.row(t, self.dims));
        }
        total
    }

    /// Precomputes predictive means and variances for within-segment
    /// timesteps `0..max_len`; the forward pass scores candidate segments
    /// against this table.
    pub fn prediction_table(&mut self, max_len: usize) -> PredictionTable {
        self.ensure_cache();
        let dims = self.dims;
        let mut mean = vec![0.0; max_len * dims];
        let mut var = vec![0.0; max_len];
        match &self.cache {
            None => {
                for (i, v) in var.iter_mut().enumerate() {
                    *v = kernel_eval(i as f64, i as f64, &self.kernel).max(self.var_floor);
                }
            }
            Some(cache) => {
                let mut k = vec![0.0; cache.ts.len()];
                for i in 0..max_len {
                    let t_hat = i as f64;
                    for (j, &t) in cache.ts.iter().enumerate() {
                        k[j] = kernel_eval(t, t_hat, &self.kernel);
                    }
                    for d in 0..dims {
                        mean[i * dims + d] = dot(&k, &cache.weights[d]);
                    }
                    let solved = cache.chol.solve(&k);
                    let prior = kernel_eval(t_hat, t_hat, &self.kernel);
                    var[i] = (prior - dot(&k, &solved)).max(self.var_floor);
                }
            }
        }
        PredictionTable::new(dims, mean, var)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Frozen predictive distributions for one class, indexed by within-segment
/// timestep. Snapshots are immutable and safe to score from many threads.
#[derive(Debug, Clone)]
pub struct PredictionTable {
    dims: usize,
    /// mean[i * dims + d]
    mean: Vec<f64>,
    /// Per-timestep constant: dims · (−½ ln(2π · var_i))
    log_norm: Vec<f64>,
    /// Per-timestep 1 / (2 var_i)
    inv_two_var: Vec<f64>,
    var: Vec<f64>,
}

impl PredictionTable {
    fn new(dims: usize, mean: Vec<f64>, var: Vec<f64>) -> Self {
        let log_norm = var
            .iter()
            .map(|&v| dims as f64 * (-0.5 * (crate::math::LN_2PI + v.ln())))
            .collect();
        let inv_two_var = var.iter().map(|&v| 1.0 / (2.0 * v)).collect();
        PredictionTable { dims, mean, log_norm, inv_two_var, var }
    }

    pub fn max_len(&self) -> usize {
        self.var.len()
    }

    pub fn mean(&self, i: usize, dim: usize) -> f64 {
        self.mean[i * self.dims + dim]
    }

    pub fn var(&self, i: usize) -> f64 {
        self.var[i]
    }

    /// Joint log density of one D-dimensional sample at within-segment
    /// timestep `i` (dimensions share the variance since the covariance
    /// depends only on timesteps).
    #[inline]
    pub fn point_loglik(&self, i: usize, x: &[f64]) -> f64 {
        let mean = &self.mean[i * self.dims..(i + 1) * self.dims];
        let mut sq = 0.0;
        for d in 0..self.dims {
            let diff = x[d] - mean[d];
            sq += diff * diff;
        }
        self.log_norm[i] - sq * self.inv_two_var[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::LN_2PI;

    fn params() -> KernelParams {
        KernelParams::default()
    }

    fn model(dims: usize) -> GpClassModel {
        GpClassModel::new(params(), dims, 200, 1e-8, 99)
    }

    #[test]
    fn kernel_paper_values() {
        let k = params();
        assert_eq!(kernel_eval(0.0, 0.0, &k), 1.0);
        assert_eq!(kernel_eval(1.0, 1.0, &k), 17.0);
        assert!((kernel_eval(0.0, 3.0, &k) - (-4.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn kernel_symmetry() {
        let k = params();
        for &(p, q) in &[(0.0, 5.0), (2.0, 3.0), (7.0, 1.0), (4.5, 4.5)] {
            assert_eq!(kernel_eval(p, q, &k), kernel_eval(q, p, &k));
        }
    }

    #[test]
    fn covariance_single_point() {
        let c = covariance_matrix(&[0.0], &params());
        assert!((c.at(0, 0) - 1.1).abs() < 1e-15);
    }

    #[test]
    fn covariance_symmetric_and_noise_only_on_diagonal() {
        let ts: Vec<f64> = (0..6).map(|t| t as f64).collect();
        let k = params();
        let c = covariance_matrix(&ts, &k);
        for p in 0..6 {
            for q in 0..6 {
                assert_eq!(c.at(p, q), c.at(q, p));
                if p != q {
                    assert_eq!(c.at(p, q), kernel_eval(ts[p], ts[q], &k));
                }
            }
        }
        assert!((c.at(2, 2) - (kernel_eval(2.0, 2.0, &k) + k.noise_var)).abs() < 1e-15);
    }

    #[test]
    fn cholesky_reports_offending_minor() {
        // Duplicate timesteps with zero noise make the matrix singular at the
        // second pivot. noise_var = 0 is rejected by validation but the field
        // is reachable for direct construction.
        let k = KernelParams { noise_var: 0.0, ..params() };
        let c = covariance_matrix(&[1.0, 1.0], &k);
        match Cholesky::new(&c) {
            Err(Error::Factorization { minor }) => assert_eq!(minor, 2),
            other => panic!("expected factorization error, got {other:?}"),
        }
    }

    #[test]
    fn cholesky_factorizes_distinct_timesteps() {
        let ts: Vec<f64> = (0..40).map(|t| t as f64).collect();
        let c = covariance_matrix(&ts, &params());
        assert!(Cholesky::new(&c).is_ok());
    }

    #[test]
    fn empty_model_predicts_prior() {
        let mut m = model(1);
        let (mean, var) = m.predict(0.0, 0);
        assert_eq!(mean, 0.0);
        assert!((var - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_point_closed_form() {
        // One pair (t=0, x=2): mean at 0 is k(0,0)·x / (k(0,0)+noise) = 2/1.1.
        let mut m = model(1);
        m.add_segment(SegmentData { len: 1, values: vec![2.0] });
        let (mean, var) = m.predict(0.0, 0);
        assert!((mean - 2.0 / 1.1).abs() < 1e-12, "mean = {mean}");
        let expect_var = 1.0 - 1.0 / 1.1;
        assert!((var - expect_var).abs() < 1e-12, "var = {var}");
    }

    #[test]
    fn posterior_variance_contracts_at_training_input() {
        let mut m = model(1);
        m.add_segment(SegmentData { len: 4, values: vec![0.5, 0.7, 0.2, -0.1] });
        let prior = kernel_eval(2.0, 2.0, &params());
        let (_, var) = m.predict(2.0, 0);
        assert!(var < prior);
    }

    #[test]
    fn segment_loglik_sums_dimensions() {
        // Two independent dimensions score the sum of the per-dim scores.
        let mut m2 = model(2);
        let seg2 = SegmentData { len: 3, values: vec![0.1, 1.0, 0.2, 0.9, 0.3, 1.1] };
        m2.add_segment(seg2.clone());
        let total = m2.segment_loglik(&seg2);

        let mut a = model(1);
        a.add_segment(SegmentData { len: 3, values: vec![0.1, 0.2, 0.3] });
        let mut b = model(1);
        b.add_segment(SegmentData { len: 3, values: vec![1.0, 0.9, 1.1] });
        let ell_a = a.segment_loglik(&SegmentData { len: 3, values: vec![0.1, 0.2, 0.3] });
        let ell_b = b.segment_loglik(&SegmentData { len: 3, values: vec![1.0, 0.9, 1.1] });
        assert!((total - (ell_a + ell_b)).abs() < 1e-9);
    }

    #[test]
    fn matching_segment_beats_sign_flip() {
        let train = SegmentData { len: 5, values: vec![0.0, 0.4, 0.9, 0.4, 0.0] };
        let flipped = SegmentData { len: 5, values: vec![0.0, -0.4, -0.9, -0.4, 0.0] };
        let mut m = model(1);
        m.add_segment(train.clone());
        assert!(m.segment_loglik(&train) > m.segment_loglik(&flipped));
    }

    #[test]
    fn empty_model_standard_normal_point() {
        let mut m = model(1);
        let ell = m.segment_loglik(&SegmentData { len: 1, values: vec![0.0] });
        assert!((ell + 0.5 * LN_2PI).abs() < 1e-12);
    }

    #[test]
    fn add_remove_round_trip_restores_scores() {
        let mut m = model(1);
        let base = SegmentData { len: 4, values: vec![0.1, 0.5, 0.9, 1.2] };
        m.add_segment(base.clone());
        let probe = SegmentData { len: 3, values: vec![0.2, 0.6, 1.0] };
        let before = m.segment_loglik(&probe);
        let extra = SegmentData { len: 2, values: vec![-1.0, -2.0] };
        m.add_segment(extra.clone());
        m.remove_segment(&extra);
        let after = m.segment_loglik(&probe);
        assert_eq!(before.to_bits(), after.to_bits());
    }

    #[test]
    #[should_panic(expected = "never added")]
    fn removing_absent_segment_panics() {
        let mut m = model(1);
        m.add_segment(SegmentData { len: 1, values: vec![1.0] });
        m.remove_segment(&SegmentData { len: 1, values: vec![2.0] });
    }

    #[test]
    fn training_set_bookkeeping() {
        let mut m = model(2);
        m.add_segment(SegmentData { len: 5, values: vec![0.0; 10] });
        assert_eq!(m.training_len(), 5);
        assert_eq!(m.retained_len(), 5);
    }

    #[test]
    fn cap_subsampling_retains_cap_points() {
        let mut m = GpClassModel::new(params(), 1, 100, 1e-8, 3);
        for i in 0..30 {
            let values: Vec<f64> = (0..10).map(|t| (i * t) as f64 * 0.01).collect();
            m.add_segment(SegmentData { len: 10, values });
        }
        assert_eq!(m.training_len(), 300);
        assert_eq!(m.retained_len(), 100);
    }

    #[test]
    fn order_of_additions_does_not_change_scores() {
        let s1 = SegmentData { len: 3, values: vec![0.1, 0.2, 0.3] };
        let s2 = SegmentData { len: 4, values: vec![1.0, 0.8, 0.6, 0.4] };
        let probe = SegmentData { len: 2, values: vec![0.5, 0.5] };

        let mut a = model(1);
        a.add_segment(s1.clone());
        a.add_segment(s2.clone());
        let mut b = model(1);
        b.add_segment(s2);
        b.add_segment(s1);
        let la = a.segment_loglik(&probe);
        let lb = b.segment_loglik(&probe);
        assert!((la - lb).abs() < 1e-9, "{la} vs {lb}");
    }

    #[test]
    fn prediction_table_matches_predict() {
        let mut m = model(2);
        m.add_segment(SegmentData { len: 6, values: (0..12).map(|v| v as f64 * 0.1).collect() });
        let table = m.prediction_table(8);
        for i in 0..8 {
            for d in 0..2 {
                let (mean, var) = m.predict(i as f64, d);
                assert!((table.mean(i, d) - mean).abs() < 1e-12);
                assert!((table.var(i) - var).abs() < 1e-12);
            }
        }
    }
}
