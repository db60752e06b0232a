//! Lower-layer sampler: semi-Markov forward filtering over (timestep,
//! duration, class) with GP segment likelihoods, then backward sampling of an
//! element segmentation.
//!
//! The forward score of a segment of length `k` ending at `t` with class `c`
//! multiplies the segment likelihood, the duration prior and an incoming
//! transition factor. The transition conditions on both the previous element
//! class and the unit context mapped onto the segment's start timestep, and
//! the two conditionals are combined as a renormalized product of experts:
//!
//! ```text
//! T(c | c', t) ∝ P(c | c') · prior_t(c)        (normalized over c)
//! ```
//!
//! With a uniform prior this reduces cell-for-cell to the plain transition
//! table, which is exactly the lower-only baseline. All scores stay in the
//! log domain; mass accumulates with log-sum-exp.

use rand::Rng;

use crate::duration::DurationModel;
use crate::emission::SequencePrior;
use crate::error::{Error, Result};
use crate::gp::{GpClassModel, PredictionTable, SegmentData};
use crate::math::{logsumexp, sample_log_weights};
use crate::transition::{LogTransitions, TransitionCounts};
use crate::types::{ElementSegment, ElementSegmentation, Hyperparams, TimeSeries};

/// Log likelihood of candidate segments `[start, start + len)` per class.
pub trait SegmentScorer {
    fn series_len(&self) -> usize;
    fn max_len(&self) -> usize;
    fn n_classes(&self) -> usize;
    fn segment_log_score(&self, start: usize, len: usize, class: usize) -> f64;
}

/// GP-backed scorer: materializes every candidate segment score for one
/// series with an incremental sweep, so each (t, k, c) cell costs one
/// point-density evaluation.
pub struct GpScorer {
    t_len: usize,
    k_max: usize,
    n_classes: usize,
    scores: Vec<f64>,
}

impl GpScorer {
    pub fn new(series: &TimeSeries, tables: &[PredictionTable], k_max: usize) -> Self {
        let t_len = series.len();
        let n_classes = tables.len();
        let mut scores = vec![f64::NEG_INFINITY; t_len * k_max * n_classes];
        for t in 1..=t_len {
            let x = series.sample(t - 1);
            let k_hi = k_max.min(t);
            for (c, table) in tables.iter().enumerate() {
                for k in 1..=k_hi {
                    // segment [t-k, t) = segment [t-k, t-1) plus the point at
                    // t-1, which sits at within-segment offset k-1
                    let prev = if k == 1 {
                        0.0
                    } else {
                        scores[((t - 2) * k_max + (k - 2)) * n_classes + c]
                    };
                    scores[((t - 1) * k_max + (k - 1)) * n_classes + c] =
                        prev + table.point_loglik(k - 1, x);
                }
            }
        }
        GpScorer { t_len, k_max, n_classes, scores }
    }
}

impl SegmentScorer for GpScorer {
    fn series_len(&self) -> usize {
        self.t_len
    }

    fn max_len(&self) -> usize {
        self.k_max
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    #[inline]
    fn segment_log_score(&self, start: usize, len: usize, class: usize) -> f64 {
        let end = start + len;
        self.scores[((end - 1) * self.k_max + (len - 1)) * self.n_classes + class]
    }
}

/// Fixed segment-score table; lets tests and oracles drive the lattice with
/// arbitrary (including infeasible) likelihoods.
#[derive(Debug, Clone)]
pub struct FrozenScorer {
    pub t_len: usize,
    pub k_max: usize,
    pub n_classes: usize,
    /// scores[((end - 1) * k_max + (len - 1)) * n_classes + class]
    pub scores: Vec<f64>,
}

impl FrozenScorer {
    pub fn from_fn(
        t_len: usize,
        k_max: usize,
        n_classes: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut scores = vec![f64::NEG_INFINITY; t_len * k_max * n_classes];
        for end in 1..=t_len {
            for len in 1..=k_max.min(end) {
                for c in 0..n_classes {
                    scores[((end - 1) * k_max + (len - 1)) * n_classes + c] =
                        f(end - len, len, c);
                }
            }
        }
        FrozenScorer { t_len, k_max, n_classes, scores }
    }
}

impl SegmentScorer for FrozenScorer {
    fn series_len(&self) -> usize {
        self.t_len
    }

    fn max_len(&self) -> usize {
        self.k_max
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    #[inline]
    fn segment_log_score(&self, start: usize, len: usize, class: usize) -> f64 {
        let end = start + len;
        self.scores[((end - 1) * self.k_max + (len - 1)) * self.n_classes + class]
    }
}

/// Log-domain forward scores: `alpha(t, k, c)` is the mass of "a segment of
/// length k ends at t with class c". Cells with k > t stay at log-zero.
#[derive(Debug, Clone)]
pub struct ForwardLattice {
    t_len: usize,
    k_max: usize,
    n_classes: usize,
    alpha: Vec<f64>,
}

impl ForwardLattice {
    #[inline]
    fn idx(&self, t: usize, k: usize, c: usize) -> usize {
        ((t - 1) * self.k_max + (k - 1)) * self.n_classes + c
    }

    /// `t` and `k` are 1-based, matching the recursion.
    pub fn alpha(&self, t: usize, k: usize, c: usize) -> f64 {
        self.alpha[self.idx(t, k, c)]
    }

    pub fn series_len(&self) -> usize {
        self.t_len
    }

    pub fn max_len(&self) -> usize {
        self.k_max
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Total mass over segments ending at the final timestep.
    pub fn total_log_mass(&self) -> f64 {
        let t = self.t_len;
        let lo = self.idx(t, 1, 0);
        logsumexp(&self.alpha[lo..lo + self.k_max * self.n_classes])
    }
}

/// PoE-normalized incoming factor for segments starting at `a`:
/// `in_log[c] = logsumexp_{c'} (log T(c | c', a) + column_mass[c'])`.
fn poe_in_factor(
    trans: &LogTransitions,
    prior_row: &[f64],
    column_mass: &[f64],
    scratch: &mut [f64],
    out: &mut [f64],
) {
    let n = prior_row.len();
    for c_prev in 0..n {
        let row = trans.row(c_prev);
        for c in 0..n {
            scratch[c_prev * n + c] = row[c] + prior_row[c];
        }
        let z = logsumexp(&scratch[c_prev * n..(c_prev + 1) * n]);
        for c in 0..n {
            scratch[c_prev * n + c] += column_mass[c_prev] - z;
        }
    }
    for c in 0..n {
        let mut m = f64::NEG_INFINITY;
        for c_prev in 0..n {
            let v = scratch[c_prev * n + c];
            if v > m {
                m = v;
            }
        }
        if m == f64::NEG_INFINITY {
            out[c] = f64::NEG_INFINITY;
            continue;
        }
        let mut s = 0.0;
        for c_prev in 0..n {
            s += (scratch[c_prev * n + c] - m).exp();
        }
        out[c] = m + s.ln();
    }
}

/// PoE-normalized start factor: initial distribution times the prior at the
/// first timestep, renormalized over classes.
fn poe_initial(trans: &LogTransitions, prior_row: &[f64], out: &mut [f64]) {
    let n = prior_row.len();
    for c in 0..n {
        out[c] = trans.log_initial(c) + prior_row[c];
    }
    let z = logsumexp(out);
    for v in out.iter_mut() {
        *v -= z;
    }
}

/// Fills the forward lattice for one series.
pub fn forward_filter(
    scorer: &dyn SegmentScorer,
    dur: &DurationModel,
    trans: &LogTransitions,
    prior: &SequencePrior,
) -> Result<ForwardLattice> {
    let t_len = scorer.series_len();
    let k_max = scorer.max_len();
    let n = scorer.n_classes();
    assert_eq!(dur.max_len(), k_max, "duration support must match the scorer's max length");
    assert_eq!(trans.n_classes(), n);
    assert_eq!(prior.len(), t_len, "prior rows must cover the series");

    let mut lattice =
        ForwardLattice { t_len, k_max, n_classes: n, alpha: vec![f64::NEG_INFINITY; t_len * k_max * n] };

    // in_log[a * n + c]: incoming factor for segments starting at a ≥ 1
    let mut in_log = vec![f64::NEG_INFINITY; t_len * n];
    let mut initial = vec![0.0; n];
    poe_initial(trans, prior.row(0), &mut initial);
    let mut column_mass = vec![f64::NEG_INFINITY; n];
    let mut scratch = vec![0.0; n * n];
    let mut last_reachable = 0usize;

    for t in 1..=t_len {
        if t - last_reachable > k_max {
            return Err(Error::InfeasibleLattice { timestep: t });
        }
        let k_hi = k_max.min(t);
        for k in 1..=k_hi {
            let start = t - k;
            let dur_term = dur.log_pmf(k);
            let incoming: &[f64] =
                if start == 0 { &initial } else { &in_log[(start) * n..(start + 1) * n] };
            for c in 0..n {
                let gp = scorer.segment_log_score(start, k, c);
                let at = lattice.idx(t, k, c);
                lattice.alpha[at] = gp + dur_term + incoming[c];
            }
        }
        // column mass and the incoming factor for segments starting at t
        let mut any = false;
        for c in 0..n {
            let mut m = f64::NEG_INFINITY;
            for k in 1..=k_hi {
                let v = lattice.alpha[lattice.idx(t, k, c)];
                if v > m {
                    m = v;
                }
            }
            column_mass[c] = if m == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                let mut s = 0.0;
                for k in 1..=k_hi {
                    s += (lattice.alpha[lattice.idx(t, k, c)] - m).exp();
                }
                m + s.ln()
            };
            any |= column_mass[c] > f64::NEG_INFINITY;
        }
        if any {
            last_reachable = t;
        }
        if t < t_len {
            poe_in_factor(
                trans,
                prior.row(t),
                &column_mass,
                &mut scratch,
                &mut in_log[t * n..(t + 1) * n],
            );
        }
    }

    if lattice.total_log_mass() == f64::NEG_INFINITY {
        return Err(Error::InfeasibleLattice { timestep: t_len });
    }
    Ok(lattice)
}

/// Samples one segmentation from the filled lattice, walking backward from
/// the final timestep. The final step draws from the lattice alone; earlier
/// steps weight each candidate by the PoE transition into the already-sampled
/// successor.
pub fn backward_sample<R: Rng>(
    lattice: &ForwardLattice,
    trans: &LogTransitions,
    prior: &SequencePrior,
    series_id: &str,
    rng: &mut R,
) -> Result<ElementSegmentation> {
    let n = lattice.n_classes;
    let k_max = lattice.k_max;
    let mut segments: Vec<ElementSegment> = Vec::new();
    let mut t = lattice.t_len;
    let mut next_class: Option<usize> = None;
    let mut weights = vec![f64::NEG_INFINITY; k_max * n];

    while t > 0 {
        let k_hi = k_max.min(t);
        for w in weights.iter_mut() {
            *w = f64::NEG_INFINITY;
        }
        match next_class {
            None => {
                for k in 1..=k_hi {
                    for c in 0..n {
                        weights[(k - 1) * n + c] = lattice.alpha(t, k, c);
                    }
                }
            }
            Some(c_next) => {
                // log T(c_next | c, t) = log π(c, c_next) + prior_t(c_next) − Z(c, t);
                // the prior term is constant in c and drops out.
                let prior_row = prior.row(t);
                for c in 0..n {
                    let row = trans.row(c);
                    let mut z = f64::NEG_INFINITY;
                    for c2 in 0..n {
                        z = crate::math::logsumexp2(z, row[c2] + prior_row[c2]);
                    }
                    let link = row[c_next] - z;
                    for k in 1..=k_hi {
                        weights[(k - 1) * n + c] = lattice.alpha(t, k, c) + link;
                    }
                }
            }
        }
        let pick = sample_log_weights(&weights, rng)
            .ok_or(Error::InfeasibleLattice { timestep: t })?;
        let k = pick / n + 1;
        let c = pick % n;
        segments.push(ElementSegment { start: t - k, end: t, class_id: c });
        next_class = Some(c);
        t -= k;
    }

    segments.reverse();
    ElementSegmentation::new(series_id, segments, lattice.t_len)
}

/// Log score of a full path under the same factors the lattice uses; the sum
/// over all paths of `exp(score)` equals the lattice's total mass.
pub fn score_path(
    segmentation: &ElementSegmentation,
    scorer: &dyn SegmentScorer,
    dur: &DurationModel,
    trans: &LogTransitions,
    prior: &SequencePrior,
) -> f64 {
    let n = trans.n_classes();
    let mut total = 0.0;
    let mut prev: Option<usize> = None;
    let mut row_buf = vec![0.0; n];
    for seg in &segmentation.segments {
        total += scorer.segment_log_score(seg.start, seg.len(), seg.class_id);
        total += dur.log_pmf(seg.len());
        let prior_row = prior.row(seg.start);
        match prev {
            None => {
                poe_initial(trans, prior_row, &mut row_buf);
                total += row_buf[seg.class_id];
            }
            Some(p) => {
                let row = trans.row(p);
                let mut z = f64::NEG_INFINITY;
                for c in 0..n {
                    z = crate::math::logsumexp2(z, row[c] + prior_row[c]);
                }
                total += row[seg.class_id] + prior_row[seg.class_id] - z;
            }
        }
        prev = Some(seg.class_id);
    }
    total
}

/// Draws an initial segmentation: geometric cut lengths with the configured
/// mean, uniform random classes.
pub fn random_segmentation<R: Rng>(
    series_id: &str,
    series_len: usize,
    max_len: usize,
    n_classes: usize,
    mean_len: f64,
    rng: &mut R,
) -> ElementSegmentation {
    let p = (1.0 / mean_len.max(1.0)).clamp(1e-6, 1.0);
    let mut segments = Vec::new();
    let mut start = 0usize;
    while start < series_len {
        let remaining = series_len - start;
        let draw = if p >= 1.0 {
            1
        } else {
            let u: f64 = rng.gen::<f64>();
            1 + ((1.0 - u).ln() / (1.0 - p).ln()).floor() as usize
        };
        let len = draw.clamp(1, max_len.min(remaining));
        let class_id = rng.gen_range(0..n_classes);
        segments.push(ElementSegment { start, end: start + len, class_id });
        start += len;
    }
    ElementSegmentation { series_id: series_id.into(), segments }
}

/// Mutable lower-layer state for blocked Gibbs sweeps: per-class GP models,
/// transition counts and each sequence's current assignment.
pub struct LowerState {
    k_max: usize,
    smoothing: f64,
    duration: DurationModel,
    gp: Vec<GpClassModel>,
    transitions: TransitionCounts,
    assignments: Vec<Option<ElementSegmentation>>,
}

impl LowerState {
    pub fn new(h: &Hyperparams, dims: usize, n_sequences: usize, seed: u64) -> Result<Self> {
        let duration = DurationModel::new(h.element_duration_mean, h.max_element_len)?;
        let gp = (0..h.element_classes)
            .map(|c| {
                GpClassModel::new(
                    h.kernel,
                    dims,
                    h.gp_cap,
                    h.var_floor,
                    crate::rng::child_seed(seed, &[GP_STREAM, c as u64]),
                )
            })
            .collect();
        Ok(LowerState {
            k_max: h.max_element_len,
            smoothing: h.transition_smoothing,
            duration,
            gp,
            transitions: TransitionCounts::new(h.element_classes),
            assignments: vec![None; n_sequences],
        })
    }

    pub fn duration(&self) -> &DurationModel {
        &self.duration
    }

    pub fn n_sequences(&self) -> usize {
        self.assignments.len()
    }

    pub fn transitions(&self) -> &TransitionCounts {
        &self.transitions
    }

    /// Current GP training segments per class, for checkpointing.
    pub fn gp_training_segments(&self) -> Vec<Vec<SegmentData>> {
        self.gp.iter().map(|g| g.segments().to_vec()).collect()
    }

    pub fn assignment(&self, idx: usize) -> Option<&ElementSegmentation> {
        self.assignments[idx].as_ref()
    }

    pub fn gp_models(&self) -> &[GpClassModel] {
        &self.gp
    }

    /// Installs an assignment (initialization), updating GP pools and counts.
    pub fn set_assignment(&mut self, idx: usize, series: &TimeSeries, seg: ElementSegmentation) {
        assert!(self.assignments[idx].is_none(), "assignment already present");
        for s in &seg.segments {
            self.gp[s.class_id].add_segment(extract_segment(series, s.start, s.end));
        }
        self.transitions.add_path(&seg.class_sequence());
        self.assignments[idx] = Some(seg);
    }

    fn remove_assignment(&mut self, idx: usize, series: &TimeSeries) {
        if let Some(old) = self.assignments[idx].take() {
            for s in &old.segments {
                self.gp[s.class_id].remove_segment(&extract_segment(series, s.start, s.end));
            }
            self.transitions.remove_path(&old.class_sequence());
        }
    }

    /// One collapsed Gibbs step for sequence `idx`: remove its sufficient
    /// statistics, filter and sample against the rest of the corpus, then
    /// re-add the new assignment. Returns the sampled path's log score.
    pub fn resample_sequence<R: Rng>(
        &mut self,
        idx: usize,
        series: &TimeSeries,
        prior: &SequencePrior,
        rng: &mut R,
    ) -> Result<f64> {
        self.remove_assignment(idx, series);

        let tables: Vec<PredictionTable> =
            self.gp.iter_mut().map(|g| g.prediction_table(self.k_max)).collect();
        let scorer = GpScorer::new(series, &tables, self.k_max);
        let trans = self.transitions.log_probs(self.smoothing);
        let lattice = forward_filter(&scorer, &self.duration, &trans, prior)?;
        let seg = backward_sample(&lattice, &trans, prior, &series.id, rng)?;
        let score = score_path(&seg, &scorer, &self.duration, &trans, prior);

        for s in &seg.segments {
            self.gp[s.class_id].add_segment(extract_segment(series, s.start, s.end));
        }
        self.transitions.add_path(&seg.class_sequence());
        self.assignments[idx] = Some(seg);
        Ok(score)
    }
}

const GP_STREAM: u64 = 0x6770; // "gp"

pub fn extract_segment(series: &TimeSeries, start: usize, end: usize) -> SegmentData {
    let dims = series.dims();
    let mut values = Vec::with_capacity((end - start) * dims);
    for t in start..end {
        values.extend_from_slice(series.sample(t));
    }
    SegmentData { len: end - start, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::types::KernelParams;

    fn uniform_prior(t_len: usize, n: usize) -> SequencePrior {
        SequencePrior::uniform(t_len, n)
    }

    fn simple_setup(t_len: usize, k_max: usize, n: usize) -> (FrozenScorer, DurationModel, LogTransitions) {
        let scorer = FrozenScorer::from_fn(t_len, k_max, n, |start, len, c| {
            -0.3 * len as f64 - 0.1 * (start as f64) - 0.2 * c as f64
        });
        let dur = DurationModel::new(2.0, k_max).unwrap();
        (scorer, dur, LogTransitions::uniform(n))
    }

    #[test]
    fn single_timestep_only_k1_feasible() {
        let (scorer, dur, trans) = simple_setup(1, 3, 2);
        let lattice = forward_filter(&scorer, &dur, &trans, &uniform_prior(1, 2)).unwrap();
        for c in 0..2 {
            assert!(lattice.alpha(1, 1, c).is_finite());
            assert_eq!(lattice.alpha(1, 2, c), f64::NEG_INFINITY);
            assert_eq!(lattice.alpha(1, 3, c), f64::NEG_INFINITY);
        }
    }

    #[test]
    fn uniform_prior_matches_any_constant_prior() {
        // PoE renormalization cancels constant prior rows exactly, so the
        // lattice with a uniform prior equals one with any other constant.
        let (scorer, dur, trans) = simple_setup(5, 3, 2);
        let uniform = uniform_prior(5, 2);
        let constant = SequencePrior::from_rows(2, vec![0.4f64.ln(); 5 * 2]);
        let a = forward_filter(&scorer, &dur, &trans, &uniform).unwrap();
        let b = forward_filter(&scorer, &dur, &trans, &constant).unwrap();
        for t in 1..=5 {
            for k in 1..=3.min(t) {
                for c in 0..2 {
                    let (x, y) = (a.alpha(t, k, c), b.alpha(t, k, c));
                    assert!((x - y).abs() < 1e-12, "α({t},{k},{c}): {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn single_feasible_path_sampled_with_probability_one() {
        // Only segments of length 2 carry mass: T = 4 forces (2, 2).
        let scorer = FrozenScorer::from_fn(4, 3, 2, |_, len, c| {
            if len == 2 && c == 1 {
                -1.0
            } else {
                f64::NEG_INFINITY
            }
        });
        let dur = DurationModel::new(2.0, 3).unwrap();
        let trans = LogTransitions::uniform(2);
        let prior = uniform_prior(4, 2);
        let lattice = forward_filter(&scorer, &dur, &trans, &prior).unwrap();
        let mut rng = stream(5, &[]);
        for _ in 0..10 {
            let seg = backward_sample(&lattice, &trans, &prior, "s", &mut rng).unwrap();
            assert_eq!(seg.segments.len(), 2);
            assert!(seg.segments.iter().all(|s| s.len() == 2 && s.class_id == 1));
        }
    }

    #[test]
    fn backward_sampling_is_deterministic_per_seed() {
        let (scorer, dur, trans) = simple_setup(12, 4, 3);
        let prior = uniform_prior(12, 3);
        let lattice = forward_filter(&scorer, &dur, &trans, &prior).unwrap();
        let a = backward_sample(&lattice, &trans, &prior, "s", &mut stream(9, &[])).unwrap();
        let b = backward_sample(&lattice, &trans, &prior, "s", &mut stream(9, &[])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampled_segmentations_tile_the_series() {
        let (scorer, dur, trans) = simple_setup(17, 5, 2);
        let prior = uniform_prior(17, 2);
        let lattice = forward_filter(&scorer, &dur, &trans, &prior).unwrap();
        let mut rng = stream(3, &[]);
        for _ in 0..50 {
            let seg = backward_sample(&lattice, &trans, &prior, "s", &mut rng).unwrap();
            seg.check_tiling(17).unwrap();
            seg.check_bounds(5, 2).unwrap();
        }
    }

    #[test]
    fn infeasible_series_reports_timestep() {
        // Nothing can cover timestep 3 onwards: every segment touching it is
        // log-zero, so the dead zone exceeds the max length and filtering
        // fails fast.
        let scorer = FrozenScorer::from_fn(8, 2, 1, |start, len, _| {
            if start + len > 2 {
                f64::NEG_INFINITY
            } else {
                -1.0
            }
        });
        let dur = DurationModel::new(1.5, 2).unwrap();
        let trans = LogTransitions::uniform(1);
        match forward_filter(&scorer, &dur, &trans, &uniform_prior(8, 1)) {
            Err(Error::InfeasibleLattice { timestep }) => assert_eq!(timestep, 5),
            other => panic!("expected infeasible lattice, got {other:?}"),
        }
    }

    #[test]
    fn deep_negative_scores_stay_finite() {
        let scorer = FrozenScorer::from_fn(10, 3, 2, |_, len, _| -1.0e6 * len as f64);
        let dur = DurationModel::new(2.0, 3).unwrap();
        let trans = LogTransitions::uniform(2);
        let prior = uniform_prior(10, 2);
        let lattice = forward_filter(&scorer, &dur, &trans, &prior).unwrap();
        assert!(lattice.total_log_mass().is_finite());
        let seg =
            backward_sample(&lattice, &trans, &prior, "s", &mut stream(1, &[])).unwrap();
        seg.check_tiling(10).unwrap();
    }

    #[test]
    fn random_segmentation_tiles_and_respects_cap() {
        let mut rng = stream(4, &[]);
        for len in [1usize, 2, 7, 50, 173] {
            let seg = random_segmentation("s", len, 9, 5, 4.0, &mut rng);
            seg.check_tiling(len).unwrap();
            seg.check_bounds(9, 5).unwrap();
        }
    }

    #[test]
    fn resample_is_deterministic_and_conserves_counts() {
        let h = Hyperparams {
            element_classes: 3,
            max_element_len: 6,
            element_duration_mean: 3.0,
            kernel: KernelParams::default(),
            gp_cap: 64,
            ..Default::default()
        };
        let values: Vec<f64> = (0..30).map(|i| (i as f64 * 0.4).sin()).collect();
        let series = TimeSeries::new("s0", 5.0, 1, values).unwrap();

        let mut state = LowerState::new(&h, 1, 1, 11).unwrap();
        let init = random_segmentation("s0", 30, 6, 3, 3.0, &mut stream(2, &[]));
        state.set_assignment(0, &series, init);

        let prior = SequencePrior::uniform(30, 3);
        state.resample_sequence(0, &series, &prior, &mut stream(7, &[])).unwrap();
        let first = state.assignment(0).unwrap().clone();
        // identical RNG draws on the second resample give the same result
        state.resample_sequence(0, &series, &prior, &mut stream(7, &[])).unwrap();
        let second = state.assignment(0).unwrap().clone();
        assert_eq!(first, second);

        // transition counts equal the number of adjacent segment pairs
        let transitions = state.transitions().total_transitions();
        assert_eq!(transitions as usize, second.segments.len() - 1);
        assert_eq!(state.transitions().total_initial(), 1);
    }

    #[test]
    fn score_path_total_matches_forward_mass_tiny_case() {
        // T = 3, K = 3, C = 1: compositions (3), (1,2), (2,1), (1,1,1).
        let scorer = FrozenScorer::from_fn(3, 3, 1, |start, len, _| {
            -0.7 * len as f64 + 0.3 * start as f64
        });
        let dur = DurationModel::new(1.8, 3).unwrap();
        let trans = LogTransitions::uniform(1);
        let prior = uniform_prior(3, 1);
        let lattice = forward_filter(&scorer, &dur, &trans, &prior).unwrap();

        let compositions: [&[usize]; 4] = [&[3], &[1, 2], &[2, 1], &[1, 1, 1]];
        let mut total = f64::NEG_INFINITY;
        for comp in compositions {
            let mut segs = Vec::new();
            let mut start = 0;
            for &len in comp {
                segs.push(ElementSegment { start, end: start + len, class_id: 0 });
                start += len;
            }
            let seg = ElementSegmentation::new("s", segs, 3).unwrap();
            total = crate::math::logsumexp2(
                total,
                score_path(&seg, &scorer, &dur, &trans, &prior),
            );
        }
        let diff = (lattice.total_log_mass() - total).abs();
        assert!(diff < 1e-10, "mass mismatch: {diff}");
    }
}
