//! Upper-layer sampler: segments a discrete element-class sequence into unit
//! motions with the same forward-filtering / backward-sampling scheme as the
//! lower layer, but with count-based emissions instead of GP likelihoods and
//! no product-of-experts factor.

use rand::Rng;

use crate::duration::DurationModel;
use crate::emission::EmissionCounts;
use crate::error::{Error, Result};
use crate::math::{logsumexp, logsumexp2, sample_log_weights};
use crate::transition::{LogTransitions, TransitionCounts};
use crate::types::{Hyperparams, UnitSegment, UnitSegmentation};

/// Log-domain forward scores over (element index, unit length, unit class).
#[derive(Debug, Clone)]
pub struct UnitForwardLattice {
    n_elements: usize,
    k_max: usize,
    n_classes: usize,
    alpha: Vec<f64>,
}

impl UnitForwardLattice {
    #[inline]
    fn idx(&self, j: usize, k: usize, b: usize) -> usize {
        ((j - 1) * self.k_max + (k - 1)) * self.n_classes + b
    }

    /// `j` and `k` are 1-based.
    pub fn alpha(&self, j: usize, k: usize, b: usize) -> f64 {
        self.alpha[self.idx(j, k, b)]
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn total_log_mass(&self) -> f64 {
        let lo = self.idx(self.n_elements, 1, 0);
        logsumexp(&self.alpha[lo..lo + self.k_max * self.n_classes])
    }
}

/// Fills the unit-layer lattice for one element sequence.
///
/// For collapsed Gibbs correctness the emission counts must already exclude
/// the sequence being resampled.
pub fn unit_forward_filter(
    classes: &[u16],
    emission: &EmissionCounts,
    trans: &LogTransitions,
    dur: &DurationModel,
) -> Result<UnitForwardLattice> {
    let n_elements = classes.len();
    let k_max = dur.max_len();
    let n = trans.n_classes();
    assert!(n_elements > 0, "cannot segment an empty element sequence");

    let mut lattice = UnitForwardLattice {
        n_elements,
        k_max,
        n_classes: n,
        alpha: vec![f64::NEG_INFINITY; n_elements * k_max * n],
    };
    // in_log[j * n + b]: Σ_{b'} P(b | b') · column_mass(j, b')
    let mut in_log = vec![f64::NEG_INFINITY; n_elements * n];
    let mut column_mass = vec![f64::NEG_INFINITY; n];
    let mut last_reachable = 0usize;

    for j in 1..=n_elements {
        if j - last_reachable > k_max {
            return Err(Error::InfeasibleLattice { timestep: j });
        }
        let k_hi = k_max.min(j);
        for k in 1..=k_hi {
            let start = j - k;
            let sub = &classes[start..j];
            let dur_term = dur.log_pmf(k);
            for b in 0..n {
                let em = emission.log_emission(sub, b);
                let incoming = if start == 0 {
                    trans.log_initial(b)
                } else {
                    in_log[start * n + b]
                };
                let at = lattice.idx(j, k, b);
                lattice.alpha[at] = em + dur_term + incoming;
            }
        }
        let mut any = false;
        for b in 0..n {
            let mut mass = f64::NEG_INFINITY;
            for k in 1..=k_hi {
                mass = logsumexp2(mass, lattice.alpha[lattice.idx(j, k, b)]);
            }
            column_mass[b] = mass;
            any |= mass > f64::NEG_INFINITY;
        }
        if any {
            last_reachable = j;
        }
        if j < n_elements {
            for b in 0..n {
                let mut v = f64::NEG_INFINITY;
                for (b_prev, &mass) in column_mass.iter().enumerate() {
                    v = logsumexp2(v, trans.log_pi(b_prev, b) + mass);
                }
                in_log[j * n + b] = v;
            }
        }
    }

    if lattice.total_log_mass() == f64::NEG_INFINITY {
        return Err(Error::InfeasibleLattice { timestep: n_elements });
    }
    Ok(lattice)
}

/// Samples one unit segmentation from the filled lattice.
pub fn unit_backward_sample<R: Rng>(
    lattice: &UnitForwardLattice,
    trans: &LogTransitions,
    series_id: &str,
    rng: &mut R,
) -> Result<UnitSegmentation> {
    let n = lattice.n_classes;
    let k_max = lattice.k_max;
    let mut segments: Vec<UnitSegment> = Vec::new();
    let mut j = lattice.n_elements;
    let mut next_class: Option<usize> = None;
    let mut weights = vec![f64::NEG_INFINITY; k_max * n];

    while j > 0 {
        let k_hi = k_max.min(j);
        for w in weights.iter_mut() {
            *w = f64::NEG_INFINITY;
        }
        for k in 1..=k_hi {
            for b in 0..n {
                let link = match next_class {
                    None => 0.0,
                    Some(b_next) => trans.log_pi(b, b_next),
                };
                weights[(k - 1) * n + b] = lattice.alpha(j, k, b) + link;
            }
        }
        let pick =
            sample_log_weights(&weights, rng).ok_or(Error::InfeasibleLattice { timestep: j })?;
        let k = pick / n + 1;
        let b = pick % n;
        segments.push(UnitSegment { start: j - k, end: j, class_id: b });
        next_class = Some(b);
        j -= k;
    }

    segments.reverse();
    UnitSegmentation::new(series_id, segments, lattice.n_elements)
}

/// Log score of one unit path under the same factors as the lattice.
pub fn score_unit_path(
    units: &UnitSegmentation,
    classes: &[u16],
    emission: &EmissionCounts,
    trans: &LogTransitions,
    dur: &DurationModel,
) -> f64 {
    let mut total = 0.0;
    let mut prev: Option<usize> = None;
    for seg in &units.segments {
        total += emission.log_emission(&classes[seg.start..seg.end], seg.class_id);
        total += dur.log_pmf(seg.len());
        total += match prev {
            None => trans.log_initial(seg.class_id),
            Some(p) => trans.log_pi(p, seg.class_id),
        };
        prev = Some(seg.class_id);
    }
    total
}

/// Mutable upper-layer state: emission counts, unit transitions and each
/// sequence's stored (element classes, unit segmentation) contribution.
pub struct UpperState {
    smoothing: f64,
    duration: DurationModel,
    emission: EmissionCounts,
    transitions: TransitionCounts,
    assignments: Vec<Option<(Vec<u16>, UnitSegmentation)>>,
}

impl UpperState {
    pub fn new(h: &Hyperparams, kind: crate::emission::EmissionKind, n_sequences: usize) -> Result<Self> {
        Ok(UpperState {
            smoothing: h.transition_smoothing,
            duration: DurationModel::new(h.unit_duration_mean, h.max_unit_len)?,
            emission: EmissionCounts::new(
                kind,
                h.element_classes,
                h.unit_classes,
                h.emission_alpha,
                h.prior_mu,
            ),
            transitions: TransitionCounts::new(h.unit_classes),
            assignments: vec![None; n_sequences],
        })
    }

    pub fn emission(&self) -> &EmissionCounts {
        &self.emission
    }

    pub fn duration(&self) -> &DurationModel {
        &self.duration
    }

    pub fn transitions(&self) -> &TransitionCounts {
        &self.transitions
    }

    pub fn assignment(&self, idx: usize) -> Option<&(Vec<u16>, UnitSegmentation)> {
        self.assignments[idx].as_ref()
    }

    /// Elements currently counted across all stored assignments.
    pub fn total_elements_assigned(&self) -> usize {
        self.assignments
            .iter()
            .flatten()
            .map(|(classes, _)| classes.len())
            .sum()
    }

    /// One collapsed Gibbs step for sequence `idx` over its (new) element
    /// class sequence. The stored previous assignment — built from the
    /// element sequence of the iteration it was sampled in — is removed
    /// first. Returns the sampled path's log score.
    pub fn resample_unit_sequence<R: Rng>(
        &mut self,
        idx: usize,
        classes: &[u16],
        series_id: &str,
        rng: &mut R,
    ) -> Result<f64> {
        if let Some((old_classes, old_units)) = self.assignments[idx].take() {
            self.emission.remove_assignment(&old_classes, &old_units);
            self.transitions.remove_path(&unit_class_path(&old_units));
        }

        let trans = self.transitions.log_probs(self.smoothing);
        let lattice = unit_forward_filter(classes, &self.emission, &trans, &self.duration)?;
        let units = unit_backward_sample(&lattice, &trans, series_id, rng)?;
        let score = score_unit_path(&units, classes, &self.emission, &trans, &self.duration);

        self.emission.add_assignment(classes, &units);
        self.transitions.add_path(&unit_class_path(&units));
        self.assignments[idx] = Some((classes.to_vec(), units));
        Ok(score)
    }
}

fn unit_class_path(units: &UnitSegmentation) -> Vec<u16> {
    units.segments.iter().map(|s| s.class_id as u16).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emission::EmissionKind;
    use crate::rng::stream;

    fn empty_ws() -> EmissionCounts {
        EmissionCounts::new(EmissionKind::WordSeg, 4, 2, 10.0, 0.1)
    }

    #[test]
    fn composition_enumeration_with_unit_emissions() {
        // Empty ws counts emit exactly 1 for every subsequence, and B = 1
        // leaves no transition freedom: forward mass is the sum over the 4
        // compositions of 3 of the product of duration terms.
        let emission = EmissionCounts::new(EmissionKind::WordSeg, 4, 1, 10.0, 0.1);
        let trans = LogTransitions::uniform(1);
        let dur = DurationModel::new(1.5, 3).unwrap();
        let classes = [0u16, 1, 2];
        let lattice = unit_forward_filter(&classes, &emission, &trans, &dur).unwrap();

        let compositions: [&[usize]; 4] = [&[3], &[1, 2], &[2, 1], &[1, 1, 1]];
        let mut expect = f64::NEG_INFINITY;
        for comp in compositions {
            let path: f64 = comp.iter().map(|&k| dur.log_pmf(k)).sum();
            expect = logsumexp2(expect, path);
        }
        assert!((lattice.total_log_mass() - expect).abs() < 1e-12);
    }

    #[test]
    fn single_element_sequence() {
        let emission = empty_ws();
        let trans = LogTransitions::uniform(2);
        let dur = DurationModel::new(2.0, 3).unwrap();
        let lattice = unit_forward_filter(&[1u16], &emission, &trans, &dur).unwrap();
        for b in 0..2 {
            assert!(lattice.alpha(1, 1, b).is_finite());
        }
        let units =
            unit_backward_sample(&lattice, &trans, "s", &mut stream(1, &[])).unwrap();
        assert_eq!(units.segments.len(), 1);
        assert_eq!(units.segments[0].len(), 1);
    }

    #[test]
    fn symmetric_emissions_give_symmetric_lattice() {
        // Empty counts treat all unit classes alike; relabeling b is a
        // symmetry of the lattice.
        let emission = EmissionCounts::new(EmissionKind::Unigram, 4, 2, 10.0, 0.1);
        let trans = LogTransitions::uniform(2);
        let dur = DurationModel::new(2.0, 3).unwrap();
        let classes = [0u16, 1, 2, 3, 1];
        let lattice = unit_forward_filter(&classes, &emission, &trans, &dur).unwrap();
        for j in 1..=5 {
            for k in 1..=3.min(j) {
                assert!((lattice.alpha(j, k, 0) - lattice.alpha(j, k, 1)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_and_tiles() {
        let emission = empty_ws();
        let trans = LogTransitions::uniform(2);
        let dur = DurationModel::new(2.5, 4).unwrap();
        let classes = [0u16, 1, 2, 3, 0, 1, 2, 3, 2];
        let lattice = unit_forward_filter(&classes, &emission, &trans, &dur).unwrap();
        let a = unit_backward_sample(&lattice, &trans, "s", &mut stream(5, &[])).unwrap();
        let b = unit_backward_sample(&lattice, &trans, "s", &mut stream(5, &[])).unwrap();
        assert_eq!(a, b);
        a.check_tiling(9).unwrap();
        for seg in &a.segments {
            assert!(seg.len() <= 4);
        }
    }

    #[test]
    fn resample_conserves_element_counts() {
        let h = Hyperparams {
            element_classes: 4,
            unit_classes: 2,
            max_unit_len: 3,
            unit_duration_mean: 2.0,
            ..Default::default()
        };
        let mut state = UpperState::new(&h, EmissionKind::Unigram, 2).unwrap();
        let c0: Vec<u16> = vec![0, 1, 2, 3, 0, 1];
        let c1: Vec<u16> = vec![2, 2, 3];
        state.resample_unit_sequence(0, &c0, "s0", &mut stream(1, &[])).unwrap();
        state.resample_unit_sequence(1, &c1, "s1", &mut stream(2, &[])).unwrap();
        assert_eq!(state.total_elements_assigned(), 9);
        assert!(state.emission().check_marginals());

        // remove-then-add with identical draws is a no-op on counts
        let before = state.emission().clone();
        state.resample_unit_sequence(1, &c1, "s1", &mut stream(2, &[])).unwrap();
        assert_eq!(*state.emission(), before);
    }

    #[test]
    fn resample_handles_changed_element_sequence() {
        // The stored contribution is keyed to the classes it was added with,
        // so a later pass may hand in a different element sequence.
        let h = Hyperparams {
            element_classes: 4,
            unit_classes: 2,
            max_unit_len: 3,
            unit_duration_mean: 2.0,
            ..Default::default()
        };
        let mut state = UpperState::new(&h, EmissionKind::Bigram, 1).unwrap();
        state
            .resample_unit_sequence(0, &[0u16, 1, 2], "s", &mut stream(3, &[]))
            .unwrap();
        state
            .resample_unit_sequence(0, &[3u16, 3, 1, 0], "s", &mut stream(4, &[]))
            .unwrap();
        assert_eq!(state.total_elements_assigned(), 4);
        assert!(state.emission().check_marginals());
    }
}
