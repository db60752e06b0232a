//! Upper-layer emission models and the downward element prior.
//!
//! Three interchangeable formulations of P(element subsequence | unit class):
//!
//! * **word segmentation (ws)** — a unigram over exact element strings; two
//!   subsequences differing in a single element are distinct types.
//! * **element unigram (meu)** — elements drawn independently per unit class,
//!   so emission probability ignores order.
//! * **element bigram (meb)** — adjacent-pair factors per unit class; order
//!   matters. Length-1 units would be an empty product, so they are charged
//!   the per-class begin-position factor instead.
//!
//! The same count store also maintains the positional tables (begin /
//! transition / end of unit) that turn into the lower layer's class prior.
//! For ws the positional tables are global; for meu/meb they are kept per
//! unit class.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::types::{ElementSegmentation, UnitSegmentation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EmissionKind {
    WordSeg,
    Unigram,
    Bigram,
}

/// The emission formulation a run mode selects, if it runs the upper layer.
pub fn kind_for_mode(mode: crate::types::Mode) -> Option<EmissionKind> {
    match mode {
        crate::types::Mode::LowerOnly => None,
        crate::types::Mode::WordSeg => Some(EmissionKind::WordSeg),
        crate::types::Mode::ElementUnigram => Some(EmissionKind::Unigram),
        crate::types::Mode::ElementBigram => Some(EmissionKind::Bigram),
    }
}

/// Exact occurrence counts backing all three emission formulations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionCounts {
    kind: EmissionKind,
    n_element_classes: usize,
    n_unit_classes: usize,
    alpha: f64,
    mu: f64,

    /// ws: occurrences of each exact element string used as a unit.
    #[serde(with = "word_table")]
    word_counts: BTreeMap<Vec<u16>, u64>,
    /// ws: total number of unit occurrences.
    units_total: u64,

    /// meu: N_{b,c}, elements of class c inside units of class b.
    class_by_unit: Vec<u64>,
    /// meu: N_b = Σ_c N_{b,c}.
    unit_totals: Vec<u64>,

    /// meb: N_{b,prev,cur} adjacent pairs inside units of class b.
    bigram: Vec<u64>,
    /// meb: N_{b,prev} = Σ_cur N_{b,prev,cur} (pairs only, so the marginal
    /// identity holds exactly; final elements of a unit carry no context).
    bigram_ctx: Vec<u64>,

    // positional tables, per unit class
    begin_by_unit: Vec<u64>,
    trans_by_unit: Vec<u64>,
    end_by_unit: Vec<u64>,
    // positional tables, global (ws prior carries no unit-class index)
    begin_global: Vec<u64>,
    trans_global: Vec<u64>,
    end_global: Vec<u64>,
}

mod word_table {
    use super::*;
    use serde::de::Deserializer;
    use serde::ser::Serializer;

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<Vec<u16>, u64>,
        ser: S,
    ) -> Result<S::Ok, S::Error> {
        let pairs: Vec<(&Vec<u16>, &u64)> = map.iter().collect();
        serde::Serialize::serialize(&pairs, ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        de: D,
    ) -> Result<BTreeMap<Vec<u16>, u64>, D::Error> {
        let pairs: Vec<(Vec<u16>, u64)> = serde::Deserialize::deserialize(de)?;
        Ok(pairs.into_iter().collect())
    }
}

impl EmissionCounts {
    pub fn new(
        kind: EmissionKind,
        n_element_classes: usize,
        n_unit_classes: usize,
        alpha: f64,
        mu: f64,
    ) -> Self {
        let c = n_element_classes;
        let b = n_unit_classes;
        EmissionCounts {
            kind,
            n_element_classes: c,
            n_unit_classes: b,
            alpha,
            mu,
            word_counts: BTreeMap::new(),
            units_total: 0,
            class_by_unit: vec![0; b * c],
            unit_totals: vec![0; b],
            bigram: vec![0; b * c * c],
            bigram_ctx: vec![0; b * c],
            begin_by_unit: vec![0; b * c],
            trans_by_unit: vec![0; b * c * c],
            end_by_unit: vec![0; b * c],
            begin_global: vec![0; c],
            trans_global: vec![0; c * c],
            end_global: vec![0; c],
        }
    }

    pub fn kind(&self) -> EmissionKind {
        self.kind
    }

    pub fn n_element_classes(&self) -> usize {
        self.n_element_classes
    }

    pub fn n_unit_classes(&self) -> usize {
        self.n_unit_classes
    }

    /// Distinct unit strings observed so far.
    pub fn distinct_word_types(&self) -> usize {
        self.word_counts.len()
    }

    /// The `V` in the ws denominator: observed types plus one unseen slot.
    pub fn smoothing_types(&self) -> usize {
        self.word_counts.len() + 1
    }

    /// Registers one unit occurrence covering the element classes `sub`.
    pub fn add_unit(&mut self, sub: &[u16], b: usize) {
        assert!(!sub.is_empty());
        let c = self.n_element_classes;
        *self.word_counts.entry(sub.to_vec()).or_insert(0) += 1;
        self.units_total += 1;
        for &cls in sub {
            self.class_by_unit[b * c + cls as usize] += 1;
        }
        self.unit_totals[b] += sub.len() as u64;
        for w in sub.windows(2) {
            let (prev, cur) = (w[0] as usize, w[1] as usize);
            self.bigram[(b * c + prev) * c + cur] += 1;
            self.bigram_ctx[b * c + prev] += 1;
            self.trans_by_unit[(b * c + prev) * c + cur] += 1;
            self.trans_global[prev * c + cur] += 1;
        }
        let first = sub[0] as usize;
        let last = *sub.last().unwrap() as usize;
        self.begin_by_unit[b * c + first] += 1;
        self.begin_global[first] += 1;
        self.end_by_unit[b * c + last] += 1;
        self.end_global[last] += 1;
    }

    /// Exactly reverses a previous `add_unit`.
    pub fn remove_unit(&mut self, sub: &[u16], b: usize) {
        assert!(!sub.is_empty());
        let c = self.n_element_classes;
        {
            let slot = self
                .word_counts
                .get_mut(sub)
                .expect("remove_unit: unit string was never added");
            *slot = slot.checked_sub(1).expect("remove_unit: word count underflow");
            if *slot == 0 {
                self.word_counts.remove(sub);
            }
        }
        self.units_total -= 1;
        for &cls in sub {
            dec(&mut self.class_by_unit[b * c + cls as usize]);
        }
        self.unit_totals[b] -= sub.len() as u64;
        for w in sub.windows(2) {
            let (prev, cur) = (w[0] as usize, w[1] as usize);
            dec(&mut self.bigram[(b * c + prev) * c + cur]);
            dec(&mut self.bigram_ctx[b * c + prev]);
            dec(&mut self.trans_by_unit[(b * c + prev) * c + cur]);
            dec(&mut self.trans_global[prev * c + cur]);
        }
        let first = sub[0] as usize;
        let last = *sub.last().unwrap() as usize;
        dec(&mut self.begin_by_unit[b * c + first]);
        dec(&mut self.begin_global[first]);
        dec(&mut self.end_by_unit[b * c + last]);
        dec(&mut self.end_global[last]);
    }

    /// Adds one sequence's full (element classes, unit segmentation) pair.
    pub fn add_assignment(&mut self, classes: &[u16], units: &UnitSegmentation) {
        for u in &units.segments {
            self.add_unit(&classes[u.start..u.end], u.class_id);
        }
    }

    pub fn remove_assignment(&mut self, classes: &[u16], units: &UnitSegmentation) {
        for u in &units.segments {
            self.remove_unit(&classes[u.start..u.end], u.class_id);
        }
    }

    /// Convenience wrapper taking the segmentations produced by the samplers.
    pub fn add_segmentations(&mut self, elements: &ElementSegmentation, units: &UnitSegmentation) {
        self.add_assignment(&elements.class_sequence(), units);
    }

    /// Word-segmentation emission: (N_sub + α) / (N_all + α·V).
    pub fn ws_emission(&self, sub: &[u16]) -> f64 {
        let n_sub = self.word_counts.get(sub).copied().unwrap_or(0) as f64;
        let v = self.smoothing_types() as f64;
        (n_sub + self.alpha) / (self.units_total as f64 + self.alpha * v)
    }

    /// Element-unigram emission: Π_t (N_{b,c_t} + α) / (N_b + α·C).
    pub fn meu_emission(&self, sub: &[u16], b: usize) -> f64 {
        self.meu_log_emission(sub, b).exp()
    }

    /// Element-bigram emission: adjacent-pair factors; a single element is
    /// charged the per-class begin-position factor.
    pub fn meb_emission(&self, sub: &[u16], b: usize) -> f64 {
        self.meb_log_emission(sub, b).exp()
    }

    pub fn ws_log_emission(&self, sub: &[u16]) -> f64 {
        self.ws_emission(sub).ln()
    }

    pub fn meu_log_emission(&self, sub: &[u16], b: usize) -> f64 {
        let c = self.n_element_classes;
        let denom =
            (self.unit_totals[b] as f64 + self.alpha * c as f64).ln();
        let mut total = 0.0;
        for &cls in sub {
            total += (self.class_by_unit[b * c + cls as usize] as f64 + self.alpha).ln() - denom;
        }
        total
    }

    pub fn meb_log_emission(&self, sub: &[u16], b: usize) -> f64 {
        assert!(!sub.is_empty());
        let c = self.n_element_classes;
        if sub.len() == 1 {
            let cls = sub[0] as usize;
            let num = self.begin_by_unit[b * c + cls] as f64 + self.mu;
            let total: u64 = self.begin_by_unit[b * c..(b + 1) * c].iter().sum();
            let denom = total as f64 + self.mu * c as f64;
            return (num / denom).ln();
        }
        let mut total = 0.0;
        for w in sub.windows(2) {
            let (prev, cur) = (w[0] as usize, w[1] as usize);
            let num = self.bigram[(b * c + prev) * c + cur] as f64 + self.alpha;
            let denom = self.bigram_ctx[b * c + prev] as f64 + self.alpha * c as f64;
            total += (num / denom).ln();
        }
        total
    }

    /// Emission log probability under the configured formulation.
    pub fn log_emission(&self, sub: &[u16], b: usize) -> f64 {
        match self.kind {
            EmissionKind::WordSeg => self.ws_log_emission(sub),
            EmissionKind::Unigram => self.meu_log_emission(sub, b),
            EmissionKind::Bigram => self.meb_log_emission(sub, b),
        }
    }

    /// Snapshot of the positional tables as the lower layer's class prior.
    pub fn element_prior(&self) -> ElementPrior {
        let c = self.n_element_classes;
        // ws priors carry no unit-class index; collapse to one shared row.
        let (b_eff, begin, trans, end) = match self.kind {
            EmissionKind::WordSeg => (
                1usize,
                self.begin_global.clone(),
                self.trans_global.clone(),
                self.end_global.clone(),
            ),
            _ => (
                self.n_unit_classes,
                self.begin_by_unit.clone(),
                self.trans_by_unit.clone(),
                self.end_by_unit.clone(),
            ),
        };
        // marginal P(c|b) from the unigram table, for reporting
        let mut marginal = vec![0.0; self.n_unit_classes * c];
        for b in 0..self.n_unit_classes {
            let denom = self.unit_totals[b] as f64 + self.mu * c as f64;
            for cls in 0..c {
                marginal[b * c + cls] =
                    (self.class_by_unit[b * c + cls] as f64 + self.mu) / denom;
            }
        }
        ElementPrior {
            n_element_classes: c,
            b_eff,
            mu: self.mu,
            uniform: false,
            begin,
            trans,
            end,
            marginal,
        }
    }

    /// Internal-consistency checks used by tests.
    #[doc(hidden)]
    pub fn check_marginals(&self) -> bool {
        let c = self.n_element_classes;
        for b in 0..self.n_unit_classes {
            let sum: u64 = self.class_by_unit[b * c..(b + 1) * c].iter().sum();
            if sum != self.unit_totals[b] {
                return false;
            }
            for prev in 0..c {
                let row: u64 = self.bigram[(b * c + prev) * c..(b * c + prev + 1) * c]
                    .iter()
                    .sum();
                if row != self.bigram_ctx[b * c + prev] {
                    return false;
                }
            }
        }
        let total: u64 = self.word_counts.values().sum();
        total == self.units_total
    }
}

#[inline]
fn dec(slot: &mut u64) {
    *slot = slot.checked_sub(1).expect("emission count underflow");
}

/// Position of an element within its unit, from the previous iteration's
/// alignment. `prev` is the class of the preceding element in the same unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorContext {
    Begin,
    Middle { prev: u16 },
    End { prev: u16 },
}

/// The downward message P(element class | unit context): μ-smoothed
/// multinomials over element classes per (unit class, positional context).
///
/// `uniform` short-circuits everything to 1/C — the state before the first
/// upper pass has produced any counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElementPrior {
    n_element_classes: usize,
    /// 1 for ws (global tables), B otherwise.
    b_eff: usize,
    mu: f64,
    uniform: bool,
    begin: Vec<u64>,
    trans: Vec<u64>,
    end: Vec<u64>,
    /// Position-independent P(c|b), for inspection and reports.
    marginal: Vec<f64>,
}

impl ElementPrior {
    pub fn uniform(n_element_classes: usize, n_unit_classes: usize) -> Self {
        let c = n_element_classes;
        ElementPrior {
            n_element_classes: c,
            b_eff: 1,
            mu: 1.0,
            uniform: true,
            begin: vec![0; c],
            trans: vec![0; c * c],
            end: vec![0; c],
            marginal: vec![1.0 / c as f64; n_unit_classes * c],
        }
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn n_element_classes(&self) -> usize {
        self.n_element_classes
    }

    pub fn marginal(&self, b: usize, c: usize) -> f64 {
        self.marginal[b * self.n_element_classes + c]
    }

    /// Writes the normalized log prior over element classes for one context.
    pub fn fill_log_row(&self, b: usize, ctx: PriorContext, out: &mut [f64]) {
        let c = self.n_element_classes;
        debug_assert_eq!(out.len(), c);
        if self.uniform {
            out.fill(-(c as f64).ln());
            return;
        }
        let b = if self.b_eff == 1 { 0 } else { b };
        match ctx {
            PriorContext::Begin => {
                for cls in 0..c {
                    out[cls] = self.begin[b * c + cls] as f64 + self.mu;
                }
            }
            PriorContext::Middle { prev } => {
                let row = &self.trans[(b * c + prev as usize) * c..];
                for cls in 0..c {
                    out[cls] = row[cls] as f64 + self.mu;
                }
            }
            PriorContext::End { prev } => {
                let row = &self.trans[(b * c + prev as usize) * c..];
                for cls in 0..c {
                    out[cls] =
                        (row[cls] as f64 + self.mu) * (self.end[b * c + cls] as f64 + self.mu);
                }
            }
        }
        let total: f64 = out.iter().sum();
        let log_total = total.ln();
        for v in out.iter_mut() {
            *v = v.ln() - log_total;
        }
    }

    pub fn log_row(&self, b: usize, ctx: PriorContext) -> Vec<f64> {
        let mut out = vec![0.0; self.n_element_classes];
        self.fill_log_row(b, ctx, &mut out);
        out
    }
}

/// Per-timestep log prior rows for one sequence, materialized from the
/// previous iteration's alignment so the lower pass can read them cheaply.
#[derive(Debug, Clone)]
pub struct SequencePrior {
    n_classes: usize,
    rows: Vec<f64>,
}

impl SequencePrior {
    pub fn uniform(series_len: usize, n_classes: usize) -> Self {
        let v = -(n_classes as f64).ln();
        SequencePrior { n_classes, rows: vec![v; series_len * n_classes] }
    }

    /// Builds a prior from explicit per-timestep log rows (`len × n_classes`).
    pub fn from_rows(n_classes: usize, rows: Vec<f64>) -> Self {
        assert_eq!(rows.len() % n_classes, 0);
        SequencePrior { n_classes, rows }
    }

    /// Maps unit labels and positional contexts from the previous alignment
    /// onto timesteps: every timestep inherits the context of the element
    /// that covered it.
    pub fn from_alignment(
        prior: &ElementPrior,
        elements: &ElementSegmentation,
        units: &UnitSegmentation,
        series_len: usize,
    ) -> Self {
        let c = prior.n_element_classes();
        let mut rows = vec![0.0; series_len * c];
        let classes = elements.class_sequence();
        for unit in &units.segments {
            for j in unit.start..unit.end {
                // A one-element unit is both begin and end; begin wins.
                let ctx = if j == unit.start {
                    PriorContext::Begin
                } else if j + 1 == unit.end {
                    PriorContext::End { prev: classes[j - 1] }
                } else {
                    PriorContext::Middle { prev: classes[j - 1] }
                };
                let seg = &elements.segments[j];
                let mut row = vec![0.0; c];
                prior.fill_log_row(unit.class_id, ctx, &mut row);
                for t in seg.start..seg.end {
                    rows[t * c..(t + 1) * c].copy_from_slice(&row);
                }
            }
        }
        SequencePrior { n_classes: c, rows }
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.rows[t * self.n_classes..(t + 1) * self.n_classes]
    }

    pub fn len(&self) -> usize {
        self.rows.len() / self.n_classes
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}
