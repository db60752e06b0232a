//! Scoring segmentations against ground truth.
//!
//! Unsupervised class ids are arbitrary, so estimated classes are first
//! mapped onto truth labels by greedy majority overlap (measured in samples,
//! many-to-one allowed), then label sequences are compared by normalized
//! Levenshtein distance. Element-level comparisons use one label per segment;
//! unit-level comparisons use one label per element.

use std::collections::BTreeSet;

use crate::emission::EmissionKind;
use crate::error::{Error, Result};
use crate::types::{ElementSegmentation, UnitSegmentation};

/// Minimum insert/delete/substitute edit count between two label sequences.
pub fn levenshtein(a: &[u16], b: &[u16]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Normalized Levenshtein distance: edit count over the longer length.
/// Two empty sequences are defined to be at distance 0.
pub fn nld(a: &[u16], b: &[u16]) -> f64 {
    let denom = a.len().max(b.len());
    if denom == 0 {
        return 0.0;
    }
    levenshtein(a, b) as f64 / denom as f64
}

/// Greedy majority-overlap mapping from estimated class ids to truth labels.
///
/// `overlaps` yields (estimated class, truth label, shared weight) triples;
/// each estimated class maps to the truth label it overlaps most (ties to the
/// lowest label, classes with no overlap to label 0).
pub fn fit_mapping(
    n_est: usize,
    n_truth: usize,
    overlaps: impl IntoIterator<Item = (usize, usize, u64)>,
) -> Vec<u16> {
    let mut table = vec![0u64; n_est * n_truth];
    for (e, g, w) in overlaps {
        table[e * n_truth + g] += w;
    }
    (0..n_est)
        .map(|e| {
            let row = &table[e * n_truth..(e + 1) * n_truth];
            let mut best = (0u64, 0usize);
            for (g, &w) in row.iter().enumerate() {
                if w > best.0 {
                    best = (w, g);
                }
            }
            best.1 as u16
        })
        .collect()
}

/// Sample-level overlaps between two span lists covering the same series.
fn span_overlaps(
    est: &[(usize, usize, usize)],
    truth: &[(usize, usize, usize)],
) -> Vec<(usize, usize, u64)> {
    let mut out = Vec::new();
    for &(es, ee, ec) in est {
        for &(ts, te, tc) in truth {
            let lo = es.max(ts);
            let hi = ee.min(te);
            if hi > lo {
                out.push((ec, tc, (hi - lo) as u64));
            }
        }
    }
    out
}

fn element_spans(seg: &ElementSegmentation) -> Vec<(usize, usize, usize)> {
    seg.segments.iter().map(|s| (s.start, s.end, s.class_id)).collect()
}

/// Unit labels projected onto sample spans through the element spans.
fn unit_spans(
    elements: &ElementSegmentation,
    units: &UnitSegmentation,
) -> Vec<(usize, usize, usize)> {
    units
        .segments
        .iter()
        .map(|u| {
            let start = elements.segments[u.start].start;
            let end = elements.segments[u.end - 1].end;
            (start, end, u.class_id)
        })
        .collect()
}

/// Corpus-level evaluation of element segmentations: one greedy mapping fit
/// on pooled sample overlaps, then per-sequence NLD over per-segment labels.
pub fn element_eval(
    est: &[ElementSegmentation],
    truth: &[ElementSegmentation],
    n_est_classes: usize,
    n_truth_classes: usize,
) -> Result<EvalScores> {
    if est.len() != truth.len() {
        return Err(Error::data(format!(
            "estimated corpus has {} sequences, truth has {}",
            est.len(),
            truth.len()
        )));
    }
    let overlaps = est
        .iter()
        .zip(truth)
        .flat_map(|(e, t)| span_overlaps(&element_spans(e), &element_spans(t)));
    let mapping = fit_mapping(n_est_classes, n_truth_classes, overlaps);

    let per_sequence = est
        .iter()
        .zip(truth)
        .map(|(e, t)| {
            let mapped: Vec<u16> =
                e.class_sequence().iter().map(|&c| mapping[c as usize]).collect();
            nld(&mapped, &t.class_sequence())
        })
        .collect();
    Ok(EvalScores::new(per_sequence, mapping))
}

/// Corpus-level evaluation of unit segmentations over per-element labels.
pub fn unit_eval(
    est_elements: &[ElementSegmentation],
    est_units: &[UnitSegmentation],
    truth_elements: &[ElementSegmentation],
    truth_units: &[UnitSegmentation],
    n_est_classes: usize,
    n_truth_classes: usize,
) -> Result<EvalScores> {
    if est_elements.len() != est_units.len() || truth_elements.len() != truth_units.len() {
        return Err(Error::data("element and unit corpora must align"));
    }
    if est_elements.len() != truth_elements.len() {
        return Err(Error::data(format!(
            "estimated corpus has {} sequences, truth has {}",
            est_elements.len(),
            truth_elements.len()
        )));
    }
    let overlaps = est_elements.iter().zip(est_units).zip(truth_elements.iter().zip(truth_units)).flat_map(
        |((ee, eu), (te, tu))| span_overlaps(&unit_spans(ee, eu), &unit_spans(te, tu)),
    );
    let mapping = fit_mapping(n_est_classes, n_truth_classes, overlaps);

    let per_sequence = est_units
        .iter()
        .zip(truth_units)
        .map(|(eu, tu)| {
            let mapped: Vec<u16> =
                eu.per_element_labels().iter().map(|&b| mapping[b as usize]).collect();
            nld(&mapped, &tu.per_element_labels())
        })
        .collect();
    Ok(EvalScores::new(per_sequence, mapping))
}

/// Per-sequence NLDs plus their mean and the class mapping used.
#[derive(Debug, Clone)]
pub struct EvalScores {
    pub mean_nld: f64,
    pub per_sequence: Vec<f64>,
    pub mapping: Vec<u16>,
}

impl EvalScores {
    fn new(per_sequence: Vec<f64>, mapping: Vec<u16>) -> Self {
        let mean_nld = if per_sequence.is_empty() {
            0.0
        } else {
            per_sequence.iter().sum::<f64>() / per_sequence.len() as f64
        };
        EvalScores { mean_nld, per_sequence, mapping }
    }
}

/// How many distinct unit motions a run produced. Word-segmentation units
/// are identified by their exact element string (the class ids carry no
/// grouping), the count-based formulations by the class ids actually used.
pub fn distinct_unit_count(
    kind: EmissionKind,
    elements: &[ElementSegmentation],
    units: &[UnitSegmentation],
) -> usize {
    match kind {
        EmissionKind::WordSeg => {
            let mut types: BTreeSet<Vec<u16>> = BTreeSet::new();
            for (e, u) in elements.iter().zip(units) {
                let classes = e.class_sequence();
                for seg in &u.segments {
                    types.insert(classes[seg.start..seg.end].to_vec());
                }
            }
            types.len()
        }
        _ => {
            let mut used: BTreeSet<usize> = BTreeSet::new();
            for u in units {
                used.extend(u.segments.iter().map(|s| s.class_id));
            }
            used.len()
        }
    }
}

/// One row of the method-comparison report.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MethodRow {
    pub method: String,
    pub element_nld: f64,
    pub unit_nld: Option<f64>,
    pub distinct_units: Option<usize>,
    /// Best-run selection happens upstream; these are all trials' NLDs.
    pub trial_element_nlds: Vec<f64>,
}

/// Renders rows as a small aligned text table.
pub fn render_table(rows: &[MethodRow]) -> String {
    let mut out = String::from("method\telement_nld\tunit_nld\tdistinct_units\n");
    for r in rows {
        let unit = r.unit_nld.map_or("-".to_string(), |v| format!("{v:.4}"));
        let distinct = r.distinct_units.map_or("-".to_string(), |v| v.to_string());
        out.push_str(&format!(
            "{}\t{:.4}\t{}\t{}\n",
            r.method, r.element_nld, unit, distinct
        ));
    }
    out
}

/// Histogram of NLD values over [0, 1]: `bins` equal-width buckets, with 1.0
/// counted in the last bucket.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    assert!(bins >= 1);
    let width = 1.0 / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let idx = ((v / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (i as f64 * width, (i + 1) as f64 * width, c))
        .collect()
}
