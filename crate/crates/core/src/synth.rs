//! Synthetic corpus generator with exact ground truth.
//!
//! Sequences are built top-down: a fixed order of unit motions, each unit a
//! canonical string of element classes, each element instance rendered from
//! a smooth per-class prototype curve stretched to a jittered duration, plus
//! white observation noise. A fluctuation rate randomly substitutes or swaps
//! elements inside a unit, emulating behavioral variation — the unit's role
//! (and its ground-truth label) is unchanged by fluctuation.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::rng::stream;
use crate::types::{
    ElementSegment, ElementSegmentation, TimeSeries, UnitSegment, UnitSegmentation,
};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub dims: usize,
    pub rate_hz: f64,
    /// Number of distinct element prototypes.
    pub element_classes: usize,
    /// Canonical element string per unit class.
    pub units: Vec<Vec<u16>>,
    /// Unit class order within every sequence.
    pub sequence_units: Vec<usize>,
    pub sequences: usize,
    pub workers: usize,
    /// Per-worker tempo multiplier applied to element durations.
    pub worker_speed: Vec<f64>,
    /// Mean element duration in samples, per element class.
    pub element_duration_mean: Vec<f64>,
    /// Per-instance durations are clamped into this range.
    pub duration_range: (usize, usize),
    /// Sequences outside this total-length range are redrawn.
    pub length_range: Option<(usize, usize)>,
    pub noise_sigma: f64,
    /// Per-element probability of fluctuation (half substitution, half swap).
    pub fluctuation: f64,
    /// Sinusoid components per prototype curve.
    pub harmonics: usize,
    /// Pairs of element classes rendered as near-copies of each other;
    /// `confusion_scale` sets how far the copy drifts from the original.
    pub confusable_pairs: Vec<(u16, u16)>,
    pub confusion_scale: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            dims: 2,
            rate_hz: 5.0,
            element_classes: 4,
            units: vec![vec![0, 1], vec![2, 3]],
            sequence_units: vec![0, 1],
            sequences: 8,
            workers: 1,
            worker_speed: vec![1.0],
            element_duration_mean: vec![10.0; 4],
            duration_range: (4, 30),
            length_range: None,
            noise_sigma: 0.05,
            fluctuation: 0.0,
            harmonics: 3,
            confusable_pairs: Vec::new(),
            confusion_scale: 0.3,
        }
    }
}

/// The shape of the assembly-work recordings: 3 workers × 36 cycles of a
/// 12-step procedure over 8 element classes grouped into 3 unit motions,
/// sampled at 5 Hz. Element classes reused across units (screw pick/fix) and
/// a confusable counterpart per first-unit class give the unit context
/// something real to disambiguate.
pub fn paper_shaped() -> GeneratorConfig {
    GeneratorConfig {
        dims: 6,
        rate_hz: 5.0,
        element_classes: 8,
        // procedure 1,2,3 | 4,5,4,5,4,5 | 6,7,8 (0-based labels)
        units: vec![vec![0, 1, 2], vec![3, 4, 3, 4, 3, 4], vec![5, 6, 7]],
        sequence_units: vec![0, 1, 2],
        sequences: 108,
        workers: 3,
        worker_speed: vec![0.9, 1.0, 1.15],
        element_duration_mean: vec![16.0, 14.0, 18.0, 12.0, 20.0, 16.0, 14.0, 18.0],
        duration_range: (5, 34),
        // 29–65 s at 5 Hz
        length_range: Some((145, 325)),
        noise_sigma: 0.1,
        fluctuation: 0.0,
        harmonics: 3,
        confusable_pairs: vec![(0, 5), (1, 6), (2, 7)],
        confusion_scale: 0.35,
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<&Self> {
        if self.dims == 0 {
            return Err(Error::config("generator: dims must be ≥ 1"));
        }
        if self.element_classes == 0 {
            return Err(Error::config("generator: element_classes must be ≥ 1"));
        }
        if self.units.is_empty() || self.units.iter().any(|u| u.is_empty()) {
            return Err(Error::config("generator: every unit needs ≥ 1 element"));
        }
        for (i, unit) in self.units.iter().enumerate() {
            if let Some(&c) = unit.iter().find(|&&c| c as usize >= self.element_classes) {
                return Err(Error::config(format!(
                    "generator: unit {i} references element class {c} ≥ {}",
                    self.element_classes
                )));
            }
        }
        if self.sequence_units.iter().any(|&u| u >= self.units.len()) {
            return Err(Error::config("generator: sequence_units references unknown unit"));
        }
        if self.sequence_units.is_empty() {
            return Err(Error::config("generator: sequence_units is empty"));
        }
        if self.sequences == 0 || self.workers == 0 {
            return Err(Error::config("generator: sequences and workers must be ≥ 1"));
        }
        if self.worker_speed.len() != self.workers {
            return Err(Error::config("generator: worker_speed length must equal workers"));
        }
        if self.element_duration_mean.len() != self.element_classes {
            return Err(Error::config(
                "generator: element_duration_mean length must equal element_classes",
            ));
        }
        if self.element_duration_mean.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::config("generator: durations must be > 0"));
        }
        if self.duration_range.0 == 0 || self.duration_range.0 > self.duration_range.1 {
            return Err(Error::config("generator: bad duration_range"));
        }
        if !(0.0..=1.0).contains(&self.fluctuation) {
            return Err(Error::config("generator: fluctuation must be in [0, 1]"));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::config("generator: noise_sigma must be ≥ 0"));
        }
        if self.harmonics == 0 {
            return Err(Error::config("generator: harmonics must be ≥ 1"));
        }
        for &(a, b) in &self.confusable_pairs {
            if a as usize >= self.element_classes || b as usize >= self.element_classes || a == b {
                return Err(Error::config("generator: bad confusable pair"));
            }
        }
        Ok(self)
    }
}

/// One prototype curve per (class, dim): a short sum of sinusoids over
/// normalized within-element phase u ∈ [0, 1], RMS-normalized to ~1.
#[derive(Debug, Clone)]
pub struct Prototypes {
    dims: usize,
    harmonics: usize,
    /// coefficients[((class * dims) + dim) * harmonics + h] = (amp, phase)
    coefficients: Vec<(f64, f64)>,
}

impl Prototypes {
    fn build(cfg: &GeneratorConfig, seed: u64) -> Self {
        let n = cfg.element_classes;
        let dims = cfg.dims;
        let h_n = cfg.harmonics;
        let mut coefficients = vec![(0.0, 0.0); n * dims * h_n];
        for class in 0..n {
            let mut rng = stream(seed, &[0, class as u64]);
            for d in 0..dims {
                let base = (class * dims + d) * h_n;
                let mut rms = 0.0;
                for h in 0..h_n {
                    let amp: f64 = rng.gen_range(-1.0..1.0) / (h + 1) as f64;
                    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                    coefficients[base + h] = (amp, phase);
                    rms += 0.5 * amp * amp;
                }
                let scale = 1.0 / rms.sqrt().max(1e-6);
                for h in 0..h_n {
                    coefficients[base + h].0 *= scale;
                }
            }
        }
        // Confusable pairs: the second class of a pair copies the first with
        // amplitude and phase offsets of scale `confusion_scale`.
        for &(a, b) in &cfg.confusable_pairs {
            let mut rng = stream(seed, &[1, a as u64, b as u64]);
            for d in 0..dims {
                let src = (a as usize * dims + d) * h_n;
                let dst = (b as usize * dims + d) * h_n;
                for h in 0..h_n {
                    let (amp, phase) = coefficients[src + h];
                    let d_amp: f64 =
                        rng.gen_range(-1.0..1.0) / (h + 1) as f64 * cfg.confusion_scale;
                    let d_phase: f64 = rng.gen_range(-0.5..0.5) * cfg.confusion_scale;
                    coefficients[dst + h] = (amp + d_amp, phase + d_phase);
                }
            }
        }
        Prototypes { dims, harmonics: h_n, coefficients }
    }

    /// Prototype value for `class`/`dim` at normalized phase `u ∈ [0, 1]`.
    pub fn value(&self, class: usize, dim: usize, u: f64) -> f64 {
        let base = (class * self.dims + dim) * self.harmonics;
        let mut v = 0.0;
        for h in 0..self.harmonics {
            let (amp, phase) = self.coefficients[base + h];
            v += amp * (std::f64::consts::PI * (h + 1) as f64 * u + phase).sin();
        }
        v
    }
}

/// A generated corpus with its exact ground truth.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub corpus: Vec<TimeSeries>,
    pub truth_elements: Vec<ElementSegmentation>,
    pub truth_units: Vec<UnitSegmentation>,
    pub prototypes: Prototypes,
}

/// Generates a corpus under `cfg`, deterministically in `seed`.
pub fn generate(cfg: &GeneratorConfig, seed: u64) -> Result<SynthCorpus> {
    cfg.validate()?;
    let prototypes = Prototypes::build(cfg, seed);
    let mut corpus = Vec::with_capacity(cfg.sequences);
    let mut truth_elements = Vec::with_capacity(cfg.sequences);
    let mut truth_units = Vec::with_capacity(cfg.sequences);

    let per_worker = cfg.sequences.div_ceil(cfg.workers);
    for s in 0..cfg.sequences {
        let worker = (s / per_worker).min(cfg.workers - 1);
        let speed = cfg.worker_speed[worker];
        let mut rng = stream(seed, &[2, s as u64]);
        let id = format!("seq{:03}", s);

        // element plan: (class, duration, unit position) — redraw whole
        // sequences whose total length falls outside the configured range
        let mut plan: Vec<(u16, usize)> = Vec::new();
        let mut unit_lens: Vec<(usize, usize)> = Vec::new(); // (unit class, n elements)
        for attempt in 0..200 {
            plan.clear();
            unit_lens.clear();
            for &u in &cfg.sequence_units {
                let mut string: Vec<u16> = cfg.units[u].clone();
                apply_fluctuation(&mut string, cfg, &mut rng);
                unit_lens.push((u, string.len()));
                for &class in &string {
                    let mean = cfg.element_duration_mean[class as usize] * speed;
                    let dur = Poisson::new(mean).unwrap().sample(&mut rng) as usize;
                    let dur = dur.clamp(cfg.duration_range.0, cfg.duration_range.1);
                    plan.push((class, dur));
                }
            }
            let total: usize = plan.iter().map(|&(_, d)| d).sum();
            match cfg.length_range {
                Some((lo, hi)) if total < lo || total > hi => {
                    if attempt == 199 {
                        return Err(Error::config(
                            "generator: could not draw a sequence inside length_range; \
                             durations and range are inconsistent",
                        ));
                    }
                }
                _ => break,
            }
        }

        let total: usize = plan.iter().map(|&(_, d)| d).sum();
        let noise = Normal::new(0.0, cfg.noise_sigma.max(1e-300)).unwrap();
        let mut values = Vec::with_capacity(total * cfg.dims);
        let mut elements = Vec::with_capacity(plan.len());
        let mut cursor = 0usize;
        for &(class, dur) in &plan {
            for i in 0..dur {
                let u = if dur == 1 { 0.5 } else { i as f64 / (dur - 1) as f64 };
                for d in 0..cfg.dims {
                    let mut v = prototypes.value(class as usize, d, u);
                    if cfg.noise_sigma > 0.0 {
                        v += noise.sample(&mut rng);
                    }
                    values.push(v);
                }
            }
            elements.push(ElementSegment { start: cursor, end: cursor + dur, class_id: class as usize });
            cursor += dur;
        }

        let mut units = Vec::with_capacity(unit_lens.len());
        let mut elem_cursor = 0usize;
        for &(u, n_elems) in &unit_lens {
            units.push(UnitSegment { start: elem_cursor, end: elem_cursor + n_elems, class_id: u });
            elem_cursor += n_elems;
        }

        corpus.push(TimeSeries::new(id.clone(), cfg.rate_hz, cfg.dims, values)?);
        truth_elements.push(ElementSegmentation::new(id.clone(), elements, total)?);
        truth_units.push(UnitSegmentation::new(id, units, plan.len())?);
    }

    Ok(SynthCorpus { corpus, truth_elements, truth_units, prototypes })
}

/// Substitutes or swaps elements inside one unit occurrence.
fn apply_fluctuation<R: Rng>(string: &mut [u16], cfg: &GeneratorConfig, rng: &mut R) {
    if cfg.fluctuation <= 0.0 {
        return;
    }
    for i in 0..string.len() {
        let u: f64 = rng.gen();
        if u < cfg.fluctuation / 2.0 {
            // substitute with a different class
            let mut pick = rng.gen_range(0..cfg.element_classes - 1) as u16;
            if pick >= string[i] {
                pick += 1;
            }
            string[i] = pick;
        } else if u < cfg.fluctuation && i + 1 < string.len() {
            string.swap(i, i + 1);
        }
    }
}
