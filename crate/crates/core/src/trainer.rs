//! Training orchestration: alternating lower- and upper-layer Gibbs sweeps
//! with the upper layer's composition statistics fed back as the lower
//! layer's class prior, over independent restarts.
//!
//! Every restart derives all of its randomness from one child seed, with
//! separate streams per (phase, iteration, sequence), so the lower pass draws
//! identical values whether or not an upper pass runs between sweeps.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emission::{ElementPrior, EmissionCounts, SequencePrior};
use crate::error::{Error, Result};
use crate::gp::SegmentData;
use crate::lower::{random_segmentation, LowerState};
use crate::rng::{child_seed, stream};
use crate::transition::TransitionCounts;
use crate::types::{ElementSegmentation, Hyperparams, Mode, TimeSeries, UnitSegmentation};
use crate::upper::UpperState;

const INIT_STREAM: u64 = 1;
const LOWER_STREAM: u64 = 2;
const UPPER_STREAM: u64 = 3;
const RESTART_STREAM: u64 = 4;

/// Knobs that affect how a run executes but not what it models.
#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Write a checkpoint every N iterations (plus the final one).
    pub checkpoint_every: Option<usize>,
    pub checkpoint_dir: Option<PathBuf>,
    /// Keep the element prior uniform even in mutual modes; the upper layer
    /// still runs. With matched seeds the lower layer then reproduces the
    /// lower-only baseline exactly.
    pub freeze_uniform_prior: bool,
}

/// Serializable model state: everything needed to rebuild the samplers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelState {
    pub hyperparams: Hyperparams,
    pub mode: Mode,
    pub dims: usize,
    /// GP training segments per element class.
    pub gp_segments: Vec<Vec<SegmentData>>,
    pub element_transitions: TransitionCounts,
    pub unit_transitions: Option<TransitionCounts>,
    pub emission: Option<EmissionCounts>,
}

/// One completed training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModel {
    pub mode: Mode,
    pub restart: usize,
    pub seed: u64,
    /// Joint log likelihood (lower + upper path scores) per iteration.
    pub loglik_trace: Vec<f64>,
    pub final_loglik: f64,
    pub elements: Vec<ElementSegmentation>,
    pub units: Vec<Option<UnitSegmentation>>,
    pub state: ModelState,
}

/// Versioned on-disk snapshot of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub iteration: usize,
    pub model: TrainedModel,
}

pub const CHECKPOINT_VERSION: u32 = 1;

impl Checkpoint {
    pub fn write(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let ckpt: Checkpoint = serde_json::from_reader(std::io::BufReader::new(file))?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::config(format!(
                "checkpoint version {} unsupported (expected {})",
                ckpt.version, CHECKPOINT_VERSION
            )));
        }
        Ok(ckpt)
    }
}

fn corpus_dims(corpus: &[TimeSeries]) -> Result<usize> {
    let Some(first) = corpus.first() else {
        return Err(Error::data("corpus is empty"));
    };
    let dims = first.dims();
    for s in corpus {
        if s.dims() != dims {
            return Err(Error::data(format!(
                "sequence {:?} has {} dimensions, expected {dims}",
                s.id,
                s.dims()
            )));
        }
    }
    Ok(dims)
}

/// Runs one restart of the mutual-update loop.
pub fn train_single(
    corpus: &[TimeSeries],
    h: &Hyperparams,
    mode: Mode,
    restart: usize,
    run_seed: u64,
    options: &TrainOptions,
) -> Result<TrainedModel> {
    h.validate()?;
    let dims = corpus_dims(corpus)?;
    let n = corpus.len();

    let mut lower = LowerState::new(h, dims, n, run_seed)?;
    for (i, series) in corpus.iter().enumerate() {
        let mut rng = stream(run_seed, &[INIT_STREAM, i as u64]);
        let seg = random_segmentation(
            &series.id,
            series.len(),
            h.max_element_len,
            h.element_classes,
            h.element_duration_mean,
            &mut rng,
        );
        lower.set_assignment(i, series, seg);
    }

    let mut upper = match crate::emission::kind_for_mode(mode) {
        None => None,
        Some(kind) => Some(UpperState::new(h, kind, n)?),
    };

    let mut priors: Vec<SequencePrior> = corpus
        .iter()
        .map(|s| SequencePrior::uniform(s.len(), h.element_classes))
        .collect();
    let mut trace = Vec::with_capacity(h.iterations);

    for m in 1..=h.iterations {
        let mut lower_total = 0.0;
        for (i, series) in corpus.iter().enumerate() {
            let mut rng = stream(run_seed, &[LOWER_STREAM, m as u64, i as u64]);
            lower_total += lower
                .resample_sequence(i, series, &priors[i], &mut rng)
                .map_err(|e| Error::Train {
                    sequence: series.id.clone(),
                    iteration: m,
                    source: Box::new(e),
                })?;
        }

        let mut upper_total = 0.0;
        if let Some(upper) = upper.as_mut() {
            for (i, series) in corpus.iter().enumerate() {
                let classes = lower
                    .assignment(i)
                    .expect("lower pass assigns every sequence")
                    .class_sequence();
                let mut rng = stream(run_seed, &[UPPER_STREAM, m as u64, i as u64]);
                upper_total += upper
                    .resample_unit_sequence(i, &classes, &series.id, &mut rng)
                    .map_err(|e| Error::Train {
                        sequence: series.id.clone(),
                        iteration: m,
                        source: Box::new(e),
                    })?;
            }
            if !options.freeze_uniform_prior {
                let element_prior: ElementPrior = upper.emission().element_prior();
                priors = corpus
                    .iter()
                    .enumerate()
                    .map(|(i, series)| {
                        let elements = lower.assignment(i).unwrap();
                        let (_, units) = upper.assignment(i).unwrap();
                        SequencePrior::from_alignment(
                            &element_prior,
                            elements,
                            units,
                            series.len(),
                        )
                    })
                    .collect();
            }
        }

        trace.push(lower_total + upper_total);

        if let (Some(every), Some(dir)) = (options.checkpoint_every, options.checkpoint_dir.as_ref())
        {
            if every > 0 && (m % every == 0 || m == h.iterations) {
                let model = snapshot(h, mode, restart, run_seed, dims, &lower, upper.as_ref(), &trace);
                std::fs::create_dir_all(dir)?;
                let path = dir.join(format!("checkpoint_r{restart:02}_m{m:03}.json"));
                Checkpoint { version: CHECKPOINT_VERSION, iteration: m, model }.write(&path)?;
            }
        }
    }

    Ok(snapshot(h, mode, restart, run_seed, dims, &lower, upper.as_ref(), &trace))
}

#[allow(clippy::too_many_arguments)]
fn snapshot(
    h: &Hyperparams,
    mode: Mode,
    restart: usize,
    run_seed: u64,
    dims: usize,
    lower: &LowerState,
    upper: Option<&UpperState>,
    trace: &[f64],
) -> TrainedModel {
    let n = lower.n_sequences();
    let elements: Vec<ElementSegmentation> =
        (0..n).map(|i| lower.assignment(i).unwrap().clone()).collect();
    let units: Vec<Option<UnitSegmentation>> = (0..n)
        .map(|i| upper.and_then(|u| u.assignment(i).map(|(_, seg)| seg.clone())))
        .collect();
    let gp_segments = lower.gp_training_segments();
    TrainedModel {
        mode,
        restart,
        seed: run_seed,
        loglik_trace: trace.to_vec(),
        final_loglik: trace.last().copied().unwrap_or(f64::NEG_INFINITY),
        elements,
        units,
        state: ModelState {
            hyperparams: h.clone(),
            mode,
            dims,
            gp_segments,
            element_transitions: lower.transitions().clone(),
            unit_transitions: upper.map(|u| u.transitions().clone()),
            emission: upper.map(|u| u.emission().clone()),
        },
    }
}

/// All restarts of one mode, in parallel; seeds derive from `h.seed`.
pub fn train(
    corpus: &[TimeSeries],
    h: &Hyperparams,
    mode: Mode,
    options: &TrainOptions,
) -> Result<Vec<TrainedModel>> {
    h.validate()?;
    (0..h.restarts)
        .into_par_iter()
        .map(|restart| {
            let run_seed = child_seed(h.seed, &[RESTART_STREAM, restart as u64]);
            train_single(corpus, h, mode, restart, run_seed, options)
        })
        .collect()
}

/// The run with the highest final joint log likelihood; ties break toward
/// the lowest seed.
pub fn select_best(runs: &[TrainedModel]) -> Result<&TrainedModel> {
    runs.iter()
        .reduce(|best, run| {
            if run.final_loglik > best.final_loglik
                || (run.final_loglik == best.final_loglik && run.seed < best.seed)
            {
                run
            } else {
                best
            }
        })
        .ok_or_else(|| Error::data("select_best: no runs"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, GeneratorConfig};

    fn tiny_corpus(seed: u64) -> Vec<TimeSeries> {
        let cfg = GeneratorConfig {
            dims: 1,
            element_classes: 3,
            units: vec![vec![0, 1], vec![2]],
            sequence_units: vec![0, 1],
            sequences: 3,
            workers: 1,
            worker_speed: vec![1.0],
            element_duration_mean: vec![6.0, 6.0, 6.0],
            duration_range: (3, 10),
            noise_sigma: 0.05,
            ..Default::default()
        };
        generate(&cfg, seed).unwrap().corpus
    }

    fn tiny_params() -> Hyperparams {
        Hyperparams {
            element_classes: 3,
            unit_classes: 2,
            max_element_len: 12,
            max_unit_len: 3,
            element_duration_mean: 6.0,
            unit_duration_mean: 1.5,
            iterations: 3,
            restarts: 2,
            gp_cap: 80,
            ..Default::default()
        }
    }

    #[test]
    fn lower_only_single_iteration_keeps_prior_uniform() {
        let corpus = tiny_corpus(1);
        let h = Hyperparams { iterations: 1, ..tiny_params() };
        let model =
            train_single(&corpus, &h, Mode::LowerOnly, 0, 7, &TrainOptions::default()).unwrap();
        assert_eq!(model.loglik_trace.len(), 1);
        assert!(model.units.iter().all(|u| u.is_none()));
        assert!(model.state.emission.is_none());
    }

    #[test]
    fn training_is_deterministic() {
        let corpus = tiny_corpus(2);
        let h = tiny_params();
        let opts = TrainOptions::default();
        let a = train_single(&corpus, &h, Mode::ElementUnigram, 0, 7, &opts).unwrap();
        let b = train_single(&corpus, &h, Mode::ElementUnigram, 0, 7, &opts).unwrap();
        assert_eq!(a.elements, b.elements);
        assert_eq!(a.units, b.units);
        assert_eq!(a.loglik_trace, b.loglik_trace);
    }

    #[test]
    fn trace_is_finite_everywhere() {
        let corpus = tiny_corpus(3);
        let h = tiny_params();
        for mode in Mode::ALL {
            let model =
                train_single(&corpus, &h, mode, 0, 11, &TrainOptions::default()).unwrap();
            assert_eq!(model.loglik_trace.len(), h.iterations);
            assert!(model.loglik_trace.iter().all(|v| v.is_finite()), "{mode:?}");
        }
    }

    #[test]
    fn frozen_uniform_prior_reproduces_lower_only() {
        // With per-(phase, iteration, sequence) RNG streams, a mutual run
        // whose prior never leaves uniform must sample exactly the element
        // segmentations of the lower-only baseline.
        let corpus = tiny_corpus(4);
        let h = tiny_params();
        let baseline =
            train_single(&corpus, &h, Mode::LowerOnly, 0, 13, &TrainOptions::default()).unwrap();
        let frozen = train_single(
            &corpus,
            &h,
            Mode::ElementUnigram,
            0,
            13,
            &TrainOptions { freeze_uniform_prior: true, ..Default::default() },
        )
        .unwrap();
        assert_eq!(baseline.elements, frozen.elements);
    }

    #[test]
    fn select_best_picks_highest_then_lowest_seed() {
        let corpus = tiny_corpus(5);
        let h = Hyperparams { iterations: 1, ..tiny_params() };
        let mk = |seed: u64, ll: f64| {
            let mut m =
                train_single(&corpus, &h, Mode::LowerOnly, 0, seed, &TrainOptions::default())
                    .unwrap();
            m.final_loglik = ll;
            m
        };
        let runs = vec![mk(1, -10.0), mk(2, -5.0), mk(3, -7.0)];
        assert_eq!(select_best(&runs).unwrap().seed, 2);
        let single = vec![mk(9, -1.0)];
        assert_eq!(select_best(&single).unwrap().seed, 9);
        let tied = vec![mk(7, -2.0), mk(3, -2.0)];
        assert_eq!(select_best(&tied).unwrap().seed, 3);
        assert!(select_best(&[]).is_err());
    }

    #[test]
    fn parallel_restarts_match_sequential_single_runs() {
        let corpus = tiny_corpus(6);
        let h = tiny_params();
        let runs = train(&corpus, &h, Mode::WordSeg, &TrainOptions::default()).unwrap();
        assert_eq!(runs.len(), h.restarts);
        for (r, run) in runs.iter().enumerate() {
            let seed = child_seed(h.seed, &[RESTART_STREAM, r as u64]);
            assert_eq!(run.seed, seed);
            let solo =
                train_single(&corpus, &h, Mode::WordSeg, r, seed, &TrainOptions::default())
                    .unwrap();
            assert_eq!(run.elements, solo.elements);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let corpus = tiny_corpus(8);
        let h = Hyperparams { iterations: 2, ..tiny_params() };
        let dir = tempfile::tempdir().unwrap();
        let opts = TrainOptions {
            checkpoint_every: Some(1),
            checkpoint_dir: Some(dir.path().to_path_buf()),
            ..Default::default()
        };
        let model = train_single(&corpus, &h, Mode::ElementBigram, 0, 3, &opts).unwrap();
        let path = dir.path().join("checkpoint_r00_m002.json");
        let ckpt = Checkpoint::read(&path).unwrap();
        assert_eq!(ckpt.iteration, 2);
        assert_eq!(ckpt.model.elements, model.elements);
        assert_eq!(ckpt.model.state.emission, model.state.emission);
    }
}
