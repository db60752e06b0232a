//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use motionseg::emission::kind_for_mode;
use motionseg::error::{Error, Result};
use motionseg::eval::{self, distinct_unit_count, element_eval, unit_eval, MethodRow};
use motionseg::gp::GpClassModel;
use motionseg::io::{
    read_corpus_csv, read_segmentations_csv, write_corpus_csv, write_segmentations_csv,
    CorpusSchema, SegmentationFile,
};
use motionseg::lower::{backward_sample, forward_filter, GpScorer};
use motionseg::rng::stream;
use motionseg::synth::{generate, paper_shaped, GeneratorConfig};
use motionseg::trainer::{
    select_best, train, Checkpoint, ModelState, TrainOptions, CHECKPOINT_VERSION,
};
use motionseg::types::{Mode, TimeSeries, UnitSegment, UnitSegmentation};
use motionseg::upper::{unit_backward_sample, unit_forward_filter};

use crate::config::RunConfig;
use crate::plot;

/// Per-run results written next to the segmentation output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub seed: u64,
    pub best_restart: usize,
    pub best_loglik: f64,
    pub trial_logliks: Vec<f64>,
    pub element_nld: Option<f64>,
    pub unit_nld: Option<f64>,
    pub distinct_units: Option<usize>,
    pub trial_element_nlds: Vec<f64>,
    pub segmentation_csv: String,
}

pub fn cmd_synth(
    preset: Option<&str>,
    gen_config: Option<&Path>,
    seed: u64,
    noise: Option<f64>,
    fluctuation: Option<f64>,
    sequences: Option<usize>,
    out_dir: &Path,
) -> Result<()> {
    let mut cfg = match (preset, gen_config) {
        (Some("paper-shaped"), None) => paper_shaped(),
        (Some(other), None) => {
            return Err(Error::config(format!("unknown preset {other:?}")));
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str::<GeneratorConfig>(&text)
                .map_err(|e| Error::config(format!("{}: {e}", path.display())))?
        }
        (Some(_), Some(_)) => {
            return Err(Error::config("--preset and --gen-config are mutually exclusive"));
        }
        (None, None) => paper_shaped(),
    };
    if let Some(noise) = noise {
        cfg.noise_sigma = noise;
    }
    if let Some(f) = fluctuation {
        cfg.fluctuation = f;
    }
    if let Some(n) = sequences {
        cfg.sequences = n;
    }

    let out = generate(&cfg, seed)?;
    std::fs::create_dir_all(out_dir)?;
    write_corpus_csv(&out_dir.join("corpus.csv"), &out.corpus)?;
    let units: Vec<Option<UnitSegmentation>> =
        out.truth_units.iter().cloned().map(Some).collect();
    let lens: Vec<usize> = out.corpus.iter().map(|s| s.len()).collect();
    write_segmentations_csv(&out_dir.join("truth.csv"), &out.truth_elements, &units, &lens)?;
    std::fs::write(
        out_dir.join("generator.json"),
        serde_json::to_string_pretty(&cfg)?,
    )?;
    println!(
        "wrote {} sequences ({} samples) to {}",
        out.corpus.len(),
        out.corpus.iter().map(|s| s.len()).sum::<usize>(),
        out_dir.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_train(
    config_path: &Path,
    data: &Path,
    out_dir: &Path,
    mode_override: Option<Mode>,
    truth: Option<&Path>,
    checkpoint_every: Option<usize>,
) -> Result<()> {
    let cfg = RunConfig::load(config_path)?;
    let mode = mode_override.unwrap_or(cfg.mode);
    let h = cfg.effective_hyperparams();
    h.validate()?;
    let (corpus, standardization) = read_corpus_csv(data, &cfg.data)?;

    std::fs::create_dir_all(out_dir)?;
    let options = TrainOptions {
        checkpoint_every,
        checkpoint_dir: checkpoint_every.map(|_| out_dir.to_path_buf()),
        freeze_uniform_prior: false,
    };
    let runs = train(&corpus, &h, mode, &options)?;
    let best = select_best(&runs)?.clone();

    let lens: Vec<usize> = corpus.iter().map(|s| s.len()).collect();
    let seg_path = out_dir.join("segmentation.csv");
    write_segmentations_csv(&seg_path, &best.elements, &best.units, &lens)?;
    Checkpoint { version: CHECKPOINT_VERSION, iteration: h.iterations, model: best.clone() }
        .write(&out_dir.join("checkpoint.json"))?;

    // truth-based scores per restart, when ground truth is available
    let truth_file = truth.map(read_segmentations_csv).transpose()?;
    let scored: Vec<(Option<f64>, Option<f64>)> = runs
        .iter()
        .map(|run| match &truth_file {
            None => (None, None),
            Some(t) => {
                let (e, u) = score_run(run, t, &h).unwrap_or((None, None));
                (e, u)
            }
        })
        .collect();

    let mut trials = csv::Writer::from_path(out_dir.join("trials.csv"))?;
    trials.write_record(["restart", "seed", "final_loglik", "element_nld", "unit_nld"])?;
    for (run, (e_nld, u_nld)) in runs.iter().zip(&scored) {
        trials.write_record([
            run.restart.to_string(),
            run.seed.to_string(),
            format!("{}", run.final_loglik),
            e_nld.map_or(String::new(), |v| format!("{v}")),
            u_nld.map_or(String::new(), |v| format!("{v}")),
        ])?;
    }
    trials.flush()?;

    let mut trace = csv::Writer::from_path(out_dir.join("trace.csv"))?;
    trace.write_record(["iteration", "loglik"])?;
    for (i, ll) in best.loglik_trace.iter().enumerate() {
        trace.write_record([(i + 1).to_string(), format!("{ll}")])?;
    }
    trace.flush()?;

    if let Some(std) = &standardization {
        std::fs::write(
            out_dir.join("standardization.json"),
            serde_json::to_string_pretty(std)?,
        )?;
    }

    let best_idx = runs.iter().position(|r| r.seed == best.seed).unwrap_or(0);
    let distinct = kind_for_mode(mode).map(|kind| {
        let units: Vec<UnitSegmentation> =
            best.units.iter().map(|u| u.clone().expect("mutual mode assigns units")).collect();
        distinct_unit_count(kind, &best.elements, &units)
    });
    let summary = RunSummary {
        mode,
        seed: h.seed,
        best_restart: best.restart,
        best_loglik: best.final_loglik,
        trial_logliks: runs.iter().map(|r| r.final_loglik).collect(),
        element_nld: scored[best_idx].0,
        unit_nld: scored[best_idx].1,
        distinct_units: distinct,
        trial_element_nlds: scored.iter().filter_map(|s| s.0).collect(),
        segmentation_csv: "segmentation.csv".into(),
    };
    std::fs::write(out_dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;

    println!(
        "mode {mode}: best restart {} loglik {:.1}{}",
        best.restart,
        best.final_loglik,
        summary
            .element_nld
            .map_or(String::new(), |v| format!(", element NLD {v:.4}"))
    );
    Ok(())
}

/// Element/unit NLD of one run against a truth segmentation file.
fn score_run(
    run: &motionseg::trainer::TrainedModel,
    truth: &SegmentationFile,
    h: &motionseg::types::Hyperparams,
) -> Result<(Option<f64>, Option<f64>)> {
    let truth_units: Result<Vec<UnitSegmentation>> = truth
        .elements
        .iter()
        .zip(&truth.unit_labels)
        .map(|(e, labels)| {
            let labels = labels
                .as_ref()
                .ok_or_else(|| Error::data("truth file lacks unit labels"))?;
            Ok(units_from_labels(&e.series_id, labels))
        })
        .collect();
    let n_truth_elem = truth
        .elements
        .iter()
        .flat_map(|e| e.segments.iter().map(|s| s.class_id + 1))
        .max()
        .unwrap_or(1);
    let element = element_eval(&run.elements, &truth.elements, h.element_classes, n_truth_elem)?;

    let unit = match (truth_units, run.units.first().map(|u| u.is_some()).unwrap_or(false)) {
        (Ok(tu), true) => {
            let n_truth_units = tu
                .iter()
                .flat_map(|u| u.segments.iter().map(|s| s.class_id + 1))
                .max()
                .unwrap_or(1);
            let est_units: Vec<UnitSegmentation> =
                run.units.iter().map(|u| u.clone().unwrap()).collect();
            Some(
                unit_eval(
                    &run.elements,
                    &est_units,
                    &truth.elements,
                    &tu,
                    h.unit_classes,
                    n_truth_units,
                )?
                .mean_nld,
            )
        }
        _ => None,
    };
    Ok((Some(element.mean_nld), unit))
}

/// Groups adjacent equal per-element labels into unit segments.
pub fn units_from_labels(series_id: &str, labels: &[u16]) -> UnitSegmentation {
    let mut segments = Vec::new();
    let mut start = 0usize;
    for j in 1..=labels.len() {
        if j == labels.len() || labels[j] != labels[start] {
            segments.push(UnitSegment { start, end: j, class_id: labels[start] as usize });
            start = j;
        }
    }
    UnitSegmentation { series_id: series_id.into(), segments }
}

pub fn cmd_segment(
    checkpoint: &Path,
    data: &Path,
    out: &Path,
    seed: u64,
    schema: &CorpusSchema,
) -> Result<()> {
    let ckpt = Checkpoint::read(checkpoint)?;
    let state: &ModelState = &ckpt.model.state;
    let h = &state.hyperparams;
    let (corpus, _) = read_corpus_csv(data, schema)?;
    for s in &corpus {
        if s.dims() != state.dims {
            return Err(Error::data(format!(
                "sequence {:?} has {} dimensions, checkpoint expects {}",
                s.id,
                s.dims(),
                state.dims
            )));
        }
    }

    // rebuild frozen GP models and transition tables
    let mut gps: Vec<GpClassModel> = (0..h.element_classes)
        .map(|c| {
            let mut gp = GpClassModel::new(
                h.kernel,
                state.dims,
                h.gp_cap,
                h.var_floor,
                motionseg::rng::child_seed(seed, &[c as u64]),
            );
            for seg in &state.gp_segments[c] {
                gp.add_segment(seg.clone());
            }
            gp
        })
        .collect();
    let tables: Vec<_> = gps.iter_mut().map(|g| g.prediction_table(h.max_element_len)).collect();
    let trans = state.element_transitions.log_probs(h.transition_smoothing);
    let duration =
        motionseg::duration::DurationModel::new(h.element_duration_mean, h.max_element_len)?;

    let mut elements = Vec::with_capacity(corpus.len());
    let mut units: Vec<Option<UnitSegmentation>> = Vec::with_capacity(corpus.len());
    for (i, series) in corpus.iter().enumerate() {
        // decode with a uniform class prior: new data has no previous
        // alignment to map unit contexts from
        let prior = motionseg::emission::SequencePrior::uniform(series.len(), h.element_classes);
        let scorer = GpScorer::new(series, &tables, h.max_element_len);
        let lattice = forward_filter(&scorer, &duration, &trans, &prior)?;
        let mut rng = stream(seed, &[1, i as u64]);
        let seg = backward_sample(&lattice, &trans, &prior, &series.id, &mut rng)?;

        let unit = match (&state.emission, &state.unit_transitions) {
            (Some(em), Some(ut)) => {
                let classes = seg.class_sequence();
                let utrans = ut.log_probs(h.transition_smoothing);
                let udur =
                    motionseg::duration::DurationModel::new(h.unit_duration_mean, h.max_unit_len)?;
                let lattice = unit_forward_filter(&classes, em, &utrans, &udur)?;
                let mut rng = stream(seed, &[2, i as u64]);
                Some(unit_backward_sample(&lattice, &utrans, &series.id, &mut rng)?)
            }
            _ => None,
        };
        elements.push(seg);
        units.push(unit);
    }

    let lens: Vec<usize> = corpus.iter().map(|s| s.len()).collect();
    write_segmentations_csv(out, &elements, &units, &lens)?;
    println!("segmented {} sequences into {}", corpus.len(), out.display());
    Ok(())
}

pub fn cmd_eval(est: &[(String, PathBuf)], truth: &Path, out: &Path) -> Result<()> {
    let truth_file = read_segmentations_csv(truth)?;
    let truth_units: Vec<Option<UnitSegmentation>> = truth_file
        .elements
        .iter()
        .zip(&truth_file.unit_labels)
        .map(|(e, l)| l.as_ref().map(|labels| units_from_labels(&e.series_id, labels)))
        .collect();
    let n_truth_elem = truth_file
        .elements
        .iter()
        .flat_map(|e| e.segments.iter().map(|s| s.class_id + 1))
        .max()
        .unwrap_or(1);

    let mut rows = Vec::new();
    for (label, path) in est {
        let est_file = read_segmentations_csv(path)?;
        let n_est = est_file
            .elements
            .iter()
            .flat_map(|e| e.segments.iter().map(|s| s.class_id + 1))
            .max()
            .unwrap_or(1);
        let element = element_eval(&est_file.elements, &truth_file.elements, n_est, n_truth_elem)?;

        let have_units = est_file.unit_labels.iter().all(|l| l.is_some())
            && truth_units.iter().all(|u| u.is_some());
        let unit_nld = if have_units {
            let est_units: Vec<UnitSegmentation> = est_file
                .elements
                .iter()
                .zip(&est_file.unit_labels)
                .map(|(e, l)| units_from_labels(&e.series_id, l.as_ref().unwrap()))
                .collect();
            let tu: Vec<UnitSegmentation> =
                truth_units.iter().map(|u| u.clone().unwrap()).collect();
            let n_est_units = est_units
                .iter()
                .flat_map(|u| u.segments.iter().map(|s| s.class_id + 1))
                .max()
                .unwrap_or(1);
            let n_tu = tu
                .iter()
                .flat_map(|u| u.segments.iter().map(|s| s.class_id + 1))
                .max()
                .unwrap_or(1);
            Some(
                unit_eval(&est_file.elements, &est_units, &truth_file.elements, &tu, n_est_units, n_tu)?
                    .mean_nld,
            )
        } else {
            None
        };
        rows.push(MethodRow {
            method: label.clone(),
            element_nld: element.mean_nld,
            unit_nld,
            distinct_units: None,
            trial_element_nlds: vec![element.mean_nld],
        });
    }

    let mut writer = csv::Writer::from_path(out)?;
    writer.write_record(["method", "element_nld", "unit_nld"])?;
    for r in &rows {
        writer.write_record([
            r.method.clone(),
            format!("{:.6}", r.element_nld),
            r.unit_nld.map_or(String::new(), |v| format!("{v:.6}")),
        ])?;
    }
    writer.flush()?;
    print!("{}", eval::render_table(&rows));
    Ok(())
}

pub fn cmd_report(run_dirs: &[PathBuf], out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut rows = Vec::new();
    for dir in run_dirs {
        let summary: RunSummary =
            serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json"))?)?;
        let mode = summary.mode.to_string();

        // histogram of per-trial element NLDs
        let bins = eval::histogram(&summary.trial_element_nlds, 20);
        let mut w = csv::Writer::from_path(out_dir.join(format!("histogram_{mode}.csv")))?;
        w.write_record(["bin_lo", "bin_hi", "count"])?;
        for &(lo, hi, c) in &bins {
            w.write_record([format!("{lo:.2}"), format!("{hi:.2}"), c.to_string()])?;
        }
        w.flush()?;
        plot::histogram_png(&out_dir.join(format!("histogram_{mode}.png")), &bins)?;

        // timeline from the best run's segmentation
        let seg_file = read_segmentations_csv(&dir.join(&summary.segmentation_csv))?;
        let mut timeline_rows: Vec<(String, Vec<(usize, usize, usize)>)> = Vec::new();
        let mut w = csv::Writer::from_path(out_dir.join(format!("timeline_{mode}.csv")))?;
        w.write_record(["sequence_id", "start", "end", "class"])?;
        for (e, labels) in seg_file.elements.iter().zip(&seg_file.unit_labels) {
            let spans: Vec<(usize, usize, usize)> = match labels {
                Some(labels) => {
                    // contiguous unit intervals in sample coordinates
                    let units = units_from_labels(&e.series_id, labels);
                    units
                        .segments
                        .iter()
                        .map(|u| {
                            (
                                e.segments[u.start].start,
                                e.segments[u.end - 1].end,
                                u.class_id,
                            )
                        })
                        .collect()
                }
                None => e.segments.iter().map(|s| (s.start, s.end, s.class_id)).collect(),
            };
            for &(start, end, class) in &spans {
                w.write_record([
                    e.series_id.clone(),
                    start.to_string(),
                    end.to_string(),
                    class.to_string(),
                ])?;
            }
            timeline_rows.push((e.series_id.clone(), spans));
        }
        w.flush()?;
        plot::timeline_png(&out_dir.join(format!("timeline_{mode}.png")), &timeline_rows)?;

        rows.push(MethodRow {
            method: mode,
            element_nld: summary.element_nld.unwrap_or(f64::NAN),
            unit_nld: summary.unit_nld,
            distinct_units: summary.distinct_units,
            trial_element_nlds: summary.trial_element_nlds.clone(),
        });
    }

    let table = eval::render_table(&rows);
    std::fs::write(out_dir.join("report.txt"), &table)?;
    print!("{table}");
    Ok(())
}

/// Parses repeated `label=path` arguments.
pub fn parse_labeled_paths(values: &[String]) -> Result<Vec<(String, PathBuf)>> {
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for v in values {
        let (label, path) = v
            .split_once('=')
            .ok_or_else(|| Error::config(format!("expected label=path, got {v:?}")))?;
        if seen.insert(label.to_string(), ()).is_some() {
            return Err(Error::config(format!("duplicate label {label:?}")));
        }
        out.push((label.to_string(), PathBuf::from(path)));
    }
    Ok(out)
}
