//! External file formats.
//!
//! Corpus CSV: a header row with a sequence-id column, an optional time
//! column, and one column per value dimension; rows of one sequence are
//! contiguous. Segmentation CSV: `sequence_id,start,end,element_class,
//! unit_class`, one row per element segment, with `unit_class` empty when no
//! upper layer ran. Synthetic ground truth uses the same segmentation schema,
//! so evaluation needs no adapters.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ElementSegment, ElementSegmentation, TimeSeries, UnitSegmentation};

/// How to interpret a corpus CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSchema {
    pub id_column: String,
    /// Optional column to skip (timestamps are implied by the rate).
    pub time_column: Option<String>,
    pub rate_hz: f64,
    /// Z-score each dimension over the whole corpus after loading.
    pub standardize: bool,
}

impl Default for CorpusSchema {
    fn default() -> Self {
        CorpusSchema {
            id_column: "sequence_id".into(),
            time_column: Some("time".into()),
            rate_hz: 5.0,
            standardize: false,
        }
    }
}

/// Per-dimension corpus statistics recorded when standardization is applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std_dev: Vec<f64>,
}

/// Reads a corpus CSV; sequences appear in first-occurrence order.
pub fn read_corpus_csv(
    path: &Path,
    schema: &CorpusSchema,
) -> Result<(Vec<TimeSeries>, Option<Standardization>)> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let id_idx = headers
        .iter()
        .position(|h| h == schema.id_column)
        .ok_or_else(|| Error::data(format!("missing id column {:?}", schema.id_column)))?;
    let time_idx = match &schema.time_column {
        Some(name) => headers.iter().position(|h| h == name.as_str()),
        None => None,
    };
    let value_cols: Vec<usize> = (0..headers.len())
        .filter(|&i| i != id_idx && Some(i) != time_idx)
        .collect();
    if value_cols.is_empty() {
        return Err(Error::data("corpus CSV has no value columns"));
    }
    let dims = value_cols.len();

    let mut order: Vec<String> = Vec::new();
    let mut data: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let id = record
            .get(id_idx)
            .ok_or_else(|| Error::data(format!("row {}: missing id", row_idx + 2)))?
            .to_string();
        if !data.contains_key(&id) {
            order.push(id.clone());
            data.insert(id.clone(), Vec::new());
        }
        let values = data.get_mut(&id).unwrap();
        for &col in &value_cols {
            let raw = record
                .get(col)
                .ok_or_else(|| Error::data(format!("row {}: missing column {col}", row_idx + 2)))?;
            let v: f64 = raw.trim().parse().map_err(|_| {
                Error::data(format!(
                    "row {}, column {:?}: cannot parse {raw:?} as a number",
                    row_idx + 2,
                    headers.get(col).unwrap_or("")
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::data(format!(
                    "row {}, column {:?}: non-finite value {raw:?}",
                    row_idx + 2,
                    headers.get(col).unwrap_or("")
                )));
            }
            values.push(v);
        }
    }

    let mut corpus = Vec::with_capacity(order.len());
    for id in &order {
        let values = data.remove(id).unwrap();
        corpus.push(TimeSeries::new(id.clone(), schema.rate_hz, dims, values)?);
    }
    if corpus.is_empty() {
        return Err(Error::data("corpus CSV holds no data rows"));
    }

    let standardization = if schema.standardize {
        Some(standardize(&mut corpus))
    } else {
        None
    };
    Ok((corpus, standardization))
}

/// Z-scores every dimension over the pooled corpus, in place.
pub fn standardize(corpus: &mut [TimeSeries]) -> Standardization {
    let dims = corpus[0].dims();
    let mut mean = vec![0.0; dims];
    let mut count = 0usize;
    for s in corpus.iter() {
        for t in 0..s.len() {
            for (d, v) in s.sample(t).iter().enumerate() {
                mean[d] += v;
            }
        }
        count += s.len();
    }
    for m in mean.iter_mut() {
        *m /= count as f64;
    }
    let mut var = vec![0.0; dims];
    for s in corpus.iter() {
        for t in 0..s.len() {
            for (d, v) in s.sample(t).iter().enumerate() {
                let diff = v - mean[d];
                var[d] += diff * diff;
            }
        }
    }
    let std_dev: Vec<f64> =
        var.iter().map(|&v| (v / count as f64).sqrt().max(1e-12)).collect();

    for s in corpus.iter_mut() {
        let dims = s.dims();
        let rate = s.rate_hz;
        let id = s.id.clone();
        let mut values = s.values().to_vec();
        for (i, v) in values.iter_mut().enumerate() {
            let d = i % dims;
            *v = (*v - mean[d]) / std_dev[d];
        }
        *s = TimeSeries::new(id, rate, dims, values).expect("standardization keeps values finite");
    }
    Standardization { mean, std_dev }
}

/// Writes a corpus in the schema `read_corpus_csv` ingests.
pub fn write_corpus_csv(path: &Path, corpus: &[TimeSeries]) -> Result<()> {
    let dims = corpus.first().map_or(0, |s| s.dims());
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["sequence_id".to_string(), "time".to_string()];
    header.extend((0..dims).map(|d| format!("x{d}")));
    writer.write_record(&header)?;
    for s in corpus {
        for t in 0..s.len() {
            let mut row = vec![s.id.clone(), format!("{:.3}", t as f64 / s.rate_hz)];
            row.extend(s.sample(t).iter().map(|v| format!("{v}")));
            writer.write_record(&row)?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Writes segmentations (tiling is re-checked on write). `units` may hold
/// `None` per sequence for lower-only runs.
pub fn write_segmentations_csv(
    path: &Path,
    elements: &[ElementSegmentation],
    units: &[Option<UnitSegmentation>],
    series_lens: &[usize],
) -> Result<()> {
    if elements.len() != units.len() || elements.len() != series_lens.len() {
        return Err(Error::data("segmentation write: corpus arrays must align"));
    }
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["sequence_id", "start", "end", "element_class", "unit_class"])?;
    for ((seg, units), &len) in elements.iter().zip(units).zip(series_lens) {
        seg.check_tiling(len)?;
        let unit_labels: Option<Vec<u16>> = units.as_ref().map(|u| {
            u.check_tiling(seg.len()).map(|_| u.per_element_labels()).unwrap_or_default()
        });
        if let Some(labels) = &unit_labels {
            if labels.len() != seg.len() {
                return Err(Error::data(format!(
                    "sequence {:?}: unit segmentation does not tile its elements",
                    seg.series_id
                )));
            }
        }
        for (j, s) in seg.segments.iter().enumerate() {
            let unit = unit_labels
                .as_ref()
                .map_or(String::new(), |labels| labels[j].to_string());
            writer.write_record([
                seg.series_id.as_str(),
                &s.start.to_string(),
                &s.end.to_string(),
                &s.class_id.to_string(),
                &unit,
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// A parsed segmentation file: element segments plus per-element unit labels
/// (when the unit column is populated).
#[derive(Debug, Clone)]
pub struct SegmentationFile {
    pub elements: Vec<ElementSegmentation>,
    pub unit_labels: Vec<Option<Vec<u16>>>,
}

pub fn read_segmentations_csv(path: &Path) -> Result<SegmentationFile> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut order: Vec<String> = Vec::new();
    let mut rows: BTreeMap<String, (Vec<ElementSegment>, Vec<Option<u16>>)> = BTreeMap::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let get = |i: usize| -> Result<&str> {
            record
                .get(i)
                .ok_or_else(|| Error::data(format!("row {}: missing field {i}", row_idx + 2)))
        };
        let id = get(0)?.to_string();
        let parse_usize = |s: &str, what: &str| -> Result<usize> {
            s.trim()
                .parse()
                .map_err(|_| Error::data(format!("row {}: bad {what} {s:?}", row_idx + 2)))
        };
        let start = parse_usize(get(1)?, "start")?;
        let end = parse_usize(get(2)?, "end")?;
        let class_id = parse_usize(get(3)?, "element_class")?;
        let unit_raw = get(4)?.trim().to_string();
        let unit = if unit_raw.is_empty() {
            None
        } else {
            Some(parse_usize(&unit_raw, "unit_class")? as u16)
        };
        if !rows.contains_key(&id) {
            order.push(id.clone());
        }
        let entry = rows.entry(id).or_default();
        entry.0.push(ElementSegment { start, end, class_id });
        entry.1.push(unit);
    }

    let mut elements = Vec::with_capacity(order.len());
    let mut unit_labels = Vec::with_capacity(order.len());
    for id in order {
        let (segs, units) = rows.remove(&id).unwrap();
        let len = segs.last().map_or(0, |s| s.end);
        let seg = ElementSegmentation::new(id, segs, len)?;
        let labels: Option<Vec<u16>> = units.iter().copied().collect();
        unit_labels.push(labels);
        elements.push(seg);
    }
    Ok(SegmentationFile { elements, unit_labels })
}
