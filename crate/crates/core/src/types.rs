//! Shared domain types: observed series, segmentations, hyperparameters.
//!
//! All types here are plain immutable value objects; samplers build new
//! segmentations rather than mutating existing ones in place.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observed multivariate trajectory, sampled at a fixed rate.
///
/// Samples are stored row-major (`len × dims`); every value is finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub id: String,
    pub rate_hz: f64,
    dims: usize,
    samples: Vec<f64>,
}

impl TimeSeries {
    pub fn new(id: impl Into<String>, rate_hz: f64, dims: usize, samples: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if dims == 0 {
            return Err(Error::validation("dims", "dimension must be ≥ 1"));
        }
        if !(rate_hz > 0.0) {
            return Err(Error::validation("rate_hz", "sample rate must be > 0"));
        }
        if samples.is_empty() {
            return Err(Error::validation("samples", format!("sequence {id:?} is empty")));
        }
        if samples.len() % dims != 0 {
            return Err(Error::validation(
                "samples",
                format!(
                    "sequence {id:?}: {} values do not tile {} dimensions",
                    samples.len(),
                    dims
                ),
            ));
        }
        if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(
                "samples",
                format!(
                    "sequence {id:?}: non-finite value at sample {}, dimension {}",
                    pos / dims,
                    pos % dims
                ),
            ));
        }
        Ok(TimeSeries { id, rate_hz, dims, samples })
    }

    /// Number of samples (timesteps).
    pub fn len(&self) -> usize {
        self.samples.len() / self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// The `t`-th sample as a `dims`-length slice.
    #[inline]
    pub fn sample(&self, t: usize) -> &[f64] {
        &self.samples[t * self.dims..(t + 1) * self.dims]
    }

    pub fn values(&self) -> &[f64] {
        &self.samples
    }
}

/// One motion-element segment: samples `[start, end)` assigned to `class_id`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementSegment {
    pub start: usize,
    pub end: usize,
    pub class_id: usize,
}

impl ElementSegment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Ordered element segments tiling one series.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementSegmentation {
    pub series_id: String,
    pub segments: Vec<ElementSegment>,
}

impl ElementSegmentation {
    /// Validates that segments are contiguous, non-empty and cover
    /// `[0, series_len)` exactly.
    pub fn new(
        series_id: impl Into<String>,
        segments: Vec<ElementSegment>,
        series_len: usize,
    ) -> Result<Self> {
        let seg = ElementSegmentation { series_id: series_id.into(), segments };
        seg.check_tiling(series_len)?;
        Ok(seg)
    }

    pub fn check_tiling(&self, series_len: usize) -> Result<()> {
        let mut cursor = 0usize;
        for (i, s) in self.segments.iter().enumerate() {
            if s.start != cursor {
                return Err(Error::validation(
                    "segments",
                    format!(
                        "sequence {:?}: segment {i} starts at {} but previous coverage ends at {cursor}",
                        self.series_id, s.start
                    ),
                ));
            }
            if s.end <= s.start {
                return Err(Error::validation(
                    "segments",
                    format!("sequence {:?}: segment {i} is empty", self.series_id),
                ));
            }
            cursor = s.end;
        }
        if cursor != series_len {
            return Err(Error::validation(
                "segments",
                format!(
                    "sequence {:?}: segments cover [0, {cursor}) but the series has {series_len} samples",
                    self.series_id
                ),
            ));
        }
        Ok(())
    }

    /// Additionally checks the segment-length cap and class-id range.
    pub fn check_bounds(&self, max_len: usize, n_classes: usize) -> Result<()> {
        for (i, s) in self.segments.iter().enumerate() {
            if s.len() > max_len {
                return Err(Error::validation(
                    "segments",
                    format!(
                        "sequence {:?}: segment {i} has length {} > max {max_len}",
                        self.series_id,
                        s.len()
                    ),
                ));
            }
            if s.class_id >= n_classes {
                return Err(Error::validation(
                    "segments",
                    format!(
                        "sequence {:?}: segment {i} has class {} ≥ {n_classes}",
                        self.series_id, s.class_id
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Per-segment class labels, in order.
    pub fn class_sequence(&self) -> Vec<u16> {
        self.segments.iter().map(|s| s.class_id as u16).collect()
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

/// One unit-motion segment: elements `[start, end)` assigned to `class_id`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitSegment {
    pub start: usize,
    pub end: usize,
    pub class_id: usize,
}

impl UnitSegment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Ordered unit segments tiling one element sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitSegmentation {
    pub series_id: String,
    pub segments: Vec<UnitSegment>,
}

impl UnitSegmentation {
    pub fn new(
        series_id: impl Into<String>,
        segments: Vec<UnitSegment>,
        n_elements: usize,
    ) -> Result<Self> {
        let seg = UnitSegmentation { series_id: series_id.into(), segments };
        seg.check_tiling(n_elements)?;
        Ok(seg)
    }

    pub fn check_tiling(&self, n_elements: usize) -> Result<()> {
        let mut cursor = 0usize;
        for (i, s) in self.segments.iter().enumerate() {
            if s.start != cursor || s.end <= s.start {
                return Err(Error::validation(
                    "unit_segments",
                    format!(
                        "sequence {:?}: unit segment {i} [{}, {}) breaks the tiling at {cursor}",
                        self.series_id, s.start, s.end
                    ),
                ));
            }
            cursor = s.end;
        }
        if cursor != n_elements {
            return Err(Error::validation(
                "unit_segments",
                format!(
                    "sequence {:?}: unit segments cover [0, {cursor}) of {n_elements} elements",
                    self.series_id
                ),
            ));
        }
        Ok(())
    }

    /// Unit class label of each element, in element order.
    pub fn per_element_labels(&self) -> Vec<u16> {
        let mut out = Vec::new();
        for s in &self.segments {
            out.extend(std::iter::repeat(s.class_id as u16).take(s.len()));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

/// Kernel hyperparameters for the per-class Gaussian processes, plus the
/// observation-noise variance added to the covariance diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub theta0: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    /// Observation-noise variance φ⁻¹ on the covariance diagonal.
    pub noise_var: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams { theta0: 1.0, theta1: 1.0, theta2: 0.0, theta3: 16.0, noise_var: 0.1 }
    }
}

impl KernelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta0 >= 0.0) {
            return Err(Error::validation("kernel.theta0", "theta0 must be ≥ 0"));
        }
        if !(self.theta1 >= 0.0) {
            return Err(Error::validation("kernel.theta1", "theta1 must be ≥ 0"));
        }
        if !(self.noise_var > 0.0) {
            return Err(Error::validation("kernel.noise_var", "noise variance must be > 0"));
        }
        for (name, v) in [
            ("kernel.theta0", self.theta0),
            ("kernel.theta1", self.theta1),
            ("kernel.theta2", self.theta2),
            ("kernel.theta3", self.theta3),
            ("kernel.noise_var", self.noise_var),
        ] {
            if !v.is_finite() {
                return Err(Error::validation(name, "must be finite"));
            }
        }
        Ok(())
    }
}

/// Which upper-layer emission formulation a run uses, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Lower layer only; the element prior stays uniform.
    #[serde(rename = "lower-only")]
    LowerOnly,
    /// Exact-string word-segmentation emissions.
    #[serde(rename = "ws")]
    WordSeg,
    /// Per-unit element unigram emissions.
    #[serde(rename = "meu")]
    ElementUnigram,
    /// Per-unit element bigram emissions.
    #[serde(rename = "meb")]
    ElementBigram,
}

impl Mode {
    pub const ALL: [Mode; 4] =
        [Mode::LowerOnly, Mode::WordSeg, Mode::ElementUnigram, Mode::ElementBigram];

    pub fn uses_upper_layer(&self) -> bool {
        !matches!(self, Mode::LowerOnly)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::LowerOnly => "lower-only",
            Mode::WordSeg => "ws",
            Mode::ElementUnigram => "meu",
            Mode::ElementBigram => "meb",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lower-only" | "lower_only" => Ok(Mode::LowerOnly),
            "ws" => Ok(Mode::WordSeg),
            "meu" => Ok(Mode::ElementUnigram),
            "meb" => Ok(Mode::ElementBigram),
            other => Err(Error::config(format!(
                "unknown mode {other:?} (expected lower-only, ws, meu or meb)"
            ))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_lambda(max_len: usize) -> f64 {
    (max_len as f64 / 2.0).max(1.0)
}

/// All model and training hyperparameters.
///
/// Duration means and segment caps are engineering defaults (half the cap,
/// generous caps for 5 Hz data) and should be tuned to the data scale; the
/// class counts, Dirichlet parameters and kernel defaults follow the values
/// that worked on real assembly-work recordings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// Number of motion-element classes (C).
    pub element_classes: usize,
    /// Number of unit-motion classes (B).
    pub unit_classes: usize,
    /// Maximum element-segment length in samples (K).
    pub max_element_len: usize,
    /// Maximum unit length in elements (K').
    pub max_unit_len: usize,
    /// Poisson mean of the element duration prior (λ_p).
    pub element_duration_mean: f64,
    /// Poisson mean of the unit duration prior (λ_b).
    pub unit_duration_mean: f64,
    /// Dirichlet parameter for upper-layer emissions (α).
    pub emission_alpha: f64,
    /// Dirichlet parameter for the element prior (μ).
    pub prior_mu: f64,
    pub kernel: KernelParams,
    /// Mutual-update iterations per run (M).
    pub iterations: usize,
    /// Independent restarts; the highest-likelihood run is kept.
    pub restarts: usize,
    pub seed: u64,
    /// Max GP training points retained per class (uniform subsampling above).
    pub gp_cap: usize,
    /// Floor applied to predictive variances.
    pub var_floor: f64,
    /// Symmetric Dirichlet smoothing for transition rows.
    pub transition_smoothing: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            element_classes: 12,
            unit_classes: 8,
            max_element_len: 50,
            max_unit_len: 10,
            element_duration_mean: default_lambda(50),
            unit_duration_mean: default_lambda(10),
            emission_alpha: 10.0,
            prior_mu: 0.1,
            kernel: KernelParams::default(),
            iterations: 30,
            restarts: 10,
            seed: 0,
            gp_cap: 200,
            var_floor: 1e-8,
            transition_smoothing: 0.1,
        }
    }
}

impl Hyperparams {
    /// Checks every invariant, naming the offending field on failure.
    pub fn validate(&self) -> Result<&Self> {
        if self.element_classes == 0 {
            return Err(Error::validation("element_classes", "must be ≥ 1"));
        }
        if self.unit_classes == 0 {
            return Err(Error::validation("unit_classes", "must be ≥ 1"));
        }
        if self.max_element_len == 0 {
            return Err(Error::validation("max_element_len", "must be ≥ 1"));
        }
        if self.max_unit_len == 0 {
            return Err(Error::validation("max_unit_len", "must be ≥ 1"));
        }
        if !(self.element_duration_mean > 0.0) {
            return Err(Error::validation("element_duration_mean", "must be > 0"));
        }
        if !(self.unit_duration_mean > 0.0) {
            return Err(Error::validation("unit_duration_mean", "must be > 0"));
        }
        if !(self.emission_alpha > 0.0) {
            return Err(Error::validation("emission_alpha", "must be > 0"));
        }
        if !(self.prior_mu > 0.0) {
            return Err(Error::validation("prior_mu", "must be > 0"));
        }
        if self.iterations == 0 {
            return Err(Error::validation("iterations", "must be ≥ 1"));
        }
        if self.restarts == 0 {
            return Err(Error::validation("restarts", "must be ≥ 1"));
        }
        if self.gp_cap == 0 {
            return Err(Error::validation("gp_cap", "must be ≥ 1"));
        }
        if !(self.var_floor > 0.0) {
            return Err(Error::validation("var_floor", "must be > 0"));
        }
        if !(self.transition_smoothing > 0.0) {
            return Err(Error::validation("transition_smoothing", "must be > 0"));
        }
        self.kernel.validate()?;
        Ok(self)
    }
}
