//! Unsupervised two-layer segmentation of multivariate time series.
//!
//! The lower layer cuts a continuous trajectory into short *motion elements*
//! using a Gaussian-process hidden semi-Markov model; the upper layer groups
//! the resulting discrete element sequence into longer *unit motions* with a
//! plain HSMM. Both layers are trained jointly by blocked Gibbs sampling with
//! mutual parameter updates: the upper layer's composition statistics feed
//! back into the lower layer as a position-dependent class prior.

pub mod duration;
pub mod emission;
pub mod error;
pub mod eval;
pub mod gp;
pub mod io;
pub mod lower;
pub mod math;
pub mod rng;
pub mod synth;
pub mod trainer;
pub mod transition;
pub mod types;
pub mod upper;

pub use error::Error;
pub use types::{
    ElementSegment, ElementSegmentation, Hyperparams, KernelParams, Mode, TimeSeries, UnitSegment,
    UnitSegmentation,
};
