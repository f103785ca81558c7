//! Source side-channel leakage analysis for four-diode BB84 transmitters.
//!
//! Distinguishability between the diodes of one basis (spectrum, pulse
//! shape, arrival time, spatial mode) is turned into Eve's information in
//! bits per pulse, and from there into a secret-key-rate penalty.
//!
//! Module map:
//! - [`signal`]: uniform-grid distributions and summary statistics
//! - [`xcorr`]: normalized cross-correlation, 1D and 2D
//! - [`leakage`]: exact mutual information, overlap estimators, key rates
//! - [`synth`]: seeded synthetic transmitters, Monte-Carlo cross-check
//! - [`ingest`]: CSV/time-tag/manifest readers and writers
//! - [`report`]: whole-ensemble analysis and the JSON report

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ensemble;
pub mod error;
pub mod ingest;
pub mod leakage;
pub mod report;
pub mod signal;
pub mod synth;
pub mod xcorr;

pub use ensemble::{Basis, DiodeRecord, Observation, Parameter, Polarization, SourceEnsemble};
pub use error::{Error, Result};
pub use leakage::{BasisPair, Direction, LeakageResult, Method, PolarizationErrors};
pub use signal::{Axis, SampledDistribution1D, SpatialMode2D, Unit};
