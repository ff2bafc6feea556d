//! Acoustic emotion regression and fusion.
//!
//! The crate covers the audio branch of a continuous arousal/valence
//! estimator and the late-fusion stage that combines it with other base
//! regressors:
//!
//! * [`dataset`]: manifests, 16-bit PCM WAV ingestion, framing
//! * [`dsp`], [`cepstral`]: frame-level descriptors
//! * [`features`]: the fixed 76-slot utterance vector
//! * [`preprocess`]: percentile clipping and min-max scaling
//! * [`relieff`]: RReliefF feature ranking
//! * [`svr`]: epsilon-SVR by SMO with validation-driven model selection
//! * [`fusion`]: unsupervised accuracy estimation and weighted fusion
//! * [`metrics`]: CCC, Pearson, MSE
//! * [`pipeline`]: the file-level steps behind the `emofuse` binary
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod cepstral;
pub mod dataset;
pub mod dsp;
mod error;
pub mod features;
pub mod fusion;
pub mod metrics;
pub mod pipeline;
pub mod preprocess;
pub mod relieff;
pub mod svr;
pub mod synth;

pub use error::{Error, Result};
