//! Respiratory rate estimation from remote-photoplethysmography traces.
//!
//! The pipeline turns a per-frame mean ROI colour trace into a respiratory
//! rate:
//!
//! 1. **POS** pulse extraction from the RGB trace ([`pos`]).
//! 2. **HR tracking**: cardiac-band zero-phase filter, short-time spectrum and
//!    a Viterbi ridge tracker ([`hr`]).
//! 3. **HRV**: a second, narrower zero-phase filter whose band follows the
//!    tracked HR range, peak detection with optional quadratic refinement,
//!    inter-beat intervals and detrending against the HR curve ([`hrv`]).
//! 4. **Outlier removal** by a Gaussian fit and an `α·σ` bound ([`outlier`]).
//! 5. **RR** as the Lomb-Scargle peak in the breathing band ([`rr`]).
//!
//! [`motion`] holds the least-squares affine tracking used to keep the ROI on
//! the face, [`synth`] generates signals with exact ground truth and
//! [`metrics`] / [`eval`] score estimates across a corpus.

pub mod config;
pub mod error;
pub mod eval;
pub mod filter;
pub mod hr;
pub mod hrv;
pub mod io;
pub mod metrics;
pub mod motion;
pub mod outlier;
pub mod pipeline;
pub mod pos;
pub mod rr;
pub mod series;
pub mod synth;

pub use config::{load_config, PipelineConfig};
pub use error::{Error, Result, Stage};
pub use pipeline::{run_pipeline, Diagnostics, PipelineOutput};
pub use series::{HrCurve, PulseSignal, RgbTrace, UnevenSeries, Unit};
