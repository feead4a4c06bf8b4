use std::fmt;
use std::path::PathBuf;

/// Pipeline stages, used to attribute failures inside [`crate::pipeline::run_pipeline`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Pos,
    BandpassHr,
    Spectrogram,
    RidgeTracking,
    SecondBand,
    SecondFilter,
    PeakDetection,
    Ibi,
    Hrv,
    Detrend,
    OutlierRemoval,
    RrEstimation,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Pos => "pos",
            Stage::BandpassHr => "bandpass_hr",
            Stage::Spectrogram => "spectrogram",
            Stage::RidgeTracking => "ridge_tracking",
            Stage::SecondBand => "second_band",
            Stage::SecondFilter => "second_filter",
            Stage::PeakDetection => "peak_detection",
            Stage::Ibi => "ibi",
            Stage::Hrv => "hrv",
            Stage::Detrend => "detrend",
            Stage::OutlierRemoval => "outlier_removal",
            Stage::RrEstimation => "rr_estimation",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("degenerate geometry{}: {reason}", frame_pair.map(|(a, b)| format!(" between frames {a} and {b}")).unwrap_or_default())]
    DegenerateGeometry {
        frame_pair: Option<(i64, i64)>,
        reason: String,
    },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("signal too short: need {needed} samples, got {got}")]
    SignalTooShort { needed: usize, got: usize },

    #[error("invalid band ({low} Hz, {high} Hz): {reason}")]
    InvalidBand { low: f64, high: f64, reason: String },

    #[error("POS window starting at sample {window_start} has a zero-mean channel")]
    ZeroMeanChannel { window_start: usize },

    #[error("only {found} peaks detected, at least 4 are required")]
    TooFewPeaks { found: usize },

    #[error("series has zero variance")]
    ZeroVariance,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("stage `{stage}` failed{}: {source}", segment.as_ref().map(|s| format!(" for segment {s}")).unwrap_or_default())]
    Stage {
        stage: Stage,
        segment: Option<String>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// The stage that raised this error, if it came out of the pipeline.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }

    /// True for errors caused by malformed or out-of-contract input files,
    /// as opposed to a processing stage that could not produce a result.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Parse { .. }
                | Error::Validation(_)
                | Error::Config(_)
                | Error::DegenerateGeometry { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
