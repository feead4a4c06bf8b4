//! Pipeline configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// First-phase cardiac band in Hz.
    pub hr_band_hz: (f64, f64),
    /// Margin added on both sides of the tracked HR range for the second filter.
    pub second_filter_offset_bpm: f64,
    /// Outlier bound in standard deviations.
    pub outlier_alpha: f64,
    pub rr_band_brpm: (f64, f64),
    pub rr_grid_step_brpm: f64,
    pub pos_window_s: f64,
    pub stft_window_s: f64,
    pub stft_hop_s: f64,
    /// Ridge-tracker cost per Hz of frequency jump between frames.
    pub ridge_transition_penalty: f64,
    /// Butterworth prototype order of both bandpass filters.
    pub filter_order: usize,
    pub enable_interp: bool,
    pub enable_outlier_removal: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            hr_band_hz: (0.7, 4.0),
            second_filter_offset_bpm: 30.0,
            outlier_alpha: 3.0,
            rr_band_brpm: (5.0, 30.0),
            rr_grid_step_brpm: 0.05,
            pos_window_s: 1.6,
            stft_window_s: 10.0,
            stft_hop_s: 0.5,
            ridge_transition_penalty: 0.2,
            filter_order: 4,
            enable_interp: true,
            enable_outlier_removal: true,
        }
    }
}

fn check_band(name: &str, (lo, hi): (f64, f64)) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
        return Err(Error::Config(format!(
            "{name} must satisfy 0 < low < high, got ({lo}, {hi})"
        )));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::Config(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        check_band("hr_band_hz", self.hr_band_hz)?;
        check_band("rr_band_brpm", self.rr_band_brpm)?;
        check_positive("second_filter_offset_bpm", self.second_filter_offset_bpm)?;
        check_positive("outlier_alpha", self.outlier_alpha)?;
        check_positive("rr_grid_step_brpm", self.rr_grid_step_brpm)?;
        check_positive("pos_window_s", self.pos_window_s)?;
        check_positive("stft_window_s", self.stft_window_s)?;
        check_positive("stft_hop_s", self.stft_hop_s)?;
        let lambda = self.ridge_transition_penalty;
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::Config(format!(
                "ridge_transition_penalty must be >= 0, got {lambda}"
            )));
        }
        if self.filter_order == 0 || self.filter_order > 12 {
            return Err(Error::Config(format!(
                "filter_order must be in 1..=12, got {}",
                self.filter_order
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Reads a JSON config; `None` gives the defaults.
pub fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    let Some(path) = path else {
        return Ok(PipelineConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    PipelineConfig::from_json(&text)
}
