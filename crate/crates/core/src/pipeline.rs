//! End-to-end RR estimation for one segment.

use std::path::Path;

use crate::config::PipelineConfig;
use crate::error::{Error, Result, Stage};
use crate::filter::zero_phase_bandpass;
use crate::hr::{bandpass_hr, spectrogram, trace_ridge};
use crate::hrv::{compute_ibi, detect_peaks, detrend_hrv, design_second_band, ibi_to_hrv, refine_peaks, PeakList};
use crate::io::{write_json, write_psd, write_series};
use crate::outlier::{fit_gaussian, prune, GaussianFit};
use crate::pos::pos_extract;
use crate::rr::{estimate_rr, RrEstimate};
use crate::series::{HrCurve, PulseSignal, RgbTrace, UnevenSeries, Unit};

/// Every intermediate series of a pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub pulse: PulseSignal,
    pub hr_filtered: PulseSignal,
    pub hr_curve: HrCurve,
    pub second_band_hz: (f64, f64),
    pub filtered: PulseSignal,
    pub raw_peaks: PeakList,
    /// Peaks used for IBIs: refined when interpolation is enabled, raw otherwise.
    pub peaks: PeakList,
    pub ibi: UnevenSeries,
    pub hrv: UnevenSeries,
    pub detrended: UnevenSeries,
    pub fit: Option<GaussianFit>,
    pub pruned: UnevenSeries,
}

impl Diagnostics {
    pub fn n_hrv_samples(&self) -> usize {
        self.detrended.len()
    }

    pub fn n_outliers_removed(&self) -> usize {
        self.detrended.len() - self.pruned.len()
    }

    /// Writes every intermediate as CSV (plus the PSD) into `dir`.
    pub fn dump(&self, dir: &Path, rr: &RrEstimate) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        write_series(&dir.join("pulse.csv"), &self.pulse)?;
        write_series(&dir.join("hr_filtered.csv"), &self.hr_filtered)?;
        write_series(&dir.join("hr_curve.csv"), &self.hr_curve)?;
        write_series(&dir.join("filtered.csv"), &self.filtered)?;
        let peaks = |p: &PeakList| UnevenSeries::new(p.times().to_vec(), p.raw_indices().iter().map(|&i| i as f64).collect(), Unit::Seconds);
        write_series(&dir.join("raw_peaks.csv"), &peaks(&self.raw_peaks)?)?;
        write_series(&dir.join("peaks.csv"), &peaks(&self.peaks)?)?;
        write_series(&dir.join("ibi.csv"), &self.ibi)?;
        write_series(&dir.join("hrv.csv"), &self.hrv)?;
        write_series(&dir.join("detrended.csv"), &self.detrended)?;
        write_series(&dir.join("pruned.csv"), &self.pruned)?;
        write_psd(&dir.join("psd.csv"), &rr.psd)?;
        write_json(
            &dir.join("stages.json"),
            &serde_json::json!({
                "second_band_hz": [self.second_band_hz.0, self.second_band_hz.1],
                "gaussian_fit": self.fit,
                "n_hrv_samples": self.n_hrv_samples(),
                "n_outliers_removed": self.n_outliers_removed(),
                "rr_brpm": rr.rr_brpm,
                "peak_power": rr.peak_power,
            }),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub rr: RrEstimate,
    pub diagnostics: Diagnostics,
}

struct Ctx<'a> {
    segment: Option<&'a str>,
}

impl Ctx<'_> {
    fn at<T>(&self, stage: Stage, r: Result<T>) -> Result<T> {
        r.map_err(|e| Error::Stage {
            stage,
            segment: self.segment.map(str::to_string),
            source: Box::new(e),
        })
    }
}

pub fn run_pipeline(trace: &RgbTrace, config: &PipelineConfig) -> Result<PipelineOutput> {
    run_segment(None, trace, config)
}

/// Runs the full chain; stage failures carry the stage name and `segment`.
pub fn run_segment(segment: Option<&str>, trace: &RgbTrace, config: &PipelineConfig) -> Result<PipelineOutput> {
    config.validate()?;
    let cx = Ctx { segment };
    let order = config.filter_order;

    let pulse = cx.at(Stage::Pos, pos_extract(trace, config.pos_window_s))?;
    let hr_filtered = cx.at(Stage::BandpassHr, bandpass_hr(&pulse, config.hr_band_hz, order))?;
    let map = cx.at(
        Stage::Spectrogram,
        spectrogram(&hr_filtered, config.stft_window_s, config.stft_hop_s, config.hr_band_hz),
    )?;
    let hr_curve = cx.at(Stage::RidgeTracking, trace_ridge(&map, config.ridge_transition_penalty))?;
    let second_band_hz = cx.at(
        Stage::SecondBand,
        design_second_band(&hr_curve, config.second_filter_offset_bpm, pulse.sample_rate()),
    )?;
    let filtered = cx.at(Stage::SecondFilter, zero_phase_bandpass(&pulse, second_band_hz, order))?;
    let raw_peaks = cx.at(Stage::PeakDetection, detect_peaks(&filtered, second_band_hz))?;
    let peaks = if config.enable_interp {
        cx.at(Stage::PeakDetection, refine_peaks(&filtered, &raw_peaks))?
    } else {
        raw_peaks.clone()
    };
    let ibi = cx.at(Stage::Ibi, compute_ibi(&peaks))?;
    let hrv = cx.at(Stage::Hrv, ibi_to_hrv(&ibi))?;
    let detrended = cx.at(Stage::Detrend, detrend_hrv(&hrv, &hr_curve))?;
    let (fit, pruned) = if config.enable_outlier_removal {
        let fit = cx.at(Stage::OutlierRemoval, fit_gaussian(&detrended))?;
        let pruned = cx.at(Stage::OutlierRemoval, prune(&detrended, &fit, config.outlier_alpha))?;
        (Some(fit), pruned)
    } else {
        (None, detrended.clone())
    };
    let rr = cx.at(Stage::RrEstimation, estimate_rr(&pruned, config))?;
    Ok(PipelineOutput {
        rr,
        diagnostics: Diagnostics {
            pulse,
            hr_filtered,
            hr_curve,
            second_band_hz,
            filtered,
            raw_peaks,
            peaks,
            ibi,
            hrv,
            detrended,
            fit,
            pruned,
        },
    })
}
