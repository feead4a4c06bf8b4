//! Corpus-level RR error statistics and Bland-Altman agreement data.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bland-Altman limits of agreement are `bias ± LOA_Z · SD`.
pub const LOA_Z: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentResult {
    pub segment_id: String,
    pub rr_measured_brpm: f64,
    pub rr_ground_truth_brpm: f64,
    pub rr_error_brpm: f64,
    pub n_hrv_samples: usize,
    pub n_outliers_removed: usize,
}

impl SegmentResult {
    pub fn new(
        segment_id: impl Into<String>,
        rr_measured_brpm: f64,
        rr_ground_truth_brpm: f64,
        n_hrv_samples: usize,
        n_outliers_removed: usize,
    ) -> Self {
        Self {
            segment_id: segment_id.into(),
            rr_measured_brpm,
            rr_ground_truth_brpm,
            rr_error_brpm: rr_measured_brpm - rr_ground_truth_brpm,
            n_hrv_samples,
            n_outliers_removed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Mean of RR_m − RR_gt.
    pub mean_error: f64,
    /// Sample standard deviation (N − 1) of the error; 0 for one segment.
    pub sd_error: f64,
    pub rmse: f64,
    /// Mean of |RR_e| / RR_gt, in percent.
    pub mean_error_rate: f64,
    /// Percentage of segments with |RR_e| < 1 BrPM.
    pub pct_within_1: f64,
    pub n_segments: usize,
}

impl MetricsReport {
    /// One results-table row: `Me (SDe)  RMSE  MeRate%  %<1%`.
    pub fn table_row(&self) -> String {
        format!(
            "{:.2} ({:.2})  {:.2}  {:.2}%  {:.2}%",
            self.mean_error, self.sd_error, self.rmse, self.mean_error_rate, self.pct_within_1
        )
    }
}

/// Order-independent sum: values are sorted before accumulation.
fn stable_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = stable_sum(values.to_vec()) / n;
    let sd = if values.len() > 1 {
        (stable_sum(values.iter().map(|e| (e - mean).powi(2)).collect()) / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

pub fn compute_metrics(results: &[SegmentResult]) -> Result<MetricsReport> {
    if results.is_empty() {
        return Err(Error::InsufficientData("no segment results".into()));
    }
    if let Some(r) = results.iter().find(|r| !(r.rr_ground_truth_brpm > 0.0)) {
        return Err(Error::validation(format!(
            "segment {} has non-positive ground truth {}",
            r.segment_id, r.rr_ground_truth_brpm
        )));
    }
    let n = results.len() as f64;
    let errors: Vec<f64> = results.iter().map(|r| r.rr_error_brpm).collect();
    let (mean_error, sd_error) = mean_sd(&errors);
    let rmse = (stable_sum(errors.iter().map(|e| e * e).collect()) / n).sqrt();
    let rate = stable_sum(
        results
            .iter()
            .map(|r| r.rr_error_brpm.abs() / r.rr_ground_truth_brpm)
            .collect(),
    ) / n;
    let within = errors.iter().filter(|e| e.abs() < 1.0).count() as f64;
    Ok(MetricsReport {
        mean_error,
        sd_error,
        rmse,
        mean_error_rate: 100.0 * rate,
        pct_within_1: 100.0 * within / n,
        n_segments: results.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlandAltmanRow {
    pub segment_id: String,
    pub mean_brpm: f64,
    pub diff_brpm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlandAltman {
    pub rows: Vec<BlandAltmanRow>,
    pub bias: f64,
    pub sd_diff: f64,
    pub lower_limit: f64,
    pub upper_limit: f64,
}

impl BlandAltman {
    pub fn fraction_within_limits(&self) -> f64 {
        let inside = self
            .rows
            .iter()
            .filter(|r| r.diff_brpm >= self.lower_limit && r.diff_brpm <= self.upper_limit)
            .count();
        inside as f64 / self.rows.len() as f64
    }

    /// Plot-ready CSV; the limits are repeated on every row.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |source: std::io::Error| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e.into(),
        })?;
        let mut row = |fields: &[String]| {
            w.write_record(fields).map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: e.into(),
            })
        };
        row(&[
            "segment_id", "mean_brpm", "diff_brpm", "bias_brpm", "lower_limit_brpm", "upper_limit_brpm",
        ]
        .map(String::from))?;
        for r in &self.rows {
            row(&[
                r.segment_id.clone(),
                r.mean_brpm.to_string(),
                r.diff_brpm.to_string(),
                self.bias.to_string(),
                self.lower_limit.to_string(),
                self.upper_limit.to_string(),
            ])?;
        }
        w.flush().map_err(io)
    }
}

pub fn bland_altman(results: &[SegmentResult]) -> Result<BlandAltman> {
    if results.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "Bland-Altman analysis needs at least 2 segments, got {}",
            results.len()
        )));
    }
    let rows: Vec<BlandAltmanRow> = results
        .iter()
        .map(|r| BlandAltmanRow {
            segment_id: r.segment_id.clone(),
            mean_brpm: 0.5 * (r.rr_measured_brpm + r.rr_ground_truth_brpm),
            diff_brpm: r.rr_measured_brpm - r.rr_ground_truth_brpm,
        })
        .collect();
    let diffs: Vec<f64> = rows.iter().map(|r| r.diff_brpm).collect();
    let (bias, sd_diff) = mean_sd(&diffs);
    Ok(BlandAltman {
        rows,
        bias,
        sd_diff,
        lower_limit: bias - LOA_Z * sd_diff,
        upper_limit: bias + LOA_Z * sd_diff,
    })
}
