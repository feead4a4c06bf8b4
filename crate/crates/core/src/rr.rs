//! Respiratory rate from the Lomb-Scargle spectrum of detrended HRV.

use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::series::UnevenSeries;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsdEstimate {
    freqs_brpm: Vec<f64>,
    power: Vec<f64>,
}

impl PsdEstimate {
    pub fn new(freqs_brpm: Vec<f64>, power: Vec<f64>) -> Result<Self> {
        if freqs_brpm.len() != power.len() {
            return Err(Error::validation("PSD grid and power differ in length"));
        }
        if freqs_brpm.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("PSD grid must be strictly increasing"));
        }
        if power.iter().any(|p| !p.is_finite()) {
            return Err(Error::validation("PSD power must be finite"));
        }
        Ok(Self { freqs_brpm, power })
    }

    pub fn freqs_brpm(&self) -> &[f64] {
        &self.freqs_brpm
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RrEstimate {
    pub rr_brpm: f64,
    pub peak_power: f64,
    #[serde(skip)]
    pub psd: PsdEstimate,
}

/// Evenly spaced grid from `band.0` to `band.1` inclusive.
pub fn rr_grid(band: (f64, f64), step: f64) -> Vec<f64> {
    let n = ((band.1 - band.0) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| band.0 + i as f64 * step).collect()
}

/// Normalised Lomb-Scargle periodogram evaluated on `grid_brpm`.
///
/// `P(ω) = (1 / 2σ²) · { [Σ xᵢ' cos ω(tᵢ−τ)]² / Σ cos² ω(tᵢ−τ)
///                      + [Σ xᵢ' sin ω(tᵢ−τ)]² / Σ sin² ω(tᵢ−τ) }`
/// with `xᵢ' = xᵢ − x̄`, `σ²` the unbiased sample variance and
/// `tan 2ωτ = Σ sin 2ωtᵢ / Σ cos 2ωtᵢ`.
pub fn lomb_scargle(series: &UnevenSeries, grid_brpm: &[f64]) -> Result<PsdEstimate> {
    let n = series.len();
    if n < 4 {
        return Err(Error::InsufficientData(format!(
            "{n} samples, at least 4 needed for a periodogram"
        )));
    }
    if grid_brpm.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(Error::validation("frequency grid must be positive"));
    }
    let t = series.times();
    let x = series.values();
    let mean = x.iter().sum::<f64>() / n as f64;
    let xc: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let var = xc.iter().map(|v| v * v).sum::<f64>() / (n - 1) as f64;
    if !(var > 0.0) {
        return Err(Error::ZeroVariance);
    }

    let power = grid_brpm
        .iter()
        .map(|&f| {
            let w = 2.0 * std::f64::consts::PI * f / 60.0;
            let (s2, c2) = t.iter().fold((0.0, 0.0), |(s, c), &ti| {
                let (si, ci) = (2.0 * w * ti).sin_cos();
                (s + si, c + ci)
            });
            let tau = s2.atan2(c2) / (2.0 * w);
            let (mut yc, mut ys, mut cc, mut ss) = (0.0, 0.0, 0.0, 0.0);
            for (&ti, &xi) in t.iter().zip(&xc) {
                let (s, c) = (w * (ti - tau)).sin_cos();
                yc += xi * c;
                ys += xi * s;
                cc += c * c;
                ss += s * s;
            }
            let term = |num: f64, den: f64| if den > 0.0 { num * num / den } else { 0.0 };
            (term(yc, cc) + term(ys, ss)) / (2.0 * var)
        })
        .collect();
    PsdEstimate::new(grid_brpm.to_vec(), power)
}

/// Grid point of maximal power inside the closed band; ties go low.
pub fn pick_rr(psd: &PsdEstimate, band_brpm: (f64, f64)) -> Result<RrEstimate> {
    let mut best: Option<(f64, f64)> = None;
    for (&f, &p) in psd.freqs_brpm().iter().zip(psd.power()) {
        if f < band_brpm.0 || f > band_brpm.1 {
            continue;
        }
        if best.is_none_or(|(_, bp)| p > bp) {
            best = Some((f, p));
        }
    }
    let (rr_brpm, peak_power) = best.ok_or_else(|| {
        Error::InsufficientData(format!(
            "no PSD grid point inside [{}, {}] BrPM",
            band_brpm.0, band_brpm.1
        ))
    })?;
    Ok(RrEstimate {
        rr_brpm,
        peak_power,
        psd: psd.clone(),
    })
}

/// Periodogram on the configured grid followed by the in-band argmax.
pub fn estimate_rr(series: &UnevenSeries, config: &PipelineConfig) -> Result<RrEstimate> {
    let grid = rr_grid(config.rr_band_brpm, config.rr_grid_step_brpm);
    let psd = lomb_scargle(series, &grid)?;
    pick_rr(&psd, config.rr_band_brpm)
}
