//! Shared signal containers.
//!
//! Every container validates its invariants on construction and is immutable
//! afterwards, so a value that exists is a value the rest of the pipeline can
//! trust.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest tolerated deviation of any inter-frame interval from the median
/// interval, as a fraction of the median.
pub const MAX_RATE_JITTER: f64 = 0.2;

/// Heart-rate limits in BPM, the 0.7–4 Hz cardiac band.
pub const HR_MIN_BPM: f64 = 42.0;
pub const HR_MAX_BPM: f64 = 240.0;

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Infers the sample rate of nominally uniform timestamps and checks jitter.
pub(crate) fn uniform_rate(timestamps: &[f64]) -> Result<f64> {
    if timestamps.len() < 2 {
        return Err(Error::validation("need at least two timestamps"));
    }
    if let Some(bad) = timestamps.iter().position(|t| !t.is_finite()) {
        return Err(Error::validation(format!("non-finite timestamp at row {bad}")));
    }
    let deltas: Vec<f64> = timestamps.windows(2).map(|w| w[1] - w[0]).collect();
    if let Some(i) = deltas.iter().position(|&d| d <= 0.0) {
        return Err(Error::validation(format!(
            "timestamps not strictly increasing at row {}",
            i + 1
        )));
    }
    let med = median(&deltas);
    let worst = deltas
        .iter()
        .map(|d| (d - med).abs() / med)
        .fold(0.0, f64::max);
    if worst > MAX_RATE_JITTER {
        return Err(Error::validation(format!(
            "frame interval jitter {:.1}% exceeds {:.0}% of the median interval",
            worst * 100.0,
            MAX_RATE_JITTER * 100.0
        )));
    }
    Ok(1.0 / med)
}

/// Per-frame mean ROI colour.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbTrace {
    timestamps: Vec<f64>,
    samples: Vec<[f64; 3]>,
    sample_rate: f64,
}

impl RgbTrace {
    pub fn new(timestamps: Vec<f64>, samples: Vec<[f64; 3]>) -> Result<Self> {
        if timestamps.len() != samples.len() {
            return Err(Error::validation(format!(
                "{} timestamps but {} samples",
                timestamps.len(),
                samples.len()
            )));
        }
        let sample_rate = uniform_rate(&timestamps)?;
        if let Some(i) = samples
            .iter()
            .position(|s| s.iter().any(|c| !c.is_finite() || *c < 0.0))
        {
            return Err(Error::validation(format!(
                "channel values must be finite and non-negative (row {i})"
            )));
        }
        Ok(Self {
            timestamps,
            samples,
            sample_rate,
        })
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn samples(&self) -> &[[f64; 3]] {
        &self.samples
    }

    /// 1 / median frame interval.
    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.timestamps[self.timestamps.len() - 1] - self.timestamps[0]
    }
}

/// Uniformly sampled scalar waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSignal {
    start_time: f64,
    sample_rate: f64,
    values: Vec<f64>,
}

impl PulseSignal {
    pub fn new(start_time: f64, sample_rate: f64, values: Vec<f64>) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::validation(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if !start_time.is_finite() {
            return Err(Error::validation("start time must be finite"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("non-finite pulse value at {i}")));
        }
        Ok(Self {
            start_time,
            sample_rate,
            values,
        })
    }

    /// Same timing, new values. Values must be finite.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self {
            start_time: self.start_time,
            sample_rate: self.sample_rate,
            values,
        }
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Time of sample `i`.
    pub fn time_at(&self, i: usize) -> f64 {
        self.start_time + i as f64 / self.sample_rate
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.values.len()).map(|i| self.time_at(i)).collect()
    }

    pub fn duration(&self) -> f64 {
        self.values.len() as f64 / self.sample_rate
    }
}

/// Linear interpolation over sorted knots with constant extension past the ends.
pub(crate) fn interp_clamped(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    debug_assert!(!xs.is_empty() && xs.len() == ys.len());
    let last = xs.len() - 1;
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[last] {
        return ys[last];
    }
    // first knot strictly greater than x
    let hi = xs.partition_point(|&k| k <= x);
    let lo = hi - 1;
    let w = (x - xs[lo]) / (xs[hi] - xs[lo]);
    ys[lo] + w * (ys[hi] - ys[lo])
}

/// Instantaneous heart rate over time.
#[derive(Debug, Clone, PartialEq)]
pub struct HrCurve {
    times: Vec<f64>,
    hr_bpm: Vec<f64>,
}

impl HrCurve {
    pub fn new(times: Vec<f64>, hr_bpm: Vec<f64>) -> Result<Self> {
        if times.len() != hr_bpm.len() {
            return Err(Error::validation("HR curve times and values differ in length"));
        }
        if times.is_empty() {
            return Err(Error::validation("HR curve is empty"));
        }
        check_increasing(&times)?;
        if let Some(bad) = hr_bpm
            .iter()
            .find(|v| !(HR_MIN_BPM - 1e-9..=HR_MAX_BPM + 1e-9).contains(*v))
        {
            return Err(Error::validation(format!(
                "heart rate {bad} BPM outside [{HR_MIN_BPM}, {HR_MAX_BPM}]"
            )));
        }
        Ok(Self { times, hr_bpm })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn hr_bpm(&self) -> &[f64] {
        &self.hr_bpm
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// HR at time `t`, linear between knots and constant beyond them.
    pub fn at(&self, t: f64) -> f64 {
        interp_clamped(&self.times, &self.hr_bpm, t)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.hr_bpm
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

fn check_increasing(times: &[f64]) -> Result<()> {
    if let Some(i) = times.iter().position(|t| !t.is_finite()) {
        return Err(Error::validation(format!("non-finite time at {i}")));
    }
    if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::validation(format!(
            "times not strictly increasing at index {}",
            i + 1
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Seconds,
    Bpm,
}

/// Irregularly sampled series: IBIs, HRV, detrended HRV.
#[derive(Debug, Clone, PartialEq)]
pub struct UnevenSeries {
    times: Vec<f64>,
    values: Vec<f64>,
    unit: Unit,
}

impl UnevenSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>, unit: Unit) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::validation("series times and values differ in length"));
        }
        check_increasing(&times)?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("non-finite series value at {i}")));
        }
        Ok(Self {
            times,
            values,
            unit,
        })
    }

    pub fn empty(unit: Unit) -> Self {
        Self {
            times: Vec::new(),
            values: Vec::new(),
            unit,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Keeps the samples for which `keep(index, value)` holds.
    pub(crate) fn filter_by(&self, mut keep: impl FnMut(usize, f64) -> bool) -> Self {
        let (times, values) = self
            .times
            .iter()
            .zip(&self.values)
            .enumerate()
            .filter(|(i, (_, &v))| keep(*i, v))
            .map(|(_, (&t, &v))| (t, v))
            .unzip();
        Self {
            times,
            values,
            unit: self.unit,
        }
    }
}
