//! Beat-level processing after HR tracking: adaptive second-phase band, peak
//! picking, quadratic peak refinement, inter-beat intervals and detrended HRV.

use crate::error::{Error, Result};
use crate::series::{HrCurve, PulseSignal, UnevenSeries, Unit};

/// Lowest admissible lower edge of the second filter.
pub const SECOND_BAND_FLOOR_HZ: f64 = 0.4;
/// Highest admissible upper edge, as a fraction of the sample rate.
pub const SECOND_BAND_CEIL_FRAC: f64 = 0.45;
/// Minimum peak spacing as a fraction of the fastest in-band period.
pub const PEAK_MIN_SEPARATION_FRAC: f64 = 0.6;
/// Peaks must rise above this percentile of the signal.
pub const PEAK_HEIGHT_PERCENTILE: f64 = 60.0;
pub const MIN_PEAKS: usize = 4;

/// Second-phase band from the tracked HR range widened by `offset_bpm` on
/// each side, clamped to `[0.4 Hz, 0.45 · fs]`.
pub fn design_second_band(hr: &HrCurve, offset_bpm: f64, sample_rate: f64) -> Result<(f64, f64)> {
    if hr.is_empty() {
        return Err(Error::InsufficientData("empty HR curve".into()));
    }
    let (hr1, hr2) = hr.min_max();
    let low = ((hr1 - offset_bpm) / 60.0).max(SECOND_BAND_FLOOR_HZ);
    let high = ((hr2 + offset_bpm) / 60.0).min(SECOND_BAND_CEIL_FRAC * sample_rate);
    if low >= high {
        return Err(Error::InvalidBand {
            low,
            high,
            reason: "clamped second-filter band is empty".into(),
        });
    }
    Ok((low, high))
}

/// Detected maxima. `times` are raw or refined peak instants.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakList {
    times: Vec<f64>,
    raw_indices: Vec<usize>,
}

impl PeakList {
    pub fn new(times: Vec<f64>, raw_indices: Vec<usize>) -> Result<Self> {
        if times.len() != raw_indices.len() {
            return Err(Error::validation("peak times and indices differ in length"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("peak times must be strictly increasing"));
        }
        Ok(Self { times, raw_indices })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn raw_indices(&self) -> &[usize] {
        &self.raw_indices
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn percentile(values: &[f64], pct: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = pct / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Local maxima above the 60th percentile, selected greedily by height with a
/// minimum spacing of `0.6 / high_hz` seconds. Times are the raw sample times.
pub fn detect_peaks(pulse: &PulseSignal, band: (f64, f64)) -> Result<PeakList> {
    let x = pulse.values();
    let n = x.len();
    if n < 3 {
        return Err(Error::TooFewPeaks { found: 0 });
    }
    let threshold = percentile(x, PEAK_HEIGHT_PERCENTILE);
    let mut candidates: Vec<usize> = (1..n - 1)
        .filter(|&i| x[i] > x[i - 1] && x[i] >= x[i + 1] && x[i] > threshold)
        .collect();
    candidates.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));

    let min_sep = PEAK_MIN_SEPARATION_FRAC / band.1 * pulse.sample_rate();
    let mut taken: Vec<usize> = Vec::new();
    for c in candidates {
        if taken.iter().all(|&t| (t.abs_diff(c) as f64) >= min_sep) {
            taken.push(c);
        }
    }
    taken.sort_unstable();
    if taken.len() < MIN_PEAKS {
        return Err(Error::TooFewPeaks { found: taken.len() });
    }
    let times = taken.iter().map(|&i| pulse.time_at(i)).collect();
    PeakList::new(times, taken)
}

/// Vertex offset in samples of the parabola through three samples around a
/// maximum, clamped to ±0.5. A flat triple has offset 0.
pub fn vertex_offset(prev: f64, centre: f64, next: f64) -> f64 {
    let denom = prev - 2.0 * centre + next;
    if denom == 0.0 {
        return 0.0;
    }
    (0.5 * (prev - next) / denom).clamp(-0.5, 0.5)
}

/// Quadratically refined time of the maximum at `raw_index`.
pub fn refine_peak(pulse: &PulseSignal, raw_index: usize) -> Result<f64> {
    let x = pulse.values();
    if raw_index == 0 || raw_index + 1 >= x.len() {
        return Err(Error::validation(format!(
            "peak index {raw_index} has no neighbours on both sides"
        )));
    }
    let delta = vertex_offset(x[raw_index - 1], x[raw_index], x[raw_index + 1]);
    Ok((raw_index as f64 + delta) / pulse.sample_rate() + pulse.start_time())
}

/// Refines every peak of `peaks` against `pulse`.
pub fn refine_peaks(pulse: &PulseSignal, peaks: &PeakList) -> Result<PeakList> {
    let times = peaks
        .raw_indices()
        .iter()
        .map(|&i| refine_peak(pulse, i))
        .collect::<Result<Vec<_>>>()?;
    PeakList::new(times, peaks.raw_indices().to_vec())
}

/// Interval between adjacent peaks, stamped at their midpoint.
pub fn compute_ibi(peaks: &PeakList) -> Result<UnevenSeries> {
    let t = peaks.times();
    if t.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} peaks, at least 2 needed for an interval",
            t.len()
        )));
    }
    let (times, values) = t.windows(2).map(|w| (0.5 * (w[0] + w[1]), w[1] - w[0])).unzip();
    UnevenSeries::new(times, values, Unit::Seconds)
}

/// HRV in BPM: 60 / IBI.
pub fn ibi_to_hrv(ibi: &UnevenSeries) -> Result<UnevenSeries> {
    if let Some(v) = ibi.values().iter().find(|v| **v <= 0.0) {
        return Err(Error::validation(format!("non-positive inter-beat interval {v}")));
    }
    let values = ibi.values().iter().map(|v| 60.0 / v).collect();
    UnevenSeries::new(ibi.times().to_vec(), values, Unit::Bpm)
}

/// Subtracts the HR curve, linearly interpolated at each HRV time.
pub fn detrend_hrv(hrv: &UnevenSeries, hr: &HrCurve) -> Result<UnevenSeries> {
    if hrv.is_empty() || hr.is_empty() {
        return Err(Error::InsufficientData("nothing to detrend".into()));
    }
    let values = hrv
        .times()
        .iter()
        .zip(hrv.values())
        .map(|(&t, &v)| v - hr.at(t))
        .collect();
    UnevenSeries::new(hrv.times().to_vec(), values, Unit::Bpm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn const_hr(bpm: f64) -> HrCurve {
        HrCurve::new(vec![0.0, 30.0], vec![bpm, bpm]).unwrap()
    }

    #[test]
    fn second_band_constant_hr() {
        let (lo, hi) = design_second_band(&const_hr(72.0), 30.0, 30.0).unwrap();
        assert!((lo - 0.7).abs() < 1e-12 && (hi - 1.7).abs() < 1e-12);
    }

    #[test]
    fn second_band_range() {
        let hr = HrCurve::new(vec![0.0, 10.0, 20.0], vec![60.0, 90.0, 75.0]).unwrap();
        let (lo, hi) = design_second_band(&hr, 30.0, 30.0).unwrap();
        assert!((lo - 0.5).abs() < 1e-12 && (hi - 2.0).abs() < 1e-12);
    }

    #[test]
    fn second_band_low_clamp() {
        let hr = HrCurve::new(vec![0.0, 10.0], vec![50.0, 60.0]).unwrap();
        let (lo, _) = design_second_band(&hr, 30.0, 30.0).unwrap();
        // (50 - 30) / 60 = 0.333 Hz
        assert_eq!(lo, SECOND_BAND_FLOOR_HZ);
    }

    #[test]
    fn second_band_high_clamp_and_empty() {
        let hr = HrCurve::new(vec![0.0, 10.0], vec![200.0, 220.0]).unwrap();
        let (_, hi) = design_second_band(&hr, 30.0, 8.0).unwrap();
        assert!((hi - 3.6).abs() < 1e-12);
        assert!(design_second_band(&hr, 30.0, 4.0).is_err());
    }

    #[test]
    fn sinusoid_peaks_at_quarter_periods() {
        let fs = 30.0;
        let v: Vec<f64> = (0..900).map(|i| (2.0 * PI * i as f64 / fs).sin()).collect();
        let p = PulseSignal::new(0.0, fs, v).unwrap();
        let peaks = detect_peaks(&p, (0.7, 1.7)).unwrap();
        assert_eq!(peaks.len(), 30);
        for (k, t) in peaks.times().iter().enumerate() {
            assert!((t - (k as f64 + 0.25)).abs() <= 1.0 / fs + 1e-12);
        }
    }

    #[test]
    fn constant_signal_has_too_few_peaks() {
        let p = PulseSignal::new(0.0, 30.0, vec![1.0; 300]).unwrap();
        assert!(matches!(detect_peaks(&p, (0.7, 1.7)), Err(Error::TooFewPeaks { found: 0 })));
    }

    #[test]
    fn vertex_offsets() {
        assert_eq!(vertex_offset(1.0, 2.0, 1.0), 0.0);
        // y = -0.75 d^2 + 0.25 d + 2 through (1, 2, 1.5): vertex at d = 1/6
        assert!((vertex_offset(1.0, 2.0, 1.5) - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(vertex_offset(2.0, 2.0, 2.0), 0.0);
        assert_eq!(vertex_offset(0.0, 1.0, 1.0), 0.5);
        assert_eq!(vertex_offset(3.0, 2.0, 0.0), -0.5);
    }

    #[test]
    fn refine_needs_neighbours() {
        let p = PulseSignal::new(0.0, 30.0, vec![1.0, 2.0, 1.0]).unwrap();
        assert!(refine_peak(&p, 0).is_err());
        assert!(refine_peak(&p, 2).is_err());
        assert_eq!(refine_peak(&p, 1).unwrap(), 1.0 / 30.0);
    }

    #[test]
    fn ibi_midpoints() {
        let ibi = compute_ibi(&PeakList::new(vec![0.0, 1.0, 2.0], vec![0, 30, 60]).unwrap()).unwrap();
        assert_eq!(ibi.times(), &[0.5, 1.5]);
        assert_eq!(ibi.values(), &[1.0, 1.0]);
        let ibi = compute_ibi(&PeakList::new(vec![0.0, 0.8, 1.9], vec![0, 24, 57]).unwrap()).unwrap();
        assert!((ibi.times()[0] - 0.4).abs() < 1e-15 && (ibi.times()[1] - 1.35).abs() < 1e-15);
        assert!((ibi.values()[0] - 0.8).abs() < 1e-15 && (ibi.values()[1] - 1.1).abs() < 1e-15);
        assert!(compute_ibi(&PeakList::new(vec![0.0], vec![0]).unwrap()).is_err());
    }

    #[test]
    fn hrv_values() {
        let ibi = UnevenSeries::new(vec![0.5, 1.5], vec![1.0, 0.75], Unit::Seconds).unwrap();
        let hrv = ibi_to_hrv(&ibi).unwrap();
        assert_eq!(hrv.values(), &[60.0, 80.0]);
        let bad = UnevenSeries::new(vec![0.5], vec![0.0], Unit::Seconds).unwrap();
        assert!(ibi_to_hrv(&bad).is_err());
    }

    #[test]
    fn detrend_constant() {
        let hrv = UnevenSeries::new(vec![1.0, 2.0, 3.0], vec![70.0; 3], Unit::Bpm).unwrap();
        let d = detrend_hrv(&hrv, &const_hr(70.0)).unwrap();
        assert!(d.values().iter().all(|v| *v == 0.0));
        let t: Vec<f64> = (0..40).map(|i| 0.4 + 0.7 * i as f64).collect();
        let m: Vec<f64> = t.iter().map(|t| (2.0 * PI * 0.25 * t).sin()).collect();
        let hrv = UnevenSeries::new(t, m.iter().map(|v| 70.0 + v).collect(), Unit::Bpm).unwrap();
        let d = detrend_hrv(&hrv, &const_hr(70.0)).unwrap();
        for (a, b) in d.values().iter().zip(&m) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}
