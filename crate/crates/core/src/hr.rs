//! Heart-rate curve tracking: first-phase bandpass, short-time spectrum and a
//! Viterbi ridge tracker over the cardiac band.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::filter::zero_phase_bandpass;
use crate::series::{interp_clamped, HrCurve, PulseSignal, HR_MAX_BPM, HR_MIN_BPM};

/// Log-magnitude floor for empty bins.
pub const RIDGE_EPS: f64 = 1e-12;
/// Target spacing of the zero-padded frequency grid.
pub const MAX_BIN_HZ: f64 = 0.02;

/// First-phase zero-phase bandpass over the cardiac band.
pub fn bandpass_hr(pulse: &PulseSignal, band: (f64, f64), order: usize) -> Result<PulseSignal> {
    zero_phase_bandpass(pulse, band, order)
}

/// Magnitude spectrogram restricted to a frequency band.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeFreqMap {
    frame_times: Vec<f64>,
    freqs_hz: Vec<f64>,
    /// Row-major, one row of `freqs_hz.len()` per frame.
    magnitudes: Vec<f64>,
    /// Sample times of the source signal, for interpolating tracked ridges.
    sample_times: Vec<f64>,
}

impl TimeFreqMap {
    pub fn new(
        frame_times: Vec<f64>,
        freqs_hz: Vec<f64>,
        magnitudes: Vec<f64>,
        sample_times: Vec<f64>,
    ) -> Result<Self> {
        if frame_times.is_empty() || freqs_hz.is_empty() {
            return Err(Error::validation("time-frequency map is empty"));
        }
        if magnitudes.len() != frame_times.len() * freqs_hz.len() {
            return Err(Error::validation("time-frequency map dimensions are inconsistent"));
        }
        if freqs_hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("frequency grid must be strictly increasing"));
        }
        if magnitudes.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::validation("magnitudes must be finite and non-negative"));
        }
        Ok(Self {
            frame_times,
            freqs_hz,
            magnitudes,
            sample_times,
        })
    }

    pub fn frame_times(&self) -> &[f64] {
        &self.frame_times
    }

    pub fn freqs_hz(&self) -> &[f64] {
        &self.freqs_hz
    }

    pub fn n_frames(&self) -> usize {
        self.frame_times.len()
    }

    pub fn n_freqs(&self) -> usize {
        self.freqs_hz.len()
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let f = self.n_freqs();
        &self.magnitudes[t * f..(t + 1) * f]
    }

    pub fn sample_times(&self) -> &[f64] {
        &self.sample_times
    }
}

fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Hann-windowed short-time Fourier magnitude over `band`, zero-padded so the
/// bin spacing is at most [`MAX_BIN_HZ`]. Frame times are window centres.
pub fn spectrogram(pulse: &PulseSignal, window_s: f64, hop_s: f64, band: (f64, f64)) -> Result<TimeFreqMap> {
    let fs = pulse.sample_rate();
    let win = (window_s * fs).round() as usize;
    let hop = ((hop_s * fs).round() as usize).max(1);
    if win < 2 || pulse.len() < win {
        return Err(Error::SignalTooShort {
            needed: win.max(2),
            got: pulse.len(),
        });
    }
    let nfft = ((fs / MAX_BIN_HZ).ceil() as usize).max(win).next_power_of_two();
    let df = fs / nfft as f64;
    let bins: Vec<usize> = (0..=nfft / 2)
        .filter(|&k| {
            let f = k as f64 * df;
            f >= band.0 && f <= band.1
        })
        .collect();
    if bins.is_empty() {
        return Err(Error::InvalidBand {
            low: band.0,
            high: band.1,
            reason: "no frequency bins inside band".into(),
        });
    }
    let window = hann(win);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nfft);
    let x = pulse.values();
    let mut frame_times = Vec::new();
    let mut magnitudes = Vec::new();
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    let mut start = 0;
    while start + win <= x.len() {
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for (i, (w, v)) in window.iter().zip(&x[start..start + win]).enumerate() {
            buf[i] = Complex64::new(w * v, 0.0);
        }
        fft.process(&mut buf);
        magnitudes.extend(bins.iter().map(|&k| buf[k].norm()));
        frame_times.push(pulse.time_at(start) + (win - 1) as f64 / (2.0 * fs));
        start += hop;
    }
    let freqs = bins.iter().map(|&k| k as f64 * df).collect();
    TimeFreqMap::new(frame_times, freqs, magnitudes, pulse.times())
}

/// Score of a path under the ridge objective.
pub fn path_score(map: &TimeFreqMap, path: &[usize], lambda: f64) -> f64 {
    let f = map.freqs_hz();
    let mut score = 0.0;
    for (t, &k) in path.iter().enumerate() {
        score += (map.frame(t)[k] + RIDGE_EPS).ln();
        if t > 0 {
            score -= lambda * (f[k] - f[path[t - 1]]).abs();
        }
    }
    score
}

/// Frequency-bin path maximising Σ log(mag + ε) − λ Σ |Δf|. Ties go to the
/// lower frequency.
pub fn ridge_path(map: &TimeFreqMap, lambda: f64) -> Vec<usize> {
    let nt = map.n_frames();
    let nf = map.n_freqs();
    let freqs = map.freqs_hz();
    let mut score: Vec<f64> = map.frame(0).iter().map(|m| (m + RIDGE_EPS).ln()).collect();
    let mut back = vec![0usize; nt * nf];
    let mut next = vec![0.0; nf];
    for t in 1..nt {
        let local = map.frame(t);
        for k in 0..nf {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for (j, s) in score.iter().enumerate() {
                let cand = s - lambda * (freqs[k] - freqs[j]).abs();
                if cand > best {
                    best = cand;
                    arg = j;
                }
            }
            next[k] = best + (local[k] + RIDGE_EPS).ln();
            back[t * nf + k] = arg;
        }
        std::mem::swap(&mut score, &mut next);
    }
    let mut k = 0;
    for (j, s) in score.iter().enumerate() {
        if *s > score[k] {
            k = j;
        }
    }
    let mut path = vec![0; nt];
    path[nt - 1] = k;
    for t in (1..nt).rev() {
        k = back[t * nf + k];
        path[t - 1] = k;
    }
    path
}

/// Tracks the HR ridge and interpolates it onto every source sample time.
pub fn trace_ridge(map: &TimeFreqMap, lambda: f64) -> Result<HrCurve> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::validation(format!("transition penalty must be >= 0, got {lambda}")));
    }
    let path = ridge_path(map, lambda);
    let bpm: Vec<f64> = path
        .iter()
        .map(|&k| (60.0 * map.freqs_hz()[k]).clamp(HR_MIN_BPM, HR_MAX_BPM))
        .collect();
    let times = if map.sample_times().is_empty() {
        map.frame_times().to_vec()
    } else {
        map.sample_times().to_vec()
    };
    let hr = times
        .iter()
        .map(|&t| interp_clamped(map.frame_times(), &bpm, t))
        .collect();
    HrCurve::new(times, hr)
}
