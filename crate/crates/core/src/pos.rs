//! Plane-Orthogonal-to-Skin pulse extraction.
//!
//! Each sliding window of `L` frames is temporally normalised per channel,
//! projected onto the plane spanned by `[0, 1, -1]` and `[-2, 1, 1]`, combined
//! with a standard-deviation ratio weight, zero-meaned and overlap-added with a
//! hop of one frame.

use crate::error::{Error, Result};
use crate::series::{PulseSignal, RgbTrace};

/// Below this, a projection of the (dimensionless) normalised channels is
/// treated as flat and gets zero weight.
const FLAT_STD: f64 = 1e-12;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population standard deviation.
fn std_pop(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Window length in frames for a duration at a given rate.
pub fn window_len(window_s: f64, rate: f64) -> usize {
    (window_s * rate).round() as usize
}

/// Projected, combined and zero-meaned contribution of one window.
fn window_pulse(window: &[[f64; 3]], start: usize, s1: &mut Vec<f64>, s2: &mut Vec<f64>) -> Result<Vec<f64>> {
    let l = window.len() as f64;
    let mut mu = [0.0; 3];
    for px in window {
        for c in 0..3 {
            mu[c] += px[c];
        }
    }
    for m in &mut mu {
        *m /= l;
    }
    if mu.contains(&0.0) {
        return Err(Error::ZeroMeanChannel { window_start: start });
    }
    s1.clear();
    s2.clear();
    for px in window {
        let (r, g, b) = (px[0] / mu[0], px[1] / mu[1], px[2] / mu[2]);
        s1.push(g - b);
        s2.push(-2.0 * r + g + b);
    }
    let sd2 = std_pop(s2);
    let weight = if sd2 > FLAT_STD { std_pop(s1) / sd2 } else { 0.0 };
    let mut h: Vec<f64> = s1.iter().zip(s2.iter()).map(|(a, b)| a + weight * b).collect();
    let hm = mean(&h);
    for v in &mut h {
        *v -= hm;
    }
    Ok(h)
}

/// Converts an RGB trace into a pulse signal of the same length and rate.
pub fn pos_extract(trace: &RgbTrace, window_s: f64) -> Result<PulseSignal> {
    if !(window_s.is_finite() && window_s > 0.0) {
        return Err(Error::validation(format!("POS window must be positive, got {window_s}")));
    }
    let rate = trace.sample_rate();
    let n = trace.len();
    let l = window_len(window_s, rate).max(1);
    if l > n {
        return Err(Error::SignalTooShort { needed: l, got: n });
    }
    let samples = trace.samples();
    let mut out = vec![0.0; n];
    let (mut s1, mut s2) = (Vec::with_capacity(l), Vec::with_capacity(l));
    for start in 0..=n - l {
        let h = window_pulse(&samples[start..start + l], start, &mut s1, &mut s2)?;
        for (o, v) in out[start..start + l].iter_mut().zip(h) {
            *o += v;
        }
    }
    PulseSignal::new(trace.timestamps()[0], rate, out)
}
