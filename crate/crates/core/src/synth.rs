//! Synthetic pulses, RGB traces and point tracks with exact ground truth.
//!
//! Heart rate follows `HR(t) = hr0 + a·sin(2π·rr/60·t)`; its cardiac phase
//! `φ(t) = ∫₀ᵗ HR/60` has the closed form used by [`SynthSpec::phase_at`].
//! Beats are the instants where `φ` crosses an integer.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::io::TrackRow;
use crate::motion::AffineTransform;
use crate::series::{HrCurve, PulseSignal, RgbTrace, UnevenSeries, Unit, HR_MAX_BPM, HR_MIN_BPM};

/// Relative pulsatility of the r, g, b channels.
pub const CHANNEL_WEIGHTS: [f64; 3] = [0.3, 0.8, 0.5];
/// Mean skin colour of generated traces.
pub const BASELINE_RGB: [f64; 3] = [150.0, 110.0, 90.0];
/// Amplitude of the second harmonic in the pulse waveform.
pub const SECOND_HARMONIC: f64 = 0.3;
const BEAT_TOL_S: f64 = 1e-10;

fn infinite() -> f64 {
    f64::INFINITY
}

mod snr_serde {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub hr0_bpm: f64,
    pub rsa_amp_bpm: f64,
    pub rr_brpm: f64,
    /// Signal-to-noise ratio in dB; infinite (or `null` in JSON) means noise-free.
    #[serde(default = "infinite", with = "snr_serde")]
    pub snr_db: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::validation(format!("invalid synth spec: {m}")));
        for (name, v) in [
            ("duration_s", self.duration_s),
            ("sample_rate_hz", self.sample_rate_hz),
            ("hr0_bpm", self.hr0_bpm),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.rsa_amp_bpm.is_finite() && self.rsa_amp_bpm >= 0.0 && self.rsa_amp_bpm < self.hr0_bpm) {
            return bad(format!("rsa_amp_bpm must be in [0, hr0), got {}", self.rsa_amp_bpm));
        }
        if !(self.rr_brpm > 0.0 && self.rr_brpm < 60.0) {
            return bad(format!("rr_brpm must be in (0, 60), got {}", self.rr_brpm));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return bad("snr_db must be a number or +inf".into());
        }
        let (lo, hi) = (self.hr0_bpm - self.rsa_amp_bpm, self.hr0_bpm + self.rsa_amp_bpm);
        if lo < HR_MIN_BPM || hi > HR_MAX_BPM {
            return bad(format!("heart rate range [{lo}, {hi}] leaves [{HR_MIN_BPM}, {HR_MAX_BPM}] BPM"));
        }
        Ok(())
    }

    fn rr_hz(&self) -> f64 {
        self.rr_brpm / 60.0
    }

    /// RSA component of the heart rate at `t`, in BPM.
    pub fn rsa_at(&self, t: f64) -> f64 {
        self.rsa_amp_bpm * (2.0 * PI * self.rr_hz() * t).sin()
    }

    pub fn hr_at(&self, t: f64) -> f64 {
        self.hr0_bpm + self.rsa_at(t)
    }

    /// Closed-form cardiac phase in cycles.
    pub fn phase_at(&self, t: f64) -> f64 {
        let f = self.rr_hz();
        let a = self.rsa_amp_bpm;
        self.hr0_bpm * t / 60.0 - a * (2.0 * PI * f * t).cos() / (120.0 * PI * f) + a / (120.0 * PI * f)
    }

    /// Inverts [`Self::phase_at`] by bisection.
    pub fn time_at_phase(&self, phase: f64) -> f64 {
        // hr0·t/60 ≤ φ(t) ≤ hr0·t/60 + a/(60πf)
        let slack = self.rsa_amp_bpm / (60.0 * PI * self.rr_hz());
        let mut lo = ((phase - slack) * 60.0 / self.hr0_bpm).max(0.0);
        let mut hi = (phase * 60.0 / self.hr0_bpm).max(0.0);
        if self.phase_at(hi) < phase {
            hi = lo.max(hi) + 1.0;
        }
        while hi - lo > BEAT_TOL_S {
            let mid = 0.5 * (lo + hi);
            if self.phase_at(mid) < phase {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Beat instants in `[0, duration)`.
    pub fn beat_times(&self) -> Vec<f64> {
        let end = self.phase_at(self.duration_s);
        (0..)
            .map(|k| k as f64)
            .take_while(|&k| k < end)
            .map(|k| if k == 0.0 { 0.0 } else { self.time_at_phase(k) })
            .collect()
    }

    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }

    pub fn sample_times(&self) -> Vec<f64> {
        (0..self.n_samples()).map(|i| i as f64 / self.sample_rate_hz).collect()
    }
}

/// Noise-free pulse waveform at cardiac phase `phase`.
pub fn waveform(phase: f64) -> f64 {
    (2.0 * PI * phase).sin() + SECOND_HARMONIC * (4.0 * PI * phase).sin()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub beat_times: Vec<f64>,
    pub hr_curve: HrCurve,
    pub rr_brpm: f64,
    pub rsa_waveform: UnevenSeries,
}

/// Serialised form of [`GroundTruth`] (`truth.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub rr_brpm: f64,
    pub beat_times: Vec<f64>,
    pub hr_curve: HrCurveFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HrCurveFile {
    pub t_s: Vec<f64>,
    pub hr_bpm: Vec<f64>,
}

impl From<&GroundTruth> for TruthFile {
    fn from(g: &GroundTruth) -> Self {
        Self {
            rr_brpm: g.rr_brpm,
            beat_times: g.beat_times.clone(),
            hr_curve: HrCurveFile {
                t_s: g.hr_curve.times().to_vec(),
                hr_bpm: g.hr_curve.hr_bpm().to_vec(),
            },
        }
    }
}

fn ground_truth(spec: &SynthSpec) -> Result<GroundTruth> {
    let times = spec.sample_times();
    let hr = times.iter().map(|&t| spec.hr_at(t)).collect();
    let rsa = times.iter().map(|&t| spec.rsa_at(t)).collect();
    Ok(GroundTruth {
        beat_times: spec.beat_times(),
        hr_curve: HrCurve::new(times.clone(), hr)?,
        rr_brpm: spec.rr_brpm,
        rsa_waveform: UnevenSeries::new(times, rsa, Unit::Bpm)?,
    })
}

/// Noise standard deviation giving `snr_db` against a signal of mean power `signal_power`.
pub fn noise_sigma(signal_power: f64, snr_db: f64) -> f64 {
    if snr_db.is_infinite() {
        0.0
    } else {
        (signal_power / 10f64.powf(snr_db / 10.0)).sqrt()
    }
}

fn noisy_waveform(spec: &SynthSpec) -> Vec<f64> {
    let clean: Vec<f64> = spec
        .sample_times()
        .iter()
        .map(|&t| waveform(spec.phase_at(t)))
        .collect();
    let power = clean.iter().map(|v| v * v).sum::<f64>() / clean.len().max(1) as f64;
    let sigma = noise_sigma(power, spec.snr_db);
    if sigma == 0.0 {
        return clean;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    clean.into_iter().map(|v| v + normal.sample(&mut rng)).collect()
}

pub fn gen_pulse(spec: &SynthSpec) -> Result<(PulseSignal, GroundTruth)> {
    spec.validate()?;
    if spec.n_samples() < 2 {
        return Err(Error::validation("synth spec yields fewer than two samples"));
    }
    let pulse = PulseSignal::new(0.0, spec.sample_rate_hz, noisy_waveform(spec))?;
    Ok((pulse, ground_truth(spec)?))
}

/// RGB trace whose channels are `base·(1 + drift·t + weight·strength·pulse(t))`.
pub fn gen_rgb_trace(spec: &SynthSpec, pulse_strength: f64, drift: [f64; 3]) -> Result<(RgbTrace, GroundTruth)> {
    if !(pulse_strength > 0.0 && pulse_strength <= 0.05) {
        return Err(Error::validation(format!(
            "pulse_strength must be in (0, 0.05], got {pulse_strength}"
        )));
    }
    if drift.iter().any(|d| !d.is_finite()) {
        return Err(Error::validation("drift must be finite"));
    }
    let (pulse, truth) = gen_pulse(spec)?;
    let times = pulse.times();
    let samples = times
        .iter()
        .zip(pulse.values())
        .map(|(&t, &p)| {
            let mut px = [0.0; 3];
            for c in 0..3 {
                px[c] = BASELINE_RGB[c] * (1.0 + drift[c] * t + CHANNEL_WEIGHTS[c] * pulse_strength * p);
            }
            px
        })
        .collect();
    Ok((RgbTrace::new(times, samples)?, truth))
}

/// Input file for the `synth` subcommand: a [`SynthSpec`] plus trace options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthFile {
    #[serde(flatten)]
    pub spec: SynthSpec,
    #[serde(default = "default_strength")]
    pub pulse_strength: f64,
    #[serde(default)]
    pub drift: [f64; 3],
}

fn default_strength() -> f64 {
    0.01
}

/// Point tracks moved by `motion[f]` from frame `f` to `f + 1`.
///
/// Initial points are uniform in a 100×100 px box; every frame, including the
/// first, gets independent Gaussian noise of `noise_px`.
pub fn gen_point_tracks(
    n_points: usize,
    n_frames: usize,
    motion: &[AffineTransform],
    noise_px: f64,
    seed: u64,
) -> Result<(Vec<TrackRow>, Vec<AffineTransform>)> {
    if n_points < 3 || n_frames == 0 {
        return Err(Error::validation(format!(
            "need >= 3 points and >= 1 frame, got {n_points} points, {n_frames} frames"
        )));
    }
    if motion.len() + 1 != n_frames {
        return Err(Error::validation(format!(
            "{} transforms given for {n_frames} frames",
            motion.len()
        )));
    }
    if !(noise_px.is_finite() && noise_px >= 0.0) {
        return Err(Error::validation("noise_px must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts: Vec<[f64; 2]> = (0..n_points)
        .map(|_| [rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)])
        .collect();
    let normal = Normal::new(0.0, noise_px).expect("finite noise");
    let mut rows = Vec::with_capacity(n_points * n_frames);
    for f in 0..n_frames {
        if f > 0 {
            for p in &mut pts {
                *p = motion[f - 1].apply(*p);
            }
        }
        for (id, p) in pts.iter().enumerate() {
            let (dx, dy) = if noise_px > 0.0 {
                (normal.sample(&mut rng), normal.sample(&mut rng))
            } else {
                (0.0, 0.0)
            };
            rows.push(TrackRow {
                frame: f as i64,
                point_id: id as u64,
                x: p[0] + dx,
                y: p[1] + dy,
            });
        }
    }
    Ok((rows, motion.to_vec()))
}

/// Slowly varying per-frame affine motion: small rotation, scale, shear and
/// translation, each following a random-phase sinusoid over the sequence.
pub fn smooth_motion(n_frames: usize, seed: u64) -> Vec<AffineTransform> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut param = |amp: f64| {
        let a = amp * rng.random_range(0.5..1.0);
        let phase = rng.random_range(0.0..2.0 * PI);
        let period = rng.random_range(20.0..80.0);
        move |f: f64| a * (2.0 * PI * f / period + phase).sin()
    };
    let rot = param(0.01);
    let scale = param(0.005);
    let shear = param(0.003);
    let tx = param(1.0);
    let ty = param(1.0);
    (0..n_frames.saturating_sub(1))
        .map(|f| {
            let f = f as f64;
            let (s, c) = rot(f).sin_cos();
            let k = 1.0 + scale(f);
            let h = shear(f);
            AffineTransform::new([[k * c, -k * s + h], [k * s, k * c]], [tx(f), ty(f)])
                .expect("small motion is invertible")
        })
        .collect()
}
