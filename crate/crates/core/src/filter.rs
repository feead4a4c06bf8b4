//! Butterworth bandpass design and zero-phase (forward-backward) filtering.
//!
//! The analog lowpass prototype of order `N` is transformed to a bandpass of
//! order `2N` around the prewarped band edges and mapped to the z-plane with
//! the bilinear transform. The result is kept as `N` second-order sections,
//! each with zeros at `z = ±1` and unit gain at the band centre.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::series::PulseSignal;

/// Second-order section, `a[0] == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + self.b[1] * z_inv + self.b[2] * z2) / (self.a[0] + self.a[1] * z_inv + self.a[2] * z2)
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (self.a[0] + self.a[1] + self.a[2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bandpass {
    sections: Vec<Biquad>,
    sample_rate: f64,
    band: (f64, f64),
}

impl Bandpass {
    /// Designs an order-`order` Butterworth bandpass (prototype order; the
    /// resulting filter has `2 * order` poles).
    pub fn butterworth(order: usize, low_hz: f64, high_hz: f64, sample_rate: f64) -> Result<Self> {
        let nyquist = sample_rate / 2.0;
        let bad = |reason: &str| Error::InvalidBand {
            low: low_hz,
            high: high_hz,
            reason: reason.to_string(),
        };
        if order == 0 {
            return Err(bad("filter order must be at least 1"));
        }
        if !(low_hz.is_finite() && high_hz.is_finite()) || low_hz <= 0.0 {
            return Err(bad("lower edge must be positive"));
        }
        if low_hz >= high_hz {
            return Err(bad("lower edge must be below upper edge"));
        }
        if high_hz >= nyquist {
            return Err(bad(&format!("upper edge must be below Nyquist ({nyquist} Hz)")));
        }
        let w1 = (std::f64::consts::PI * low_hz / sample_rate).tan();
        let w2 = (std::f64::consts::PI * high_hz / sample_rate).tan();
        let bw = w2 - w1;
        let w0sq = w1 * w2;

        let n = order as f64;
        let mut poles = Vec::with_capacity(2 * order);
        for k in 1..=order {
            let theta = std::f64::consts::PI * (2.0 * k as f64 + n - 1.0) / (2.0 * n);
            let p = Complex64::from_polar(1.0, theta);
            let a = p * (bw / 2.0);
            let d = (a * a - w0sq).sqrt();
            for s in [a + d, a - d] {
                poles.push((Complex64::new(1.0, 0.0) + s) / (Complex64::new(1.0, 0.0) - s));
            }
        }

        let centre = 2.0 * w0sq.sqrt().atan();
        let z_inv = Complex64::from_polar(1.0, -centre);
        let sections = pair_poles(&poles)
            .into_iter()
            .map(|a| {
                let mut bq = Biquad { b: [1.0, 0.0, -1.0], a };
                let g = bq.response(z_inv).norm();
                for v in &mut bq.b {
                    *v /= g;
                }
                bq
            })
            .collect();
        Ok(Self {
            sections,
            sample_rate,
            band: (low_hz, high_hz),
        })
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    pub fn band(&self) -> (f64, f64) {
        self.band
    }

    /// Single-pass complex frequency response at `f_hz`.
    pub fn response(&self, f_hz: f64) -> Complex64 {
        let w = 2.0 * std::f64::consts::PI * f_hz / self.sample_rate;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections.iter().map(|s| s.response(z_inv)).product()
    }

    /// Number of samples of odd extension used at each end by [`Self::filtfilt`].
    pub fn pad_len(&self) -> usize {
        3 * (2 * self.sections.len() + 1)
    }

    /// Per-section steady-state states for a unit step input.
    fn step_state(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let g = s.dc_gain();
                let z1 = (s.b[2] - s.a[2] * g) * scale;
                let z0 = (s.b[1] - s.a[1] * g) * scale + z1;
                scale *= g;
                [z0, z1]
            })
            .collect()
    }

    fn run(&self, x: &[f64], init: f64) -> Vec<f64> {
        let mut state: Vec<[f64; 2]> = self
            .step_state()
            .into_iter()
            .map(|z| [z[0] * init, z[1] * init])
            .collect();
        let mut y = x.to_vec();
        for (s, z) in self.sections.iter().zip(state.iter_mut()) {
            for v in y.iter_mut() {
                let xin = *v;
                let out = s.b[0] * xin + z[0];
                z[0] = s.b[1] * xin - s.a[1] * out + z[1];
                z[1] = s.b[2] * xin - s.a[2] * out;
                *v = out;
            }
        }
        y
    }

    /// Causal single pass, started in steady state for the first sample.
    pub fn filter_forward(&self, x: &[f64]) -> Vec<f64> {
        match x.first() {
            Some(&x0) => self.run(x, x0),
            None => Vec::new(),
        }
    }

    /// Forward pass, then a pass over the time-reversed output, with odd
    /// extension at both ends to suppress start-up transients.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n < 2 {
            return x.to_vec();
        }
        let pad = self.pad_len().min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let mut y = self.run(&ext, ext[0]);
        y.reverse();
        let mut y = self.run(&y, y[0]);
        y.reverse();
        y.drain(..pad);
        y.truncate(n);
        y
    }
}

/// Groups poles into conjugate (or real) pairs as biquad denominators.
fn pair_poles(poles: &[Complex64]) -> Vec<[f64; 3]> {
    const IMAG_TOL: f64 = 1e-12;
    let mut out = Vec::new();
    let mut reals: Vec<f64> = Vec::new();
    for p in poles {
        if p.im > IMAG_TOL {
            out.push([1.0, -2.0 * p.re, p.norm_sqr()]);
        } else if p.im.abs() <= IMAG_TOL {
            reals.push(p.re);
        }
    }
    reals.sort_by(f64::total_cmp);
    for pair in reals.chunks(2) {
        match *pair {
            [r1, r2] => out.push([1.0, -(r1 + r2), r1 * r2]),
            [r] => out.push([1.0, -r, 0.0]),
            _ => unreachable!(),
        }
    }
    out
}

/// Zero-phase Butterworth bandpass of a pulse signal.
pub fn zero_phase_bandpass(pulse: &PulseSignal, band: (f64, f64), order: usize) -> Result<PulseSignal> {
    let needed = 3 * order + 1;
    if pulse.len() < needed {
        return Err(Error::SignalTooShort {
            needed,
            got: pulse.len(),
        });
    }
    let bp = Bandpass::butterworth(order, band.0, band.1, pulse.sample_rate())?;
    Ok(pulse.with_values(bp.filtfilt(pulse.values())))
}
