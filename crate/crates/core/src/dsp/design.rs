//! IIR filter design: Butterworth via bilinear transform with pre-warping,
//! and second-order notch filters.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::biquad::{Biquad, BiquadCascade};
use crate::error::{param, Result};

pub const MAX_ORDER: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Lowpass,
    Highpass,
    /// Order counts the full band-pass order; the low-pass prototype has
    /// half of it.
    Bandpass,
}

impl std::str::FromStr for FilterKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lowpass" => Ok(FilterKind::Lowpass),
            "highpass" => Ok(FilterKind::Highpass),
            "bandpass" => Ok(FilterKind::Bandpass),
            _ => Err(param(format!("unknown filter kind `{s}`"))),
        }
    }
}

fn check_freq(f: f64, fs: f64, what: &str) -> Result<()> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(param(format!("sample rate must be positive, got {fs}")));
    }
    if !(f.is_finite() && f > 0.0 && f < fs / 2.0) {
        return Err(param(format!("{what} {f} Hz must lie in (0, {} Hz)", fs / 2.0)));
    }
    Ok(())
}

/// Butterworth prototype poles (unit cutoff) in the upper half plane plus
/// the real pole for odd orders.
fn prototype_poles(order: usize) -> (Vec<Complex64>, Option<f64>) {
    let n = order as f64;
    let pairs = (0..order / 2)
        .map(|k| {
            let theta = PI * (2.0 * k as f64 + n + 1.0) / (2.0 * n);
            Complex64::from_polar(1.0, theta)
        })
        .collect();
    (pairs, (order % 2 == 1).then_some(-1.0))
}

fn bilinear(s: Complex64, fs: f64) -> Complex64 {
    let k = 2.0 * fs;
    (k + s) / (k - s)
}

fn prewarp(f: f64, fs: f64) -> f64 {
    2.0 * fs * (PI * f / fs).tan()
}

/// Section with poles `p` and `conj(p)` and the two given zeros.
fn section(p: Complex64, q: Complex64, z1: f64, z2: f64) -> Biquad {
    let a1 = -(p + q).re;
    let a2 = (p * q).re;
    Biquad { b0: 1.0, b1: -(z1 + z2), b2: z1 * z2, a1, a2 }
}

fn normalize_at(mut s: Biquad, omega: f64) -> Biquad {
    let g = s.response(omega).norm();
    s.b0 /= g;
    s.b1 /= g;
    s.b2 /= g;
    s
}

/// Designs a Butterworth filter as cascaded second-order sections.
///
/// Each section is normalized to unit gain at the passband reference (DC,
/// Nyquist, or the geometric band centre), so the cascade has unit
/// passband peak and -3 dB at every cutoff.
pub fn design_butterworth(order: usize, kind: FilterKind, cutoffs: &[f64], fs: f64) -> Result<BiquadCascade> {
    if order == 0 || order > MAX_ORDER {
        return Err(param(format!("order must be in 1..={MAX_ORDER}, got {order}")));
    }
    let mut sections = Vec::new();
    match kind {
        FilterKind::Lowpass | FilterKind::Highpass => {
            let [fc] = cutoffs else {
                return Err(param(format!("{kind:?} takes one cutoff, got {}", cutoffs.len())));
            };
            check_freq(*fc, fs, "cutoff")?;
            let wc = prewarp(*fc, fs);
            let (lowpass, zero, ref_omega) = match kind {
                FilterKind::Lowpass => (true, -1.0, 0.0),
                _ => (false, 1.0, PI),
            };
            let map = |p: Complex64| if lowpass { p * wc } else { wc / p };
            let (pairs, real) = prototype_poles(order);
            for p in pairs {
                let z = bilinear(map(p), fs);
                sections.push(normalize_at(section(z, z.conj(), zero, zero), ref_omega));
            }
            if let Some(r) = real {
                let z = bilinear(map(Complex64::new(r, 0.0)), fs).re;
                let s = Biquad { b0: 1.0, b1: -zero, b2: 0.0, a1: -z, a2: 0.0 };
                sections.push(normalize_at(s, ref_omega));
            }
        }
        FilterKind::Bandpass => {
            let [lo, hi] = cutoffs else {
                return Err(param(format!("bandpass takes two cutoffs, got {}", cutoffs.len())));
            };
            check_freq(*lo, fs, "lower cutoff")?;
            check_freq(*hi, fs, "upper cutoff")?;
            if lo >= hi {
                return Err(param(format!("lower cutoff {lo} Hz must be below upper cutoff {hi} Hz")));
            }
            if order % 2 != 0 {
                return Err(param(format!("bandpass order must be even, got {order}")));
            }
            let (w1, w2) = (prewarp(*lo, fs), prewarp(*hi, fs));
            let bw = w2 - w1;
            let w0sq = w1 * w2;
            let center = 2.0 * (w0sq.sqrt() / (2.0 * fs)).atan();
            // s = a ± sqrt(a² - ω0²) with a = p·BW/2, for each prototype pole p
            let split = |p: Complex64| {
                let a = p * (bw / 2.0);
                let d = (a * a - w0sq).sqrt();
                (a + d, a - d)
            };
            let (pairs, real) = prototype_poles(order / 2);
            for p in pairs {
                let (s1, s2) = split(p);
                for s in [s1, s2] {
                    let z = bilinear(s, fs);
                    sections.push(normalize_at(section(z, z.conj(), 1.0, -1.0), center));
                }
            }
            if let Some(r) = real {
                let (s1, s2) = split(Complex64::new(r, 0.0));
                let (z1, z2) = (bilinear(s1, fs), bilinear(s2, fs));
                sections.push(normalize_at(section(z1, z2, 1.0, -1.0), center));
            }
        }
    }
    sections.sort_by(|a, b| a.a2.abs().total_cmp(&b.a2.abs()));
    BiquadCascade::new(sections, fs)
}

/// Second-order notch at `f0`.
///
/// `q` is the ratio of the notch frequency to the distance from the notch to
/// each -3 dB point, i.e. the response is about -3 dB at `f0 ± f0/q`.
/// Gain is exactly 0 at `f0` and exactly 1 at DC and Nyquist.
pub fn design_notch(f0: f64, q: f64, fs: f64) -> Result<BiquadCascade> {
    check_freq(f0, fs, "notch frequency")?;
    if !(q.is_finite() && q > 0.0) {
        return Err(param(format!("notch q must be positive, got {q}")));
    }
    let w0 = 2.0 * PI * f0 / fs;
    // bandwidth between -3 dB points is 2·f0/q
    let alpha = w0.sin() / q;
    let a0 = 1.0 + alpha;
    let c = -2.0 * w0.cos();
    let s = Biquad { b0: 1.0 / a0, b1: c / a0, b2: 1.0 / a0, a1: c / a0, a2: (1.0 - alpha) / a0 };
    BiquadCascade::new(vec![s], fs)
}
