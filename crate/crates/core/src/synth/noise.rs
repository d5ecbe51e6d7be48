use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::SynthSpec;
use crate::dsp::{design_butterworth, FilterKind};
use crate::error::Result;

pub(crate) fn white(rng: &mut ChaCha8Rng, n: usize, sd: f64) -> Vec<f64> {
    (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Gaussian noise whose amplitude spectrum changes by `tilt` dB per octave
/// (relative to 10 Hz, flat below 0.5 Hz), scaled to expected SD `sd`.
pub(crate) fn tilted(rng: &mut ChaCha8Rng, n: usize, fs: f64, sd: f64, tilt: f64) -> Vec<f64> {
    if tilt == 0.0 || n < 2 {
        return white(rng, n, sd);
    }
    let mut buf: Vec<Complex64> = white(rng, n, 1.0).into_iter().map(|v| Complex64::new(v, 0.0)).collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let gain = |k: usize| {
        let kk = k.min(n - k);
        let f = (kk as f64 * fs / n as f64).max(0.5);
        10f64.powf(tilt / 20.0 * (f / 10.0).log2())
    };
    let mut mean_sq = 0.0;
    for (k, b) in buf.iter_mut().enumerate() {
        let g = gain(k);
        mean_sq += g * g;
        *b *= g;
    }
    mean_sq /= n as f64;
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = sd / (n as f64 * mean_sq.sqrt());
    buf.iter().map(|c| c.re * scale).collect()
}

/// Gaussian noise band-limited to `[lo, hi]` Hz with RMS `rms`.
pub(crate) fn band_limited(rng: &mut ChaCha8Rng, n: usize, fs: f64, rms: f64, lo: f64, hi: f64) -> Result<Vec<f64>> {
    let warmup = (4.0 * fs) as usize;
    let mut x = white(rng, n + warmup, 1.0);
    let mut bp = design_butterworth(4, FilterKind::Bandpass, &[lo, hi], fs)?;
    bp.process_block(1, 0, &mut x)?;
    let x = x.split_off(warmup);
    let cur = (x.iter().map(|v| v * v).sum::<f64>() / n.max(1) as f64).sqrt();
    let s = if cur > 0.0 { rms / cur } else { 0.0 };
    Ok(x.into_iter().map(|v| v * s).collect())
}

pub(crate) struct Contamination {
    pub noise: bool,
}

/// Adds background noise, drift, mains and motion artifact (µV) to every
/// row according to `spec`. Mains shares one phase across rows.
pub(crate) fn contaminate(rows: &mut [Vec<f64>], spec: &SynthSpec, tilt: f64, rng: &mut ChaCha8Rng, what: Contamination) -> Result<()> {
    let fs = spec.sample_rate;
    let mains_phase = rng.random_range(0.0..2.0 * PI);
    for row in rows.iter_mut() {
        let n = row.len();
        if what.noise && spec.noise_sd_uv > 0.0 {
            for (v, e) in row.iter_mut().zip(tilted(rng, n, fs, spec.noise_sd_uv, tilt)) {
                *v += e;
            }
        }
        if spec.drift_uvps > 0.0 {
            let rate = spec.drift_uvps * rng.random_range(-1.0..=1.0);
            for (i, v) in row.iter_mut().enumerate() {
                *v += rate * i as f64 / fs;
            }
        }
        if spec.mains_amp_uv > 0.0 {
            let a = spec.mains_amp_uv * rng.random_range(0.5..=1.0);
            let w = 2.0 * PI * 50.0 / fs;
            for (i, v) in row.iter_mut().enumerate() {
                *v += a * (w * i as f64 + mains_phase).sin();
            }
        }
        if spec.walking_amp_uv > 0.0 {
            for (v, e) in row.iter_mut().zip(band_limited(rng, n, fs, spec.walking_amp_uv, 0.5, 3.0)?) {
                *v += e;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn sd(x: &[f64]) -> f64 {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn tilted_noise_keeps_requested_sd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = tilted(&mut rng, 50_000, 500.0, 4.0, -3.0);
        assert!((sd(&x) / 4.0 - 1.0).abs() < 0.1, "{}", sd(&x));
    }

    #[test]
    fn band_limited_noise_has_requested_rms() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = band_limited(&mut rng, 10_000, 500.0, 7.0, 0.5, 3.0).unwrap();
        let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
        assert!((rms - 7.0).abs() < 1e-9);
    }
}
