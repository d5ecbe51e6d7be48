//! Short-time power spectra.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{param, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowFn {
    /// Periodic Hann.
    Hann,
    Rect,
}

impl WindowFn {
    pub fn coefficients(&self, n: usize) -> Vec<f64> {
        match self {
            WindowFn::Rect => vec![1.0; n],
            WindowFn::Hann => (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect(),
        }
    }
}

/// One-sided power per frequency bin, one column per segment.
///
/// Each column sums to the window-weighted mean square of its segment,
/// `Σ(w·x)² / Σw²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    /// Segment centres, seconds.
    pub times: Vec<f64>,
    /// `k·fs/win` for `k = 0..=win/2`.
    pub freqs: Vec<f64>,
    /// `power[f][t]`.
    pub power: Vec<Vec<f64>>,
    pub sample_rate: f64,
}

pub fn spectrogram(x: &[f64], fs: f64, win: usize, overlap: usize, window_fn: WindowFn) -> Result<Spectrogram> {
    if win == 0 || win > x.len() {
        return Err(param(format!("window of {win} samples does not fit a signal of {}", x.len())));
    }
    if overlap >= win {
        return Err(param(format!("overlap {overlap} must be smaller than window {win}")));
    }
    let hop = win - overlap;
    let w = window_fn.coefficients(win);
    let w_energy: f64 = w.iter().map(|v| v * v).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(win);
    let n_bins = win / 2 + 1;
    let n_cols = (x.len() - win) / hop + 1;
    let mut power = vec![Vec::with_capacity(n_cols); n_bins];
    let mut times = Vec::with_capacity(n_cols);
    let mut buf = vec![Complex64::new(0.0, 0.0); win];
    let norm = win as f64 * w_energy;
    for col in 0..n_cols {
        let start = col * hop;
        for (b, (&xi, &wi)) in buf.iter_mut().zip(x[start..start + win].iter().zip(&w)) {
            *b = Complex64::new(xi * wi, 0.0);
        }
        fft.process(&mut buf);
        for (k, row) in power.iter_mut().enumerate() {
            let fold = if k == 0 || (win % 2 == 0 && k == win / 2) { 1.0 } else { 2.0 };
            row.push(fold * buf[k].norm_sqr() / norm);
        }
        times.push((start as f64 + win as f64 / 2.0) / fs);
    }
    let freqs = (0..n_bins).map(|k| k as f64 * fs / win as f64).collect();
    Ok(Spectrogram { times, freqs, power, sample_rate: fs })
}

/// Per-column power summed over bins with `f_lo <= f <= f_hi`.
pub fn band_power(spec: &Spectrogram, f_lo: f64, f_hi: f64) -> Result<Vec<f64>> {
    if !(f_lo >= 0.0 && f_lo < f_hi && f_hi <= spec.sample_rate / 2.0) {
        return Err(param(format!("invalid band [{f_lo}, {f_hi}] Hz")));
    }
    let bins: Vec<usize> = spec
        .freqs
        .iter()
        .enumerate()
        .filter(|(_, &f)| f >= f_lo && f <= f_hi)
        .map(|(k, _)| k)
        .collect();
    if bins.is_empty() {
        return Err(param(format!("band [{f_lo}, {f_hi}] Hz contains no frequency bins")));
    }
    Ok((0..spec.times.len()).map(|t| bins.iter().map(|&k| spec.power[k][t]).sum()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(f: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * f * i as f64 / fs).sin()).collect()
    }

    #[test]
    fn bin_aligned_sine_lands_in_one_bin() {
        // 1024-sample window at 500 Hz: bin spacing 0.48828125 Hz; bin 20 = 9.765625 Hz
        let f = 20.0 * 500.0 / 1024.0;
        let s = spectrogram(&sine(f, 500.0, 4096), 500.0, 1024, 768, WindowFn::Rect).unwrap();
        assert_eq!(s.times.len(), (4096 - 1024) / 256 + 1);
        for t in 0..s.times.len() {
            let total: f64 = s.power.iter().map(|r| r[t]).sum();
            assert!((s.power[20][t] / total - 1.0).abs() < 1e-9);
            assert!((total - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn zeros_give_zero_power() {
        let s = spectrogram(&[0.0; 300], 100.0, 64, 32, WindowFn::Hann).unwrap();
        assert!(s.power.iter().flatten().all(|&p| p == 0.0));
    }

    #[test]
    fn parseval_full_band() {
        let x: Vec<f64> = (0..3000).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        for wf in [WindowFn::Hann, WindowFn::Rect] {
            let s = spectrogram(&x, 500.0, 500, 250, wf).unwrap();
            let bp = band_power(&s, 0.0, 250.0).unwrap();
            let w = wf.coefficients(500);
            let we: f64 = w.iter().map(|v| v * v).sum();
            for (t, p) in bp.iter().enumerate() {
                let seg = &x[t * 250..t * 250 + 500];
                let direct: f64 = seg.iter().zip(&w).map(|(a, b)| (a * b).powi(2)).sum::<f64>() / we;
                assert!((p - direct).abs() <= 1e-6 * direct);
            }
        }
    }

    #[test]
    fn alpha_band_captures_ten_hz() {
        let s = spectrogram(&sine(10.0, 500.0, 1000), 500.0, 500, 0, WindowFn::Rect).unwrap();
        let band = band_power(&s, 8.0, 12.0).unwrap();
        let total = band_power(&s, 0.0, 250.0).unwrap();
        assert!(band[0] / total[0] >= 0.99);
    }

    #[test]
    fn rejects_bad_arguments() {
        let x = vec![0.0; 100];
        assert!(spectrogram(&x, 100.0, 64, 64, WindowFn::Hann).is_err());
        assert!(spectrogram(&x, 100.0, 128, 0, WindowFn::Hann).is_err());
        let s = spectrogram(&x, 100.0, 10, 0, WindowFn::Hann).unwrap();
        assert!(band_power(&s, 12.0, 8.0).is_err());
        // bins are 10 Hz apart: nothing in [11, 12]
        assert!(band_power(&s, 11.0, 12.0).is_err());
    }
}
