//! Canonical correlation against sinusoidal reference banks and the
//! side-band-normalized score used for SSVEP detection.

mod cca;

pub use cca::{cca_max_corr, Prepared};

use crate::error::{param, Error, Result};
use crate::record::MultiChannelRecord;

pub const DEFAULT_HARMONICS: usize = 2;
pub const DEFAULT_DELTA_HZ: f64 = 0.2;
pub const DEFAULT_THRESHOLD: f64 = 1.1;
/// Stimulus frequencies of the SSVEP experiment.
pub const STIMULUS_FREQS: [f64; 4] = [7.5, 11.5, 13.5, 15.5];

/// Rows `sin(2πkft)`, `cos(2πkft)` for `k = 1..=n_harmonics`, `t = i/fs`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceBank {
    pub f: f64,
    pub n_harmonics: usize,
    pub signals: Vec<Vec<f64>>,
}

impl ReferenceBank {
    pub fn new(f: f64, n_harmonics: usize, fs: f64, n_samples: usize) -> Result<Self> {
        if n_harmonics == 0 {
            return Err(param("reference bank needs at least one harmonic"));
        }
        if !(f > 0.0 && (n_harmonics as f64) * f < fs / 2.0) {
            return Err(param(format!("harmonic {n_harmonics} of {f} Hz is not below Nyquist ({} Hz)", fs / 2.0)));
        }
        let mut signals = Vec::with_capacity(2 * n_harmonics);
        for k in 1..=n_harmonics {
            let w = 2.0 * std::f64::consts::PI * k as f64 * f / fs;
            signals.push((0..n_samples).map(|i| (w * i as f64).sin()).collect());
            signals.push((0..n_samples).map(|i| (w * i as f64).cos()).collect());
        }
        Ok(Self { f, n_harmonics, signals })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NccaScore {
    pub f_target: f64,
    pub rho_target: f64,
    pub rho_side_lo: f64,
    pub rho_side_hi: f64,
    /// `rho_target / mean(rho_side_lo, rho_side_hi)`.
    pub score: f64,
}

/// Reference banks for a target and its two side bands over a fixed window length.
#[derive(Debug, Clone)]
pub struct NccaBanks {
    pub f_target: f64,
    target: Prepared,
    lo: Prepared,
    hi: Prepared,
}

impl NccaBanks {
    pub fn new(f_target: f64, fs: f64, n_samples: usize, n_harmonics: usize, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < f_target) {
            return Err(param(format!("side-band offset {delta} Hz invalid for {f_target} Hz")));
        }
        let bank = |f| ReferenceBank::new(f, n_harmonics, fs, n_samples).and_then(|b| Prepared::new(&b.signals));
        Ok(Self { f_target, target: bank(f_target)?, lo: bank(f_target - delta)?, hi: bank(f_target + delta)? })
    }

    pub fn score(&self, x: &Prepared) -> Result<NccaScore> {
        let rho_target = x.corr(&self.target)?;
        let rho_side_lo = x.corr(&self.lo)?;
        let rho_side_hi = x.corr(&self.hi)?;
        let side = (rho_side_lo + rho_side_hi) / 2.0;
        if side <= 0.0 {
            return Err(Error::Degenerate("side-band correlations are zero".into()));
        }
        Ok(NccaScore { f_target: self.f_target, rho_target, rho_side_lo, rho_side_hi, score: rho_target / side })
    }
}

/// NCCA of `x` (channels × samples) at `f_target`, side bands at `±delta`.
pub fn ncca(x: &[Vec<f64>], f_target: f64, fs: f64, n_harmonics: usize, delta: f64) -> Result<NccaScore> {
    let n = x.first().map_or(0, Vec::len);
    NccaBanks::new(f_target, fs, n, n_harmonics, delta)?.score(&Prepared::new(x)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectOptions {
    pub n_harmonics: usize,
    pub delta: f64,
    pub threshold: f64,
    /// `None` scores the trailing window only. `Some(hop)` slides the window
    /// over the whole record in steps of `hop` seconds and averages.
    pub hop_s: Option<f64>,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self { n_harmonics: DEFAULT_HARMONICS, delta: DEFAULT_DELTA_HZ, threshold: DEFAULT_THRESHOLD, hop_s: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub f: f64,
    pub score: f64,
    pub detected: bool,
}

fn window_starts(n: usize, w: usize, fs: f64, hop_s: Option<f64>) -> Result<Vec<usize>> {
    if w == 0 || w > n {
        return Err(param(format!("window of {w} samples does not fit a {n}-sample record")));
    }
    match hop_s {
        None => Ok(vec![n - w]),
        Some(h) => {
            let hop = (h * fs).round() as usize;
            if !(h > 0.0) || hop == 0 {
                return Err(param(format!("hop must be at least one sample, got {h} s")));
            }
            Ok((0..=n - w).step_by(hop).collect())
        }
    }
}

/// Per-window NCCA scores for several candidate frequencies, window-major.
fn window_scores(x: &[Vec<f64>], fs: f64, freqs: &[f64], w: usize, starts: &[usize], opt: &DetectOptions) -> Result<Vec<Vec<f64>>> {
    let banks: Vec<NccaBanks> =
        freqs.iter().map(|&f| NccaBanks::new(f, fs, w, opt.n_harmonics, opt.delta)).collect::<Result<_>>()?;
    starts
        .iter()
        .map(|&s| {
            let win: Vec<Vec<f64>> = x.iter().map(|ch| ch[s..s + w].to_vec()).collect();
            let p = Prepared::new(&win)?;
            banks.iter().map(|b| b.score(&p).map(|s| s.score)).collect()
        })
        .collect()
}

/// Scores every frequency in `freqs`; `detected` when the score exceeds the threshold.
pub fn detect_ssvep(record: &MultiChannelRecord, freqs: &[f64], window_s: f64, opt: &DetectOptions) -> Result<Vec<Detection>> {
    let fs = record.sample_rate();
    let w = (window_s * fs).round() as usize;
    if !(window_s > 0.0) {
        return Err(param("window must be positive"));
    }
    let starts = window_starts(record.n_samples(), w, fs, opt.hop_s)?;
    let per_window = window_scores(record.data(), fs, freqs, w, &starts, opt)?;
    Ok(freqs
        .iter()
        .enumerate()
        .map(|(k, &f)| {
            let score = per_window.iter().map(|s| s[k]).sum::<f64>() / per_window.len() as f64;
            Detection { f, score, detected: score > opt.threshold }
        })
        .collect())
}

/// Arithmetic mean over trials of each trial's score at `f`.
pub fn mean_ncca(trials: &[MultiChannelRecord], f: f64, window_s: f64, opt: &DetectOptions) -> Result<f64> {
    if trials.is_empty() {
        return Err(param("no trials to average"));
    }
    let mut acc = 0.0;
    for t in trials {
        acc += detect_ssvep(t, &[f], window_s, opt)?[0].score;
    }
    Ok(acc / trials.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub freq: f64,
    pub window_s: f64,
    pub mean_score: f64,
    pub detected: bool,
}

/// Mean score per (stimulus frequency, window length); each stimulus
/// frequency is scored on its own trials.
pub fn ssvep_sweep(trials_by_freq: &[(f64, Vec<MultiChannelRecord>)], windows_s: &[f64], opt: &DetectOptions) -> Result<Vec<SweepRow>> {
    let mut out = Vec::new();
    for (f, trials) in trials_by_freq {
        for &w in windows_s {
            let mean_score = mean_ncca(trials, *f, w, opt)?;
            out.push(SweepRow { freq: *f, window_s: w, mean_score, detected: mean_score > opt.threshold });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_ssvep, SynthSpec};

    #[test]
    fn bank_rows() {
        let b = ReferenceBank::new(10.0, 2, 500.0, 100).unwrap();
        assert_eq!(b.signals.len(), 4);
        assert_eq!(b.signals[1][0], 1.0);
        assert!((b.signals[2][25] - (2.0 * std::f64::consts::PI * 20.0 * 0.05).sin()).abs() < 1e-15);
        assert!(ReferenceBank::new(130.0, 2, 500.0, 100).is_err());
    }

    #[test]
    fn noiseless_tone_scores_high() {
        let spec = SynthSpec { trial_duration: 25.0, ..Default::default() };
        let r = gen_ssvep(&spec, 13.5, 1, f64::INFINITY).unwrap();
        let s = ncca(r.data(), 13.5, 500.0, 2, 0.2).unwrap();
        assert!(s.rho_target > 0.999);
        assert!(s.score > 5.0, "{s:?}");
    }

    #[test]
    fn constant_input_is_degenerate() {
        let x = vec![vec![1.0; 1500]; 8];
        assert!(matches!(ncca(&x, 7.5, 500.0, 2, 0.2), Err(Error::Degenerate(_))));
    }

    #[test]
    fn window_longer_than_record() {
        let spec = SynthSpec { trial_duration: 2.0, ..Default::default() };
        let r = gen_ssvep(&spec, 7.5, 1, 1.0).unwrap();
        assert!(detect_ssvep(&r, &STIMULUS_FREQS, 3.0, &DetectOptions::default()).is_err());
    }

    #[test]
    fn detects_only_the_stimulus() {
        let spec = SynthSpec { trial_duration: 25.0, seed: 4, ..Default::default() };
        let r = gen_ssvep(&spec, 11.5, 1, 1.0).unwrap();
        let opt = DetectOptions { hop_s: Some(0.5), ..Default::default() };
        let d = detect_ssvep(&r, &STIMULUS_FREQS, 3.0, &opt).unwrap();
        let hits: Vec<f64> = d.iter().filter(|d| d.detected).map(|d| d.f).collect();
        assert_eq!(hits, vec![11.5], "{d:?}");
    }
}
