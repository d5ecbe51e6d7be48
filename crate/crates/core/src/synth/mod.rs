//! Labeled synthetic EOG and EEG recordings.
//!
//! Generators are pure functions of their arguments and the seed inside
//! [`SynthSpec`]; the same inputs always produce bit-identical records.
//! Internally everything is generated in microvolts and converted to volts
//! at the end.

mod eeg;
mod eog;
mod noise;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{param, Error, Result};

pub use eeg::{
    default_profiles, gen_alpha_eeg, gen_alpha_eeg_with, gen_biometric_dataset, gen_biometric_sessions,
    gen_ssvep, segment_sessions, BiometricDataset, BiometricSegment, BiometricSession, EyeState,
    SubjectProfile,
};
pub use eog::{eog_protocol, eog_template, gen_combined_session, gen_eog_session, gen_eog_trial, EogSession, EogTrial};

pub(crate) const UV: f64 = 1e-6;

/// The eleven eye-movement classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrialLabel {
    Up,
    Down,
    Right,
    Left,
    UpRight,
    UpLeft,
    DownRight,
    DownLeft,
    Blink,
    DoubleBlink,
    Rest,
}

impl TrialLabel {
    pub const COUNT: usize = 11;

    pub const ALL: [TrialLabel; 11] = [
        TrialLabel::Up,
        TrialLabel::Down,
        TrialLabel::Right,
        TrialLabel::Left,
        TrialLabel::UpRight,
        TrialLabel::UpLeft,
        TrialLabel::DownRight,
        TrialLabel::DownLeft,
        TrialLabel::Blink,
        TrialLabel::DoubleBlink,
        TrialLabel::Rest,
    ];

    pub fn class_id(self) -> usize {
        self as usize
    }

    pub fn from_class_id(id: usize) -> Result<Self> {
        Self::ALL
            .get(id)
            .copied()
            .ok_or_else(|| param(format!("class id {id} outside [0, {}]", Self::COUNT - 1)))
    }

    pub fn name(self) -> &'static str {
        match self {
            TrialLabel::Up => "up",
            TrialLabel::Down => "down",
            TrialLabel::Right => "right",
            TrialLabel::Left => "left",
            TrialLabel::UpRight => "up-right",
            TrialLabel::UpLeft => "up-left",
            TrialLabel::DownRight => "down-right",
            TrialLabel::DownLeft => "down-left",
            TrialLabel::Blink => "blink",
            TrialLabel::DoubleBlink => "double-blink",
            TrialLabel::Rest => "rest",
        }
    }

    pub fn names() -> Vec<String> {
        Self::ALL.iter().map(|l| l.name().to_string()).collect()
    }
}

impl fmt::Display for TrialLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrialLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|l| l.name() == s)
            .ok_or_else(|| param(format!("unknown trial label `{s}`")))
    }
}

/// Generator parameters. Amplitudes are in microvolts.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub sample_rate: f64,
    /// Seconds per trial (or per record for the EEG generators).
    pub trial_duration: f64,
    pub amplitude_uv: f64,
    /// Standard deviation of the broadband background noise.
    pub noise_sd_uv: f64,
    /// Spectral slope of the background noise in dB/octave; 0 is white.
    pub noise_tilt_db_per_octave: f64,
    /// Maximum linear drift rate; each electrode draws its own rate in
    /// `[-drift, drift]`.
    pub drift_uvps: f64,
    /// 50 Hz mains amplitude (per-electrode factor in [0.5, 1]).
    pub mains_amp_uv: f64,
    /// Uniform jitter of the event centre within a trial, ± milliseconds.
    pub latency_jitter_ms: f64,
    /// RMS of 0.5–3 Hz motion artifact added independently per electrode.
    pub walking_amp_uv: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            sample_rate: 500.0,
            trial_duration: 2.0,
            amplitude_uv: 100.0,
            noise_sd_uv: 5.0,
            noise_tilt_db_per_octave: 0.0,
            drift_uvps: 0.0,
            mains_amp_uv: 0.0,
            latency_jitter_ms: 0.0,
            walking_amp_uv: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    /// Same spec with every noise and contamination source switched off.
    pub fn noiseless(&self) -> Self {
        Self {
            noise_sd_uv: 0.0,
            drift_uvps: 0.0,
            mains_amp_uv: 0.0,
            latency_jitter_ms: 0.0,
            walking_amp_uv: 0.0,
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("noise_sd_uv", self.noise_sd_uv),
            ("drift_uvps", self.drift_uvps),
            ("mains_amp_uv", self.mains_amp_uv),
            ("latency_jitter_ms", self.latency_jitter_ms),
            ("walking_amp_uv", self.walking_amp_uv),
            ("amplitude_uv", self.amplitude_uv),
        ];
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(param(format!("sample_rate must be positive, got {}", self.sample_rate)));
        }
        if !(self.trial_duration.is_finite() && self.trial_duration > 0.0) {
            return Err(param(format!("trial_duration must be positive, got {}", self.trial_duration)));
        }
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(param(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if !self.noise_tilt_db_per_octave.is_finite() {
            return Err(param("noise tilt must be finite"));
        }
        Ok(())
    }

    pub fn samples_for(&self, seconds: f64) -> usize {
        (seconds * self.sample_rate).round() as usize
    }

    pub(crate) fn rng(&self, stream: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(derive_seed(self.seed, stream))
    }
}

/// Mixes a base seed with a stream index (splitmix64 finalizer).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
