use std::f64::consts::PI;

use rand::Rng;

use super::noise::{contaminate, tilted, Contamination};
use super::{SynthSpec, UV};
use crate::error::{param, Result};
use crate::record::{ConfigId, MultiChannelRecord, EEG_ONLY_CHANNELS};

const N_EEG: usize = EEG_ONLY_CHANNELS.len();

/// Inter-subject variability for synthetic EEG.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectProfile {
    pub subject_id: usize,
    /// Per-channel amplitude factors, one per EEG electrode.
    pub channel_gains: Vec<f64>,
    pub tilt_db_per_octave: f64,
    pub alpha_center_hz: f64,
}

impl Default for SubjectProfile {
    fn default() -> Self {
        Self { subject_id: 0, channel_gains: vec![1.0; N_EEG], tilt_db_per_octave: -3.0, alpha_center_hz: 10.0 }
    }
}

impl SubjectProfile {
    fn validate(&self) -> Result<()> {
        if self.channel_gains.len() != N_EEG || self.channel_gains.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(param(format!("subject {}: need {N_EEG} positive channel gains", self.subject_id)));
        }
        if !(8.0..=12.0).contains(&self.alpha_center_hz) {
            return Err(param(format!("alpha centre {} Hz outside [8, 12]", self.alpha_center_hz)));
        }
        Ok(())
    }
}

/// Six well-separated default subjects.
pub fn default_profiles() -> Vec<SubjectProfile> {
    (0..6)
        .map(|s| {
            let channel_gains = (0..N_EEG)
                .map(|c| 1.0 + 0.45 * (2.0 * PI * ((c + 1) * (s + 2)) as f64 / 9.0 + s as f64).sin())
                .collect();
            SubjectProfile {
                subject_id: s,
                channel_gains,
                tilt_db_per_octave: -1.5 - 0.9 * s as f64,
                alpha_center_hz: 8.5 + 0.7 * s as f64,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EyeState {
    EyesOpen,
    EyesClosed,
}

/// Alternating eyes-open / eyes-closed EEG on the 8-channel layout with the
/// default subject profile.
pub fn gen_alpha_eeg(spec: &SynthSpec, schedule: &[(EyeState, f64)]) -> Result<MultiChannelRecord> {
    let profile = SubjectProfile { tilt_db_per_octave: spec.noise_tilt_db_per_octave, ..Default::default() };
    gen_alpha_eeg_with(&profile, spec, schedule)
}

/// Eyes-closed segments carry `amplitude_uv · gain · sin(2π f_alpha t + φ_c)`
/// on top of the background; eyes-open segments carry background only.
pub fn gen_alpha_eeg_with(profile: &SubjectProfile, spec: &SynthSpec, schedule: &[(EyeState, f64)]) -> Result<MultiChannelRecord> {
    spec.validate()?;
    profile.validate()?;
    if schedule.is_empty() {
        return Err(param("eye-state schedule is empty"));
    }
    let fs = spec.sample_rate;
    let mut rng = spec.rng(3);
    let phases: Vec<f64> = (0..N_EEG).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let mut closed = Vec::new();
    for &(state, dur) in schedule {
        if !(dur.is_finite() && dur > 0.0) {
            return Err(param(format!("schedule durations must be positive, got {dur}")));
        }
        closed.extend(std::iter::repeat_n(state == EyeState::EyesClosed, spec.samples_for(dur)));
    }
    let w = 2.0 * PI * profile.alpha_center_hz / fs;
    let mut data: Vec<Vec<f64>> = (0..N_EEG)
        .map(|c| {
            let a = spec.amplitude_uv * profile.channel_gains[c];
            closed
                .iter()
                .enumerate()
                .map(|(i, &on)| if on { a * (w * i as f64 + phases[c]).sin() } else { 0.0 })
                .collect()
        })
        .collect();
    contaminate(&mut data, spec, profile.tilt_db_per_octave, &mut rng, Contamination { noise: true })?;
    to_record(fs, data)
}

fn to_record(fs: f64, mut data: Vec<Vec<f64>>) -> Result<MultiChannelRecord> {
    for row in data.iter_mut() {
        row.iter_mut().for_each(|v| *v *= UV);
    }
    MultiChannelRecord::with_config(fs, ConfigId::EegOnly, data)
}

/// Steady-state response at `f_target` lasting `spec.trial_duration`.
///
/// Each channel is `Σ_k a_k sin(2π k f t + φ_c)` with `a_1 = amplitude_uv`
/// halving per harmonic, plus white (or tilted) noise whose SD makes the
/// per-channel RMS ratio signal/noise equal `snr`. `snr = ∞` gives the
/// noiseless signal; `snr = 0` gives noise only, at the RMS the signal
/// would have had. Drift, mains and motion artifact follow `spec`.
pub fn gen_ssvep(spec: &SynthSpec, f_target: f64, n_harmonics: usize, snr: f64) -> Result<MultiChannelRecord> {
    spec.validate()?;
    let fs = spec.sample_rate;
    if n_harmonics < 1 {
        return Err(param("need at least one harmonic"));
    }
    if !(f_target > 0.0 && n_harmonics as f64 * f_target < fs / 2.0) {
        return Err(param(format!(
            "harmonic {n_harmonics} of {f_target} Hz is not below Nyquist ({} Hz)",
            fs / 2.0
        )));
    }
    if snr.is_nan() || snr < 0.0 {
        return Err(param(format!("snr must be non-negative, got {snr}")));
    }
    let n = spec.samples_for(spec.trial_duration);
    let mut rng = spec.rng(4);
    let amps: Vec<f64> = (0..n_harmonics).map(|k| spec.amplitude_uv * 0.5f64.powi(k as i32)).collect();
    let rms = (amps.iter().map(|a| a * a / 2.0).sum::<f64>()).sqrt();
    let mut data = Vec::with_capacity(N_EEG);
    for _ in 0..N_EEG {
        let phase = rng.random_range(0.0..2.0 * PI);
        let mut row: Vec<f64> = if snr > 0.0 {
            (0..n)
                .map(|i| {
                    let t = i as f64 / fs;
                    amps.iter()
                        .enumerate()
                        .map(|(k, a)| a * (2.0 * PI * (k + 1) as f64 * f_target * t + phase).sin())
                        .sum()
                })
                .collect()
        } else {
            vec![0.0; n]
        };
        if snr.is_finite() {
            let sd = if snr > 0.0 { rms / snr } else { rms };
            for (v, e) in row.iter_mut().zip(tilted(&mut rng, n, fs, sd, spec.noise_tilt_db_per_octave)) {
                *v += e;
            }
        }
        data.push(row);
    }
    contaminate(&mut data, spec, spec.noise_tilt_db_per_octave, &mut rng, Contamination { noise: false })?;
    to_record(fs, data)
}

/// One continuous recording session of one subject.
#[derive(Debug, Clone)]
pub struct BiometricSession {
    pub record: MultiChannelRecord,
    pub subject: usize,
    pub session: usize,
}

#[derive(Debug, Clone)]
pub struct BiometricSegment {
    /// 8 channels × segment samples, volts.
    pub data: Vec<Vec<f64>>,
    pub subject: usize,
    pub session: usize,
}

#[derive(Debug, Clone)]
pub struct BiometricDataset {
    pub sample_rate: f64,
    pub segments: Vec<BiometricSegment>,
}

/// Continuous 8-channel sessions per subject.
///
/// Background noise follows the subject's spectral tilt; an alpha rhythm at
/// the subject's centre frequency waxes and wanes slowly; everything is
/// scaled per channel by the subject's gains, perturbed by ±5% per session
/// to mimic re-positioning of the electrodes.
pub fn gen_biometric_sessions(
    profiles: &[SubjectProfile],
    spec: &SynthSpec,
    session_count: usize,
    session_duration_s: f64,
) -> Result<Vec<BiometricSession>> {
    spec.validate()?;
    if profiles.len() < 2 {
        return Err(param(format!("need at least 2 subject profiles, got {}", profiles.len())));
    }
    if session_count == 0 {
        return Err(param("need at least one session"));
    }
    if !(session_duration_s >= 4.0) {
        return Err(param(format!("sessions must last at least 4 s, got {session_duration_s}")));
    }
    let fs = spec.sample_rate;
    let n = spec.samples_for(session_duration_s);
    let mut out = Vec::with_capacity(profiles.len() * session_count);
    for (label, profile) in profiles.iter().enumerate() {
        profile.validate()?;
        for session in 0..session_count {
            let mut rng = spec.rng(1_000 + (label * 1_000 + session) as u64);
            let w = 2.0 * PI * profile.alpha_center_hz / fs;
            let env_w = 2.0 * PI * rng.random_range(0.05..0.2) / fs;
            let env_phase = rng.random_range(0.0..2.0 * PI);
            let mut data = Vec::with_capacity(N_EEG);
            for c in 0..N_EEG {
                let gain = profile.channel_gains[c] * (1.0 + 0.05 * rng.random_range(-1.0..=1.0));
                let phase = rng.random_range(0.0..2.0 * PI);
                let bg = tilted(&mut rng, n, fs, spec.noise_sd_uv, profile.tilt_db_per_octave);
                let row = bg
                    .into_iter()
                    .enumerate()
                    .map(|(i, b)| {
                        let env = 0.75 + 0.25 * (env_w * i as f64 + env_phase).sin();
                        gain * (b + spec.amplitude_uv * env * (w * i as f64 + phase).sin())
                    })
                    .collect();
                data.push(row);
            }
            contaminate(&mut data, spec, profile.tilt_db_per_octave, &mut rng, Contamination { noise: false })?;
            out.push(BiometricSession { record: to_record(fs, data)?, subject: label, session });
        }
    }
    Ok(out)
}

/// Cuts sessions into consecutive non-overlapping segments of `segment_s`
/// seconds, dropping any incomplete tail.
pub fn segment_sessions(sessions: Vec<BiometricSession>, segment_s: f64) -> Result<BiometricDataset> {
    let Some(first) = sessions.first() else {
        return Err(param("no sessions to segment"));
    };
    let fs = first.record.sample_rate();
    let len = (segment_s * fs).round() as usize;
    if len == 0 {
        return Err(param("segment length must be at least one sample"));
    }
    let mut segments = Vec::new();
    for s in sessions {
        let data = s.record.into_data();
        let n = data.first().map_or(0, Vec::len);
        for k in 0..n / len {
            segments.push(BiometricSegment {
                data: data.iter().map(|row| row[k * len..(k + 1) * len].to_vec()).collect(),
                subject: s.subject,
                session: s.session,
            });
        }
    }
    Ok(BiometricDataset { sample_rate: fs, segments })
}

/// Labeled 4 s segments, `floor(duration/4)` per subject per session.
pub fn gen_biometric_dataset(
    profiles: &[SubjectProfile],
    spec: &SynthSpec,
    session_count: usize,
    session_duration_s: f64,
) -> Result<BiometricDataset> {
    segment_sessions(gen_biometric_sessions(profiles, spec, session_count, session_duration_s)?, 4.0)
}
