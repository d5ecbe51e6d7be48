use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::seq::SliceRandom;
use rand::Rng;

use super::noise::{contaminate, Contamination};
use super::{SynthSpec, TrialLabel, UV};
use crate::error::{param, Result};
use crate::record::{ConfigId, LabelRow, MultiChannelRecord};

const RAMP_S: f64 = 0.1;
const PLATEAU_S: f64 = 0.6;
const BLINK_S: f64 = 0.2;
const DOUBLE_BLINK_GAP_S: f64 = 0.3;

/// Raised-cosine ramp up, plateau, ramp down; `t` from the saccade onset.
fn saccade_shape(t: f64) -> f64 {
    if t <= 0.0 || t >= 2.0 * RAMP_S + PLATEAU_S {
        0.0
    } else if t < RAMP_S {
        0.5 * (1.0 - (PI * t / RAMP_S).cos())
    } else if t <= RAMP_S + PLATEAU_S {
        1.0
    } else {
        0.5 * (1.0 + (PI * (t - RAMP_S - PLATEAU_S) / RAMP_S).cos())
    }
}

/// Raised-cosine pulse peaking at `t = 0`.
fn blink_shape(t: f64) -> f64 {
    let half = BLINK_S / 2.0;
    if t.abs() >= half {
        0.0
    } else {
        0.5 * (1.0 + (PI * t / half).cos())
    }
}

fn direction(label: TrialLabel) -> (f64, f64) {
    let d = FRAC_1_SQRT_2;
    match label {
        TrialLabel::Up => (0.0, 1.0),
        TrialLabel::Down => (0.0, -1.0),
        TrialLabel::Right => (1.0, 0.0),
        TrialLabel::Left => (-1.0, 0.0),
        TrialLabel::UpRight => (d, d),
        TrialLabel::UpLeft => (-d, d),
        TrialLabel::DownRight => (d, -d),
        TrialLabel::DownLeft => (-d, -d),
        _ => (0.0, 0.0),
    }
}

/// Noiseless horizontal and vertical EOG (µV) for one trial of `n` samples
/// whose event is centred at `center_s` seconds.
pub fn eog_template(label: TrialLabel, n: usize, fs: f64, center_s: f64, amplitude_uv: f64) -> (Vec<f64>, Vec<f64>) {
    let mut v_h = vec![0.0; n];
    let mut v_v = vec![0.0; n];
    let t = |i: usize| i as f64 / fs;
    match label {
        TrialLabel::Blink => {
            for (i, v) in v_v.iter_mut().enumerate() {
                *v = amplitude_uv * blink_shape(t(i) - center_s);
            }
        }
        TrialLabel::DoubleBlink => {
            let h = DOUBLE_BLINK_GAP_S / 2.0;
            for (i, v) in v_v.iter_mut().enumerate() {
                *v = amplitude_uv * (blink_shape(t(i) - center_s + h) + blink_shape(t(i) - center_s - h));
            }
        }
        TrialLabel::Rest => {}
        _ => {
            let (dh, dv) = direction(label);
            let onset = center_s - (RAMP_S + PLATEAU_S / 2.0);
            for i in 0..n {
                let s = amplitude_uv * saccade_shape(t(i) - onset);
                v_h[i] = dh * s;
                v_v[i] = dv * s;
            }
        }
    }
    (v_h, v_v)
}

/// One labeled trial from the three nose electrodes.
#[derive(Debug, Clone)]
pub struct EogTrial {
    /// Channels `V_R`, `V_L`, `V_C`, volts.
    pub record: MultiChannelRecord,
    pub label: TrialLabel,
    /// The noiseless horizontal and vertical templates, volts.
    pub template_h: Vec<f64>,
    pub template_v: Vec<f64>,
}

/// A continuous session of back-to-back trials.
#[derive(Debug, Clone)]
pub struct EogSession {
    pub record: MultiChannelRecord,
    pub labels: Vec<LabelRow>,
    pub template_h: Vec<f64>,
    pub template_v: Vec<f64>,
}

/// Electrode voltages whose derived pair reproduces the templates exactly:
/// `V_C = v/2`, `V_R = h/2 - v/2`, `V_L = -h/2 - v/2`.
fn electrodes(v_h: &[f64], v_v: &[f64]) -> Vec<Vec<f64>> {
    let vr = v_h.iter().zip(v_v).map(|(h, v)| h / 2.0 - v / 2.0).collect();
    let vl = v_h.iter().zip(v_v).map(|(h, v)| -h / 2.0 - v / 2.0).collect();
    let vc = v_v.iter().map(|v| v / 2.0).collect();
    vec![vr, vl, vc]
}

/// Generates a session: `lead_in_s` seconds of rest, then one trial of
/// `spec.trial_duration` per entry of `labels`. Noise, drift and artifacts
/// run continuously across the whole session.
pub fn gen_eog_session(spec: &SynthSpec, labels: &[TrialLabel], lead_in_s: f64) -> Result<EogSession> {
    spec.validate()?;
    if spec.trial_duration < 0.5 {
        return Err(param(format!("EOG trials need at least 0.5 s, got {}", spec.trial_duration)));
    }
    if !(lead_in_s.is_finite() && lead_in_s >= 0.0) {
        return Err(param("lead-in must be non-negative"));
    }
    let fs = spec.sample_rate;
    let trial_n = spec.samples_for(spec.trial_duration);
    let lead_n = spec.samples_for(lead_in_s);
    let total = lead_n + trial_n * labels.len();
    let mut rng = spec.rng(1);
    let mut v_h = vec![0.0; total];
    let mut v_v = vec![0.0; total];
    let mut rows = Vec::with_capacity(labels.len());
    let jitter = spec.latency_jitter_ms / 1000.0;
    for (k, &label) in labels.iter().enumerate() {
        let start = lead_n + k * trial_n;
        let shift = if jitter > 0.0 { rng.random_range(-jitter..=jitter) } else { 0.0 };
        let center = (trial_n / 2) as f64 / fs + shift;
        let (h, v) = eog_template(label, trial_n, fs, center, spec.amplitude_uv);
        v_h[start..start + trial_n].copy_from_slice(&h);
        v_v[start..start + trial_n].copy_from_slice(&v);
        rows.push(LabelRow { start_sample: start, class_id: label.class_id() });
    }
    let mut data = electrodes(&v_h, &v_v);
    contaminate(&mut data, spec, spec.noise_tilt_db_per_octave, &mut rng, Contamination { noise: true })?;
    for row in data.iter_mut() {
        row.iter_mut().for_each(|v| *v *= UV);
    }
    let record = MultiChannelRecord::with_config(fs, ConfigId::Eog, data)?;
    Ok(EogSession {
        record,
        labels: rows,
        template_h: v_h.into_iter().map(|v| v * UV).collect(),
        template_v: v_v.into_iter().map(|v| v * UV).collect(),
    })
}

/// A single trial of `spec.trial_duration` seconds.
pub fn gen_eog_trial(label: TrialLabel, spec: &SynthSpec) -> Result<EogTrial> {
    let s = gen_eog_session(spec, &[label], 0.0)?;
    Ok(EogTrial { record: s.record, label, template_h: s.template_h, template_v: s.template_v })
}

/// The recording protocol: `trials_per_class` trials of every class in a
/// seeded random order, after a 2 s rest lead-in.
pub fn eog_protocol(spec: &SynthSpec, trials_per_class: usize) -> Result<EogSession> {
    let mut labels: Vec<TrialLabel> = TrialLabel::ALL
        .iter()
        .flat_map(|&l| std::iter::repeat_n(l, trials_per_class))
        .collect();
    labels.shuffle(&mut spec.rng(2));
    gen_eog_session(spec, &labels, 2.0)
}

/// A session in the 4 EEG + 3 EOG combined configuration. The EOG rows
/// equal [`gen_eog_session`]'s; the EEG rows carry the same background
/// contamination with the spec's spectral tilt and no eye signal.
pub fn gen_combined_session(spec: &SynthSpec, labels: &[TrialLabel], lead_in_s: f64) -> Result<EogSession> {
    let eog = gen_eog_session(spec, labels, lead_in_s)?;
    let n = eog.record.n_samples();
    let mut eeg = vec![vec![0.0; n]; 4];
    contaminate(&mut eeg, spec, spec.noise_tilt_db_per_octave, &mut spec.rng(5), Contamination { noise: true })?;
    let mut data: Vec<Vec<f64>> = eeg.into_iter().map(|r| r.into_iter().map(|v| v * UV).collect()).collect();
    data.extend(eog.record.data().iter().cloned());
    Ok(EogSession { record: MultiChannelRecord::with_config(spec.sample_rate, ConfigId::Combined, data)?, ..eog })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eog::derive_eog;

    fn noiseless() -> SynthSpec {
        SynthSpec::default().noiseless()
    }

    fn local_maxima_above(x: &[f64], thr: f64) -> usize {
        // plateau-aware: count rising edges into a region above thr that peaks
        (1..x.len() - 1).filter(|&i| x[i] > thr && x[i] > x[i - 1] && x[i] >= x[i + 1]).count()
    }

    #[test]
    fn combined_session_carries_eog_rows() {
        let spec = SynthSpec::default().with_seed(3);
        let labels = [TrialLabel::Left, TrialLabel::Blink];
        let e = gen_eog_session(&spec, &labels, 1.0).unwrap();
        let c = gen_combined_session(&spec, &labels, 1.0).unwrap();
        assert_eq!(c.record.config_id(), ConfigId::Combined);
        assert_eq!(&c.record.data()[4..], e.record.data());
        assert_eq!(derive_eog(&c.record).unwrap(), derive_eog(&e.record).unwrap());
        assert!(c.record.data()[0].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn rest_is_constant_without_noise() {
        let t = gen_eog_trial(TrialLabel::Rest, &noiseless()).unwrap();
        for ch in t.record.data() {
            assert!(ch.iter().all(|&v| v == ch[0]));
        }
    }

    #[test]
    fn right_saccade_signature() {
        let spec = noiseless();
        let t = gen_eog_trial(TrialLabel::Right, &spec).unwrap();
        let pair = derive_eog(&t.record).unwrap();
        let max_h = pair.v_h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let max_v = pair.v_v.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((max_h - spec.amplitude_uv * UV).abs() < 1e-15);
        assert!(max_v <= 0.05 * spec.amplitude_uv * UV);
    }

    #[test]
    fn double_blink_has_two_peaks() {
        let spec = noiseless();
        let t = gen_eog_trial(TrialLabel::DoubleBlink, &spec).unwrap();
        let pair = derive_eog(&t.record).unwrap();
        assert_eq!(local_maxima_above(&pair.v_v, spec.amplitude_uv * UV / 2.0), 2);
        let single = gen_eog_trial(TrialLabel::Blink, &spec).unwrap();
        let pair = derive_eog(&single.record).unwrap();
        assert_eq!(local_maxima_above(&pair.v_v, spec.amplitude_uv * UV / 2.0), 1);
    }

    #[test]
    fn every_class_round_trips_through_derivation() {
        let spec = noiseless();
        for label in TrialLabel::ALL {
            let t = gen_eog_trial(label, &spec).unwrap();
            assert_eq!(t.record.n_samples(), 1000);
            let pair = derive_eog(&t.record).unwrap();
            for (a, b) in pair.v_h.iter().zip(&t.template_h).chain(pair.v_v.iter().zip(&t.template_v)) {
                assert!((a - b).abs() <= 1e-12, "{label}");
            }
            let (eh, ev) = direction(label);
            let peak_h = t.template_h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let peak_v = t.template_v.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let a = spec.amplitude_uv * UV;
            match label {
                TrialLabel::Rest => assert_eq!(peak_h + peak_v, 0.0),
                TrialLabel::Blink | TrialLabel::DoubleBlink => {
                    assert_eq!(peak_h, 0.0);
                    assert!((peak_v - a).abs() < 1e-15);
                }
                _ => {
                    assert!((peak_h - eh.abs() * a).abs() < 1e-15);
                    assert!((peak_v - ev.abs() * a).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = SynthSpec { drift_uvps: 3.0, mains_amp_uv: 10.0, walking_amp_uv: 5.0, latency_jitter_ms: 50.0, seed: 9, ..Default::default() };
        let a = gen_eog_trial(TrialLabel::UpLeft, &spec).unwrap();
        let b = gen_eog_trial(TrialLabel::UpLeft, &spec).unwrap();
        assert_eq!(a.record, b.record);
        let c = gen_eog_trial(TrialLabel::UpLeft, &spec.with_seed(10)).unwrap();
        assert_ne!(a.record, c.record);
    }

    #[test]
    fn protocol_counts_and_bounds() {
        let s = eog_protocol(&SynthSpec::default(), 3).unwrap();
        assert_eq!(s.labels.len(), 33);
        assert_eq!(s.record.n_samples(), 1000 + 33 * 1000);
        for c in 0..11 {
            assert_eq!(s.labels.iter().filter(|r| r.class_id == c).count(), 3);
        }
    }

    #[test]
    fn short_trials_rejected() {
        let spec = SynthSpec { trial_duration: 0.4, ..Default::default() };
        assert!(gen_eog_trial(TrialLabel::Up, &spec).is_err());
    }
}
