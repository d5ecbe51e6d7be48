//! EOG derivation from the three nose electrodes, the two preprocessing
//! chains, and trial segmentation.

use std::str::FromStr;

use crate::dsp::{
    apply_filter, design_butterworth, moving_average_detrend, window_samples, BiquadCascade, CausalDetrender,
    FilterKind, FilterMode,
};
use crate::error::{param, Error, Result};
use crate::record::{ConfigId, LabelRow, MultiChannelRecord, V_C, V_H, V_L, V_R, V_V};
use crate::synth::TrialLabel;

/// Horizontal and vertical EOG, volts.
#[derive(Debug, Clone, PartialEq)]
pub struct EogPair {
    pub v_h: Vec<f64>,
    pub v_v: Vec<f64>,
    pub sample_rate: f64,
}

impl EogPair {
    pub fn new(v_h: Vec<f64>, v_v: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if v_h.len() != v_v.len() {
            return Err(param(format!("V_H has {} samples, V_V has {}", v_h.len(), v_v.len())));
        }
        if v_h.iter().chain(&v_v).any(|v| !v.is_finite()) {
            return Err(Error::Validation("EOG pair contains non-finite samples".into()));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(param(format!("sample rate must be positive, got {sample_rate}")));
        }
        Ok(Self { v_h, v_v, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.v_h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v_h.is_empty()
    }

    /// Two-channel record with channels `V_H`, `V_V`.
    pub fn to_record(&self) -> Result<MultiChannelRecord> {
        MultiChannelRecord::with_config(self.sample_rate, ConfigId::EogDerived, vec![self.v_h.clone(), self.v_v.clone()])
    }

    pub fn from_record(record: &MultiChannelRecord) -> Result<Self> {
        let get = |n: &str| {
            record
                .channel_by_name(n)
                .map(<[f64]>::to_vec)
                .ok_or_else(|| param(format!("record has no `{n}` channel")))
        };
        Self::new(get(V_H)?, get(V_V)?, record.sample_rate())
    }
}

/// `V_V = V_C - (V_R + V_L)/2`, `V_H = V_R - V_L`, sample by sample.
///
/// The record may carry other channels; only the three electrode roles are read.
pub fn derive_eog(record: &MultiChannelRecord) -> Result<EogPair> {
    let role = |n: &str| record.channel_by_name(n).ok_or_else(|| param(format!("missing EOG electrode `{n}`")));
    let (r, l, c) = (role(V_R)?, role(V_L)?, role(V_C)?);
    let v_h = r.iter().zip(l).map(|(r, l)| r - l).collect();
    let v_v = c.iter().zip(r.iter().zip(l)).map(|(c, (r, l))| c - (r + l) / 2.0).collect();
    Ok(EogPair { v_h, v_v, sample_rate: record.sample_rate() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EogChain {
    /// Centred 2 s running-mean removal, then a 10th-order 40 Hz low-pass.
    Validation,
    /// 4th-order 0.5–40 Hz band-pass, then causal 2 s running-mean removal.
    Classification,
}

impl FromStr for EogChain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "validation" => Ok(EogChain::Validation),
            "classification" => Ok(EogChain::Classification),
            _ => Err(param(format!("unknown EOG chain `{s}` (expected validation or classification)"))),
        }
    }
}

const MEAN_WINDOW_S: f64 = 2.0;

pub fn preprocess_eog(pair: &EogPair, chain: EogChain) -> Result<EogPair> {
    let rec = pair.to_record()?;
    let fs = pair.sample_rate;
    let out = match chain {
        EogChain::Validation => {
            let x = moving_average_detrend(&rec, MEAN_WINDOW_S, false)?;
            apply_filter(&mut design_butterworth(10, FilterKind::Lowpass, &[40.0], fs)?, &x, FilterMode::Batch)?
        }
        EogChain::Classification => {
            let rec = rec.with_data(vec![remove_first(&pair.v_h), remove_first(&pair.v_v)])?;
            let x = apply_filter(&mut classification_bandpass(fs)?, &rec, FilterMode::Batch)?;
            moving_average_detrend(&x, MEAN_WINDOW_S, true)?
        }
    };
    let mut data = out.into_data();
    let v_v = data.pop().unwrap_or_default();
    let v_h = data.pop().unwrap_or_default();
    Ok(EogPair { v_h, v_v, sample_rate: fs })
}

/// The band-pass starts in the steady state of the first sample, which for
/// a filter with a zero at DC is the same as subtracting that sample.
fn remove_first(x: &[f64]) -> Vec<f64> {
    let x0 = x.first().copied().unwrap_or_default();
    x.iter().map(|v| v - x0).collect()
}

fn classification_bandpass(fs: f64) -> Result<BiquadCascade> {
    design_butterworth(4, FilterKind::Bandpass, &[0.5, 40.0], fs)
}

/// Sample-by-sample form of the classification chain, fed with raw
/// electrode samples `[V_R, V_L, V_C]`. Bit-identical to
/// [`derive_eog`] followed by [`preprocess_eog`] with [`EogChain::Classification`].
#[derive(Debug, Clone)]
pub struct StreamingEogChain {
    bandpass: BiquadCascade,
    detrend: CausalDetrender,
    first: Option<[f64; 2]>,
}

impl StreamingEogChain {
    pub fn new(sample_rate: f64) -> Result<Self> {
        Ok(Self {
            bandpass: classification_bandpass(sample_rate)?,
            detrend: CausalDetrender::new(window_samples(MEAN_WINDOW_S, sample_rate)?, 2)?,
            first: None,
        })
    }

    /// Returns the preprocessed `[V_H, V_V]`.
    #[inline]
    pub fn push(&mut self, electrodes: [f64; 3]) -> Result<[f64; 2]> {
        let [r, l, c] = electrodes;
        let (h, v) = (r - l, c - (r + l) / 2.0);
        let [h0, v0] = *self.first.get_or_insert([h, v]);
        let h = self.bandpass.process_sample(2, 0, h - h0)?;
        let v = self.bandpass.process_sample(2, 1, v - v0)?;
        Ok([self.detrend.push(0, h), self.detrend.push(1, v)])
    }
}

/// A labeled window of a recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    /// Channels × samples.
    pub data: Vec<Vec<f64>>,
    pub label: TrialLabel,
    pub start_sample: usize,
    /// Portion of the full window kept, in (0, 1].
    pub fraction: f64,
}

impl Epoch {
    pub fn n_samples(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }
}

/// One epoch of `round(window_s·fs)` samples per label row.
pub fn segment_trials(record: &MultiChannelRecord, labels: &[LabelRow], window_s: f64) -> Result<Vec<Epoch>> {
    if !(window_s.is_finite() && window_s > 0.0) {
        return Err(param(format!("window must be positive, got {window_s} s")));
    }
    let n = (window_s * record.sample_rate()).round() as usize;
    labels
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let label = TrialLabel::from_class_id(row.class_id)
                .map_err(|_| param(format!("label {i}: class id {} out of range", row.class_id)))?;
            let end = row.start_sample.checked_add(n).filter(|&e| e <= record.n_samples()).ok_or_else(|| {
                param(format!(
                    "label {i}: span {}..{} exceeds record length {}",
                    row.start_sample,
                    row.start_sample.saturating_add(n),
                    record.n_samples()
                ))
            })?;
            Ok(Epoch {
                data: record.data().iter().map(|ch| ch[row.start_sample..end].to_vec()).collect(),
                label,
                start_sample: row.start_sample,
                fraction: 1.0,
            })
        })
        .collect()
}

/// Keeps the first `round(fraction·N)` samples of a full-window epoch.
pub fn truncate_epoch(epoch: &Epoch, fraction: f64) -> Result<Epoch> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(param(format!("fraction must lie in (0, 1], got {fraction}")));
    }
    let keep = (fraction * epoch.n_samples() as f64).round() as usize;
    Ok(Epoch {
        data: epoch.data.iter().map(|ch| ch[..keep].to_vec()).collect(),
        label: epoch.label,
        start_sample: epoch.start_sample,
        fraction,
    })
}
