//! Filtering, detrending, decimation and time-frequency primitives.
//!
//! All IIR filters are cascades of second-order sections evaluated
//! causally in direct form II transposed with `f64` state.

mod biquad;
mod design;
mod detrend;
mod spectral;

pub use biquad::{apply_filter, Biquad, BiquadCascade, FilterMode};
pub use design::{design_butterworth, design_notch, FilterKind, MAX_ORDER};
pub use detrend::{moving_average_detrend, CausalDetrender};
pub(crate) use detrend::window_samples;
pub use spectral::{band_power, spectrogram, Spectrogram, WindowFn};

use crate::error::{param, Result};
use crate::record::MultiChannelRecord;

/// Keeps every `factor`-th sample starting at index 0.
///
/// No anti-alias filter is applied; band-limit the record first.
pub fn decimate(record: &MultiChannelRecord, factor: usize) -> Result<MultiChannelRecord> {
    if factor < 1 {
        return Err(param("decimation factor must be at least 1"));
    }
    let data = record
        .data()
        .iter()
        .map(|row| row.iter().step_by(factor).copied().collect())
        .collect();
    record.with_data_and_rate(data, record.sample_rate() / factor as f64)
}

/// Preprocessing for the subject-identification task: 0.5–100 Hz band-pass,
/// 50 Hz notch, then causal removal of a 0.5 s moving average.
pub fn preprocess_biometric(record: &MultiChannelRecord) -> Result<MultiChannelRecord> {
    let fs = record.sample_rate();
    let mut bp = design_butterworth(4, FilterKind::Bandpass, &[0.5, 100.0], fs)?;
    let mut notch = design_notch(50.0, 30.0, fs)?;
    let x = apply_filter(&mut bp, record, FilterMode::Batch)?;
    let x = apply_filter(&mut notch, &x, FilterMode::Batch)?;
    moving_average_detrend(&x, 0.5, true)
}

/// Preprocessing for motor-movement EEG: 50 Hz notch, 0.5–100 Hz band-pass,
/// then decimation by 2 (the band-pass keeps the content below the new
/// Nyquist frequency).
pub fn preprocess_motor(record: &MultiChannelRecord) -> Result<MultiChannelRecord> {
    let fs = record.sample_rate();
    let mut notch = design_notch(50.0, 30.0, fs)?;
    let mut bp = design_butterworth(4, FilterKind::Bandpass, &[0.5, 100.0], fs)?;
    let x = apply_filter(&mut notch, record, FilterMode::Batch)?;
    let x = apply_filter(&mut bp, &x, FilterMode::Batch)?;
    decimate(&x, 2)
}
