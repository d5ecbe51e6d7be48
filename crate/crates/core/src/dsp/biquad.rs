//! Second-order sections in direct form II transposed.

use rustfft::num_complex::Complex64;

use crate::error::{param, Error, Result};
use crate::record::MultiChannelRecord;

/// One second-order section, `a0` normalized to 1.
///
/// H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    pub const IDENTITY: Biquad = Biquad { b0: 1.0, b1: 0.0, b2: 0.0, a1: 0.0, a2: 0.0 };

    /// Frequency response at normalized angular frequency `omega` (rad/sample).
    pub fn response(&self, omega: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -omega);
        let z2 = z1 * z1;
        (self.b0 + self.b1 * z1 + self.b2 * z2) / (1.0 + self.a1 * z1 + self.a2 * z2)
    }

    /// Roots of z^2 + a1 z + a2.
    pub fn poles(&self) -> [Complex64; 2] {
        let disc = Complex64::new(self.a1 * self.a1 - 4.0 * self.a2, 0.0).sqrt();
        [(-self.a1 + disc) / 2.0, (-self.a1 - disc) / 2.0]
    }

    /// Both poles strictly inside the unit circle.
    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.norm() < 1.0)
    }

    fn is_finite(&self) -> bool {
        [self.b0, self.b1, self.b2, self.a1, self.a2].iter().all(|c| c.is_finite())
    }
}

/// A chain of biquads plus per-channel run state.
///
/// The state is single-writer: one stream per instance. Clone the cascade
/// to filter independent streams.
#[derive(Debug, Clone)]
pub struct BiquadCascade {
    sections: Vec<Biquad>,
    sample_rate: f64,
    // [channel][section] -> (s1, s2)
    state: Vec<Vec<[f64; 2]>>,
}

impl BiquadCascade {
    pub fn new(sections: Vec<Biquad>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(param(format!("sample rate must be positive, got {sample_rate}")));
        }
        for (i, s) in sections.iter().enumerate() {
            if !s.is_finite() {
                return Err(param(format!("section {i} has non-finite coefficients")));
            }
            if !s.is_stable() {
                return Err(Error::Internal(format!("section {i} is unstable: poles {:?}", s.poles())));
            }
        }
        Ok(Self { sections, sample_rate, state: Vec::new() })
    }

    pub fn identity(sample_rate: f64) -> Result<Self> {
        Self::new(vec![Biquad::IDENTITY], sample_rate)
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Clears all run state.
    pub fn reset(&mut self) {
        self.state.clear();
    }

    /// Appends the sections of `other` (which must share the sample rate).
    pub fn then(mut self, other: BiquadCascade) -> Result<Self> {
        if other.sample_rate != self.sample_rate {
            return Err(param("cannot chain cascades designed for different sample rates"));
        }
        self.sections.extend(other.sections);
        self.state.clear();
        Ok(self)
    }

    /// Complex response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let omega = 2.0 * std::f64::consts::PI * freq_hz / self.sample_rate;
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(omega))
    }

    pub fn magnitude_db(&self, freq_hz: f64) -> f64 {
        20.0 * self.response(freq_hz).norm().log10()
    }

    fn ensure_channels(&mut self, channels: usize) -> Result<()> {
        if self.state.is_empty() {
            self.state = vec![vec![[0.0; 2]; self.sections.len()]; channels];
            Ok(())
        } else if self.state.len() != channels {
            Err(param(format!(
                "cascade holds state for {} channels, got {channels}",
                self.state.len()
            )))
        } else {
            Ok(())
        }
    }

    /// Filters one sample of `channel`, updating that channel's state.
    /// State for `channels` channels is allocated on first use.
    pub fn process_sample(&mut self, channels: usize, channel: usize, x: f64) -> Result<f64> {
        self.ensure_channels(channels)?;
        let state = &mut self.state[channel];
        let mut y = x;
        for (s, st) in self.sections.iter().zip(state.iter_mut()) {
            let out = s.b0 * y + st[0];
            st[0] = s.b1 * y - s.a1 * out + st[1];
            st[1] = s.b2 * y - s.a2 * out;
            y = out;
        }
        Ok(y)
    }

    /// Filters a block of one channel in place.
    pub fn process_block(&mut self, channels: usize, channel: usize, block: &mut [f64]) -> Result<()> {
        self.ensure_channels(channels)?;
        let state = &mut self.state[channel];
        for (s, st) in self.sections.iter().zip(state.iter_mut()) {
            let (mut s1, mut s2) = (st[0], st[1]);
            for v in block.iter_mut() {
                let x = *v;
                let y = s.b0 * x + s1;
                s1 = s.b1 * x - s.a1 * y + s2;
                s2 = s.b2 * x - s.a2 * y;
                *v = y;
            }
            *st = [s1, s2];
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterMode {
    /// Reset state, then filter the whole record.
    Batch,
    /// Continue from the state left by the previous call.
    Streaming,
}

/// Causal (forward-only) filtering of every channel of `record`.
pub fn apply_filter(
    cascade: &mut BiquadCascade,
    record: &MultiChannelRecord,
    mode: FilterMode,
) -> Result<MultiChannelRecord> {
    if (cascade.sample_rate - record.sample_rate()).abs() > 1e-9 * record.sample_rate() {
        return Err(param(format!(
            "cascade designed for {} Hz applied to a {} Hz record",
            cascade.sample_rate,
            record.sample_rate()
        )));
    }
    if mode == FilterMode::Batch {
        cascade.reset();
    }
    let channels = record.n_channels();
    let mut out = record.data().to_vec();
    for (ch, row) in out.iter_mut().enumerate() {
        cascade.process_block(channels, ch, row)?;
    }
    record.with_data(out)
}
