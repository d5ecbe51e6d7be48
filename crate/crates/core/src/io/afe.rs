use crate::error::{param, Result};

pub const CODE_MIN: i32 = -(1 << 23);
pub const CODE_MAX: i32 = (1 << 23) - 1;

/// Analog front-end scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AfeConfig {
    pub vref: f64,
    /// Programmable gain, 6 or 12.
    pub gain: u32,
    /// 500 or 1000 Hz.
    pub sample_rate: f64,
}

impl Default for AfeConfig {
    fn default() -> Self {
        Self { vref: 2.4, gain: 12, sample_rate: 500.0 }
    }
}

impl AfeConfig {
    pub fn new(vref: f64, gain: u32, sample_rate: f64) -> Result<Self> {
        let afe = Self { vref, gain, sample_rate };
        afe.validate()?;
        Ok(afe)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.vref.is_finite() && self.vref > 0.0) {
            return Err(param(format!("vref must be positive, got {}", self.vref)));
        }
        if self.gain != 6 && self.gain != 12 {
            return Err(param(format!("gain must be 6 or 12, got {}", self.gain)));
        }
        if self.sample_rate != 500.0 && self.sample_rate != 1000.0 {
            return Err(param(format!("sample rate must be 500 or 1000 Hz, got {}", self.sample_rate)));
        }
        Ok(())
    }

    /// `(2·vref/gain) / 2^24` volts per code.
    pub fn lsb_volts(&self) -> f64 {
        2.0 * self.vref / self.gain as f64 / (1u32 << 24) as f64
    }

    pub fn raw_to_volts(&self, code: i32) -> Result<f64> {
        if !(CODE_MIN..=CODE_MAX).contains(&code) {
            return Err(param(format!("code {code} outside the 24-bit range")));
        }
        Ok(code as f64 * self.lsb_volts())
    }

    /// Nearest code, saturating at the ends of the 24-bit range.
    pub fn volts_to_raw(&self, volts: f64) -> Result<i32> {
        if volts.is_nan() {
            return Err(param("cannot convert NaN to a code"));
        }
        Ok((volts / self.lsb_volts()).round().clamp(CODE_MIN as f64, CODE_MAX as f64) as i32)
    }
}
