//! Uniformly sampled multi-channel recordings.

use std::fmt;
use std::str::FromStr;

use crate::error::{param, Error, Result};

pub const V_R: &str = "V_R";
pub const V_L: &str = "V_L";
pub const V_C: &str = "V_C";
pub const V_H: &str = "V_H";
pub const V_V: &str = "V_V";

/// Electrode names for the 8-channel EEG-only configuration:
/// six temple electrodes followed by two behind-the-ear electrodes.
pub const EEG_ONLY_CHANNELS: [&str; 8] = ["TL1", "TL2", "TL3", "TR1", "TR2", "TR3", "BTE_L", "BTE_R"];

/// Electrode names for the combined configuration: two EEG electrodes per
/// side and the three nose-bridge EOG electrodes.
pub const COMBINED_CHANNELS: [&str; 7] = ["TL1", "TL2", "TR1", "TR2", V_R, V_L, V_C];

/// Channel configuration a recording was acquired (or derived) with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConfigId {
    EegOnly,
    Combined,
    /// Three EOG electrodes only.
    Eog,
    /// Derived horizontal/vertical EOG pair.
    EogDerived,
    Unspecified,
}

impl ConfigId {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConfigId::EegOnly => "eeg_only",
            ConfigId::Combined => "combined",
            ConfigId::Eog => "eog",
            ConfigId::EogDerived => "eog_derived",
            ConfigId::Unspecified => "none",
        }
    }

    /// Channel roles for configurations with a fixed electrode layout.
    pub fn channel_roles(&self) -> Option<&'static [&'static str]> {
        match self {
            ConfigId::EegOnly => Some(&EEG_ONLY_CHANNELS),
            ConfigId::Combined => Some(&COMBINED_CHANNELS),
            ConfigId::Eog => Some(&[V_R, V_L, V_C]),
            ConfigId::EogDerived => Some(&[V_H, V_V]),
            ConfigId::Unspecified => None,
        }
    }
}

impl fmt::Display for ConfigId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConfigId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "eeg_only" => Ok(ConfigId::EegOnly),
            "combined" => Ok(ConfigId::Combined),
            "eog" => Ok(ConfigId::Eog),
            "eog_derived" => Ok(ConfigId::EogDerived),
            "none" => Ok(ConfigId::Unspecified),
            _ => Err(param(format!("unknown channel config id `{s}`"))),
        }
    }
}

/// Channels × samples matrix of voltages (volts) with its sample rate.
///
/// All channels have equal length and every value is finite; both are
/// checked on construction so downstream code can rely on them.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannelRecord {
    sample_rate: f64,
    channel_names: Vec<String>,
    data: Vec<Vec<f64>>,
    config_id: ConfigId,
}

impl MultiChannelRecord {
    pub fn new(
        sample_rate: f64,
        channel_names: Vec<String>,
        data: Vec<Vec<f64>>,
        config_id: ConfigId,
    ) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(param(format!("sample rate must be positive, got {sample_rate}")));
        }
        if channel_names.len() != data.len() {
            return Err(param(format!(
                "{} channel names for {} data rows",
                channel_names.len(),
                data.len()
            )));
        }
        for (i, name) in channel_names.iter().enumerate() {
            if channel_names[..i].contains(name) {
                return Err(param(format!("duplicate channel name `{name}`")));
            }
        }
        if let Some(first) = data.first() {
            let n = first.len();
            for (name, row) in channel_names.iter().zip(&data) {
                if row.len() != n {
                    return Err(param(format!(
                        "channel `{name}` has {} samples, expected {n}",
                        row.len()
                    )));
                }
                if let Some(pos) = row.iter().position(|v| !v.is_finite()) {
                    return Err(Error::Validation(format!(
                        "non-finite value in channel `{name}` at sample {pos}"
                    )));
                }
            }
        }
        Ok(Self { sample_rate, channel_names, data, config_id })
    }

    /// Builds a record with the fixed channel layout of `config_id`.
    pub fn with_config(sample_rate: f64, config_id: ConfigId, data: Vec<Vec<f64>>) -> Result<Self> {
        let roles = config_id
            .channel_roles()
            .ok_or_else(|| param("config has no fixed channel layout"))?;
        Self::new(sample_rate, roles.iter().map(|s| s.to_string()).collect(), data, config_id)
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn config_id(&self) -> ConfigId {
        self.config_id
    }

    pub fn data(&self) -> &[Vec<f64>] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Vec<f64>> {
        self.data
    }

    pub fn n_channels(&self) -> usize {
        self.data.len()
    }

    pub fn n_samples(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn duration(&self) -> f64 {
        self.n_samples() as f64 / self.sample_rate
    }

    pub fn channel(&self, index: usize) -> &[f64] {
        &self.data[index]
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channel_names.iter().position(|n| n == name)
    }

    pub fn channel_by_name(&self, name: &str) -> Option<&[f64]> {
        self.channel_index(name).map(|i| self.data[i].as_slice())
    }

    /// Same metadata, new sample matrix.
    pub fn with_data(&self, data: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(self.sample_rate, self.channel_names.clone(), data, self.config_id)
    }

    pub(crate) fn with_data_and_rate(&self, data: Vec<Vec<f64>>, sample_rate: f64) -> Result<Self> {
        Self::new(sample_rate, self.channel_names.clone(), data, self.config_id)
    }

    /// Copies `len` samples starting at `start`.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        let end = start
            .checked_add(len)
            .filter(|&e| e <= self.n_samples())
            .ok_or_else(|| {
                param(format!(
                    "slice [{start}, {start}+{len}) exceeds record length {}",
                    self.n_samples()
                ))
            })?;
        let data = self.data.iter().map(|row| row[start..end].to_vec()).collect();
        self.with_data(data)
    }

    /// Keeps the named channels, in the given order.
    pub fn select(&self, names: &[&str], config_id: ConfigId) -> Result<Self> {
        let mut data = Vec::with_capacity(names.len());
        for name in names {
            let i = self
                .channel_index(name)
                .ok_or_else(|| param(format!("missing channel `{name}`")))?;
            data.push(self.data[i].clone());
        }
        Self::new(self.sample_rate, names.iter().map(|s| s.to_string()).collect(), data, config_id)
    }

    /// Appends `other` in time. Channel layout and rate must match.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if other.channel_names != self.channel_names || other.sample_rate != self.sample_rate {
            return Err(param("cannot concatenate records with different layouts"));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.iter().chain(b).copied().collect())
            .collect();
        self.with_data(data)
    }
}

/// One row of a label file: a trial starting at `start_sample` with class `class_id`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LabelRow {
    pub start_sample: usize,
    pub class_id: usize,
}
