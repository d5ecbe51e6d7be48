use crate::error::{param, Result};
use crate::nn::{shape_trace, EpiDeNetParams, CONVS, FEATURES};

/// Multiply-accumulates per inference, layer by layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacReport {
    pub layers: Vec<(String, u64)>,
    pub total: u64,
}

/// Convolutions count `out_elems · kh · kw · in_ch` (full kernel, padding
/// included); the head counts `16 · K`. Pooling and ReLU are free.
pub fn count_macs_dims(c: usize, t: usize, d: usize, num_classes: usize) -> Result<MacReport> {
    let trace = shape_trace(c, t, d, num_classes)?;
    let mut layers = Vec::new();
    let mut in_ch = 1u64;
    let convs = trace.iter().filter(|l| l.name.starts_with("conv"));
    for (l, &(f, kh, kw)) in convs.zip(&CONVS) {
        let (_, h, w) = l.shape;
        layers.push((l.name.clone(), (f * h * w) as u64 * (kh * kw) as u64 * in_ch));
        in_ch = f as u64;
    }
    layers.push(("dense".to_string(), (FEATURES * num_classes) as u64));
    let total = layers.iter().map(|(_, m)| m).sum();
    Ok(MacReport { layers, total })
}

pub fn count_macs(params: &EpiDeNetParams) -> Result<MacReport> {
    count_macs_dims(params.channels, params.samples, params.pool_d, params.num_classes)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerfEstimate {
    pub time_ms: f64,
    pub energy_mj: f64,
    pub power_mw: f64,
}

/// Latency and energy from a MAC count, a sustained throughput in MMAC/s
/// and an efficiency in GMAC/s/W.
pub fn perf_model(macs: u64, throughput_mmacs: f64, efficiency_gmacs_per_w: f64) -> Result<PerfEstimate> {
    if !(throughput_mmacs > 0.0 && throughput_mmacs.is_finite()) {
        return Err(param(format!("throughput must be positive, got {throughput_mmacs}")));
    }
    if !(efficiency_gmacs_per_w > 0.0 && efficiency_gmacs_per_w.is_finite()) {
        return Err(param(format!("efficiency must be positive, got {efficiency_gmacs_per_w}")));
    }
    let time_ms = macs as f64 / (throughput_mmacs * 1e6) * 1e3;
    let energy_mj = macs as f64 / (efficiency_gmacs_per_w * 1e9) * 1e3;
    Ok(PerfEstimate { time_ms, energy_mj, power_mw: throughput_mmacs / efficiency_gmacs_per_w })
}

/// Published deployment measurements on the GAP9 target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeploymentPoint {
    pub channels: usize,
    pub samples: usize,
    pub pool_d: usize,
    pub num_classes: usize,
    pub macs: u64,
    pub throughput_mmacs: f64,
    pub time_ms: f64,
    pub energy_mj: f64,
    pub efficiency_gmacs_per_w: f64,
    pub power_mw: f64,
}

pub const DEPLOYMENT_POINTS: [DeploymentPoint; 3] = [
    DeploymentPoint {
        channels: 2,
        samples: 500,
        pool_d: 1,
        num_classes: 11,
        macs: 259_856,
        throughput_mmacs: 173.47,
        time_ms: 1.50,
        energy_mj: 0.024,
        efficiency_gmacs_per_w: 10.66,
        power_mw: 16.28,
    },
    DeploymentPoint {
        channels: 2,
        samples: 1000,
        pool_d: 1,
        num_classes: 11,
        macs: 484_752,
        throughput_mmacs: 196.10,
        time_ms: 2.47,
        energy_mj: 0.040,
        efficiency_gmacs_per_w: 12.24,
        power_mw: 16.02,
    },
    DeploymentPoint {
        channels: 8,
        samples: 2000,
        pool_d: 4,
        num_classes: 2,
        macs: 3_844_000,
        throughput_mmacs: 839.67,
        time_ms: 4.58,
        energy_mj: 0.121,
        efficiency_gmacs_per_w: 31.64,
        power_mw: 26.54,
    },
];
