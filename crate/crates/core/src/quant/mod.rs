//! Post-training INT8 quantization of EpiDeNet, integer inference, MAC
//! accounting and a latency/energy calculator.
//!
//! Weights are symmetric per tensor (codes in ±127, zero point 0);
//! activations are asymmetric per tensor with ranges calibrated from data;
//! biases are `i32` at scale `s_in · s_w`. Each layer accumulates in `i32`
//! and requantizes with one `f64` multiplier, rounding half to even.

mod macs;

pub use macs::{count_macs, count_macs_dims, perf_model, DeploymentPoint, MacReport, PerfEstimate, DEPLOYMENT_POINTS};

use crate::error::{param, Error, Result};
use crate::io::Classifier;
use crate::nn::{argmax, ConvShape, EpiDeNetParams, FEATURES};

/// Affine activation quantization: `real = scale · (code − zero_point)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QParams {
    pub scale: f64,
    pub zero_point: i32,
}

impl QParams {
    /// Covers `[lo, hi] ∪ {0}`; an empty range is widened to ±1e-3.
    pub fn from_range(lo: f64, hi: f64) -> Self {
        let (mut lo, mut hi) = (lo.min(0.0), hi.max(0.0));
        if hi - lo <= 0.0 {
            log::warn!("degenerate activation range; widening to ±1e-3");
            lo = -1e-3;
            hi = 1e-3;
        }
        let scale = (hi - lo) / 255.0;
        let zero_point = ((-128.0 - lo / scale).round_ties_even() as i32).clamp(-128, 127);
        Self { scale, zero_point }
    }

    pub fn quantize(&self, x: f64) -> i8 {
        ((x / self.scale).round_ties_even() + self.zero_point as f64).clamp(-128.0, 127.0) as i8
    }

    pub fn dequantize(&self, q: i8) -> f64 {
        self.scale * (q as i32 - self.zero_point) as f64
    }
}

/// Symmetric per-tensor weight quantization: `scale = max|w| / 127`.
pub fn quantize_weights(w: &[f64]) -> (Vec<i8>, f64) {
    let m = w.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let scale = if m > 0.0 { m / 127.0 } else { 1.0 };
    (w.iter().map(|v| (v / scale).round_ties_even().clamp(-127.0, 127.0) as i8).collect(), scale)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QConv {
    pub shape: ConvShape,
    pub weight: Vec<i8>,
    pub weight_scale: f64,
    /// At scale `input.scale · weight_scale`.
    pub bias: Vec<i32>,
    /// Quantization of this layer's rectified output.
    pub output: QParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedModel {
    pub channels: usize,
    pub samples: usize,
    pub pool_d: usize,
    pub num_classes: usize,
    pub input_scale: f64,
    pub seed: u64,
    pub input: QParams,
    pub convs: Vec<QConv>,
    pub gap: QParams,
    pub dense_weight: Vec<i8>,
    pub dense_weight_scale: f64,
    pub dense_bias: Vec<i32>,
}

/// Activation ranges `(min, max)` over the calibration set: the scaled
/// input, each rectified conv output, and the pooled features.
pub fn calibrate(params: &EpiDeNetParams, calibration: &[Vec<Vec<f64>>]) -> Result<Vec<(f64, f64)>> {
    if calibration.is_empty() {
        return Err(param("calibration set is empty"));
    }
    let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); 7];
    let mut see = |k: usize, v: &[f64]| {
        for &x in v {
            ranges[k].0 = ranges[k].0.min(x);
            ranges[k].1 = ranges[k].1.max(x);
        }
    };
    for x in calibration {
        let cache = params.forward_cached(x)?;
        see(0, &cache.conv_inputs[0].data);
        for (l, y) in cache.conv_outputs.iter().enumerate() {
            see(l + 1, &y.data);
        }
        see(6, &cache.features);
    }
    Ok(ranges)
}

fn quantize_bias(b: &[f64], scale: f64) -> Result<Vec<i32>> {
    b.iter()
        .map(|v| {
            let q = (v / scale).round_ties_even();
            if q.abs() > (1i64 << 30) as f64 {
                return Err(Error::Internal(format!("bias {v} does not fit the int32 accumulator at scale {scale:e}")));
            }
            Ok(q as i32)
        })
        .collect()
}

/// Largest possible accumulator magnitude must stay inside `i32`.
fn check_headroom(fan_in: usize, bias: &[i32]) -> Result<()> {
    let worst = fan_in as i64 * 255 * 127 + bias.iter().map(|b| (*b as i64).abs()).max().unwrap_or(0);
    if worst > i32::MAX as i64 {
        return Err(Error::Internal(format!("accumulator may reach {worst}, beyond int32")));
    }
    Ok(())
}

pub fn quantize(params: &EpiDeNetParams, calibration: &[Vec<Vec<f64>>]) -> Result<QuantizedModel> {
    let ranges = calibrate(params, calibration)?;
    let act: Vec<QParams> = ranges.iter().map(|&(lo, hi)| QParams::from_range(lo, hi)).collect();
    let mut convs = Vec::with_capacity(params.convs.len());
    for (l, c) in params.convs.iter().enumerate() {
        let (weight, weight_scale) = quantize_weights(&c.weight);
        let bias = quantize_bias(&c.bias, act[l].scale * weight_scale)?;
        check_headroom(c.shape.in_ch * c.shape.kh * c.shape.kw, &bias)?;
        convs.push(QConv { shape: c.shape, weight, weight_scale, bias, output: act[l + 1] });
    }
    let (dense_weight, dense_weight_scale) = quantize_weights(&params.dense_weight);
    let dense_bias = quantize_bias(&params.dense_bias, act[6].scale * dense_weight_scale)?;
    check_headroom(FEATURES, &dense_bias)?;
    Ok(QuantizedModel {
        channels: params.channels,
        samples: params.samples,
        pool_d: params.pool_d,
        num_classes: params.num_classes,
        input_scale: params.input_scale,
        seed: params.seed,
        input: act[0],
        convs,
        gap: act[6],
        dense_weight,
        dense_weight_scale,
        dense_bias,
    })
}

/// Integer activations `(channels, height, width)` row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QTensor {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<i8>,
}

/// Every integer intermediate of one inference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QTrace {
    pub input: QTensor,
    pub conv_outputs: Vec<QTensor>,
    pub features: Vec<i8>,
    pub logit_acc: Vec<i32>,
}

fn overlap(n: usize, k: usize, tap: usize) -> Option<(usize, usize, usize)> {
    let shift = tap as isize - ((k - 1) / 2) as isize;
    let start = (-shift).max(0) as usize;
    let end = (n as isize - shift).min(n as isize);
    (end > start as isize).then(|| (start, (start as isize + shift) as usize, end as usize - start))
}

fn requantize(acc: i32, m: f64, zp: i32) -> i8 {
    ((acc as f64 * m).round_ties_even() as i64 + zp as i64).clamp(zp.max(-128) as i64, 127) as i8
}

fn q_conv(layer: &QConv, x: &QTensor, in_q: QParams) -> QTensor {
    let s = layer.shape;
    let (h, w) = (x.h, x.w);
    let xi: Vec<i32> = x.data.iter().map(|&v| v as i32 - in_q.zero_point).collect();
    let mut acc = vec![0i32; s.out_ch * h * w];
    for o in 0..s.out_ch {
        let out = &mut acc[o * h * w..(o + 1) * h * w];
        out.fill(layer.bias[o]);
        for i in 0..s.in_ch {
            for ky in 0..s.kh {
                let Some((oy, iy, ny)) = overlap(h, s.kh, ky) else { continue };
                for kx in 0..s.kw {
                    let Some((ox, ix, nx)) = overlap(w, s.kw, kx) else { continue };
                    let wv = layer.weight[((o * s.in_ch + i) * s.kh + ky) * s.kw + kx] as i32;
                    if wv == 0 {
                        continue;
                    }
                    for r in 0..ny {
                        let src = &xi[(i * h + iy + r) * w + ix..][..nx];
                        let dst = &mut out[(oy + r) * w + ox..][..nx];
                        for (d, v) in dst.iter_mut().zip(src) {
                            *d += wv * v;
                        }
                    }
                }
            }
        }
    }
    let m = in_q.scale * layer.weight_scale / layer.output.scale;
    let zp = layer.output.zero_point;
    QTensor { c: s.out_ch, h, w, data: acc.into_iter().map(|a| requantize(a, m, zp)).collect() }
}

fn q_pool(x: &QTensor, ph: usize, pw: usize) -> QTensor {
    let (oh, ow) = (x.h / ph, x.w / pw);
    let mut data = Vec::with_capacity(x.c * oh * ow);
    for c in 0..x.c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = i8::MIN;
                for dy in 0..ph {
                    let base = (c * x.h + oy * ph + dy) * x.w + ox * pw;
                    best = x.data[base..base + pw].iter().fold(best, |a, &b| a.max(b));
                }
                data.push(best);
            }
        }
    }
    QTensor { c: x.c, h: oh, w: ow, data }
}

impl QuantizedModel {
    fn pool(&self, l: usize) -> Option<(usize, usize)> {
        crate::nn::pool_of(l, self.pool_d)
    }

    /// Integer inference returning every intermediate.
    pub fn trace(&self, x: &[Vec<f64>]) -> Result<QTrace> {
        if x.len() != self.channels || x.iter().any(|r| r.len() != self.samples) {
            return Err(param(format!("input does not match the model's {}×{}", self.channels, self.samples)));
        }
        let input = QTensor {
            c: 1,
            h: self.channels,
            w: self.samples,
            data: x.iter().flatten().map(|v| self.input.quantize(v * self.input_scale)).collect(),
        };
        let mut a = input.clone();
        let mut in_q = self.input;
        let mut conv_outputs = Vec::with_capacity(self.convs.len());
        for (l, layer) in self.convs.iter().enumerate() {
            let y = q_conv(layer, &a, in_q);
            a = match self.pool(l) {
                Some((ph, pw)) => q_pool(&y, ph, pw),
                None => y.clone(),
            };
            in_q = layer.output;
            conv_outputs.push(y);
        }
        let plane = (a.h * a.w) as f64;
        let m = in_q.scale / (plane * self.gap.scale);
        let features: Vec<i8> = a
            .data
            .chunks_exact(a.h * a.w)
            .map(|p| {
                let sum: i32 = p.iter().map(|&v| v as i32 - in_q.zero_point).sum();
                ((sum as f64 * m).round_ties_even() as i64 + self.gap.zero_point as i64).clamp(-128, 127) as i8
            })
            .collect();
        let logit_acc = self
            .dense_weight
            .chunks_exact(FEATURES)
            .zip(&self.dense_bias)
            .map(|(w, &b)| b + w.iter().zip(&features).map(|(&w, &f)| w as i32 * (f as i32 - self.gap.zero_point)).sum::<i32>())
            .collect();
        Ok(QTrace { input, conv_outputs, features, logit_acc })
    }

    /// Dequantized logits.
    pub fn q_forward(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        let s = self.gap.scale * self.dense_weight_scale;
        Ok(self.trace(x)?.logit_acc.into_iter().map(|a| a as f64 * s).collect())
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<usize> {
        Ok(argmax(&self.q_forward(x)?))
    }
}

pub fn q_forward(model: &QuantizedModel, x: &[Vec<f64>]) -> Result<Vec<f64>> {
    model.q_forward(x)
}

impl Classifier for QuantizedModel {
    fn input_shape(&self) -> (usize, usize) {
        (self.channels, self.samples)
    }

    fn classify(&self, window: &[Vec<f64>]) -> Result<usize> {
        self.predict(window)
    }
}
