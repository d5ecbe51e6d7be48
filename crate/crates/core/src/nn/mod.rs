//! The EpiDeNet CNN: five conv blocks, global average pooling and a dense
//! head, with reverse-mode gradients, Adam training, cross-validation and a
//! parameter file format.
//!
//! | block | conv (filters, kernel) | pool   |
//! |-------|------------------------|--------|
//! | φ1    | 4, (1, 4)              | (1, 8) |
//! | φ2    | 16, (1, 16)            | (1, 4) |
//! | φ3    | 16, (1, 8)             | (1, 4) |
//! | φ4    | 16, (16, 1)            | (D, 1) |
//! | φ5    | 16, (8, 1)             | global average |
//! | φ6    | dense 16 → classes     |        |
//!
//! Every convolution is same-padded and followed by `max(0, x)`.

mod format;
mod layers;
mod train;

pub use format::{read_model, write_model, Manifest, ModelFile, TensorEntry};
pub use layers::{ConvShape, Tensor3};
pub use train::{
    adam_step, itr_curve_cv, kfold_cv, stratified_folds, train, AdamState, Dataset, EpochStats, FoldMetrics, FoldReport,
    TrainConfig, TrainResult,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{param, Result};
use crate::io::Classifier;
use layers::{conv_backward, conv_forward, maxpool_backward, maxpool_forward, relu_inplace};

/// Minimum time samples for the three time-axis pools.
pub const MIN_SAMPLES: usize = 128;
pub const FEATURES: usize = 16;
pub(crate) const CONVS: [(usize, usize, usize); 5] = [(4, 1, 4), (16, 1, 16), (16, 1, 8), (16, 16, 1), (16, 8, 1)];

#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub shape: ConvShape,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpiDeNetParams {
    pub channels: usize,
    pub samples: usize,
    /// Height of the φ4 pool: 1 for EOG, 4 for EEG.
    pub pool_d: usize,
    pub num_classes: usize,
    /// Inputs are multiplied by this before the first convolution.
    pub input_scale: f64,
    pub seed: u64,
    pub convs: Vec<ConvParams>,
    /// `[class][feature]`.
    pub dense_weight: Vec<f64>,
    pub dense_bias: Vec<f64>,
}

/// Pool window `(height, width)` after conv `l`; φ5 has none.
pub(crate) fn pool_of(l: usize, d: usize) -> Option<(usize, usize)> {
    [Some((1, 8)), Some((1, 4)), Some((1, 4)), Some((d, 1)), None][l]
}

/// Output shape of every layer, `(filters, height, width)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerShape {
    pub name: String,
    pub shape: (usize, usize, usize),
}

fn check_dims(c: usize, t: usize, d: usize, k: usize) -> Result<()> {
    if c == 0 {
        return Err(param("need at least one input channel"));
    }
    if t < MIN_SAMPLES {
        return Err(param(format!("T = {t} is too short for the pooling chain (needs ≥ {MIN_SAMPLES})")));
    }
    if d != 1 && d != 4 {
        return Err(param(format!("pool height D must be 1 or 4, got {d}")));
    }
    if c % d != 0 {
        return Err(param(format!("C = {c} is not divisible by D = {d}")));
    }
    if k < 2 {
        return Err(param(format!("need at least 2 classes, got {k}")));
    }
    Ok(())
}

/// Layer-by-layer output shapes for a `(C, T)` input.
pub fn shape_trace(c: usize, t: usize, d: usize, num_classes: usize) -> Result<Vec<LayerShape>> {
    check_dims(c, t, d, num_classes)?;
    let mut out = Vec::new();
    let (mut h, mut w) = (c, t);
    for (l, &(f, _, _)) in CONVS.iter().enumerate() {
        out.push(LayerShape { name: format!("conv{}", l + 1), shape: (f, h, w) });
        if let Some((ph, pw)) = pool_of(l, d) {
            h /= ph;
            w /= pw;
            out.push(LayerShape { name: format!("pool{}", l + 1), shape: (f, h, w) });
        }
    }
    out.push(LayerShape { name: "gap".into(), shape: (FEATURES, 1, 1) });
    out.push(LayerShape { name: "dense".into(), shape: (num_classes, 1, 1) });
    Ok(out)
}

/// Fan-in scaled uniform weights (`±sqrt(6/fan_in)` for convolutions,
/// `±sqrt(1/fan_in)` for the head), zero biases.
pub fn build_epidenet(c: usize, t: usize, d: usize, num_classes: usize, seed: u64) -> Result<EpiDeNetParams> {
    check_dims(c, t, d, num_classes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_ch = 1;
    let mut convs = Vec::with_capacity(CONVS.len());
    for &(f, kh, kw) in &CONVS {
        let shape = ConvShape { out_ch: f, in_ch, kh, kw };
        let bound = (6.0 / (in_ch * kh * kw) as f64).sqrt();
        let weight = (0..shape.weight_len()).map(|_| rng.random_range(-bound..bound)).collect();
        convs.push(ConvParams { shape, weight, bias: vec![0.0; f] });
        in_ch = f;
    }
    let bound = (1.0 / FEATURES as f64).sqrt();
    let dense_weight = (0..num_classes * FEATURES).map(|_| rng.random_range(-bound..bound)).collect();
    Ok(EpiDeNetParams {
        channels: c,
        samples: t,
        pool_d: d,
        num_classes,
        input_scale: 1.0,
        seed,
        convs,
        dense_weight,
        dense_bias: vec![0.0; num_classes],
    })
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input of each convolution.
    pub conv_inputs: Vec<Tensor3>,
    /// Rectified output of each convolution.
    pub conv_outputs: Vec<Tensor3>,
    /// Argmax indices of each pool.
    pub pool_args: Vec<Vec<usize>>,
    pub features: Vec<f64>,
    pub logits: Vec<f64>,
}

impl EpiDeNetParams {
    /// Parameter tensors in declaration order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = Vec::with_capacity(12);
        for c in &self.convs {
            v.push(&c.weight);
            v.push(&c.bias);
        }
        v.push(&self.dense_weight);
        v.push(&self.dense_bias);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = Vec::with_capacity(12);
        for c in &mut self.convs {
            v.push(&mut c.weight);
            v.push(&mut c.bias);
        }
        v.push(&mut self.dense_weight);
        v.push(&mut self.dense_bias);
        v
    }

    /// Names and shapes matching [`EpiDeNetParams::tensors`].
    pub fn tensor_layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut v = Vec::new();
        for (l, c) in self.convs.iter().enumerate() {
            let s = c.shape;
            v.push((format!("conv{}.weight", l + 1), vec![s.out_ch, s.in_ch, s.kh, s.kw]));
            v.push((format!("conv{}.bias", l + 1), vec![s.out_ch]));
        }
        v.push(("dense.weight".into(), vec![self.num_classes, FEATURES]));
        v.push(("dense.bias".into(), vec![self.num_classes]));
        v
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Same topology with every value zero.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    fn input_tensor(&self, x: &[Vec<f64>]) -> Result<Tensor3> {
        if x.len() != self.channels || x.iter().any(|r| r.len() != self.samples) {
            return Err(param(format!(
                "input is {}×{}, model expects {}×{}",
                x.len(),
                x.first().map_or(0, Vec::len),
                self.channels,
                self.samples
            )));
        }
        let mut t = Tensor3::zeros(1, self.channels, self.samples);
        for (dst, src) in t.data.chunks_exact_mut(self.samples).zip(x) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d = s * self.input_scale;
            }
        }
        Ok(t)
    }

    /// Logits plus everything needed for [`EpiDeNetParams::backward`].
    pub fn forward_cached(&self, x: &[Vec<f64>]) -> Result<ForwardCache> {
        let mut a = self.input_tensor(x)?;
        let mut conv_inputs = Vec::with_capacity(5);
        let mut conv_outputs = Vec::with_capacity(5);
        let mut pool_args = Vec::with_capacity(4);
        for (l, c) in self.convs.iter().enumerate() {
            let mut y = conv_forward(&c.shape, &c.weight, &c.bias, &a);
            relu_inplace(&mut y);
            conv_inputs.push(a);
            a = match pool_of(l, self.pool_d) {
                Some((ph, pw)) => {
                    let (p, arg) = maxpool_forward(&y, ph, pw);
                    pool_args.push(arg);
                    p
                }
                None => y.clone(),
            };
            conv_outputs.push(y);
        }
        let plane = a.h * a.w;
        let features: Vec<f64> = a.data.chunks_exact(plane).map(|p| p.iter().sum::<f64>() / plane as f64).collect();
        let logits = self.head(&features);
        Ok(ForwardCache { conv_inputs, conv_outputs, pool_args, features, logits })
    }

    fn head(&self, f: &[f64]) -> Vec<f64> {
        self.dense_weight
            .chunks_exact(FEATURES)
            .zip(&self.dense_bias)
            .map(|(w, b)| b + w.iter().zip(f).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    pub fn forward(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(x)?.logits)
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?))
    }

    /// Accumulates `∂loss/∂params` into `grads` given `∂loss/∂logits`.
    pub fn backward(&self, cache: &ForwardCache, dlogits: &[f64], grads: &mut EpiDeNetParams) {
        let mut dfeat = vec![0.0; FEATURES];
        for (k, &g) in dlogits.iter().enumerate() {
            grads.dense_bias[k] += g;
            let w = &self.dense_weight[k * FEATURES..(k + 1) * FEATURES];
            let dw = &mut grads.dense_weight[k * FEATURES..(k + 1) * FEATURES];
            for j in 0..FEATURES {
                dw[j] += g * cache.features[j];
                dfeat[j] += g * w[j];
            }
        }
        let last = &cache.conv_outputs[4];
        let plane = last.h * last.w;
        let mut d = Tensor3::zeros(last.c, last.h, last.w);
        for (o, chunk) in d.data.chunks_exact_mut(plane).enumerate() {
            chunk.fill(dfeat[o] / plane as f64);
        }
        for l in (0..5).rev() {
            let y = &cache.conv_outputs[l];
            if l < 4 {
                d = maxpool_backward(y.shape(), &cache.pool_args[l], &d);
            }
            for (g, &v) in d.data.iter_mut().zip(&y.data) {
                if v <= 0.0 {
                    *g = 0.0;
                }
            }
            let c = &self.convs[l];
            let gc = &mut grads.convs[l];
            d = conv_backward(&c.shape, &c.weight, &cache.conv_inputs[l], &d, &mut gc.weight, &mut gc.bias);
        }
    }
}

impl Classifier for EpiDeNetParams {
    fn input_shape(&self) -> (usize, usize) {
        (self.channels, self.samples)
    }

    fn classify(&self, window: &[Vec<f64>]) -> Result<usize> {
        self.predict(window)
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Cross-entropy of one sample and its gradient with respect to the logits.
pub(crate) fn cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let p = softmax(logits);
    let loss = -p[label].max(f64::MIN_POSITIVE).ln();
    let mut g = p;
    g[label] -= 1.0;
    (loss, g)
}

/// Mean cross-entropy over the batch and its gradient.
pub fn loss_and_grad(params: &EpiDeNetParams, inputs: &[Vec<Vec<f64>>], labels: &[usize]) -> Result<(f64, EpiDeNetParams)> {
    if inputs.len() != labels.len() || inputs.is_empty() {
        return Err(param(format!("{} inputs for {} labels", inputs.len(), labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= params.num_classes) {
        return Err(param(format!("label {bad} outside 0..{}", params.num_classes)));
    }
    let mut grads = params.zeros_like();
    let mut loss = 0.0;
    for (x, &y) in inputs.iter().zip(labels) {
        let cache = params.forward_cached(x)?;
        let (l, dl) = cross_entropy(&cache.logits, y);
        loss += l;
        params.backward(&cache, &dl, &mut grads);
    }
    let n = inputs.len() as f64;
    for t in grads.tensors_mut() {
        t.iter_mut().for_each(|v| *v /= n);
    }
    Ok((loss / n, grads))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(c: usize, t: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..c).map(|_| (0..t).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn shape_trace_examples() {
        let t = shape_trace(2, 1000, 1, 11).unwrap();
        let widths: Vec<usize> = t.iter().filter(|l| l.name.starts_with("pool")).map(|l| l.shape.2).collect();
        assert_eq!(widths, vec![125, 31, 7, 7]);
        assert_eq!(t.iter().find(|l| l.name == "conv5").unwrap().shape, (16, 2, 7));
        assert_eq!(t.last().unwrap().shape, (11, 1, 1));
        let t = shape_trace(8, 2000, 4, 2).unwrap();
        assert_eq!(t.iter().find(|l| l.name == "pool4").unwrap().shape, (16, 2, 15));
        assert!(build_epidenet(2, 100, 1, 11, 0).is_err());
        assert!(build_epidenet(2, 500, 4, 11, 0).is_err());
        assert!(build_epidenet(2, 500, 1, 1, 0).is_err());
    }

    #[test]
    fn forward_matches_trace() {
        for (c, t, d) in [(2, 500, 1), (2, 1000, 1), (8, 2000, 4)] {
            let p = build_epidenet(c, t, d, 3, 1).unwrap();
            let cache = p.forward_cached(&input(c, t, 2)).unwrap();
            let trace = shape_trace(c, t, d, 3).unwrap();
            for (l, y) in cache.conv_outputs.iter().enumerate() {
                let want = trace.iter().find(|s| s.name == format!("conv{}", l + 1)).unwrap().shape;
                assert_eq!(y.shape(), want);
            }
            assert_eq!(cache.logits.len(), 3);
        }
    }

    #[test]
    fn zero_params_give_uniform_softmax() {
        let p = build_epidenet(2, 500, 1, 11, 0).unwrap().zeros_like();
        let x = input(2, 500, 1);
        assert!(p.forward(&x).unwrap().iter().all(|&v| v == 0.0));
        let (loss, _) = loss_and_grad(&p, &[x], &[4]).unwrap();
        assert!((loss - 11f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn deterministic_and_batch_independent() {
        let p = build_epidenet(2, 500, 1, 11, 5).unwrap();
        let batch: Vec<_> = (0..8).map(|s| input(2, 500, s)).collect();
        let a = p.forward(&batch[3]).unwrap();
        assert_eq!(a, p.forward(&batch[3]).unwrap());
        let logits: Vec<Vec<f64>> = batch.iter().map(|x| p.forward(x).unwrap()).collect();
        assert_eq!(logits[3], a);
        let s: f64 = softmax(&a).iter().sum();
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn duplicated_batch_same_loss_and_grad() {
        let p = build_epidenet(2, 256, 1, 4, 3).unwrap();
        let xs: Vec<_> = (0..3).map(|s| input(2, 256, 10 + s)).collect();
        let ys = [0, 2, 3];
        let (l1, g1) = loss_and_grad(&p, &xs, &ys).unwrap();
        let xs2: Vec<_> = xs.iter().flat_map(|x| [x.clone(), x.clone()]).collect();
        let ys2: Vec<_> = ys.iter().flat_map(|&y| [y, y]).collect();
        let (l2, g2) = loss_and_grad(&p, &xs2, &ys2).unwrap();
        assert!((l1 - l2).abs() < 1e-9);
        for (a, b) in g1.tensors().iter().flat_map(|t| t.iter()).zip(g2.tensors().iter().flat_map(|t| t.iter())) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(loss_and_grad(&p, &xs, &[0, 1, 4]).is_err());
    }

    #[test]
    fn pool_gradient_routes_to_one_position() {
        let p = build_epidenet(2, 256, 1, 3, 8).unwrap();
        let cache = p.forward_cached(&input(2, 256, 9)).unwrap();
        for (l, arg) in cache.pool_args.iter().enumerate() {
            let y = &cache.conv_outputs[l];
            let (ph, pw) = pool_of(l, 1).unwrap();
            let out = Tensor3 { c: y.c, h: y.h / ph, w: y.w / pw, data: vec![1.0; arg.len()] };
            let dx = maxpool_backward(y.shape(), arg, &out);
            assert_eq!(dx.data.iter().filter(|&&g| g != 0.0).count(), arg.len());
        }
    }
}
