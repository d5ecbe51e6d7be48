use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{argmax, build_epidenet, cross_entropy, EpiDeNetParams};
use crate::eog::Epoch;
use crate::error::{param, Result};
use crate::eval::{confusion, itr_curve, macro_metrics, metrics, ConfusionMatrix, CurvePoint};
use crate::synth::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub weight_decay: f64,
    /// φ4 pool height.
    pub pool_d: usize,
    /// Share of each class held out for best-epoch selection.
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { lr: 1e-3, batch_size: 64, epochs: 500, seed: 0, weight_decay: 0.0, pool_d: 1, val_fraction: 0.2 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(param(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(param("batch size must be at least 1"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(param("weight decay must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(param(format!("validation fraction must be in [0, 1), got {}", self.val_fraction)));
        }
        Ok(())
    }
}

/// Equal-shape labeled inputs, each channels × samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Vec<Vec<f64>>>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<Vec<f64>>>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(param(format!("{} inputs for {} labels", inputs.len(), labels.len())));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(param(format!("label {l} outside 0..{num_classes}")));
        }
        if let Some(first) = inputs.first() {
            let t = first.first().map_or(0, Vec::len);
            if inputs.iter().any(|x| x.len() != first.len() || x.iter().any(|r| r.len() != t)) {
                return Err(param("dataset inputs differ in shape"));
            }
        }
        Ok(Self { inputs, labels, num_classes })
    }

    pub fn from_epochs(epochs: &[Epoch], num_classes: usize) -> Result<Self> {
        Self::new(
            epochs.iter().map(|e| e.data.clone()).collect(),
            epochs.iter().map(|e| e.label.class_id()).collect(),
            num_classes,
        )
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// `(channels, samples)` of every input.
    pub fn dims(&self) -> (usize, usize) {
        self.inputs.first().map_or((0, 0), |x| (x.len(), x.first().map_or(0, Vec::len)))
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            inputs: idx.iter().map(|&i| self.inputs[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.num_classes];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    /// Indices ordered by (label, content hash): independent of storage order.
    fn canonical_order(&self) -> Vec<usize> {
        let mut keyed: Vec<(usize, u64, usize)> =
            (0..self.len()).map(|i| (self.labels[i], content_hash(&self.inputs[i]), i)).collect();
        keyed.sort_by_key(|&(l, h, _)| (l, h));
        keyed.into_iter().map(|(_, _, i)| i).collect()
    }
}

fn content_hash(x: &[Vec<f64>]) -> u64 {
    // FNV-1a over the IEEE bit patterns
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in x.iter().flatten() {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// Adam moments and step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    pub fn new(params: &EpiDeNetParams) -> Self {
        let z: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self { m: z.clone(), v: z, step: 0 }
    }
}

/// One bias-corrected Adam update in place. Weight decay, when set, is
/// added to the gradient as `weight_decay · param`.
pub fn adam_step(state: &mut AdamState, params: &mut EpiDeNetParams, grads: &EpiDeNetParams, cfg: &TrainConfig) -> Result<()> {
    let gs = grads.tensors();
    if gs.len() != state.m.len() || gs.iter().zip(&state.m).any(|(g, m)| g.len() != m.len()) {
        return Err(param("gradient shapes do not match the optimizer state"));
    }
    state.step += 1;
    let (b1, b2) = (AdamState::BETA1, AdamState::BETA2);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    for (((p, g), m), v) in params.tensors_mut().into_iter().zip(gs).zip(&mut state.m).zip(&mut state.v) {
        if p.len() != g.len() {
            return Err(param("parameter and gradient shapes differ"));
        }
        for i in 0..p.len() {
            let gi = g[i] + cfg.weight_decay * p[i];
            m[i] = b1 * m[i] + (1.0 - b1) * gi;
            v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
            p[i] -= cfg.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + AdamState::EPS);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    /// Parameters after the epoch with the best validation accuracy
    /// (lower validation loss breaks ties, then the earlier epoch).
    pub params: EpiDeNetParams,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
}

/// Per class, a seeded shuffle of the class's canonical order.
fn shuffled_by_class(ds: &Dataset, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); ds.num_classes];
    for i in ds.canonical_order() {
        by_class[ds.labels[i]].push(i);
    }
    for c in by_class.iter_mut() {
        c.shuffle(rng);
    }
    by_class
}

fn evaluate(params: &EpiDeNetParams, ds: &Dataset, idx: &[usize]) -> Result<(f64, f64)> {
    let (mut loss, mut hits) = (0.0, 0usize);
    for &i in idx {
        let logits = params.forward(&ds.inputs[i])?;
        loss += cross_entropy(&logits, ds.labels[i]).0;
        hits += usize::from(argmax(&logits) == ds.labels[i]);
    }
    let n = idx.len().max(1) as f64;
    Ok((loss / n, hits as f64 / n))
}

/// Trains a fresh EpiDeNet with Adam and mean cross-entropy.
///
/// Samples are first put in a canonical order so the result does not depend
/// on how the dataset is stored. A stratified `val_fraction` of every class
/// is held out; the input scale is set to the reciprocal RMS of the
/// training inputs.
pub fn train(ds: &Dataset, cfg: &TrainConfig) -> Result<TrainResult> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(param("cannot train on an empty dataset"));
    }
    let (c, t) = ds.dims();
    let mut params = build_epidenet(c, t, cfg.pool_d, ds.num_classes, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x7261_696e));
    let (mut train_idx, mut val_idx) = (Vec::new(), Vec::new());
    for class in shuffled_by_class(ds, &mut rng) {
        let n_val = ((class.len() as f64 * cfg.val_fraction).round() as usize).min(class.len().saturating_sub(1));
        val_idx.extend_from_slice(&class[..n_val]);
        train_idx.extend_from_slice(&class[n_val..]);
    }
    if val_idx.is_empty() {
        val_idx = train_idx.clone();
    }
    let (sum_sq, count) = train_idx
        .iter()
        .flat_map(|&i| ds.inputs[i].iter().flatten())
        .fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    let rms = (sum_sq / count.max(1) as f64).sqrt();
    if rms > 0.0 && rms.is_finite() {
        params.input_scale = 1.0 / rms;
    }

    let mut adam = AdamState::new(&params);
    let mut best: Option<(f64, f64, usize, EpiDeNetParams)> = None;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs.max(1) {
        train_idx.shuffle(&mut rng);
        let (mut loss_sum, mut hits) = (0.0, 0usize);
        for batch in train_idx.chunks(cfg.batch_size) {
            let mut grads = params.zeros_like();
            for &i in batch {
                let cache = params.forward_cached(&ds.inputs[i])?;
                let (l, dl) = cross_entropy(&cache.logits, ds.labels[i]);
                loss_sum += l;
                hits += usize::from(argmax(&cache.logits) == ds.labels[i]);
                params.backward(&cache, &dl, &mut grads);
            }
            let n = batch.len() as f64;
            for g in grads.tensors_mut() {
                g.iter_mut().for_each(|v| *v /= n);
            }
            adam_step(&mut adam, &mut params, &grads, cfg)?;
        }
        if !params.is_finite() {
            return Err(crate::error::Error::Internal(format!("parameters diverged at epoch {epoch}")));
        }
        let (val_loss, val_acc) = evaluate(&params, ds, &val_idx)?;
        let n = train_idx.len() as f64;
        history.push(EpochStats { epoch, train_loss: loss_sum / n, train_acc: hits as f64 / n, val_loss, val_acc });
        let better = match &best {
            None => true,
            Some((a, l, _, _)) => val_acc > *a || (val_acc == *a && val_loss < *l),
        };
        if better {
            best = Some((val_acc, val_loss, epoch, params.clone()));
        }
        log::debug!("epoch {epoch}: train loss {:.4} acc {:.3}, val loss {val_loss:.4} acc {val_acc:.3}", loss_sum / n, hits as f64 / n);
    }
    let (_, _, best_epoch, params) = best.ok_or_else(|| param("no epochs run"))?;
    Ok(TrainResult { params, history, best_epoch })
}

/// Stratified assignment of every sample to one of `k` folds.
pub fn stratified_folds(ds: &Dataset, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(param(format!("need at least 2 folds, got {k}")));
    }
    let counts = ds.class_counts();
    if let Some((c, &n)) = counts.iter().enumerate().find(|(_, &n)| n < k) {
        return Err(param(format!("class {c} has {n} samples, fewer than the {k} folds")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x666f_6c64));
    let mut fold = vec![0; ds.len()];
    let mut next = 0;
    for class in shuffled_by_class(ds, &mut rng) {
        for i in class {
            fold[i] = next % k;
            next += 1;
        }
    }
    Ok(fold)
}

/// Out-of-fold predictions, in dataset order.
pub(crate) fn cv_predictions(ds: &Dataset, k: usize, cfg: &TrainConfig) -> Result<(Vec<usize>, Vec<usize>)> {
    let fold = stratified_folds(ds, k, cfg.seed)?;
    let mut preds = vec![0; ds.len()];
    for f in 0..k {
        let tr: Vec<usize> = (0..ds.len()).filter(|&i| fold[i] != f).collect();
        let model = train(&ds.subset(&tr), cfg)?.params;
        for i in (0..ds.len()).filter(|&i| fold[i] == f) {
            preds[i] = model.predict(&ds.inputs[i])?;
        }
    }
    Ok((preds, fold))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldMetrics {
    /// Percentages.
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldReport {
    pub folds: Vec<FoldMetrics>,
    pub mean_accuracy: f64,
    pub sd_accuracy: f64,
    pub mean_sensitivity: Option<f64>,
    pub sd_sensitivity: Option<f64>,
    pub mean_specificity: Option<f64>,
    pub sd_specificity: Option<f64>,
    pub pooled: ConfusionMatrix,
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, var.sqrt())
}

fn opt_mean_sd(v: &[Option<f64>]) -> (Option<f64>, Option<f64>) {
    let d: Vec<f64> = v.iter().flatten().copied().collect();
    if d.is_empty() {
        return (None, None);
    }
    let (m, s) = mean_sd(&d);
    (Some(m), Some(s))
}

/// Stratified k-fold cross-validation. Sensitivity and specificity are for
/// `positive_class` on binary tasks and macro-averaged one-vs-rest otherwise.
/// Standard deviations are sample (n−1) estimates.
pub fn kfold_cv(ds: &Dataset, k: usize, cfg: &TrainConfig, positive_class: Option<usize>) -> Result<FoldReport> {
    let (preds, fold) = cv_predictions(ds, k, cfg)?;
    let mut folds = Vec::with_capacity(k);
    let mut pooled = ConfusionMatrix::new((0..ds.num_classes).map(|i| i.to_string()).collect());
    for f in 0..k {
        let idx: Vec<usize> = (0..ds.len()).filter(|&i| fold[i] == f).collect();
        let p: Vec<usize> = idx.iter().map(|&i| preds[i]).collect();
        let t: Vec<usize> = idx.iter().map(|&i| ds.labels[i]).collect();
        let cm = confusion(&p, &t, ds.num_classes)?;
        pooled.add(&cm)?;
        let m = match positive_class {
            Some(pos) if ds.num_classes == 2 => metrics(&cm, Some(pos))?,
            _ => macro_metrics(&cm),
        };
        folds.push(FoldMetrics {
            accuracy: m.accuracy.unwrap_or(0.0),
            sensitivity: m.sensitivity,
            specificity: m.specificity,
            confusion: cm,
        });
    }
    let (mean_accuracy, sd_accuracy) = mean_sd(&folds.iter().map(|f| f.accuracy).collect::<Vec<_>>());
    let (mean_sensitivity, sd_sensitivity) = opt_mean_sd(&folds.iter().map(|f| f.sensitivity).collect::<Vec<_>>());
    let (mean_specificity, sd_specificity) = opt_mean_sd(&folds.iter().map(|f| f.specificity).collect::<Vec<_>>());
    Ok(FoldReport {
        folds,
        mean_accuracy,
        sd_accuracy,
        mean_sensitivity,
        sd_sensitivity,
        mean_specificity,
        sd_specificity,
        pooled,
    })
}

/// Accuracy/ITR per window fraction, retraining a model for each truncated
/// input length and scoring it with out-of-fold predictions.
pub fn itr_curve_cv(
    epochs: &[Epoch],
    fractions: &[f64],
    window_s: f64,
    num_classes: usize,
    k: usize,
    cfg: &TrainConfig,
) -> Result<Vec<CurvePoint>> {
    itr_curve(epochs, fractions, window_s, num_classes, |_, cut| {
        cv_predictions(&Dataset::from_epochs(cut, num_classes)?, k, cfg).map(|(p, _)| p)
    })
}
