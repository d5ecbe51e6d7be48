//! Moving-average removal.

use crate::error::{param, Result};
use crate::record::MultiChannelRecord;

/// Streaming causal moving-average remover.
///
/// `output[n] = x[n] - mean(x[max(0, n-W+1) ..= n])`; during warm-up the
/// mean runs over the samples seen so far. Sums are kept relative to the
/// first sample of each channel so constant inputs cancel exactly.
#[derive(Debug, Clone)]
pub struct CausalDetrender {
    window: usize,
    channels: Vec<RunningMean>,
}

#[derive(Debug, Clone)]
struct RunningMean {
    reference: Option<f64>,
    ring: Vec<f64>,
    pos: usize,
    filled: usize,
    sum: f64,
}

impl RunningMean {
    fn new(window: usize) -> Self {
        Self { reference: None, ring: vec![0.0; window], pos: 0, filled: 0, sum: 0.0 }
    }

    #[inline]
    fn push(&mut self, x: f64) -> f64 {
        let r = *self.reference.get_or_insert(x);
        let d = x - r;
        if self.filled == self.ring.len() {
            self.sum -= self.ring[self.pos];
        } else {
            self.filled += 1;
        }
        self.ring[self.pos] = d;
        self.sum += d;
        self.pos += 1;
        if self.pos == self.ring.len() {
            self.pos = 0;
        }
        d - self.sum / self.filled as f64
    }
}

impl CausalDetrender {
    pub fn new(window: usize, channels: usize) -> Result<Self> {
        if window == 0 {
            return Err(param("moving-average window must hold at least one sample"));
        }
        Ok(Self { window, channels: vec![RunningMean::new(window); channels] })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    #[inline]
    pub fn push(&mut self, channel: usize, x: f64) -> f64 {
        self.channels[channel].push(x)
    }

    pub fn process_block(&mut self, channel: usize, block: &mut [f64]) {
        let st = &mut self.channels[channel];
        for v in block {
            *v = st.push(*v);
        }
    }
}

pub(crate) fn window_samples(window_s: f64, fs: f64) -> Result<usize> {
    if !(window_s.is_finite() && window_s > 0.0) {
        return Err(param(format!("moving-average window must be positive, got {window_s} s")));
    }
    let w = (window_s * fs).round();
    if w < 1.0 {
        return Err(param(format!("window of {window_s} s is shorter than one sample at {fs} Hz")));
    }
    Ok(w as usize)
}

/// Subtracts a moving average of length `round(window_s·fs)` from every channel.
///
/// Causal mode averages the trailing window; otherwise the window is centred
/// (`(W-1)/2` samples back, the rest ahead). Windows are truncated at the
/// record edges.
pub fn moving_average_detrend(record: &MultiChannelRecord, window_s: f64, causal: bool) -> Result<MultiChannelRecord> {
    let w = window_samples(window_s, record.sample_rate())?;
    let mut out = record.data().to_vec();
    if causal {
        let mut d = CausalDetrender::new(w, out.len())?;
        for (ch, row) in out.iter_mut().enumerate() {
            d.process_block(ch, row);
        }
    } else {
        let back = (w - 1) / 2;
        let ahead = w - 1 - back;
        for row in out.iter_mut() {
            let Some(&r) = row.first() else { continue };
            let n = row.len();
            let mut prefix = Vec::with_capacity(n + 1);
            prefix.push(0.0);
            let mut acc = 0.0;
            for &x in row.iter() {
                acc += x - r;
                prefix.push(acc);
            }
            for (i, v) in row.iter_mut().enumerate() {
                let lo = i.saturating_sub(back);
                let hi = (i + ahead + 1).min(n);
                let mean = (prefix[hi] - prefix[lo]) / (hi - lo) as f64;
                *v = (*v - r) - mean;
            }
        }
    }
    record.with_data(out)
}
