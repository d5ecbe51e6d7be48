//! Sliding-window inference over a sample stream.

use std::sync::mpsc::sync_channel;

use super::afe::AfeConfig;
use super::frame::decode_frame;
use crate::eog::StreamingEogChain;
use crate::error::{param, Result};
use crate::record::{ConfigId, MultiChannelRecord, V_C, V_L, V_R};

/// Anything that maps a channels × samples window to a class id.
pub trait Classifier {
    /// `(channels, samples)` expected by [`Classifier::classify`].
    fn input_shape(&self) -> (usize, usize);
    fn classify(&self, window: &[Vec<f64>]) -> Result<usize>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    /// Samples consumed when the prediction was made.
    pub sample_index: u64,
    pub time_s: f64,
    pub class_id: usize,
}

/// Ring buffer that signals every `hop` samples once `window` samples have
/// arrived, so a stream of `L` samples yields `floor((L-W)/h)+1` windows
/// (none if `L < W`).
#[derive(Debug, Clone)]
pub struct InferenceScheduler {
    window: usize,
    hop: usize,
    ring: Vec<Vec<f64>>,
    pos: usize,
    seen: u64,
}

impl InferenceScheduler {
    pub fn new(channels: usize, window: usize, hop: usize) -> Result<Self> {
        if channels == 0 || window == 0 || hop == 0 {
            return Err(param("scheduler needs at least one channel and non-zero window and hop"));
        }
        Ok(Self { window, hop, ring: vec![vec![0.0; window]; channels], pos: 0, seen: 0 })
    }

    /// From seconds and milliseconds at sample rate `fs`.
    pub fn with_times(channels: usize, fs: f64, window_s: f64, hop_ms: f64) -> Result<Self> {
        let window = (window_s * fs).round();
        let hop = (hop_ms * fs / 1000.0).round();
        if !(window >= 1.0 && hop >= 1.0) {
            return Err(param(format!("window {window_s} s / hop {hop_ms} ms shorter than one sample at {fs} Hz")));
        }
        Self::new(channels, window as usize, hop as usize)
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    /// Number of windows a stream of `len` samples produces.
    pub fn expected_count(len: usize, window: usize, hop: usize) -> usize {
        if len < window { 0 } else { (len - window) / hop + 1 }
    }

    /// Adds one multi-channel sample; returns true when a window is due.
    #[inline]
    pub fn push(&mut self, sample: &[f64]) -> bool {
        for (ring, &x) in self.ring.iter_mut().zip(sample) {
            ring[self.pos] = x;
        }
        self.pos = (self.pos + 1) % self.window;
        self.seen += 1;
        self.seen >= self.window as u64 && (self.seen - self.window as u64) % self.hop as u64 == 0
    }

    /// The trailing window in chronological order.
    pub fn snapshot_into(&self, out: &mut Vec<Vec<f64>>) {
        out.resize(self.ring.len(), Vec::new());
        for (dst, ring) in out.iter_mut().zip(&self.ring) {
            dst.clear();
            dst.extend_from_slice(&ring[self.pos..]);
            dst.extend_from_slice(&ring[..self.pos]);
        }
    }
}

fn check_model(model: &dyn Classifier, channels: usize, window: usize) -> Result<()> {
    if model.input_shape() != (channels, window) {
        return Err(param(format!(
            "model expects {:?} (channels, samples), scheduler provides ({channels}, {window})",
            model.input_shape()
        )));
    }
    Ok(())
}

/// Runs the scheduler over a whole record.
pub fn schedule_record(
    record: &MultiChannelRecord,
    model: &dyn Classifier,
    window_s: f64,
    hop_ms: f64,
) -> Result<Vec<Prediction>> {
    let fs = record.sample_rate();
    let mut s = InferenceScheduler::with_times(record.n_channels(), fs, window_s, hop_ms)?;
    check_model(model, record.n_channels(), s.window())?;
    let data = record.data();
    let mut sample = vec![0.0; record.n_channels()];
    let mut buf = Vec::new();
    let mut out = Vec::new();
    for i in 0..record.n_samples() {
        for (v, ch) in sample.iter_mut().zip(data) {
            *v = ch[i];
        }
        if s.push(&sample) {
            s.snapshot_into(&mut buf);
            out.push(Prediction { sample_index: s.seen(), time_s: s.seen() as f64 / fs, class_id: model.classify(&buf)? });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct PipelineReport {
    pub predictions: Vec<Prediction>,
    pub samples: u64,
    pub lost_frames: usize,
}

/// Streams encoded frames of a combined-configuration acquisition through a
/// bounded queue into the causal EOG chain and the scheduler.
///
/// A producer thread feeds `frames` into a queue of `queue_capacity`
/// entries and blocks when it is full. The consumer decodes each frame,
/// fills sequence gaps by holding the last sample (gap length taken from
/// the previous frame), derives and preprocesses the EOG pair sample by
/// sample, and classifies every due window.
pub fn run_stream_pipeline(
    frames: Vec<Vec<u8>>,
    afe: &AfeConfig,
    model: &dyn Classifier,
    window_s: f64,
    hop_ms: f64,
    queue_capacity: usize,
) -> Result<PipelineReport> {
    afe.validate()?;
    let fs = afe.sample_rate;
    let mut sched = InferenceScheduler::with_times(2, fs, window_s, hop_ms)?;
    check_model(model, 2, sched.window())?;
    let roles = ConfigId::Combined.channel_roles().unwrap_or_default();
    let idx = |n: &str| roles.iter().position(|r| *r == n).unwrap_or_default();
    let (ir, il, ic) = (idx(V_R), idx(V_L), idx(V_C));
    let lsb = afe.lsb_volts();
    let mut chain = StreamingEogChain::new(fs)?;
    let mut report = PipelineReport::default();
    let mut buf = Vec::new();
    let (tx, rx) = sync_channel::<Vec<u8>>(queue_capacity.max(1));

    std::thread::scope(|scope| -> Result<()> {
        scope.spawn(move || {
            for f in frames {
                if tx.send(f).is_err() {
                    break;
                }
            }
        });
        let mut next_seq: Option<u32> = None;
        let mut last = [0.0f64; 3];
        let mut last_len = 0usize;
        let mut step = |e: [f64; 3], report: &mut PipelineReport| -> Result<()> {
            let [h, v] = chain.push(e)?;
            report.samples += 1;
            if sched.push(&[h, v]) {
                sched.snapshot_into(&mut buf);
                report.predictions.push(Prediction {
                    sample_index: sched.seen(),
                    time_s: sched.seen() as f64 / fs,
                    class_id: model.classify(&buf)?,
                });
            }
            Ok(())
        };
        for bytes in rx {
            let f = decode_frame(&bytes)?;
            if f.meta.config != ConfigId::Combined {
                return Err(param(format!("pipeline expects combined frames, got `{}`", f.meta.config)));
            }
            if let Some(expected) = next_seq {
                if f.meta.seq < expected {
                    continue;
                }
                let missing = (f.meta.seq - expected) as usize;
                report.lost_frames += missing;
                for _ in 0..missing * last_len {
                    step(last, &mut report)?;
                }
            }
            let nch = f.n_channels();
            for s in f.samples.chunks_exact(nch) {
                last = [s[ir] as f64 * lsb, s[il] as f64 * lsb, s[ic] as f64 * lsb];
                step(last, &mut report)?;
            }
            last_len = f.n_samples();
            next_seq = Some(f.meta.seq.wrapping_add(1));
        }
        Ok(())
    })?;
    Ok(report)
}
