//! Lossy acquisition stream simulation and reassembly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::afe::AfeConfig;
use super::frame::{channels_for, encode_frame, Frame, FrameMeta};
use crate::error::{param, Result};
use crate::record::MultiChannelRecord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamConfig {
    /// Samples per frame.
    pub frame_len: usize,
    /// Independent per-frame drop probability.
    pub loss_rate: f64,
    /// Timestamps are delayed by up to this much, uniformly.
    pub jitter_ms: f64,
    pub seed: u64,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self { frame_len: 25, loss_rate: 0.0, jitter_ms: 0.0, seed: 0 }
    }
}

/// Frames that survived the simulated link, in send order.
#[derive(Debug, Clone)]
pub struct StreamSim {
    pub frames: Vec<Vec<u8>>,
    pub dropped_seqs: Vec<u32>,
    pub total_frames: usize,
    pub total_samples: usize,
}

/// Converts `record` to codes and cuts it into frames with consecutive
/// sequence numbers starting at 0, dropping some of them.
pub fn stream_sim(record: &MultiChannelRecord, afe: &AfeConfig, cfg: &StreamConfig) -> Result<StreamSim> {
    afe.validate()?;
    let nch = channels_for(record.config_id())
        .ok_or_else(|| param(format!("config `{}` cannot be streamed", record.config_id())))?;
    if nch != record.n_channels() {
        return Err(param(format!("config `{}` needs {nch} channels, record has {}", record.config_id(), record.n_channels())));
    }
    if record.sample_rate() != afe.sample_rate {
        return Err(param(format!("record at {} Hz, AFE at {} Hz", record.sample_rate(), afe.sample_rate)));
    }
    if cfg.frame_len == 0 || cfg.frame_len > u16::MAX as usize {
        return Err(param(format!("frame length must be in 1..=65535, got {}", cfg.frame_len)));
    }
    if !(0.0..=1.0).contains(&cfg.loss_rate) {
        return Err(param(format!("loss rate must be in [0, 1], got {}", cfg.loss_rate)));
    }
    if !(cfg.jitter_ms >= 0.0 && cfg.jitter_ms.is_finite()) {
        return Err(param("jitter must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = record.n_samples();
    let data = record.data();
    let mut frames = Vec::new();
    let mut dropped_seqs = Vec::new();
    let mut codes = Vec::with_capacity(cfg.frame_len * nch);
    let total_frames = n.div_ceil(cfg.frame_len);
    for (k, start) in (0..n).step_by(cfg.frame_len).enumerate() {
        let seq = u32::try_from(k).map_err(|_| param("stream exceeds 2^32 frames"))?;
        let drop = rng.random_bool(cfg.loss_rate);
        let jitter_us = (rng.random::<f64>() * cfg.jitter_ms * 1000.0).round() as u64;
        if drop {
            dropped_seqs.push(seq);
            continue;
        }
        codes.clear();
        for i in start..(start + cfg.frame_len).min(n) {
            for ch in data {
                codes.push(afe.volts_to_raw(ch[i])?);
            }
        }
        let timestamp_us = (start as f64 * 1e6 / afe.sample_rate).round() as u64 + jitter_us;
        frames.push(encode_frame(&codes, FrameMeta { config: record.config_id(), seq, timestamp_us })?);
    }
    Ok(StreamSim { frames, dropped_seqs, total_frames, total_samples: n })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gap {
    pub first_seq: u32,
    pub frames: usize,
    pub start_sample: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GapReport {
    pub received_frames: usize,
    pub lost_frames: usize,
    pub lost_samples: usize,
    pub gaps: Vec<Gap>,
}

/// Rebuilds a record from received frames (any order; duplicates ignored).
///
/// Lost spans, detected from sequence gaps, hold the last received value of
/// each channel (zero before the first received sample). Losses after the
/// last received frame are only visible when `expected_samples` is given.
/// Every frame except the last is assumed full.
pub fn reassemble(
    frames: &[Frame],
    afe: &AfeConfig,
    expected_samples: Option<usize>,
) -> Result<(MultiChannelRecord, GapReport)> {
    let first = frames.first().ok_or_else(|| param("no frames to reassemble"))?;
    let config = first.meta.config;
    let nch = channels_for(config).ok_or_else(|| param("frame config cannot be reassembled"))?;
    if frames.iter().any(|f| f.meta.config != config) {
        return Err(param("frames mix channel configurations"));
    }
    let mut order: Vec<&Frame> = frames.iter().collect();
    order.sort_by_key(|f| f.meta.seq);
    order.dedup_by_key(|f| f.meta.seq);
    let frame_len = order.iter().map(|f| f.n_samples()).max().unwrap_or(0).max(1);

    let mut rows: Vec<Vec<f64>> = vec![Vec::new(); nch];
    let mut last = vec![0i32; nch];
    let mut report = GapReport { received_frames: order.len(), ..Default::default() };
    let mut fill = |rows: &mut Vec<Vec<f64>>, last: &[i32], first_seq: u32, samples: usize, frames: usize| -> Result<()> {
        if samples == 0 {
            return Ok(());
        }
        report.gaps.push(Gap { first_seq, frames, start_sample: rows[0].len(), samples });
        report.lost_frames += frames;
        report.lost_samples += samples;
        for (row, &c) in rows.iter_mut().zip(last) {
            let v = afe.raw_to_volts(c)?;
            row.extend(std::iter::repeat_n(v, samples));
        }
        Ok(())
    };
    let mut next_seq = 0u32;
    for f in &order {
        let missing = (f.meta.seq - next_seq) as usize;
        fill(&mut rows, &last, next_seq, missing * frame_len, missing)?;
        for s in f.samples.chunks_exact(nch) {
            for (c, (&code, row)) in s.iter().zip(rows.iter_mut()).enumerate() {
                row.push(afe.raw_to_volts(code)?);
                last[c] = code;
            }
        }
        next_seq = f.meta.seq.wrapping_add(1);
    }
    if let Some(total) = expected_samples {
        let have = rows[0].len();
        if total > have {
            let missing = total - have;
            fill(&mut rows, &last, next_seq, missing, missing.div_ceil(frame_len))?;
        }
    }
    let names = config.channel_roles().unwrap_or_default().iter().map(|s| s.to_string()).collect();
    let record = MultiChannelRecord::new(afe.sample_rate, names, rows, config)?;
    Ok((record, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::frame::decode_frame;
    use crate::record::ConfigId;

    fn record(n: usize) -> MultiChannelRecord {
        let data = (0..7).map(|c| (0..n).map(|i| 1e-4 * ((i * (c + 1)) as f64 * 0.01).sin()).collect()).collect();
        MultiChannelRecord::with_config(500.0, ConfigId::Combined, data).unwrap()
    }

    fn decode(s: &StreamSim) -> Vec<Frame> {
        s.frames.iter().map(|b| decode_frame(b).unwrap()).collect()
    }

    #[test]
    fn lossless_round_trip_within_one_lsb() {
        let afe = AfeConfig::default();
        let r = record(1000);
        let s = stream_sim(&r, &afe, &StreamConfig { frame_len: 30, ..Default::default() }).unwrap();
        assert_eq!(s.total_frames, 34);
        let (back, rep) = reassemble(&decode(&s), &afe, Some(1000)).unwrap();
        assert_eq!(rep.lost_frames, 0);
        assert_eq!(back.channel_names(), r.channel_names());
        for (a, b) in back.data().iter().flatten().zip(r.data().iter().flatten()) {
            assert!((a - b).abs() <= afe.lsb_volts() / 2.0 + 1e-18);
        }
    }

    #[test]
    fn reported_losses_match_drops() {
        let afe = AfeConfig::default();
        let r = record(100_000);
        let s = stream_sim(&r, &afe, &StreamConfig { frame_len: 10, loss_rate: 0.1, jitter_ms: 3.0, seed: 11 }).unwrap();
        assert_eq!(s.total_frames, 10_000);
        assert!(!s.dropped_seqs.is_empty());
        let (back, rep) = reassemble(&decode(&s), &afe, Some(100_000)).unwrap();
        assert_eq!(rep.lost_frames, s.dropped_seqs.len());
        assert_eq!(back.n_samples(), 100_000);
        let lost: Vec<u32> = rep.gaps.iter().flat_map(|g| g.first_seq..g.first_seq + g.frames as u32).collect();
        assert_eq!(lost, s.dropped_seqs);
        // hold-last-value inside a gap
        let g = rep.gaps.iter().find(|g| g.start_sample > 0).unwrap();
        let ch = back.channel(0);
        assert!(ch[g.start_sample..g.start_sample + g.samples].iter().all(|&v| v == ch[g.start_sample - 1]));
    }

    #[test]
    fn oversized_frame_gives_one_short_frame() {
        let afe = AfeConfig::default();
        let s = stream_sim(&record(40), &afe, &StreamConfig { frame_len: 100, ..Default::default() }).unwrap();
        assert_eq!(s.frames.len(), 1);
        assert_eq!(decode(&s)[0].n_samples(), 40);
    }

    #[test]
    fn rejects_unframeable_records() {
        let afe = AfeConfig::default();
        let r = MultiChannelRecord::with_config(500.0, ConfigId::Eog, vec![vec![0.0; 10]; 3]).unwrap();
        assert!(stream_sim(&r, &afe, &StreamConfig::default()).is_err());
        assert!(reassemble(&[], &afe, None).is_err());
    }
}
