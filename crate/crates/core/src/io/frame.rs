//! Binary acquisition frame.
//!
//! ```text
//! offset size  field
//!  0      2    magic 0x47 0x50
//!  2      1    version (1)
//!  3      1    config (1 = eeg_only, 8 ch; 2 = combined, 7 ch)
//!  4      4    seq, u32 LE
//!  8      8    timestamp_us, u64 LE
//! 16      2    n_samples, u16 LE
//! 18      ..   n_samples × n_channels × 3 bytes, 24-bit two's complement,
//!              big-endian, all channels of sample 0 first
//! ```

use thiserror::Error;

use super::afe::{CODE_MAX, CODE_MIN};
use crate::error::{param, Result};
use crate::record::ConfigId;

pub const MAGIC: [u8; 2] = [0x47, 0x50];
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 18;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("bad magic {0:#04x} {1:#04x}")]
    BadMagic(u8, u8),
    #[error("unsupported frame version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown channel config byte {0}")]
    UnknownConfig(u8),
    #[error("truncated header: {0} of {HEADER_LEN} bytes")]
    TruncatedHeader(usize),
    #[error("truncated payload: {got} of {expected} bytes")]
    TruncatedPayload { expected: usize, got: usize },
    #[error("length mismatch: header declares {expected} payload bytes, buffer holds {got}")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameMeta {
    pub config: ConfigId,
    pub seq: u32,
    pub timestamp_us: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub meta: FrameMeta,
    /// Sample-interleaved codes: `samples[s * n_channels + c]`.
    pub samples: Vec<i32>,
}

impl Frame {
    pub fn n_channels(&self) -> usize {
        channels_for(self.meta.config).unwrap_or(0)
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len() / self.n_channels().max(1)
    }
}

pub(crate) fn config_byte(c: ConfigId) -> Option<u8> {
    match c {
        ConfigId::EegOnly => Some(1),
        ConfigId::Combined => Some(2),
        _ => None,
    }
}

fn config_from_byte(b: u8) -> Option<ConfigId> {
    match b {
        1 => Some(ConfigId::EegOnly),
        2 => Some(ConfigId::Combined),
        _ => None,
    }
}

pub(crate) fn channels_for(c: ConfigId) -> Option<usize> {
    config_byte(c).and_then(|_| c.channel_roles()).map(<[&str]>::len)
}

pub fn encode_frame(samples: &[i32], meta: FrameMeta) -> Result<Vec<u8>> {
    let nch = channels_for(meta.config)
        .ok_or_else(|| param(format!("config `{}` cannot be framed", meta.config)))?;
    if samples.len() % nch != 0 {
        return Err(param(format!("{} codes do not fill whole samples of {nch} channels", samples.len())));
    }
    let n = samples.len() / nch;
    let n16 = u16::try_from(n).map_err(|_| param(format!("{n} samples exceed one frame")))?;
    let mut out = Vec::with_capacity(HEADER_LEN + samples.len() * 3);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(config_byte(meta.config).unwrap_or_default());
    out.extend_from_slice(&meta.seq.to_le_bytes());
    out.extend_from_slice(&meta.timestamp_us.to_le_bytes());
    out.extend_from_slice(&n16.to_le_bytes());
    for &c in samples {
        if !(CODE_MIN..=CODE_MAX).contains(&c) {
            return Err(param(format!("code {c} outside the 24-bit range")));
        }
        out.extend_from_slice(&c.to_be_bytes()[1..]);
    }
    Ok(out)
}

/// Decodes one frame from the front of `bytes`, returning it and the number
/// of bytes consumed. Never reads past the declared payload.
pub fn decode_frame_prefix(bytes: &[u8]) -> std::result::Result<(Frame, usize), FrameError> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 2 && bytes[..2] != MAGIC {
            return Err(FrameError::BadMagic(bytes[0], bytes[1]));
        }
        return Err(FrameError::TruncatedHeader(bytes.len()));
    }
    if bytes[..2] != MAGIC {
        return Err(FrameError::BadMagic(bytes[0], bytes[1]));
    }
    if bytes[2] != VERSION {
        return Err(FrameError::UnsupportedVersion(bytes[2]));
    }
    let config = config_from_byte(bytes[3]).ok_or(FrameError::UnknownConfig(bytes[3]))?;
    let nch = channels_for(config).unwrap_or_default();
    let seq = u32::from_le_bytes(bytes[4..8].try_into().unwrap_or_default());
    let timestamp_us = u64::from_le_bytes(bytes[8..16].try_into().unwrap_or_default());
    let n = u16::from_le_bytes([bytes[16], bytes[17]]) as usize;
    let expected = n * nch * 3;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(FrameError::TruncatedPayload { expected, got: payload.len() });
    }
    let samples = payload[..expected]
        .chunks_exact(3)
        .map(|b| i32::from_be_bytes([b[0], b[1], b[2], 0]) >> 8)
        .collect();
    Ok((Frame { meta: FrameMeta { config, seq, timestamp_us }, samples }, HEADER_LEN + expected))
}

/// Decodes a buffer holding exactly one frame.
pub fn decode_frame(bytes: &[u8]) -> std::result::Result<Frame, FrameError> {
    let (frame, used) = decode_frame_prefix(bytes)?;
    if used != bytes.len() {
        return Err(FrameError::LengthMismatch { expected: used - HEADER_LEN, got: bytes.len() - HEADER_LEN });
    }
    Ok(frame)
}

/// Decodes back-to-back frames.
pub fn decode_stream(mut bytes: &[u8]) -> std::result::Result<Vec<Frame>, FrameError> {
    let mut out = Vec::new();
    while !bytes.is_empty() {
        let (f, used) = decode_frame_prefix(bytes)?;
        out.push(f);
        bytes = &bytes[used..];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_is_fixed() {
        let m = FrameMeta { config: ConfigId::Combined, seq: 0x0403_0201, timestamp_us: 0x0c0b_0a09_0807_0605 };
        let codes = [-1, 1, CODE_MIN, CODE_MAX, 0x12_3456, 0, 0];
        let b = encode_frame(&codes, m).unwrap();
        assert_eq!(&b[..HEADER_LEN], &[0x47, 0x50, 1, 2, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 1, 0]);
        assert_eq!(&b[HEADER_LEN..HEADER_LEN + 15], &[
            0xff, 0xff, 0xff, 0, 0, 1, 0x80, 0, 0, 0x7f, 0xff, 0xff, 0x12, 0x34, 0x56
        ]);
        assert_eq!(decode_frame(&b).unwrap().samples, codes);
    }

    #[test]
    fn decode_errors_are_distinct() {
        let m = FrameMeta { config: ConfigId::EegOnly, seq: 1, timestamp_us: 2 };
        let b = encode_frame(&[5; 16], m).unwrap();
        let mut bad = b.clone();
        bad[0] = 0;
        assert_eq!(decode_frame(&bad), Err(FrameError::BadMagic(0, 0x50)));
        let mut bad = b.clone();
        bad[2] = 9;
        assert_eq!(decode_frame(&bad), Err(FrameError::UnsupportedVersion(9)));
        assert!(decode_frame(&bad).unwrap_err().to_string().contains('9'));
        let mut bad = b.clone();
        bad[3] = 5;
        assert_eq!(decode_frame(&bad), Err(FrameError::UnknownConfig(5)));
        assert_eq!(decode_frame(&b[..b.len() - 1]), Err(FrameError::TruncatedPayload { expected: 48, got: 47 }));
        assert_eq!(decode_frame(&b[..10]), Err(FrameError::TruncatedHeader(10)));
        let mut long = b.clone();
        long.push(0);
        assert_eq!(decode_frame(&long), Err(FrameError::LengthMismatch { expected: 48, got: 49 }));
    }

    #[test]
    fn encode_rejects_bad_input() {
        let m = FrameMeta { config: ConfigId::EegOnly, seq: 0, timestamp_us: 0 };
        assert!(encode_frame(&[0; 7], m).is_err());
        assert!(encode_frame(&[CODE_MAX + 1; 8], m).is_err());
        assert!(encode_frame(&[0; 3], FrameMeta { config: ConfigId::Eog, ..m }).is_err());
    }

    #[test]
    fn stream_of_frames() {
        let frames: Vec<Vec<u8>> = (0..3)
            .map(|s| encode_frame(&[s; 14], FrameMeta { config: ConfigId::Combined, seq: s as u32, timestamp_us: 0 }).unwrap())
            .collect();
        let all = decode_stream(&frames.concat()).unwrap();
        assert_eq!(all.iter().map(|f| f.meta.seq).collect::<Vec<_>>(), [0, 1, 2]);
        assert_eq!(all[2].n_samples(), 2);
    }

    proptest! {
        #[test]
        fn round_trip(combined in any::<bool>(), seq in any::<u32>(), ts in any::<u64>(),
                      codes in prop::collection::vec(CODE_MIN..=CODE_MAX, 0..200)) {
            let config = if combined { ConfigId::Combined } else { ConfigId::EegOnly };
            let nch = channels_for(config).unwrap();
            let codes = &codes[..codes.len() / nch * nch];
            let m = FrameMeta { config, seq, timestamp_us: ts };
            let b = encode_frame(codes, m).unwrap();
            let f = decode_frame(&b).unwrap();
            prop_assert_eq!(f.meta, m);
            prop_assert_eq!(&f.samples[..], codes);
        }

        #[test]
        fn payload_flip_is_local(codes in prop::collection::vec(CODE_MIN..=CODE_MAX, 8..=64), pos in any::<prop::sample::Index>(), bit in 0u8..8) {
            let codes = &codes[..codes.len() / 8 * 8];
            let m = FrameMeta { config: ConfigId::EegOnly, seq: 3, timestamp_us: 4 };
            let mut b = encode_frame(codes, m).unwrap();
            let p = HEADER_LEN + pos.index(b.len() - HEADER_LEN);
            b[p] ^= 1 << bit;
            let f = decode_frame(&b).unwrap();
            prop_assert_eq!(f.meta, m);
            let changed: Vec<usize> = (0..codes.len()).filter(|&i| f.samples[i] != codes[i]).collect();
            prop_assert_eq!(changed.len(), 1);
            let i = changed[0];
            prop_assert_eq!(i, (p - HEADER_LEN) / 3);
            prop_assert!((f.samples[i] as i64 - codes[i] as i64).abs() <= 1 << 23);
        }

        #[test]
        fn decode_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..100)) {
            let _ = decode_stream(&bytes);
        }
    }
}
