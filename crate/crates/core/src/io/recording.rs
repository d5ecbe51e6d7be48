//! Recording and label files.
//!
//! A recording is one ASCII header line terminated by `\n`:
//!
//! ```text
//! format=ocula-rec/1 sample_rate=500 config=eog n_samples=1000 channels=V_R,V_L,V_C
//! ```
//!
//! followed by `n_samples × n_channels` little-endian `f64` values, all
//! channels of time step 0 first. Label files are text, one
//! `start_sample,class_id` row per trial, with an optional header row.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::record::{ConfigId, LabelRow, MultiChannelRecord};

pub const FORMAT_TAG: &str = "ocula-rec/1";

pub fn write_recording(path: impl AsRef<Path>, record: &MultiChannelRecord) -> Result<()> {
    let mut buf = Vec::with_capacity(128 + record.n_channels() * record.n_samples() * 8);
    writeln!(
        buf,
        "format={FORMAT_TAG} sample_rate={} config={} n_samples={} channels={}",
        record.sample_rate(),
        record.config_id(),
        record.n_samples(),
        record.channel_names().join(",")
    )?;
    let data = record.data();
    for i in 0..record.n_samples() {
        for ch in data {
            buf.extend_from_slice(&ch[i].to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

fn parse_err(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse { location: location.into(), message: message.into() }
}

pub fn read_recording(path: impl AsRef<Path>) -> Result<MultiChannelRecord> {
    let bytes = fs::read(path)?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| parse_err("line 1", "missing header line"))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|e| parse_err(format!("line 1, byte {}", e.valid_up_to()), "header is not UTF-8"))?;

    let mut fields = std::collections::HashMap::new();
    let mut offset = 0;
    for tok in header.split(' ') {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| parse_err(format!("line 1, byte {offset}"), format!("expected key=value, found `{tok}`")))?;
        fields.insert(k, (v, offset));
        offset += tok.len() + 1;
    }
    let get = |k: &str| fields.get(k).copied().ok_or_else(|| parse_err("line 1", format!("missing `{k}` field")));
    let at = |o: usize| format!("line 1, byte {o}");

    let (tag, o) = get("format")?;
    if tag != FORMAT_TAG {
        return Err(parse_err(at(o), format!("unsupported format `{tag}`")));
    }
    let (fs_s, o) = get("sample_rate")?;
    let fs: f64 = fs_s.parse().map_err(|_| parse_err(at(o), format!("bad sample rate `{fs_s}`")))?;
    let (cfg_s, o) = get("config")?;
    let config: ConfigId = cfg_s.parse().map_err(|_| parse_err(at(o), format!("unknown config id `{cfg_s}`")))?;
    let (n_s, o) = get("n_samples")?;
    let n: usize = n_s.parse().map_err(|_| parse_err(at(o), format!("bad sample count `{n_s}`")))?;
    let (ch_s, _) = get("channels")?;
    let names: Vec<String> = ch_s.split(',').filter(|s| !s.is_empty()).map(str::to_string).collect();

    let body = &bytes[nl + 1..];
    let expected = n.checked_mul(names.len()).and_then(|v| v.checked_mul(8));
    if expected != Some(body.len()) {
        return Err(parse_err(
            format!("byte {}", nl + 1),
            format!("payload holds {} bytes, header implies {n} samples × {} channels", body.len(), names.len()),
        ));
    }
    let mut data = vec![Vec::with_capacity(n); names.len()];
    for (k, chunk) in body.chunks_exact(8).enumerate() {
        data[k % names.len()].push(f64::from_le_bytes(chunk.try_into().unwrap_or_default()));
    }
    MultiChannelRecord::new(fs, names, data, config)
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[LabelRow]) -> Result<()> {
    let mut s = String::from("start_sample,class_id\n");
    for l in labels {
        s.push_str(&format!("{},{}\n", l.start_sample, l.class_id));
    }
    fs::write(path, s)?;
    Ok(())
}

/// Reads a label file; with `n_samples`, rows starting at or beyond the
/// record end are a validation error.
pub fn read_labels(path: impl AsRef<Path>, n_samples: Option<usize>) -> Result<Vec<LabelRow>> {
    let f = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in f.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("start_sample")) {
            continue;
        }
        let loc = format!("line {}", i + 1);
        let (a, b) = line.split_once(',').ok_or_else(|| parse_err(&loc, "expected `start_sample,class_id`"))?;
        let start_sample = a.trim().parse().map_err(|_| parse_err(&loc, format!("bad start sample `{a}`")))?;
        let class_id = b.trim().parse().map_err(|_| parse_err(&loc, format!("bad class id `{b}`")))?;
        if let Some(n) = n_samples {
            if start_sample >= n {
                return Err(Error::Validation(format!("{loc}: label starts at {start_sample}, record has {n} samples")));
            }
        }
        out.push(LabelRow { start_sample, class_id });
    }
    Ok(out)
}
