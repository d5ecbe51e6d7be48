//! Parameter container shared by float and INT8 models.
//!
//! ```text
//! "EPDN"            4 bytes magic
//! manifest_len      u32 LE
//! manifest          UTF-8 JSON, manifest_len bytes
//! tensors           concatenated in manifest order, little-endian,
//!                   each as its entry's dtype (f32, i8 or i32)
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ConvParams, ConvShape, EpiDeNetParams, CONVS, FEATURES};
use crate::error::{Error, Result};
use crate::quant::{QConv, QParams, QuantizedModel};

const MAGIC: &[u8; 4] = b"EPDN";
pub const FORMAT: &str = "epidenet/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    /// `real = scale · (code − zero_point)`; quantized tensors only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_point: Option<i32>,
}

/// Activation quantization, one entry per quantized activation tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationEntry {
    pub name: String,
    pub scale: f64,
    pub zero_point: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub channels: usize,
    pub samples: usize,
    pub pool_d: usize,
    pub num_classes: usize,
    pub seed: u64,
    pub input_scale: f64,
    pub quantized: bool,
    pub tensors: Vec<TensorEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub activations: Vec<ActivationEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelFile {
    Float(EpiDeNetParams),
    Quantized(QuantizedModel),
}

fn entry(name: String, shape: Vec<usize>, dtype: &str, q: Option<(f64, i32)>) -> TensorEntry {
    TensorEntry { name, shape, dtype: dtype.into(), scale: q.map(|q| q.0), zero_point: q.map(|q| q.1) }
}

fn conv_dims(s: &ConvShape) -> Vec<usize> {
    vec![s.out_ch, s.in_ch, s.kh, s.kw]
}

impl ModelFile {
    pub fn manifest(&self) -> Manifest {
        match self {
            ModelFile::Float(p) => Manifest {
                format: FORMAT.into(),
                channels: p.channels,
                samples: p.samples,
                pool_d: p.pool_d,
                num_classes: p.num_classes,
                seed: p.seed,
                input_scale: p.input_scale,
                quantized: false,
                tensors: p.tensor_layout().into_iter().map(|(n, s)| entry(n, s, "f32", None)).collect(),
                activations: Vec::new(),
            },
            ModelFile::Quantized(q) => {
                let mut tensors = Vec::new();
                let mut activations = vec![ActivationEntry { name: "input".into(), scale: q.input.scale, zero_point: q.input.zero_point }];
                let mut in_scale = q.input.scale;
                for (l, c) in q.convs.iter().enumerate() {
                    let n = l + 1;
                    tensors.push(entry(format!("conv{n}.weight"), conv_dims(&c.shape), "i8", Some((c.weight_scale, 0))));
                    tensors.push(entry(format!("conv{n}.bias"), vec![c.shape.out_ch], "i32", Some((in_scale * c.weight_scale, 0))));
                    activations.push(ActivationEntry { name: format!("conv{n}"), scale: c.output.scale, zero_point: c.output.zero_point });
                    in_scale = c.output.scale;
                }
                activations.push(ActivationEntry { name: "gap".into(), scale: q.gap.scale, zero_point: q.gap.zero_point });
                tensors.push(entry("dense.weight".into(), vec![q.num_classes, FEATURES], "i8", Some((q.dense_weight_scale, 0))));
                tensors.push(entry("dense.bias".into(), vec![q.num_classes], "i32", Some((q.gap.scale * q.dense_weight_scale, 0))));
                Manifest {
                    format: FORMAT.into(),
                    channels: q.channels,
                    samples: q.samples,
                    pool_d: q.pool_d,
                    num_classes: q.num_classes,
                    seed: q.seed,
                    input_scale: q.input_scale,
                    quantized: true,
                    tensors,
                    activations,
                }
            }
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let json = serde_json::to_vec(&self.manifest()).map_err(|e| Error::Internal(e.to_string()))?;
        let mut out = Vec::with_capacity(8 + json.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        match self {
            ModelFile::Float(p) => {
                for t in p.tensors() {
                    for v in t {
                        out.extend_from_slice(&(*v as f32).to_le_bytes());
                    }
                }
            }
            ModelFile::Quantized(q) => {
                for c in &q.convs {
                    out.extend(c.weight.iter().map(|v| *v as u8));
                    c.bias.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
                }
                out.extend(q.dense_weight.iter().map(|v| *v as u8));
                q.dense_bias.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |at: usize, m: &str| Error::Parse { location: format!("byte {at}"), message: m.to_string() };
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(bad(0, "missing EPDN magic"));
        }
        let len = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let json = bytes.get(8..8 + len).ok_or_else(|| bad(8, "manifest runs past end of file"))?;
        let m: Manifest = serde_json::from_slice(json).map_err(|e| bad(8 + e.column(), &format!("manifest: {e}")))?;
        if m.format != FORMAT {
            return Err(bad(8, &format!("unsupported format {:?}", m.format)));
        }
        let expected = if m.quantized { ModelFile::Quantized(skeleton_q(&m)?) } else { ModelFile::Float(skeleton(&m)?) };
        let want = expected.manifest();
        if want.tensors.len() != m.tensors.len()
            || want.tensors.iter().zip(&m.tensors).any(|(a, b)| a.name != b.name || a.shape != b.shape || a.dtype != b.dtype)
        {
            return Err(bad(8, "tensor list does not match the declared architecture"));
        }
        let mut r = Reader { buf: bytes, pos: 8 + len };
        let model = match expected {
            ModelFile::Float(mut p) => {
                for t in p.tensors_mut() {
                    for v in t.iter_mut() {
                        *v = f32::from_le_bytes(r.take::<4>()?) as f64;
                    }
                }
                ModelFile::Float(p)
            }
            ModelFile::Quantized(mut q) => {
                for c in &mut q.convs {
                    for v in c.weight.iter_mut() {
                        *v = r.take::<1>()?[0] as i8;
                    }
                    for v in c.bias.iter_mut() {
                        *v = i32::from_le_bytes(r.take::<4>()?);
                    }
                }
                for v in q.dense_weight.iter_mut() {
                    *v = r.take::<1>()?[0] as i8;
                }
                for v in q.dense_bias.iter_mut() {
                    *v = i32::from_le_bytes(r.take::<4>()?);
                }
                ModelFile::Quantized(q)
            }
        };
        if r.pos != bytes.len() {
            return Err(bad(r.pos, "trailing bytes after the last tensor"));
        }
        Ok(model)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let s = self.buf.get(self.pos..self.pos + N).ok_or_else(|| Error::Parse {
            location: format!("byte {}", self.pos),
            message: "tensor data truncated".into(),
        })?;
        self.pos += N;
        Ok(s.try_into().expect("exact slice"))
    }
}

fn skeleton(m: &Manifest) -> Result<EpiDeNetParams> {
    let mut p = super::build_epidenet(m.channels, m.samples, m.pool_d, m.num_classes, m.seed)?;
    p.input_scale = m.input_scale;
    Ok(p)
}

fn skeleton_q(m: &Manifest) -> Result<QuantizedModel> {
    let p = skeleton(m)?;
    let act = |name: &str| -> Result<QParams> {
        m.activations
            .iter()
            .find(|a| a.name == name)
            .map(|a| QParams { scale: a.scale, zero_point: a.zero_point })
            .ok_or_else(|| Error::Parse { location: "manifest".into(), message: format!("no activation entry {name:?}") })
    };
    let scale_of = |name: &str| m.tensors.iter().find(|t| t.name == name).and_then(|t| t.scale).unwrap_or(1.0);
    let convs = p
        .convs
        .iter()
        .enumerate()
        .map(|(l, c): (usize, &ConvParams)| {
            Ok(QConv {
                shape: c.shape,
                weight: vec![0; c.weight.len()],
                weight_scale: scale_of(&format!("conv{}.weight", l + 1)),
                bias: vec![0; c.bias.len()],
                output: act(&format!("conv{}", l + 1))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    debug_assert_eq!(convs.len(), CONVS.len());
    Ok(QuantizedModel {
        channels: m.channels,
        samples: m.samples,
        pool_d: m.pool_d,
        num_classes: m.num_classes,
        input_scale: m.input_scale,
        seed: m.seed,
        input: act("input")?,
        convs,
        gap: act("gap")?,
        dense_weight: vec![0; m.num_classes * FEATURES],
        dense_weight_scale: scale_of("dense.weight"),
        dense_bias: vec![0; m.num_classes],
    })
}

pub fn write_model(path: impl AsRef<Path>, model: &ModelFile) -> Result<()> {
    std::fs::write(path, model.to_bytes()?)?;
    Ok(())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    ModelFile::from_bytes(&std::fs::read(path)?)
}
