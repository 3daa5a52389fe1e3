//! FLAT adapter container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! offset 0   8 bytes   magic "FLATv001"
//! offset 8   8 bytes   u64 header length H
//! offset 16  H bytes   UTF-8 JSON header
//! offset 16+H          payload
//! ```
//!
//! The header is `{"metadata":{..},"tensors":[{"name","dtype","shape","offset","length"}]}`
//! with tensors in name order and offsets relative to the payload start.
//! Payloads are contiguous with no padding. `f32` tensors hold 4 bytes per
//! element; `u4` tensors hold two elements per byte, low nibble first, so an
//! odd element count leaves the high nibble of the last byte unused.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"FLATv001";

#[derive(Debug, Error)]
pub enum FlatError {
    #[error("not a FLAT container (bad magic)")]
    BadMagic,
    #[error("header mismatch: {0}")]
    HeaderMismatch(String),
    #[error("truncated payload: need {need} bytes, have {have}")]
    TruncatedPayload { need: u64, have: u64 },
    #[error("tensor {name}: {reason}")]
    InvalidTensor { name: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    U4,
}

impl Dtype {
    /// Bytes needed for `n` elements.
    pub fn byte_len(self, n: usize) -> usize {
        match self {
            Dtype::F32 => n * 4,
            Dtype::U4 => n.div_ceil(2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tensor {
    shape: Vec<usize>,
    dtype: Dtype,
    data: Vec<u8>,
}

fn element_count(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    pub fn from_bytes(shape: Vec<usize>, dtype: Dtype, data: Vec<u8>) -> Result<Self, String> {
        let need = dtype.byte_len(element_count(&shape));
        if data.len() != need {
            return Err(format!("{dtype:?} {shape:?} needs {need} bytes, got {}", data.len()));
        }
        Ok(Self { shape, dtype, data })
    }

    pub fn from_f32(shape: Vec<usize>, values: &[f32]) -> Result<Self, String> {
        let data = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        Self::from_bytes(shape, Dtype::F32, data)
    }

    /// Pack 4-bit values, which must each be below 16.
    pub fn from_u4(shape: Vec<usize>, values: &[u8]) -> Result<Self, String> {
        if let Some(v) = values.iter().find(|v| **v > 15) {
            return Err(format!("4-bit value out of range: {v}"));
        }
        let data = values
            .chunks(2)
            .map(|c| c[0] | c.get(1).map_or(0, |hi| hi << 4))
            .collect();
        Self::from_bytes(shape, Dtype::U4, data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dtype(&self) -> Dtype {
        self.dtype
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn len(&self) -> usize {
        element_count(&self.shape)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Decoded values. Panics on a non-f32 tensor.
    pub fn to_f32(&self) -> Vec<f32> {
        assert_eq!(self.dtype, Dtype::F32, "to_f32 on a {:?} tensor", self.dtype);
        self.data
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect()
    }

    /// Decoded 4-bit values. Panics on a non-u4 tensor.
    pub fn to_u4(&self) -> Vec<u8> {
        assert_eq!(self.dtype, Dtype::U4, "to_u4 on a {:?} tensor", self.dtype);
        (0..self.len())
            .map(|i| {
                let b = self.data[i / 2];
                if i % 2 == 0 {
                    b & 0x0f
                } else {
                    b >> 4
                }
            })
            .collect()
    }

    pub(crate) fn set_f32(&mut self, values: &[f32]) {
        assert_eq!(self.dtype, Dtype::F32);
        assert_eq!(values.len(), self.len());
        for (chunk, v) in self.data.chunks_exact_mut(4).zip(values) {
            chunk.copy_from_slice(&v.to_le_bytes());
        }
    }
}

/// Named tensors plus free-form string metadata.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AdapterTensors {
    pub metadata: BTreeMap<String, String>,
    entries: BTreeMap<String, Tensor>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    metadata: BTreeMap<String, String>,
    tensors: Vec<HeaderEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderEntry {
    name: String,
    dtype: Dtype,
    shape: Vec<usize>,
    offset: u64,
    length: u64,
}

impl AdapterTensors {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Option<Tensor> {
        self.entries.insert(name.into(), tensor)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.get(name)
    }

    pub(crate) fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries.get_mut(name)
    }

    /// Entries in name order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total element count across tensors.
    pub fn param_count(&self) -> usize {
        self.entries.values().map(Tensor::len).sum()
    }

    /// Total payload bytes.
    pub fn payload_bytes(&self) -> usize {
        self.entries.values().map(|t| t.data.len()).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut offset = 0u64;
        let tensors = self
            .entries
            .iter()
            .map(|(name, t)| {
                let e = HeaderEntry {
                    name: name.clone(),
                    dtype: t.dtype,
                    shape: t.shape.clone(),
                    offset,
                    length: t.data.len() as u64,
                };
                offset += e.length;
                e
            })
            .collect();
        let header = serde_json::to_vec(&Header {
            metadata: self.metadata.clone(),
            tensors,
        })
        .expect("header always serialises");
        let mut out = Vec::with_capacity(16 + header.len() + offset as usize);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for t in self.entries.values() {
            out.extend_from_slice(&t.data);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FlatError> {
        if bytes.len() < 8 || &bytes[..8] != MAGIC {
            return Err(FlatError::BadMagic);
        }
        let have = bytes.len() as u64;
        if bytes.len() < 16 {
            return Err(FlatError::TruncatedPayload { need: 16, have });
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
        let payload_start = 16u64
            .checked_add(header_len)
            .ok_or_else(|| FlatError::HeaderMismatch("header length overflows".into()))?;
        if payload_start > have {
            return Err(FlatError::TruncatedPayload { need: payload_start, have });
        }
        let header: Header = serde_json::from_slice(&bytes[16..payload_start as usize])
            .map_err(|e| FlatError::HeaderMismatch(e.to_string()))?;
        let payload = &bytes[payload_start as usize..];

        let mut out = AdapterTensors {
            metadata: header.metadata,
            entries: BTreeMap::new(),
        };
        let mut expected_offset = 0u64;
        let mut previous: Option<&str> = None;
        for e in &header.tensors {
            if previous.is_some_and(|p| p >= e.name.as_str()) {
                return Err(FlatError::HeaderMismatch(format!("tensor {} out of name order", e.name)));
            }
            previous = Some(&e.name);
            if e.offset != expected_offset {
                return Err(FlatError::HeaderMismatch(format!(
                    "tensor {} at offset {}, expected {expected_offset}",
                    e.name, e.offset
                )));
            }
            let need_len = e.dtype.byte_len(element_count(&e.shape)) as u64;
            if e.length != need_len {
                return Err(FlatError::HeaderMismatch(format!(
                    "tensor {} declares {} bytes, shape needs {need_len}",
                    e.name, e.length
                )));
            }
            let end = e.offset + e.length;
            if end > payload.len() as u64 {
                return Err(FlatError::TruncatedPayload {
                    need: payload_start + end,
                    have,
                });
            }
            let data = payload[e.offset as usize..end as usize].to_vec();
            out.entries.insert(
                e.name.clone(),
                Tensor {
                    shape: e.shape.clone(),
                    dtype: e.dtype,
                    data,
                },
            );
            expected_offset = end;
        }
        if expected_offset != payload.len() as u64 {
            return Err(FlatError::HeaderMismatch(format!(
                "{} trailing payload bytes",
                payload.len() as u64 - expected_offset
            )));
        }
        Ok(out)
    }

    /// Structural equality of names, shapes and dtypes.
    pub fn same_layout(&self, other: &Self) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((na, a), (nb, b))| na == nb && a.shape == b.shape && a.dtype == b.dtype)
    }
}

/// Readers never see a partial file: a temporary sibling is renamed into place.
pub fn save_adapter(adapter: &AdapterTensors, path: &Path) -> Result<(), FlatError> {
    write_atomic(path, &adapter.to_bytes())?;
    Ok(())
}

pub fn load_adapter(path: &Path) -> Result<AdapterTensors, FlatError> {
    AdapterTensors::from_bytes(&fs::read(path)?)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "path has no file name"))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
    }
    fs::rename(&tmp, path)
}
