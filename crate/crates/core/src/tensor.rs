//! The S2T tensor file format.
//!
//! ```text
//! offset  size        field
//! 0       4           magic "S2T1" (53 32 54 31)
//! 4       1           dtype: 1 = f32, 2 = i32
//! 5       1           ndim
//! 6       8 * ndim    dims, u64 little-endian
//! ...                 row-major payload, little-endian
//! ```
//!
//! Arrays that carry physical meaning get a JSON sidecar next to them
//! (`name.s2t` + `name.json`).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"S2T1";
pub const DTYPE_F32: u8 = 1;
pub const DTYPE_I32: u8 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    I32(Vec<i32>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::I32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn dtype(&self) -> u8 {
        match self {
            TensorData::F32(_) => DTYPE_F32,
            TensorData::I32(_) => DTYPE_I32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<u64>,
    pub data: TensorData,
}

impl Tensor {
    pub fn new(dims: Vec<u64>, data: TensorData) -> Result<Self> {
        let expected: u64 = dims.iter().product();
        if dims.len() > u8::MAX as usize {
            return Err(Error::shape("tensor has more than 255 dimensions"));
        }
        if expected != data.len() as u64 {
            return Err(Error::shape(format!(
                "tensor dims {dims:?} need {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn from_f64(dims: Vec<u64>, values: &[f64]) -> Result<Self> {
        Self::new(dims, TensorData::F32(values.iter().map(|&v| v as f32).collect()))
    }

    /// Values widened to f64 (i32 payloads convert exactly).
    pub fn to_f64(&self) -> Vec<f64> {
        match &self.data {
            TensorData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::I32(v) => v.iter().map(|&x| x as f64).collect(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(6 + 8 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(&MAGIC);
        out.push(self.data.dtype());
        out.push(self.dims.len() as u8);
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        match &self.data {
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::I32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        out
    }

    /// Parses `bytes`; `path` only labels errors.
    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::format(path, reason);
        if bytes.len() < 6 {
            return Err(bad(format!("{} bytes is shorter than the S2T header", bytes.len())));
        }
        if bytes[..4] != MAGIC {
            return Err(bad(format!("bad magic {:02x?}", &bytes[..4])));
        }
        let dtype = bytes[4];
        let ndim = bytes[5] as usize;
        let header = 6 + 8 * ndim;
        if bytes.len() < header {
            return Err(bad("truncated dimension list".into()));
        }
        let dims: Vec<u64> = bytes[6..header]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let count = dims
            .iter()
            .try_fold(1u64, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| bad("dimension product overflows".into()))?;
        let payload = &bytes[header..];
        if payload.len() as u64 != count.saturating_mul(4) {
            return Err(bad(format!(
                "payload is {} bytes, dims {dims:?} need {}",
                payload.len(),
                count.saturating_mul(4)
            )));
        }
        let words = payload.chunks_exact(4).map(|c| <[u8; 4]>::try_from(c).expect("4-byte chunk"));
        let data = match dtype {
            DTYPE_F32 => TensorData::F32(words.map(f32::from_le_bytes).collect()),
            DTYPE_I32 => TensorData::I32(words.map(i32::from_le_bytes).collect()),
            other => return Err(bad(format!("unknown dtype code {other}"))),
        };
        Ok(Self { dims, data })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.encode())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes, path)
    }
}

/// Writes through a temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn sidecar_path(tensor_path: &Path) -> PathBuf {
    tensor_path.with_extension("json")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

/// Writes a tensor and its sidecar.
pub fn write_with_sidecar<T: Serialize>(path: &Path, tensor: &Tensor, meta: &T) -> Result<()> {
    tensor.write(path)?;
    write_json(&sidecar_path(path), meta)
}
