//! Self-describing tensor container: an 8-byte little-endian header length,
//! a JSON header `{"dims": [...], "dtype": "...", "axes": "..."}` and the
//! raw little-endian payload.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    U8(Vec<u8>),
    U16(Vec<u16>),
    U32(Vec<u32>),
    I32(Vec<i32>),
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl TensorData {
    pub fn dtype(&self) -> &'static str {
        match self {
            TensorData::U8(_) => "u8",
            TensorData::U16(_) => "u16",
            TensorData::U32(_) => "u32",
            TensorData::I32(_) => "i32",
            TensorData::F32(_) => "f32",
            TensorData::F64(_) => "f64",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::U8(v) => v.len(),
            TensorData::U16(v) => v.len(),
            TensorData::U32(v) => v.len(),
            TensorData::I32(v) => v.len(),
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn dtype_size(dtype: &str) -> Option<usize> {
    Some(match dtype {
        "u8" => 1,
        "u16" => 2,
        "u32" | "i32" | "f32" => 4,
        "f64" => 8,
        _ => return None,
    })
}

/// A dense tensor with explicit axis names, e.g. `"HWC"` or `"XYZC"`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub axes: String,
    pub data: TensorData,
}

#[derive(Serialize, Deserialize)]
struct Header {
    dims: Vec<usize>,
    dtype: String,
    axes: String,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, axes: impl Into<String>, data: TensorData) -> Result<Self> {
        let t = Self {
            dims,
            axes: axes.into(),
            data,
        };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        if self.axes.chars().count() != self.dims.len() {
            return Err(Error::Format(format!(
                "axis order '{}' does not name {} dimensions",
                self.axes,
                self.dims.len()
            )));
        }
        let n: usize = self.dims.iter().product();
        if n != self.data.len() {
            return Err(Error::Format(format!(
                "dims {:?} hold {n} elements but data has {}",
                self.dims,
                self.data.len()
            )));
        }
        Ok(())
    }

    pub fn as_f32(&self) -> Option<&[f32]> {
        match &self.data {
            TensorData::F32(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<&[f64]> {
        match &self.data {
            TensorData::F64(v) => Some(v),
            _ => None,
        }
    }

    /// Values widened to `f64`, whatever the stored dtype.
    pub fn to_f64_vec(&self) -> Vec<f64> {
        match &self.data {
            TensorData::U8(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::U16(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::U32(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::I32(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::F64(v) => v.clone(),
        }
    }
}

pub fn write_tensor(t: &Tensor) -> Result<Vec<u8>> {
    t.validate()?;
    let header = serde_json::to_vec(&Header {
        dims: t.dims.clone(),
        dtype: t.data.dtype().to_string(),
        axes: t.axes.clone(),
    })?;
    let elem = dtype_size(t.data.dtype()).unwrap_or(1);
    let mut out = Vec::with_capacity(8 + header.len() + t.data.len() * elem);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    match &t.data {
        TensorData::U8(v) => out.extend_from_slice(v),
        TensorData::U16(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        TensorData::U32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        TensorData::I32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
    }
    Ok(out)
}

fn decode<const N: usize, T>(payload: &[u8], f: impl Fn([u8; N]) -> T) -> Vec<T> {
    payload
        .chunks_exact(N)
        .map(|c| f(c.try_into().expect("chunk size")))
        .collect()
}

pub fn read_tensor(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < 8 {
        return Err(Error::Format("tensor file shorter than its 8-byte header length".into()));
    }
    let hlen = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes")) as usize;
    let body = &bytes[8..];
    if hlen > body.len() {
        return Err(Error::Format(format!(
            "tensor header length {hlen} exceeds file size {}",
            bytes.len()
        )));
    }
    let header: Header = serde_json::from_slice(&body[..hlen])
        .map_err(|e| Error::Format(format!("tensor header: {e}")))?;
    let elem = dtype_size(&header.dtype)
        .ok_or_else(|| Error::Format(format!("unknown tensor dtype '{}'", header.dtype)))?;
    let payload = &body[hlen..];
    let n = header
        .dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Format("tensor dims overflow".into()))?;
    if payload.len() != n * elem {
        return Err(Error::Format(format!(
            "tensor dims {:?} of {} need {} payload bytes, found {}",
            header.dims,
            header.dtype,
            n * elem,
            payload.len()
        )));
    }
    let data = match header.dtype.as_str() {
        "u8" => TensorData::U8(payload.to_vec()),
        "u16" => TensorData::U16(decode(payload, u16::from_le_bytes)),
        "u32" => TensorData::U32(decode(payload, u32::from_le_bytes)),
        "i32" => TensorData::I32(decode(payload, i32::from_le_bytes)),
        "f32" => TensorData::F32(decode(payload, f32::from_le_bytes)),
        _ => TensorData::F64(decode(payload, f64::from_le_bytes)),
    };
    Tensor::new(header.dims, header.axes, data)
}
