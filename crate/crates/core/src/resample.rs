//! Dense 2D planes and 3D volumes with half-pixel-center resampling
//! (`align_corners = False` semantics) and min-max normalization.
//!
//! Source coordinates are `s = (d + 0.5) * in / out - 0.5`, clamped to
//! `[0, in - 1]`. Each output element blends only its 4 (bilinear) or 8
//! (trilinear) clamped neighbours, so the result does not depend on how rows
//! or slabs are split across threads.

use std::fmt::Debug;

use rayon::prelude::*;

use crate::error::{invalid, Result};

/// Element type of planes and volumes. Interpolation is carried out in `f64`.
pub trait Scalar: Copy + Default + Debug + PartialEq + Send + Sync + 'static {
    fn to_f64(self) -> f64;
    fn from_f64(v: f64) -> Self;
}

impl Scalar for f32 {
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
}

impl Scalar for f64 {
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
}

/// Row-major `H x W x C` array.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane2D<T> {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> Plane2D<T> {
    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return invalid(format!(
                "plane dimensions must be positive, got {height}x{width}x{channels}"
            ));
        }
        if data.len() != height * width * channels {
            return invalid(format!(
                "plane {height}x{width}x{channels} needs {} values, got {}",
                height * width * channels,
                data.len()
            ));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: T) -> Result<Self> {
        Self::from_vec(height, width, channels, vec![value; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn pixel(&self, r: usize, c: usize) -> &[T] {
        let start = (r * self.width + c) * self.channels;
        &self.data[start..start + self.channels]
    }

    pub fn get(&self, r: usize, c: usize, ch: usize) -> T {
        self.data[(r * self.width + c) * self.channels + ch]
    }
}

/// `X x Y x Z x C` array, `C` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D<T> {
    dims: [usize; 3],
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> Volume3D<T> {
    pub fn from_vec(dims: [usize; 3], channels: usize, data: Vec<T>) -> Result<Self> {
        if dims.contains(&0) || channels == 0 {
            return invalid(format!(
                "volume dimensions must be positive, got {dims:?}x{channels}"
            ));
        }
        let n = dims[0] * dims[1] * dims[2] * channels;
        if data.len() != n {
            return invalid(format!(
                "volume {dims:?}x{channels} needs {n} values, got {}",
                data.len()
            ));
        }
        Ok(Self {
            dims,
            channels,
            data,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn voxel(&self, x: usize, y: usize, z: usize) -> &[T] {
        let start = ((x * self.dims[1] + y) * self.dims[2] + z) * self.channels;
        &self.data[start..start + self.channels]
    }
}

/// Interpolation taps along one axis: `(lo, hi, w_lo, w_hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Tap {
    lo: usize,
    hi: usize,
    w_lo: f64,
    w_hi: f64,
}

/// Half-pixel-center source coordinate of output index `d`.
#[inline]
pub fn source_coordinate(d: usize, input: usize, output: usize) -> f64 {
    let s = (d as f64 + 0.5) * (input as f64 / output as f64) - 0.5;
    s.clamp(0.0, (input - 1) as f64)
}

fn axis_taps(input: usize, output: usize) -> Vec<Tap> {
    (0..output)
        .map(|d| {
            let s = source_coordinate(d, input, output);
            let lo = s.floor() as usize;
            let hi = (lo + 1).min(input - 1);
            let w_hi = s - lo as f64;
            Tap {
                lo,
                hi,
                w_lo: 1.0 - w_hi,
                w_hi,
            }
        })
        .collect()
}

/// `a * wa + b * wb`, skipping zero-weight terms so that exact taps return
/// the source value unchanged (and invalid NaN neighbours do not leak).
#[inline]
fn blend(a: impl FnOnce() -> f64, b: impl FnOnce() -> f64, wa: f64, wb: f64) -> f64 {
    if wb == 0.0 {
        a()
    } else if wa == 0.0 {
        b()
    } else {
        a() * wa + b() * wb
    }
}

pub fn bilinear_resize<T: Scalar>(src: &Plane2D<T>, out_h: usize, out_w: usize) -> Result<Plane2D<T>> {
    if out_h == 0 || out_w == 0 {
        return invalid(format!(
            "bilinear output size must be positive, got {out_h}x{out_w}"
        ));
    }
    if out_h == src.height && out_w == src.width {
        return Ok(src.clone());
    }
    let ch = src.channels;
    let ys = axis_taps(src.height, out_h);
    let xs = axis_taps(src.width, out_w);
    let row_len = src.width * ch;

    let mut data = vec![T::default(); out_h * out_w * ch];
    data.par_chunks_mut(out_w * ch)
        .zip(ys.par_iter())
        .for_each(|(row, ty)| {
            let top = &src.data[ty.lo * row_len..(ty.lo + 1) * row_len];
            let bot = &src.data[ty.hi * row_len..(ty.hi + 1) * row_len];
            for (out, tx) in row.chunks_exact_mut(ch).zip(&xs) {
                let (a, b) = (&top[tx.lo * ch..(tx.lo + 1) * ch], &top[tx.hi * ch..(tx.hi + 1) * ch]);
                let (c, d) = (&bot[tx.lo * ch..(tx.lo + 1) * ch], &bot[tx.hi * ch..(tx.hi + 1) * ch]);
                if tx.w_lo != 0.0 && tx.w_hi != 0.0 && ty.w_lo != 0.0 && ty.w_hi != 0.0 {
                    // all four taps contribute; same arithmetic as `blend`, branch-free
                    for k in 0..ch {
                        let lo = a[k].to_f64() * tx.w_lo + b[k].to_f64() * tx.w_hi;
                        let hi = c[k].to_f64() * tx.w_lo + d[k].to_f64() * tx.w_hi;
                        out[k] = T::from_f64(lo * ty.w_lo + hi * ty.w_hi);
                    }
                    continue;
                }
                for k in 0..ch {
                    let row_lo = || blend(|| a[k].to_f64(), || b[k].to_f64(), tx.w_lo, tx.w_hi);
                    let row_hi = || blend(|| c[k].to_f64(), || d[k].to_f64(), tx.w_lo, tx.w_hi);
                    out[k] = T::from_f64(blend(row_lo, row_hi, ty.w_lo, ty.w_hi));
                }
            }
        });
    Plane2D::from_vec(out_h, out_w, ch, data)
}

pub fn trilinear_resize<T: Scalar>(src: &Volume3D<T>, out_dims: [usize; 3]) -> Result<Volume3D<T>> {
    if out_dims.contains(&0) {
        return invalid(format!(
            "trilinear output size must be positive, got {out_dims:?}"
        ));
    }
    if out_dims == src.dims {
        return Ok(src.clone());
    }
    let ch = src.channels;
    let [_, sy, sz] = src.dims;
    let xs = axis_taps(src.dims[0], out_dims[0]);
    let ys = axis_taps(src.dims[1], out_dims[1]);
    let zs = axis_taps(src.dims[2], out_dims[2]);
    let sd = &src.data;
    let at = |x: usize, y: usize, z: usize, k: usize| sd[((x * sy + y) * sz + z) * ch + k].to_f64();

    let slab = out_dims[1] * out_dims[2] * ch;
    let mut data = vec![T::default(); out_dims[0] * slab];
    data.par_chunks_mut(slab)
        .zip(xs.par_iter())
        .for_each(|(out, tx)| {
            for (y, ty) in ys.iter().enumerate() {
                for (z, tz) in zs.iter().enumerate() {
                    for k in 0..ch {
                        let line = |x: usize, y: usize| {
                            blend(|| at(x, y, tz.lo, k), || at(x, y, tz.hi, k), tz.w_lo, tz.w_hi)
                        };
                        let face = |x: usize| blend(|| line(x, ty.lo), || line(x, ty.hi), ty.w_lo, ty.w_hi);
                        let v = blend(|| face(tx.lo), || face(tx.hi), tx.w_lo, tx.w_hi);
                        out[(y * out_dims[2] + z) * ch + k] = T::from_f64(v);
                    }
                }
            }
        });
    Volume3D::from_vec(out_dims, ch, data)
}

/// `(x - min) / (max - min)` over the finite elements of a single-channel
/// plane; non-finite elements stay NaN and do not enter the statistics.
/// A constant plane normalizes to 0.
pub fn minmax_normalize(src: &Plane2D<f64>) -> Result<Plane2D<f64>> {
    if src.channels != 1 {
        return invalid(format!(
            "min-max normalization expects one channel, got {}",
            src.channels
        ));
    }
    let (lo, hi) = src
        .data
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if lo > hi {
        return invalid("min-max normalization needs at least one finite element");
    }
    let range = hi - lo;
    let data = src
        .data
        .iter()
        .map(|&v| {
            if !v.is_finite() {
                f64::NAN
            } else if range > 0.0 {
                (v - lo) / range
            } else {
                0.0
            }
        })
        .collect();
    Plane2D::from_vec(src.height, src.width, 1, data)
}
