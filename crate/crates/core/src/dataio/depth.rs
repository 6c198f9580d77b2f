use std::io::Cursor;

use crate::error::{Error, Result};
use crate::geometry::is_valid_depth;
use crate::resample::Plane2D;

/// Raw 16-bit units per meter.
pub const DEPTH_PNG_SCALE: f64 = 256.0;

fn png_err(e: impl std::fmt::Display) -> Error {
    Error::Format(format!("depth png: {e}"))
}

/// Decodes a 16-bit grayscale PNG; `raw / 256` meters, raw 0 becomes NaN.
pub fn read_depth_png(bytes: &[u8]) -> Result<Plane2D<f64>> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(png_err)?;
    let info = reader.info();
    let (w, h) = (info.width as usize, info.height as usize);
    if info.bit_depth != png::BitDepth::Sixteen || info.color_type != png::ColorType::Grayscale {
        return Err(Error::Format(format!(
            "depth png must be 16-bit single-channel, got {:?} {:?}",
            info.bit_depth, info.color_type
        )));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| png_err("image too large"))?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf).map_err(png_err)?;
    let buf = &buf[..frame.buffer_size()];
    let stride = frame.line_size;
    let mut data = Vec::with_capacity(w * h);
    for r in 0..h {
        let row = &buf[r * stride..r * stride + 2 * w];
        for px in row.chunks_exact(2) {
            let raw = u16::from_be_bytes([px[0], px[1]]);
            data.push(if raw == 0 {
                f64::NAN
            } else {
                raw as f64 / DEPTH_PNG_SCALE
            });
        }
    }
    Plane2D::from_vec(h, w, 1, data)
}

/// Encodes depth as `round(d * 256)` in a 16-bit PNG. Missing depth maps to
/// 0; depths beyond the 16-bit range saturate.
pub fn write_depth_png(depth: &Plane2D<f64>) -> Result<Vec<u8>> {
    if depth.channels() != 1 {
        return Err(Error::Format("depth png needs a single-channel plane".into()));
    }
    let mut raw = Vec::with_capacity(depth.data().len() * 2);
    for &d in depth.data() {
        let v = if is_valid_depth(d) {
            (d * DEPTH_PNG_SCALE).round().clamp(1.0, u16::MAX as f64) as u16
        } else {
            0
        };
        raw.extend_from_slice(&v.to_be_bytes());
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, depth.width() as u32, depth.height() as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Sixteen);
        let mut writer = enc.write_header().map_err(png_err)?;
        writer.write_image_data(&raw).map_err(png_err)?;
        writer.finish().map_err(png_err)?;
    }
    Ok(out)
}
