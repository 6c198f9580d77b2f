//! Readers and writers for the on-disk formats used around the pipeline:
//! KITTI `calib.txt` and `poses.txt`, 16-bit depth PNGs, SemanticKITTI voxel
//! label grids, ASCII PLY point clouds and a small self-describing tensor
//! container.

mod calib;
mod depth;
mod labels;
mod ply;
mod poses;
mod tensor;

pub use calib::{parse_calib, write_calib, CalibSet};
pub use depth::{read_depth_png, write_depth_png, DEPTH_PNG_SCALE};
pub use labels::{read_label_grid, read_label_grid_dims, write_label_grid, SEMANTIC_KITTI_DIMS};
pub use ply::write_ply;
pub use poses::{parse_poses, write_poses, PoseTrack};
pub use tensor::{read_tensor, write_tensor, Tensor, TensorData};

use crate::error::Error;

fn parse_error(source_name: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        source_name: source_name.to_string(),
        line,
        message: message.into(),
    }
}

/// Whitespace-separated finite floats.
fn parse_floats(source_name: &str, line: usize, text: &str) -> Result<Vec<f64>, Error> {
    text.split_whitespace()
        .map(|tok| {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_error(source_name, line, format!("'{tok}' is not a number")))?;
            if !v.is_finite() {
                return Err(parse_error(source_name, line, format!("non-finite value '{tok}'")));
            }
            Ok(v)
        })
        .collect()
}

fn rows_from_12(v: &[f64]) -> [[f64; 4]; 3] {
    std::array::from_fn(|r| std::array::from_fn(|c| v[r * 4 + c]))
}

fn format_rows(rows: &[[f64; 4]; 3]) -> String {
    rows.iter()
        .flatten()
        .map(|v| format!("{v:e}"))
        .collect::<Vec<_>>()
        .join(" ")
}
