use crate::error::{Error, Result};
use crate::metrics::LabelGrid;

pub const SEMANTIC_KITTI_DIMS: [usize; 3] = [256, 256, 32];

/// Decodes a 256x256x32 grid from u16 little-endian labels and a bit-packed
/// (MSB first) invalid mask. Flat index is `x * 8192 + y * 32 + z`.
pub fn read_label_grid(label_bytes: &[u8], invalid_bytes: &[u8]) -> Result<LabelGrid> {
    read_label_grid_dims(SEMANTIC_KITTI_DIMS, label_bytes, invalid_bytes)
}

pub fn read_label_grid_dims(dims: [usize; 3], label_bytes: &[u8], invalid_bytes: &[u8]) -> Result<LabelGrid> {
    let n: usize = dims.iter().product();
    let want_labels = 2 * n;
    let want_invalid = n.div_ceil(8);
    if label_bytes.len() != want_labels || invalid_bytes.len() != want_invalid {
        return Err(Error::Format(format!(
            "label grid {dims:?} expects {want_labels} label bytes and {want_invalid} invalid bytes, got {} and {}",
            label_bytes.len(),
            invalid_bytes.len()
        )));
    }
    let labels = label_bytes
        .chunks_exact(2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .collect();
    let invalid = (0..n)
        .map(|i| invalid_bytes[i / 8] & (0x80 >> (i % 8)) != 0)
        .collect();
    LabelGrid::new(dims, labels, invalid)
}

/// Inverse of [`read_label_grid_dims`]: `(label_bytes, invalid_bytes)`.
pub fn write_label_grid(grid: &LabelGrid) -> (Vec<u8>, Vec<u8>) {
    let labels = grid.labels.iter().flat_map(|l| l.to_le_bytes()).collect();
    let mut invalid = vec![0u8; grid.invalid.len().div_ceil(8)];
    for (i, &flag) in grid.invalid.iter().enumerate() {
        if flag {
            invalid[i / 8] |= 0x80 >> (i % 8);
        }
    }
    (labels, invalid)
}
