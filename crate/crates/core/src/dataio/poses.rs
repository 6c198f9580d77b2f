use log::warn;

use super::{format_rows, parse_error, parse_floats, rows_from_12};
use crate::error::Result;
use crate::geometry::RigidTransform;

const SOURCE: &str = "poses";

/// `world <- camera` pose of every scan, indexed from 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseTrack(pub Vec<RigidTransform>);

impl PoseTrack {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&RigidTransform> {
        self.0.get(index)
    }
}

/// One pose per non-blank line, 12 row-major floats. Rotations drifting
/// from orthonormality are projected back onto SO(3); drift above 1e-6 is
/// logged.
pub fn parse_poses(text: &str) -> Result<PoseTrack> {
    let mut poses = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let v = parse_floats(SOURCE, lineno, line)?;
        if v.len() != 12 {
            return Err(parse_error(
                SOURCE,
                lineno,
                format!("expected 12 values, found {}", v.len()),
            ));
        }
        let (pose, drift) = RigidTransform::from_rows_orthonormalized(&rows_from_12(&v))
            .map_err(|e| parse_error(SOURCE, lineno, e.to_string()))?;
        if drift > 1e-6 {
            warn!("poses line {lineno}: rotation re-orthonormalized (drift {drift:e})");
        }
        poses.push(pose);
    }
    if poses.is_empty() {
        return Err(parse_error(SOURCE, 0, "no poses found"));
    }
    Ok(PoseTrack(poses))
}

pub fn write_poses(track: &PoseTrack) -> String {
    let mut s = String::new();
    for p in &track.0 {
        s.push_str(&format_rows(&p.rows()));
        s.push('\n');
    }
    s
}
