use log::warn;
use nalgebra::{Matrix3, Vector3};

use super::{format_rows, parse_error, parse_floats, rows_from_12};
use crate::error::Result;
use crate::geometry::{CameraIntrinsics, RigidTransform};

const SOURCE: &str = "calib";

/// Camera `P2` projection and the `Tr` lidar-to-camera extrinsics of a KITTI
/// odometry sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibSet {
    /// Row-major 3x4 projection `K [I | b]` of the left color camera.
    pub projection: [[f64; 4]; 3],
    /// `Tr`: rectified reference camera <- lidar.
    pub cam_from_lidar: RigidTransform,
}

impl CalibSet {
    pub fn new(projection: [[f64; 4]; 3], cam_from_lidar: RigidTransform) -> Result<Self> {
        let k = Matrix3::from_fn(|r, c| projection[r][c]);
        if !(k[(0, 0)] > 0.0 && k[(1, 1)] > 0.0 && k[(2, 2)] > 0.0)
            || k[(1, 0)] != 0.0
            || k[(2, 0)] != 0.0
            || k[(2, 1)] != 0.0
        {
            return Err(parse_error(
                SOURCE,
                0,
                "P2 must start with an upper-triangular K with positive diagonal",
            ));
        }
        Ok(Self {
            projection,
            cam_from_lidar,
        })
    }

    /// Pinhole parameters of `P2` for an image of `width` x `height`.
    pub fn intrinsics(&self, width: usize, height: usize) -> Result<CameraIntrinsics> {
        let p = &self.projection;
        CameraIntrinsics::new(p[0][0], p[1][1], p[0][2], p[1][2], width, height)
    }

    /// `P2`'s own camera <- reference camera, i.e. the baseline offset
    /// `K^-1 p4` carried in the last column of the projection.
    pub fn camera_offset(&self) -> Result<RigidTransform> {
        let p = &self.projection;
        let k = Matrix3::from_fn(|r, c| p[r][c]);
        let p4 = Vector3::new(p[0][3], p[1][3], p[2][3]);
        let b = k
            .try_inverse()
            .ok_or_else(|| parse_error(SOURCE, 0, "P2 intrinsic block is singular"))?
            * p4;
        Ok(RigidTransform::from_translation([b[0], b[1], b[2]]))
    }

    /// `P2` camera <- lidar (ego) frame.
    pub fn camera_from_ego(&self) -> Result<RigidTransform> {
        Ok(self.camera_offset()?.compose(&self.cam_from_lidar))
    }
}

/// Parses `P2:` and `Tr:` (12 row-major floats each). Other keys are ignored.
pub fn parse_calib(text: &str) -> Result<CalibSet> {
    let mut p2 = None;
    let mut tr = None;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let Some((key, rest)) = line.split_once(':') else {
            if line.trim().is_empty() {
                continue;
            }
            return Err(parse_error(SOURCE, lineno, "expected 'KEY: values'"));
        };
        let key = key.trim();
        if key != "P2" && key != "Tr" {
            continue;
        }
        let v = parse_floats(SOURCE, lineno, rest)?;
        if v.len() != 12 {
            return Err(parse_error(
                SOURCE,
                lineno,
                format!("{key} needs 12 values, found {}", v.len()),
            ));
        }
        let rows = rows_from_12(&v);
        if key == "P2" {
            p2 = Some((lineno, rows));
        } else {
            let (t, drift) = RigidTransform::from_rows_orthonormalized(&rows)
                .map_err(|e| parse_error(SOURCE, lineno, e.to_string()))?;
            if drift > 1e-6 {
                warn!("calib line {lineno}: Tr rotation re-orthonormalized (drift {drift:e})");
            }
            tr = Some(t);
        }
    }
    let (p2_line, projection) = p2.ok_or_else(|| parse_error(SOURCE, 0, "missing 'P2:' line"))?;
    let cam_from_lidar = tr.ok_or_else(|| parse_error(SOURCE, 0, "missing 'Tr:' line"))?;
    CalibSet::new(projection, cam_from_lidar).map_err(|e| match e {
        crate::Error::Parse { message, .. } => parse_error(SOURCE, p2_line, message),
        other => other,
    })
}

pub fn write_calib(calib: &CalibSet) -> String {
    format!(
        "P2: {}\nTr: {}\n",
        format_rows(&calib.projection),
        format_rows(&calib.cam_from_lidar.rows())
    )
}
