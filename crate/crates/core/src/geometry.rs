//! Pinhole camera model, pixel grids and rigid transforms.
//!
//! Camera frames follow the rectified pinhole convention: +X right, +Y down,
//! +Z forward. Geometry is kept in `f64` throughout.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::resample::Plane2D;

pub type Point3 = [f64; 3];

const ROTATION_TOLERANCE: f64 = 1e-9;

/// Pinhole projection parameters of a camera with an image of
/// `width` x `height` pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let intr = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.cx.is_finite() || !self.cy.is_finite() {
            return invalid(format!(
                "focal lengths must be positive and the principal point finite (fx={}, fy={}, cx={}, cy={})",
                self.fx, self.fy, self.cx, self.cy
            ));
        }
        if !self.fx.is_finite() || !self.fy.is_finite() {
            return invalid("focal lengths must be finite");
        }
        if self.width == 0 || self.height == 0 {
            return invalid(format!(
                "image size must be at least 1x1, got {}x{}",
                self.width, self.height
            ));
        }
        Ok(())
    }

    /// Same camera for an image resized to `width` x `height`, using
    /// half-pixel-center conventions.
    pub fn scaled(&self, width: usize, height: usize) -> Result<Self> {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Self::new(
            self.fx * sx,
            self.fy * sy,
            (self.cx + 0.5) * sx - 0.5,
            (self.cy + 0.5) * sy - 0.5,
            width,
            height,
        )
    }
}

/// A rigid transform `p' = R p + t`.
///
/// Poses are stored as `target <- source`; a camera pose in the world is
/// therefore `world <- camera`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[[f64; 4]; 3]", try_from = "[[f64; 4]; 3]")]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a transform, rejecting rotations that are not orthonormal with
    /// determinant +1 within 1e-9.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        check_rotation(&rotation)?;
        if translation.iter().any(|v| !v.is_finite()) {
            return invalid("translation must be finite");
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_translation(t: [f64; 3]) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::from(t),
        }
    }

    /// Rotation of `angle` radians about a unit `axis`, no translation.
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Self {
        let axis = nalgebra::Unit::new_normalize(Vector3::from(axis));
        let rot = nalgebra::Rotation3::from_axis_angle(&axis, angle);
        Self {
            rotation: *rot.matrix(),
            translation: Vector3::zeros(),
        }
    }

    /// Parses the first three rows of a homogeneous matrix given row-major.
    pub fn from_rows(rows: &[[f64; 4]; 3]) -> Result<Self> {
        let rotation = Matrix3::from_fn(|r, c| rows[r][c]);
        let translation = Vector3::new(rows[0][3], rows[1][3], rows[2][3]);
        Self::new(rotation, translation)
    }

    /// Like [`RigidTransform::from_rows`] but projects a drifting rotation
    /// onto the nearest orthonormal matrix instead of rejecting it. Returns
    /// the transform and the Frobenius drift `|R^T R - I|` before projection.
    pub fn from_rows_orthonormalized(rows: &[[f64; 4]; 3]) -> Result<(Self, f64)> {
        let rotation = Matrix3::from_fn(|r, c| rows[r][c]);
        let translation = Vector3::new(rows[0][3], rows[1][3], rows[2][3]);
        if rotation.iter().chain(translation.iter()).any(|v| !v.is_finite()) {
            return invalid("transform entries must be finite");
        }
        if rotation.determinant() < 0.5 {
            return invalid(format!(
                "matrix is not close to a rotation (det = {})",
                rotation.determinant()
            ));
        }
        let drift = orthonormality_error(&rotation);
        let rotation = if drift > ROTATION_TOLERANCE || (rotation.determinant() - 1.0).abs() > ROTATION_TOLERANCE {
            nearest_rotation(&rotation)?
        } else {
            rotation
        };
        Ok((
            Self {
                rotation,
                translation,
            },
            drift,
        ))
    }

    pub fn rows(&self) -> [[f64; 4]; 3] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            [r[(0, 0)], r[(0, 1)], r[(0, 2)], t[0]],
            [r[(1, 0)], r[(1, 1)], r[(1, 2)], t[1]],
            [r[(2, 0)], r[(2, 1)], r[(2, 2)], t[2]],
        ]
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn is_identity(&self) -> bool {
        self.rotation == Matrix3::identity() && self.translation == Vector3::zeros()
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            translation: -(rt * self.translation),
            rotation: rt,
        }
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        let q = self.rotation * Vector3::from(*p) + self.translation;
        [q[0], q[1], q[2]]
    }
}

impl From<RigidTransform> for [[f64; 4]; 3] {
    fn from(t: RigidTransform) -> Self {
        t.rows()
    }
}

impl TryFrom<[[f64; 4]; 3]> for RigidTransform {
    type Error = Error;

    fn try_from(rows: [[f64; 4]; 3]) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

fn orthonormality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).norm()
}

fn check_rotation(r: &Matrix3<f64>) -> Result<()> {
    if r.iter().any(|v| !v.is_finite()) {
        return invalid("rotation must be finite");
    }
    let err = orthonormality_error(r);
    let det = r.determinant();
    if err > ROTATION_TOLERANCE || (det - 1.0).abs() > ROTATION_TOLERANCE {
        return invalid(format!(
            "rotation is not in SO(3): |R^T R - I| = {err:e}, det = {det}"
        ));
    }
    Ok(())
}

/// Closest rotation in the Frobenius sense, via SVD.
fn nearest_rotation(m: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let svd = m.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return invalid("SVD failed while orthonormalizing rotation"),
    };
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        r = u * v_t;
    }
    Ok(r)
}

/// Pose of `frame_i` expressed in `frame_t`, given both as `world <- frame`.
///
/// Returns `dst⁻¹ ∘ src`. Bitwise-equal poses yield the exact identity.
pub fn relative_pose(src: &RigidTransform, dst: &RigidTransform) -> RigidTransform {
    if src == dst {
        return RigidTransform::identity();
    }
    dst.inverse().compose(src)
}

pub fn transform_points(points: &[Point3], transform: &RigidTransform) -> Vec<Point3> {
    if transform.is_identity() {
        return points.to_vec();
    }
    points.iter().map(|p| transform.apply(p)).collect()
}

/// An `H x W` grid of (possibly sub-pixel) image coordinates `(u, v)`,
/// stored as a two-channel plane.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelGrid {
    coords: Plane2D<f64>,
}

impl PixelGrid {
    pub fn from_plane(coords: Plane2D<f64>) -> Result<Self> {
        if coords.channels() != 2 {
            return invalid(format!(
                "pixel grid needs 2 channels, got {}",
                coords.channels()
            ));
        }
        Ok(Self { coords })
    }

    pub fn height(&self) -> usize {
        self.coords.height()
    }

    pub fn width(&self) -> usize {
        self.coords.width()
    }

    pub fn len(&self) -> usize {
        self.height() * self.width()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(u, v)` at row `r`, column `c`.
    pub fn coord(&self, r: usize, c: usize) -> (f64, f64) {
        let px = self.coords.pixel(r, c);
        (px[0], px[1])
    }

    /// Row-major flattened `(u, v)` pairs.
    pub fn flat_coord(&self, idx: usize) -> (f64, f64) {
        let d = self.coords.data();
        (d[2 * idx], d[2 * idx + 1])
    }

    pub fn as_plane(&self) -> &Plane2D<f64> {
        &self.coords
    }

    pub fn into_plane(self) -> Plane2D<f64> {
        self.coords
    }
}

/// Integer pixel grid with `coords[r][c] = (c, r)`.
pub fn make_pixel_grid(height: usize, width: usize) -> Result<PixelGrid> {
    if height == 0 || width == 0 {
        return invalid(format!(
            "pixel grid must be at least 1x1, got {height}x{width}"
        ));
    }
    let mut data = Vec::with_capacity(height * width * 2);
    for r in 0..height {
        for c in 0..width {
            data.push(c as f64);
            data.push(r as f64);
        }
    }
    let coords = Plane2D::from_vec(height, width, 2, data)?;
    Ok(PixelGrid { coords })
}

/// Depth values that are non-finite or non-positive mark missing pixels.
#[inline]
pub fn is_valid_depth(d: f64) -> bool {
    d.is_finite() && d > 0.0
}

/// Camera-frame points lifted from a depth map, plus the row-major pixel
/// index each point came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Backprojection {
    pub points: Vec<Point3>,
    pub kept: Vec<usize>,
}

pub fn backproject(
    depth: &Plane2D<f64>,
    grid: &PixelGrid,
    intr: &CameraIntrinsics,
) -> Result<Backprojection> {
    if depth.channels() != 1 {
        return invalid(format!(
            "depth map must be single-channel, got {} channels",
            depth.channels()
        ));
    }
    if depth.height() != grid.height() || depth.width() != grid.width() {
        return invalid(format!(
            "depth is {}x{} but pixel grid is {}x{}",
            depth.height(),
            depth.width(),
            grid.height(),
            grid.width()
        ));
    }
    let (fx, fy, cx, cy) = (intr.fx, intr.fy, intr.cx, intr.cy);
    let n = depth.data().iter().filter(|&&d| is_valid_depth(d)).count();
    let mut out = Backprojection {
        points: Vec::with_capacity(n),
        kept: Vec::with_capacity(n),
    };
    for (idx, &d) in depth.data().iter().enumerate() {
        if !is_valid_depth(d) {
            continue;
        }
        let (u, v) = grid.flat_coord(idx);
        out.points.push([(u - cx) / fx * d, (v - cy) / fy * d, d]);
        out.kept.push(idx);
    }
    Ok(out)
}

/// Image-plane location of a camera-frame point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub z: f64,
    /// `z <= 0`; `u` and `v` are NaN in that case.
    pub behind: bool,
}

impl Projection {
    pub fn in_image(&self, intr: &CameraIntrinsics) -> bool {
        !self.behind
            && self.u >= 0.0
            && self.u < intr.width as f64
            && self.v >= 0.0
            && self.v < intr.height as f64
    }
}

pub fn project_point(p: &Point3, intr: &CameraIntrinsics) -> Projection {
    let z = p[2];
    if z > 0.0 {
        Projection {
            u: intr.fx * p[0] / z + intr.cx,
            v: intr.fy * p[1] / z + intr.cy,
            z,
            behind: false,
        }
    } else {
        Projection {
            u: f64::NAN,
            v: f64::NAN,
            z,
            behind: true,
        }
    }
}

pub fn project(points: &[Point3], intr: &CameraIntrinsics) -> Vec<Projection> {
    points.iter().map(|p| project_point(p, intr)).collect()
}
