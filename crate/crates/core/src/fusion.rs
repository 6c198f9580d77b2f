//! Lifting of per-frame features into 3D and their temporal union.
//!
//! Each frame's features are channel-projected, resized to the depth
//! resolution and attached to the backprojected depth pixels. Historical
//! frames have their features attenuated by `1 - minmax(depth)` and are then
//! warped into the current camera frame; the current frame is densified by
//! upsampling its pixel grid, depth and features before lifting.

use std::borrow::Cow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{
    backproject, is_valid_depth, make_pixel_grid, relative_pose, transform_points, CameraIntrinsics,
    PixelGrid, Point3, RigidTransform,
};
use crate::resample::{bilinear_resize, minmax_normalize, Plane2D};

/// One time step: features, depth, camera and pose.
#[derive(Debug, Clone)]
pub struct FrameBundle {
    /// `H' x W' x C` feature map.
    pub features: Plane2D<f32>,
    /// `H x W` depth in meters; non-finite or non-positive values are missing.
    pub depth: Plane2D<f64>,
    pub intrinsics: CameraIntrinsics,
    /// `world <- camera`.
    pub pose: RigidTransform,
    /// 0 for the current frame, 1 for the previous one, and so on.
    pub offset: usize,
}

impl FrameBundle {
    pub fn new(
        features: Plane2D<f32>,
        depth: Plane2D<f64>,
        intrinsics: CameraIntrinsics,
        pose: RigidTransform,
        offset: usize,
    ) -> Result<Self> {
        let frame = Self {
            features,
            depth,
            intrinsics,
            pose,
            offset,
        };
        frame.validate()?;
        Ok(frame)
    }

    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        if self.depth.channels() != 1 {
            return invalid(format!(
                "frame {}: depth must have one channel, got {}",
                self.offset,
                self.depth.channels()
            ));
        }
        if self.depth.height() != self.intrinsics.height || self.depth.width() != self.intrinsics.width {
            return invalid(format!(
                "frame {}: depth is {}x{} but the camera image is {}x{}",
                self.offset,
                self.depth.height(),
                self.depth.width(),
                self.intrinsics.height,
                self.intrinsics.width
            ));
        }
        Ok(())
    }
}

/// Static per-pixel affine map of feature channels: `out = W f + b` with
/// `W` stored row-major as `out_channels x in_channels`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelProjection {
    pub in_channels: usize,
    pub out_channels: usize,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl ChannelProjection {
    pub fn new(in_channels: usize, out_channels: usize, weights: Vec<f32>, bias: Vec<f32>) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 {
            return invalid("channel projection needs at least one input and one output channel");
        }
        if weights.len() != in_channels * out_channels || bias.len() != out_channels {
            return invalid(format!(
                "channel projection {out_channels}x{in_channels} needs {} weights and {out_channels} biases, got {} and {}",
                in_channels * out_channels,
                weights.len(),
                bias.len()
            ));
        }
        Ok(Self {
            in_channels,
            out_channels,
            weights,
            bias,
        })
    }

    pub fn identity(channels: usize) -> Self {
        let mut weights = vec![0.0; channels * channels];
        for c in 0..channels {
            weights[c * channels + c] = 1.0;
        }
        Self {
            in_channels: channels,
            out_channels: channels,
            weights,
            bias: vec![0.0; channels],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FuseConfig {
    pub n_frames: usize,
    pub densify_factor: usize,
    pub enable_hcb: bool,
    pub enable_ccfd: bool,
    pub channel_projection: Option<ChannelProjection>,
}

impl Default for FuseConfig {
    fn default() -> Self {
        Self {
            n_frames: 4,
            densify_factor: 2,
            enable_hcb: true,
            enable_ccfd: true,
            channel_projection: None,
        }
    }
}

impl FuseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_frames == 0 {
            return invalid("n_frames must be at least 1");
        }
        if self.densify_factor == 0 {
            return invalid("densify_factor must be at least 1");
        }
        Ok(())
    }
}

/// Lifted points with their features, frame-of-origin tags and source pixel.
///
/// Features are stored point-major (`N x channels`).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeaturedPointCloud {
    pub positions: Vec<Point3>,
    pub features: Vec<f32>,
    pub channels: usize,
    pub origin: Vec<u32>,
    pub source_pixel: Vec<[f64; 2]>,
}

impl FeaturedPointCloud {
    pub fn empty(channels: usize) -> Self {
        Self {
            channels,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn feature(&self, i: usize) -> &[f32] {
        &self.features[i * self.channels..(i + 1) * self.channels]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.positions.len();
        if self.features.len() != n * self.channels || self.origin.len() != n || self.source_pixel.len() != n {
            return invalid(format!(
                "point cloud arrays disagree: {n} positions, {} feature values for {} channels, {} origins, {} source pixels",
                self.features.len(),
                self.channels,
                self.origin.len(),
                self.source_pixel.len()
            ));
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return invalid("point features must be finite");
        }
        Ok(())
    }

    /// Appends `other`; channel counts must agree unless `self` is empty.
    pub fn append(&mut self, mut other: FeaturedPointCloud) -> Result<()> {
        if self.is_empty() && self.features.is_empty() {
            self.channels = other.channels;
        } else if !other.is_empty() && other.channels != self.channels {
            return invalid(format!(
                "cannot append a {}-channel cloud to a {}-channel cloud",
                other.channels, self.channels
            ));
        }
        self.positions.append(&mut other.positions);
        self.features.append(&mut other.features);
        self.origin.append(&mut other.origin);
        self.source_pixel.append(&mut other.source_pixel);
        Ok(())
    }

    /// Points whose index satisfies `keep`, in order.
    pub fn select(&self, mut keep: impl FnMut(usize) -> bool) -> Self {
        let mut out = Self::empty(self.channels);
        for i in 0..self.len() {
            if keep(i) {
                out.positions.push(self.positions[i]);
                out.features.extend_from_slice(self.feature(i));
                out.origin.push(self.origin[i]);
                out.source_pixel.push(self.source_pixel[i]);
            }
        }
        out
    }

    pub fn with_origin(&self, offset: u32) -> Self {
        self.select(|i| self.origin[i] == offset)
    }

    /// Same cloud with positions mapped through `transform`.
    pub fn transformed(&self, transform: &RigidTransform) -> Self {
        Self {
            positions: transform_points(&self.positions, transform),
            ..self.clone()
        }
    }

    /// [`FeaturedPointCloud::transformed`] without copying the features.
    pub fn into_transformed(mut self, transform: &RigidTransform) -> Self {
        if !transform.is_identity() {
            self.positions.par_iter_mut().for_each(|p| *p = transform.apply(p));
        }
        self
    }
}

/// Applies the per-pixel affine channel map, or returns the input when
/// `projection` is `None`.
pub fn project_channels(features: &Plane2D<f32>, projection: Option<&ChannelProjection>) -> Result<Plane2D<f32>> {
    let Some(proj) = projection else {
        return Ok(features.clone());
    };
    if proj.in_channels != features.channels() {
        return invalid(format!(
            "channel projection expects {} input channels, feature map has {}",
            proj.in_channels,
            features.channels()
        ));
    }
    let (cin, cout) = (proj.in_channels, proj.out_channels);
    let mut data = vec![0f32; features.height() * features.width() * cout];
    data.par_chunks_mut(cout)
        .zip(features.data().par_chunks(cin))
        .for_each(|(out, f)| {
            for (o, slot) in out.iter_mut().enumerate() {
                let row = &proj.weights[o * cin..(o + 1) * cin];
                *slot = proj.bias[o] + row.iter().zip(f).map(|(w, x)| w * x).sum::<f32>();
            }
        });
    Plane2D::from_vec(features.height(), features.width(), cout, data)
}

/// Projected features resized to the depth resolution.
fn point_features<'a>(frame: &'a FrameBundle, projection: Option<&ChannelProjection>) -> Result<Cow<'a, Plane2D<f32>>> {
    let (h, w) = (frame.depth.height(), frame.depth.width());
    let projected = match projection {
        None => Cow::Borrowed(&frame.features),
        Some(_) => Cow::Owned(project_channels(&frame.features, projection)?),
    };
    if projected.height() == h && projected.width() == w {
        return Ok(projected);
    }
    Ok(Cow::Owned(bilinear_resize(&projected, h, w)?))
}

/// Backprojects `depth` at `grid` and attaches the matching pixel of
/// `features`. Returns the cloud and the row-major pixel index per point.
fn lift_grid(
    grid: &PixelGrid,
    depth: &Plane2D<f64>,
    features: &Plane2D<f32>,
    intr: &CameraIntrinsics,
    offset: usize,
) -> Result<(FeaturedPointCloud, Vec<usize>)> {
    let bp = backproject(depth, grid, intr)?;
    let channels = features.channels();
    let fdata = features.data();
    let mut feats = Vec::with_capacity(bp.kept.len() * channels);
    for &idx in &bp.kept {
        feats.extend_from_slice(&fdata[idx * channels..(idx + 1) * channels]);
    }
    let source_pixel = bp
        .kept
        .iter()
        .map(|&idx| {
            let (u, v) = grid.flat_coord(idx);
            [u, v]
        })
        .collect();
    let n = bp.points.len();
    let cloud = FeaturedPointCloud {
        positions: bp.points,
        features: feats,
        channels,
        origin: vec![offset as u32; n],
        source_pixel,
    };
    Ok((cloud, bp.kept))
}

/// Lifts one frame at its native depth resolution, in its own camera frame.
pub fn lift_frame(frame: &FrameBundle, cfg: &FuseConfig) -> Result<FeaturedPointCloud> {
    frame.validate()?;
    let feats = point_features(frame, cfg.channel_projection.as_ref())?;
    let grid = make_pixel_grid(frame.depth.height(), frame.depth.width())?;
    let (cloud, _) = lift_grid(&grid, &frame.depth, &feats, &frame.intrinsics, frame.offset)?;
    Ok(cloud)
}

/// Per-pixel blurring weights `1 - minmax(depth)` of a historical depth map.
///
/// Statistics are taken over valid pixels only; missing pixels get weight 0
/// and a constant map gets weight 1 everywhere.
pub fn hcb_weights(depth: &Plane2D<f64>) -> Result<Plane2D<f64>> {
    let masked: Vec<f64> = depth
        .data()
        .iter()
        .map(|&d| if is_valid_depth(d) { d } else { f64::NAN })
        .collect();
    let masked = Plane2D::from_vec(depth.height(), depth.width(), depth.channels(), masked)?;
    let norm = minmax_normalize(&masked)
        .map_err(|_| crate::Error::InvalidArgument("depth map has no valid pixel to normalize".into()))?;
    let weights = norm
        .data()
        .iter()
        .map(|&n| if n.is_nan() { 0.0 } else { 1.0 - n })
        .collect();
    Plane2D::from_vec(depth.height(), depth.width(), 1, weights)
}

/// Scales each point's features by its weight; positions are untouched.
pub fn apply_blur(points: &FeaturedPointCloud, weights: &[f64]) -> Result<FeaturedPointCloud> {
    if weights.len() != points.len() {
        return invalid(format!(
            "{} weights for {} points",
            weights.len(),
            points.len()
        ));
    }
    let mut out = points.clone();
    blur_in_place(&mut out, weights);
    Ok(out)
}

fn blur_in_place(points: &mut FeaturedPointCloud, weights: &[f64]) {
    if points.channels > 0 {
        points
            .features
            .par_chunks_mut(points.channels)
            .zip(weights)
            .for_each(|(f, &w)| {
                for v in f {
                    *v = (*v as f64 * w) as f32;
                }
            });
    }
}

/// Current frame upsampled for densified lifting.
#[derive(Debug, Clone, PartialEq)]
pub struct Densified {
    pub grid: PixelGrid,
    pub depth: Plane2D<f64>,
    pub features: Plane2D<f32>,
}

/// Bilinearly upsamples the pixel-coordinate grid, the depth map and the
/// point features of the current frame to `factor` times the depth
/// resolution.
///
/// The coordinate grid itself is interpolated, so the border rows/columns
/// stay clamped to the original pixel centers.
pub fn densify_current(
    frame: &FrameBundle,
    factor: usize,
    projection: Option<&ChannelProjection>,
) -> Result<Densified> {
    if factor == 0 {
        return invalid("densification factor must be at least 1");
    }
    if frame.offset != 0 {
        return invalid(format!(
            "densification applies to the current frame only, got offset {}",
            frame.offset
        ));
    }
    frame.validate()?;
    let (h, w) = (frame.depth.height(), frame.depth.width());
    let (uh, uw) = (h * factor, w * factor);
    let grid = make_pixel_grid(h, w)?;
    let grid = PixelGrid::from_plane(bilinear_resize(grid.as_plane(), uh, uw)?)?;
    let depth = bilinear_resize(&frame.depth, uh, uw)?;
    let features = bilinear_resize(point_features(frame, projection)?.as_ref(), uh, uw)?;
    Ok(Densified {
        grid,
        depth,
        features,
    })
}

fn lift_current(frame: &FrameBundle, cfg: &FuseConfig) -> Result<FeaturedPointCloud> {
    if !cfg.enable_ccfd || cfg.densify_factor == 1 {
        return lift_frame(frame, cfg);
    }
    let dense = densify_current(frame, cfg.densify_factor, cfg.channel_projection.as_ref())?;
    let (cloud, _) = lift_grid(&dense.grid, &dense.depth, &dense.features, &frame.intrinsics, 0)?;
    Ok(cloud)
}

fn lift_historical(frame: &FrameBundle, current_pose: &RigidTransform, cfg: &FuseConfig) -> Result<FeaturedPointCloud> {
    frame.validate()?;
    let feats = point_features(frame, cfg.channel_projection.as_ref())?;
    let grid = make_pixel_grid(frame.depth.height(), frame.depth.width())?;
    let (mut cloud, kept) = lift_grid(&grid, &frame.depth, &feats, &frame.intrinsics, frame.offset)?;
    if cfg.enable_hcb && !cloud.is_empty() {
        let w = hcb_weights(&frame.depth)?;
        let per_point: Vec<f64> = kept.iter().map(|&i| w.data()[i]).collect();
        blur_in_place(&mut cloud, &per_point);
    }
    let rel = relative_pose(&frame.pose, current_pose);
    Ok(cloud.into_transformed(&rel))
}

/// Lifts, blurs, densifies and aligns `frames` into one cloud in the current
/// camera frame.
///
/// `frames` must carry the offsets `0..n_frames` exactly once each, in any
/// order. The output lists the current frame first, then `t-1`, `t-2`, ...
pub fn fuse(frames: &[FrameBundle], cfg: &FuseConfig) -> Result<FeaturedPointCloud> {
    cfg.validate()?;
    if frames.len() != cfg.n_frames {
        return invalid(format!(
            "expected {} frames, got {}",
            cfg.n_frames,
            frames.len()
        ));
    }
    let mut ordered: Vec<&FrameBundle> = vec![];
    for offset in 0..cfg.n_frames {
        let matching: Vec<_> = frames.iter().filter(|f| f.offset == offset).collect();
        match matching.len() {
            1 => ordered.push(matching[0]),
            0 if offset == 0 => return invalid("no current frame (offset 0) in the sequence"),
            0 => return invalid(format!("no frame with offset {offset}")),
            _ => return invalid(format!("duplicate frames with offset {offset}")),
        }
    }
    let current_pose = ordered[0].pose;

    let parts: Vec<Result<FeaturedPointCloud>> = ordered
        .par_iter()
        .map(|frame| {
            if frame.offset == 0 {
                lift_current(frame, cfg)
            } else {
                lift_historical(frame, &current_pose, cfg)
            }
        })
        .collect();

    // the current frame is the largest part; extend it in place
    let total: usize = parts.iter().map(|p| p.as_ref().map_or(0, |c| c.len())).sum();
    let mut parts = parts.into_iter();
    let mut fused = parts.next().expect("at least one frame")?;
    let extra = total - fused.len();
    fused.positions.reserve(extra);
    fused.features.reserve(extra * fused.channels);
    fused.origin.reserve(extra);
    fused.source_pixel.reserve(extra);
    for part in parts {
        fused.append(part?)?;
    }
    Ok(fused)
}
