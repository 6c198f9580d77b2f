//! Geometric core of a multi-frame camera fusion pipeline for semantic scene
//! completion.
//!
//! Historical and current camera frames are lifted into 3D with their
//! per-pixel features, aligned into the current frame by their poses, and
//! aggregated into a dense voxel feature grid:
//!
//! * [`geometry`]: pinhole camera model, pixel grids and SE(3) transforms.
//! * [`resample`]: half-pixel-center bilinear/trilinear resizing and min-max
//!   normalization.
//! * [`fusion`]: per-frame lifting, depth-weighted blurring of history,
//!   densification of the current frame and the union of all frames.
//! * [`voxel`]: bounds filtering, scatter-add voxel aggregation, occupancy
//!   masks and per-frame coverage statistics.
//! * [`metrics`]: IoU / mIoU accumulation, including out-of-view regions.
//! * [`dataio`]: KITTI-style calibration/poses, depth PNGs, voxel label
//!   grids, PLY export and a portable tensor container.
//! * [`synth`]: analytic ray-cast scenes used as test oracles.

pub mod dataio;
pub mod error;
pub mod fusion;
pub mod geometry;
pub mod metrics;
pub mod resample;
pub mod synth;
pub mod voxel;

pub use error::{Error, Result};
pub use fusion::{fuse, lift_frame, FeaturedPointCloud, FrameBundle, FuseConfig};
pub use geometry::{CameraIntrinsics, PixelGrid, Point3, RigidTransform};
pub use resample::{Plane2D, Volume3D};
pub use voxel::{FeatureVoxelGrid, VoxelBounds};
