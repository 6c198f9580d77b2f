//! Voxel aggregation of fused point features.
//!
//! Points outside the half-open box `[min, max)` are discarded; the rest are
//! scatter-added into their voxel and each voxel sum is divided by the number
//! of fused frames. Empty voxels hold the zero vector.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fusion::FeaturedPointCloud;
use crate::geometry::Point3;
use crate::resample::{trilinear_resize, Volume3D};

/// Axis-aligned voxelized region of the ego frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoxelBounds {
    pub min: Point3,
    pub max: Point3,
    pub resolution: [usize; 3],
}

impl VoxelBounds {
    pub fn new(min: Point3, max: Point3, resolution: [usize; 3]) -> Result<Self> {
        let b = Self {
            min,
            max,
            resolution,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        for a in 0..3 {
            if !(self.min[a].is_finite() && self.max[a].is_finite() && self.max[a] > self.min[a]) {
                return invalid(format!(
                    "bounds axis {a} has non-positive extent [{}, {})",
                    self.min[a], self.max[a]
                ));
            }
            if self.resolution[a] == 0 {
                return invalid(format!("bounds axis {a} has zero resolution"));
            }
        }
        Ok(())
    }

    /// 0.2 m label grid: 51.2 m forward, 51.2 m lateral, 6.4 m vertical.
    pub fn semantic_kitti_labels() -> Self {
        Self {
            min: [0.0, -25.6, -2.0],
            max: [51.2, 25.6, 4.4],
            resolution: [256, 256, 32],
        }
    }

    /// Same extent at half resolution (0.4 m voxels).
    pub fn semantic_kitti_features() -> Self {
        Self {
            resolution: [128, 128, 16],
            ..Self::semantic_kitti_labels()
        }
    }

    pub fn with_resolution(&self, resolution: [usize; 3]) -> Result<Self> {
        Self::new(self.min, self.max, resolution)
    }

    pub fn voxel_size(&self) -> [f64; 3] {
        std::array::from_fn(|a| (self.max[a] - self.min[a]) / self.resolution[a] as f64)
    }

    pub fn num_voxels(&self) -> usize {
        self.resolution.iter().product()
    }

    #[inline]
    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] < self.max[a])
    }

    /// Lower corner of voxel `i` along axis `a`.
    #[inline]
    pub fn voxel_lower(&self, a: usize, i: usize) -> f64 {
        self.min[a] + i as f64 * self.voxel_size()[a]
    }

    /// Half-open box `[lo, hi)` of a voxel.
    pub fn voxel_box(&self, idx: [usize; 3]) -> (Point3, Point3) {
        let lo = std::array::from_fn(|a| self.voxel_lower(a, idx[a]));
        let hi = std::array::from_fn(|a| {
            if idx[a] + 1 == self.resolution[a] {
                self.max[a]
            } else {
                self.voxel_lower(a, idx[a] + 1)
            }
        });
        (lo, hi)
    }

    pub fn voxel_center(&self, idx: [usize; 3]) -> Point3 {
        let size = self.voxel_size();
        std::array::from_fn(|a| self.min[a] + (idx[a] as f64 + 0.5) * size[a])
    }

    /// Voxel holding `p`, or `None` outside the bounds. The index is
    /// consistent with [`VoxelBounds::voxel_box`] even where floor division
    /// rounds across a face.
    pub fn voxel_index(&self, p: &Point3) -> Option<[usize; 3]> {
        if !self.contains(p) {
            return None;
        }
        let size = self.voxel_size();
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let res = self.resolution[a];
            let mut i = (((p[a] - self.min[a]) / size[a]).floor() as usize).min(res - 1);
            if i > 0 && p[a] < self.voxel_lower(a, i) {
                i -= 1;
            } else if i + 1 < res && p[a] >= self.voxel_lower(a, i + 1) {
                i += 1;
            }
            idx[a] = i;
        }
        Some(idx)
    }

    #[inline]
    pub fn flat_index(&self, idx: [usize; 3]) -> usize {
        let [_, ry, rz] = self.resolution;
        (idx[0] * ry + idx[1]) * rz + idx[2]
    }

    pub fn unflatten(&self, flat: usize) -> [usize; 3] {
        let [_, ry, rz] = self.resolution;
        [flat / (ry * rz), (flat / rz) % ry, flat % rz]
    }
}

pub fn filter_bounds(cloud: &FeaturedPointCloud, bounds: &VoxelBounds) -> FeaturedPointCloud {
    cloud.select(|i| bounds.contains(&cloud.positions[i]))
}

/// How voxel sums are accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Accumulation {
    /// Every voxel sums its points in point-index order; output is
    /// bit-identical for any thread count.
    #[default]
    Deterministic,
    /// Per-thread partial grids merged by addition. Agrees with the
    /// deterministic result within float reassociation error.
    Parallel,
}

/// Dense `X x Y x Z x C` voxel features with per-voxel point counts.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVoxelGrid {
    pub bounds: VoxelBounds,
    pub channels: usize,
    pub features: Vec<f32>,
    pub counts: Vec<u32>,
    pub n_frames: usize,
}

impl FeatureVoxelGrid {
    pub fn feature(&self, flat: usize) -> &[f32] {
        &self.features[flat * self.channels..(flat + 1) * self.channels]
    }

    pub fn occupied(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    pub fn to_volume(&self) -> Result<Volume3D<f32>> {
        Volume3D::from_vec(self.bounds.resolution, self.channels.max(1), if self.channels == 0 {
            vec![0.0; self.counts.len()]
        } else {
            self.features.clone()
        })
    }
}

const OUTSIDE: u32 = u32::MAX;

fn voxel_indices(cloud: &FeaturedPointCloud, bounds: &VoxelBounds) -> Result<Vec<u32>> {
    if bounds.num_voxels() >= OUTSIDE as usize {
        return invalid("voxel grid too large for 32-bit indexing");
    }
    Ok(cloud
        .positions
        .par_iter()
        .map(|p| {
            bounds
                .voxel_index(p)
                .map_or(OUTSIDE, |idx| bounds.flat_index(idx) as u32)
        })
        .collect())
}

/// Scatter-adds in-bounds point features into voxels and divides each sum
/// by `n_frames`. Out-of-bounds points are skipped.
pub fn voxelize(
    cloud: &FeaturedPointCloud,
    bounds: &VoxelBounds,
    n_frames: usize,
    mode: Accumulation,
) -> Result<FeatureVoxelGrid> {
    if n_frames == 0 {
        return invalid("n_frames must be at least 1");
    }
    bounds.validate()?;
    cloud.validate()?;
    let ch = cloud.channels;
    let nv = bounds.num_voxels();
    let vidx = voxel_indices(cloud, bounds)?;

    let (sums, counts) = match mode {
        _ if ch == 0 => {
            let mut counts = vec![0u32; nv];
            vidx.iter().filter(|&&v| v != OUTSIDE).for_each(|&v| counts[v as usize] += 1);
            (Vec::new(), counts)
        }
        Accumulation::Deterministic => accumulate_sharded(cloud, &vidx, nv),
        Accumulation::Parallel => accumulate_partials(cloud, &vidx, nv),
    };

    let n = n_frames as f64;
    let features = sums
        .par_chunks(ch.max(1))
        .zip(counts.par_iter())
        .flat_map_iter(|(s, &c)| {
            s.iter()
                .take(ch)
                .map(move |&v| if c == 0 { 0.0 } else { (v / n) as f32 })
        })
        .collect();
    Ok(FeatureVoxelGrid {
        bounds: *bounds,
        channels: ch,
        features,
        counts,
        n_frames,
    })
}

/// Splits the voxel range into one contiguous shard per thread. Each shard
/// scans all points in order, so every voxel sum has a fixed order.
fn accumulate_sharded(cloud: &FeaturedPointCloud, vidx: &[u32], nv: usize) -> (Vec<f64>, Vec<u32>) {
    let ch = cloud.channels;
    let shards = rayon::current_num_threads().clamp(1, nv);
    let per = nv.div_ceil(shards);
    let mut sums = vec![0f64; nv * ch];
    let mut counts = vec![0u32; nv];
    sums.par_chunks_mut((per * ch).max(1))
        .zip(counts.par_chunks_mut(per))
        .enumerate()
        .for_each(|(s, (sum, cnt))| {
            let lo = (s * per) as u32;
            let hi = lo + cnt.len() as u32;
            for (i, &v) in vidx.iter().enumerate() {
                if v < lo || v >= hi {
                    continue;
                }
                let local = (v - lo) as usize;
                cnt[local] += 1;
                let f = &cloud.features[i * ch..(i + 1) * ch];
                for (acc, &x) in sum[local * ch..(local + 1) * ch].iter_mut().zip(f) {
                    *acc += x as f64;
                }
            }
        });
    (sums, counts)
}

fn accumulate_partials(cloud: &FeaturedPointCloud, vidx: &[u32], nv: usize) -> (Vec<f64>, Vec<u32>) {
    let ch = cloud.channels;
    let empty = || (vec![0f64; nv * ch], vec![0u32; nv]);
    vidx.par_iter()
        .enumerate()
        .fold(empty, |(mut sum, mut cnt), (i, &v)| {
            if v != OUTSIDE {
                let v = v as usize;
                cnt[v] += 1;
                let f = &cloud.features[i * ch..(i + 1) * ch];
                for (acc, &x) in sum[v * ch..(v + 1) * ch].iter_mut().zip(f) {
                    *acc += x as f64;
                }
            }
            (sum, cnt)
        })
        .reduce(empty, |(mut sa, mut ca), (sb, cb)| {
            sa.iter_mut().zip(&sb).for_each(|(a, b)| *a += b);
            ca.iter_mut().zip(&cb).for_each(|(a, b)| *a += b);
            (sa, ca)
        })
}

/// Occupied (`cross`) and unoccupied (`self_`) voxels; the two partition
/// the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMasks {
    pub cross: Vec<bool>,
    pub self_: Vec<bool>,
}

pub fn occupancy_masks(grid: &FeatureVoxelGrid) -> OccupancyMasks {
    let cross: Vec<bool> = grid.counts.iter().map(|&c| c > 0).collect();
    let self_ = cross.iter().map(|&c| !c).collect();
    OccupancyMasks { cross, self_ }
}

/// Contribution of one time offset to the voxel grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub offset: u32,
    pub lifted_points: usize,
    pub surviving_points: usize,
    pub point_fraction: f64,
    pub touched_voxels: usize,
    pub voxel_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageStats {
    pub total_voxels: usize,
    pub rows: Vec<CoverageRow>,
}

impl CoverageStats {
    pub fn row(&self, offset: u32) -> Option<&CoverageRow> {
        self.rows.iter().find(|r| r.offset == offset)
    }

    /// Aligned text table, one line per offset.
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<8} {:>12} {:>12} {:>9} {:>10} {:>9}\n",
            "offset", "lifted", "surviving", "points%", "voxels", "voxels%"
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{:<8} {:>12} {:>12} {:>8.2}% {:>10} {:>8.2}%\n",
                if r.offset == 0 { "t".to_string() } else { format!("t-{}", r.offset) },
                r.lifted_points,
                r.surviving_points,
                100.0 * r.point_fraction,
                r.touched_voxels,
                100.0 * r.voxel_fraction
            ));
        }
        s
    }
}

/// Per-offset survivors of bounds filtering and distinct voxels touched,
/// computed on the unfiltered fused cloud. There is one row for every
/// offset below `n_frames` (all zero when the frame left no points) and for
/// any larger offset present in the cloud.
pub fn coverage_stats(cloud: &FeaturedPointCloud, bounds: &VoxelBounds, n_frames: usize) -> Result<CoverageStats> {
    bounds.validate()?;
    let nv = bounds.num_voxels();
    let mut offsets: Vec<u32> = cloud.origin.iter().copied().chain(0..n_frames as u32).collect();
    offsets.sort_unstable();
    offsets.dedup();
    let vidx = voxel_indices(cloud, bounds)?;
    let rows = offsets
        .par_iter()
        .map(|&off| {
            let mut touched = vec![false; nv];
            let (mut lifted, mut surviving, mut voxels) = (0usize, 0usize, 0usize);
            for (i, &v) in vidx.iter().enumerate() {
                if cloud.origin[i] != off {
                    continue;
                }
                lifted += 1;
                if v != OUTSIDE {
                    surviving += 1;
                    let t = &mut touched[v as usize];
                    if !*t {
                        *t = true;
                        voxels += 1;
                    }
                }
            }
            CoverageRow {
                offset: off,
                lifted_points: lifted,
                surviving_points: surviving,
                point_fraction: if lifted == 0 { 0.0 } else { surviving as f64 / lifted as f64 },
                touched_voxels: voxels,
                voxel_fraction: voxels as f64 / nv as f64,
            }
        })
        .collect();
    Ok(CoverageStats {
        total_voxels: nv,
        rows,
    })
}

/// Per-voxel class from a feature volume: channel argmax where the largest
/// value is positive, class 0 (empty) otherwise. The volume is first
/// trilinearly resized when `target` differs from its dimensions.
pub fn argmax_labels(volume: &Volume3D<f32>, target: [usize; 3]) -> Result<Vec<u16>> {
    let resized;
    let vol = if volume.dims() == target {
        volume
    } else {
        resized = trilinear_resize(volume, target)?;
        &resized
    };
    let ch = vol.channels();
    if ch > u16::MAX as usize {
        return invalid("too many channels for 16-bit labels");
    }
    Ok(vol
        .data()
        .par_chunks(ch)
        .map(|f| {
            let mut best = 0usize;
            for (c, &v) in f.iter().enumerate() {
                if v > f[best] {
                    best = c;
                }
            }
            if f[best] > 0.0 {
                best as u16
            } else {
                0
            }
        })
        .collect())
}
