//! Sequence directories and fused-cloud directories on disk.
//!
//! A sequence directory holds `calib.txt`, `poses.txt` (one `world <- camera`
//! pose per frame), `depth/NNNNNN.tensor` or `depth/NNNNNN.png`,
//! `features/NNNNNN.tensor` (HWC) and optionally
//! `labels/NNNNNN.label` + `.invalid`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{info, warn};

use ssc_fusion::dataio::{
    parse_calib, parse_poses, read_depth_png, read_tensor, write_tensor, CalibSet, PoseTrack, Tensor, TensorData,
};
use ssc_fusion::resample::Plane2D;
use ssc_fusion::{FeaturedPointCloud, FrameBundle, RigidTransform};

pub fn frame_name(i: usize) -> String {
    format!("{i:06}")
}

pub fn calib_path(dir: &Path) -> PathBuf {
    dir.join("calib.txt")
}

pub fn poses_path(dir: &Path) -> PathBuf {
    dir.join("poses.txt")
}

pub fn depth_tensor_path(dir: &Path, i: usize) -> PathBuf {
    dir.join("depth").join(format!("{}.tensor", frame_name(i)))
}

pub fn depth_png_path(dir: &Path, i: usize) -> PathBuf {
    dir.join("depth").join(format!("{}.png", frame_name(i)))
}

pub fn features_path(dir: &Path, i: usize) -> PathBuf {
    dir.join("features").join(format!("{}.tensor", frame_name(i)))
}

pub fn label_paths(dir: &Path, i: usize) -> (PathBuf, PathBuf) {
    let base = dir.join("labels").join(frame_name(i));
    (base.with_extension("label"), base.with_extension("invalid"))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

pub fn load_calib(path: &Path) -> Result<CalibSet> {
    parse_calib(&read_text(path)?).with_context(|| format!("in {}", path.display()))
}

/// The fused frames plus what is needed to place them in the ego frame.
pub struct LoadedFrames {
    pub frames: Vec<FrameBundle>,
    pub current: usize,
    pub indices: Vec<usize>,
    /// `P2` camera <- ego of the current frame.
    pub camera_from_ego: RigidTransform,
}

fn read_depth(dir: &Path, i: usize) -> Result<Plane2D<f64>> {
    let tensor = depth_tensor_path(dir, i);
    if tensor.exists() {
        let t = read_tensor(&read_bytes(&tensor)?).with_context(|| format!("in {}", tensor.display()))?;
        let (h, w) = match t.dims.as_slice() {
            [h, w] | [h, w, 1] => (*h, *w),
            d => bail!("{}: depth must be HW or HW1, got dims {d:?}", tensor.display()),
        };
        return Ok(Plane2D::from_vec(h, w, 1, t.to_f64_vec())?);
    }
    let png = depth_png_path(dir, i);
    read_depth_png(&read_bytes(&png)?).with_context(|| format!("in {}", png.display()))
}

fn read_features(dir: &Path, i: usize) -> Result<Plane2D<f32>> {
    let path = features_path(dir, i);
    let t = read_tensor(&read_bytes(&path)?).with_context(|| format!("in {}", path.display()))?;
    let [h, w, c] = t.dims[..] else {
        bail!("{}: features must be HWC, got dims {:?}", path.display(), t.dims);
    };
    let data = match t.data {
        TensorData::F32(v) => v,
        _ => t.to_f64_vec().into_iter().map(|v| v as f32).collect(),
    };
    Ok(Plane2D::from_vec(h, w, c, data)?)
}

/// Loads frames `current, current-1, ...` (`n` of them) from a sequence
/// directory. Before the start of the sequence the first frame is repeated.
/// All absent inputs are reported together.
pub fn load_frames(dir: &Path, frame: Option<usize>, n: usize) -> Result<LoadedFrames> {
    if !dir.is_dir() {
        bail!("sequence directory {} does not exist", dir.display());
    }
    let mut missing: Vec<PathBuf> = [calib_path(dir), poses_path(dir)]
        .into_iter()
        .filter(|p| !p.exists())
        .collect();
    let poses = if poses_path(dir).exists() {
        Some(parse_poses(&read_text(&poses_path(dir))?).with_context(|| format!("in {}", poses_path(dir).display()))?)
    } else {
        None
    };
    let current = match (frame, &poses) {
        (Some(f), _) => Some(f),
        (None, Some(p)) => Some(p.len() - 1),
        (None, None) => None,
    };
    let indices: Vec<usize> = match current {
        Some(c) => (0..n).map(|o| c.saturating_sub(o)).collect(),
        None => vec![],
    };
    for &i in &indices {
        if !depth_tensor_path(dir, i).exists() && !depth_png_path(dir, i).exists() {
            missing.push(depth_png_path(dir, i));
        }
        if !features_path(dir, i).exists() {
            missing.push(features_path(dir, i));
        }
    }
    missing.dedup();
    if !missing.is_empty() {
        let list: Vec<String> = missing.iter().map(|p| format!("  {}", p.display())).collect();
        bail!("missing input files:\n{}", list.join("\n"));
    }
    let (poses, current) = (poses.unwrap(), current.unwrap());
    if current >= poses.len() {
        bail!("frame {current} out of range: poses.txt has {} poses", poses.len());
    }
    if current + 1 < n {
        warn!("frame {current} has only {} predecessors; repeating frame 0", current);
    }

    let calib = load_calib(&calib_path(dir))?;
    let offset = calib.camera_offset()?;
    let frames = indices
        .iter()
        .enumerate()
        .map(|(o, &i)| {
            let depth = read_depth(dir, i)?;
            let intr = calib.intrinsics(depth.width(), depth.height())?;
            // poses.txt holds the reference camera; P2 sits at `offset` from it
            let pose = poses.0[i].compose(&offset.inverse());
            Ok(FrameBundle::new(read_features(dir, i)?, depth, intr, pose, o)?)
        })
        .collect::<Result<Vec<_>>>()?;
    info!("loaded frames {indices:?} from {}", dir.display());
    Ok(LoadedFrames {
        frames,
        current,
        indices,
        camera_from_ego: calib.camera_from_ego()?,
    })
}

pub fn write_poses_file(dir: &Path, poses: &PoseTrack) -> Result<()> {
    write_file(&poses_path(dir), ssc_fusion::dataio::write_poses(poses))
}

pub fn tensor_bytes(dims: Vec<usize>, axes: &str, data: TensorData) -> Result<Vec<u8>> {
    Ok(write_tensor(&Tensor::new(dims, axes, data)?)?)
}

pub const CLOUD_POSITIONS: &str = "cloud_positions.tensor";
pub const CLOUD_FEATURES: &str = "cloud_features.tensor";
pub const CLOUD_ORIGIN: &str = "cloud_origin.tensor";

pub fn write_cloud(dir: &Path, cloud: &FeaturedPointCloud) -> Result<()> {
    let n = cloud.len();
    let pos: Vec<f64> = cloud.positions.iter().flatten().copied().collect();
    write_file(&dir.join(CLOUD_POSITIONS), tensor_bytes(vec![n, 3], "ND", TensorData::F64(pos))?)?;
    write_file(
        &dir.join(CLOUD_FEATURES),
        tensor_bytes(vec![n, cloud.channels], "NC", TensorData::F32(cloud.features.clone()))?,
    )?;
    write_file(&dir.join(CLOUD_ORIGIN), tensor_bytes(vec![n], "N", TensorData::U32(cloud.origin.clone()))?)
}

pub fn read_cloud(dir: &Path) -> Result<FeaturedPointCloud> {
    let missing: Vec<String> = [CLOUD_POSITIONS, CLOUD_FEATURES, CLOUD_ORIGIN]
        .iter()
        .map(|f| dir.join(f))
        .filter(|p| !p.exists())
        .map(|p| format!("  {}", p.display()))
        .collect();
    if !missing.is_empty() {
        bail!("missing input files:\n{}", missing.join("\n"));
    }
    let load = |name: &str| -> Result<Tensor> {
        let p = dir.join(name);
        read_tensor(&read_bytes(&p)?).with_context(|| format!("in {}", p.display()))
    };
    let (pos, feats, origin) = (load(CLOUD_POSITIONS)?, load(CLOUD_FEATURES)?, load(CLOUD_ORIGIN)?);
    let (Some(p), Some(f), TensorData::U32(o)) = (pos.as_f64(), feats.as_f32(), &origin.data) else {
        bail!("cloud tensors must be f64 positions, f32 features and u32 origins");
    };
    let n = o.len();
    if pos.dims != [n, 3] || feats.dims.len() != 2 || feats.dims[0] != n {
        bail!(
            "inconsistent cloud tensors: positions {:?}, features {:?}, origins {:?}",
            pos.dims,
            feats.dims,
            origin.dims
        );
    }
    let cloud = FeaturedPointCloud {
        positions: p.chunks(3).map(|c| [c[0], c[1], c[2]]).collect(),
        features: f.to_vec(),
        channels: feats.dims[1],
        origin: o.clone(),
        source_pixel: vec![[f64::NAN; 2]; n],
    };
    cloud.validate()?;
    Ok(cloud)
}
