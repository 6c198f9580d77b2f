use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use log::info;
use serde_json::{json, Value};

use ssc_fusion::dataio::{
    read_label_grid_dims, read_tensor, write_calib, write_depth_png, write_label_grid, write_ply, CalibSet, PoseTrack,
    TensorData, SEMANTIC_KITTI_DIMS,
};
use ssc_fusion::metrics::{oov_mask, ConfusionAccumulator, LabelGrid, Region};
use ssc_fusion::resample::Volume3D;
use ssc_fusion::synth::{corridor_scene, make_oov_scenario, OovTemplate, SceneSpec, CORRIDOR_STEP};
use ssc_fusion::voxel::{argmax_labels, coverage_stats, occupancy_masks, voxelize, Accumulation, VoxelBounds};
use ssc_fusion::{fuse, CameraIntrinsics, FeaturedPointCloud, FuseConfig, RigidTransform};

use crate::args::{Cli, EvalCmd, FuseCmd, SynthCmd, Template, VoxelizeCmd};
use crate::manifest::Manifest;
use crate::sequence::{
    calib_path, depth_png_path, depth_tensor_path, features_path, label_paths, load_calib, load_frames, poses_path,
    read_bytes, read_cloud, read_text, tensor_bytes, write_cloud, write_file, write_poses_file, LoadedFrames,
};

/// What a command reports back to `main`.
pub struct Outcome {
    pub summary: Value,
    /// Human-readable report for stdout, if the command has one.
    pub report: Option<String>,
    /// All built-in invariant checks passed.
    pub checks_passed: bool,
}

impl Outcome {
    fn ok(summary: Value) -> Self {
        Self {
            summary,
            report: None,
            checks_passed: true,
        }
    }
}

fn prepare_out(dir: &Path) -> Result<()> {
    if dir.exists() && !dir.is_dir() {
        bail!("output path {} exists and is not a directory", dir.display());
    }
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn points_per_offset(cloud: &FeaturedPointCloud, n: usize) -> Vec<usize> {
    let mut counts = vec![0; n];
    for &o in &cloud.origin {
        if let Some(c) = counts.get_mut(o as usize) {
            *c += 1;
        }
    }
    counts
}

/// Fuses the loaded frames and expresses the cloud in the current ego frame.
fn fuse_to_ego(loaded: &LoadedFrames, cfg: &FuseConfig) -> Result<FeaturedPointCloud> {
    let cloud = fuse(&loaded.frames, cfg)?;
    Ok(cloud.into_transformed(&loaded.camera_from_ego.inverse()))
}

pub fn fuse_cmd(cli: &Cli, cmd: &FuseCmd) -> Result<Outcome> {
    let manifest = Manifest::start("fuse", cli, !cmd.deterministic)?;
    let cfg = cmd.fusion.config();
    cfg.validate()?;
    prepare_out(&cmd.out)?;
    let loaded = load_frames(&cmd.sequence.seq, cmd.sequence.frame, cfg.n_frames)?;
    let cloud = fuse_to_ego(&loaded, &cfg)?;
    write_cloud(&cmd.out, &cloud)?;
    if cmd.ply {
        write_file(&cmd.out.join("cloud.ply"), write_ply(&cloud, usize::MAX))?;
    }
    info!("fused {} points from frames {:?}", cloud.len(), loaded.indices);
    let summary = json!({
        "n_frames": cfg.n_frames,
        "current_frame": loaded.current,
        "frame_indices": loaded.indices,
        "points": cloud.len(),
        "channels": cloud.channels,
        "points_per_offset": points_per_offset(&cloud, cfg.n_frames),
    });
    Ok(Outcome::ok(manifest.write(&cmd.out, summary)?))
}

/// `n_frames` recorded by `fuse`, else one more than the largest origin tag.
fn cloud_frame_count(dir: &Path, cloud: &FeaturedPointCloud) -> Result<usize> {
    let path = dir.join("manifest.json");
    if path.exists() {
        let m: Value = serde_json::from_str(&read_text(&path)?).with_context(|| format!("in {}", path.display()))?;
        if let Some(n) = m["summary"]["n_frames"].as_u64() {
            return Ok(n as usize);
        }
    }
    Ok(cloud.origin.iter().max().map_or(1, |&o| o as usize + 1))
}

pub fn voxelize_cmd(cli: &Cli, cmd: &VoxelizeCmd) -> Result<Outcome> {
    let manifest = Manifest::start("voxelize", cli, !cmd.deterministic)?;
    let bounds = cmd
        .grid
        .resolve(VoxelBounds::semantic_kitti_features())
        .context("invalid grid configuration")?;
    prepare_out(&cmd.out)?;
    let (cloud, n_frames) = match (&cmd.cloud, &cmd.seq) {
        (Some(dir), _) => {
            let cloud = read_cloud(dir)?;
            let n = cloud_frame_count(dir, &cloud)?;
            (cloud, n)
        }
        (None, Some(seq)) => {
            let cfg = cmd.fusion.config();
            cfg.validate()?;
            let loaded = load_frames(seq, cmd.frame, cfg.n_frames)?;
            (fuse_to_ego(&loaded, &cfg)?, cfg.n_frames)
        }
        (None, None) => bail!("either --cloud or --seq is required"),
    };
    let mode = if cmd.deterministic {
        Accumulation::Deterministic
    } else {
        Accumulation::Parallel
    };
    let grid = voxelize(&cloud, &bounds, n_frames, mode)?;
    let masks = occupancy_masks(&grid);
    let stats = coverage_stats(&cloud, &bounds, n_frames)?;

    let [x, y, z] = bounds.resolution;
    let out = &cmd.out;
    write_file(
        &out.join("grid.tensor"),
        tensor_bytes(vec![x, y, z, grid.channels], "XYZC", TensorData::F32(grid.features.clone()))?,
    )?;
    write_file(&out.join("counts.tensor"), tensor_bytes(vec![x, y, z], "XYZ", TensorData::U32(grid.counts.clone()))?)?;
    let as_u8 = |m: &[bool]| TensorData::U8(m.iter().map(|&b| b as u8).collect());
    write_file(&out.join("cross_mask.tensor"), tensor_bytes(vec![x, y, z], "XYZ", as_u8(&masks.cross))?)?;
    write_file(&out.join("self_mask.tensor"), tensor_bytes(vec![x, y, z], "XYZ", as_u8(&masks.self_))?)?;
    write_file(&out.join("stats.json"), serde_json::to_string_pretty(&stats)? + "\n")?;
    write_file(&out.join("stats.txt"), stats.to_table())?;
    info!("coverage by offset:\n{}", stats.to_table());

    let summary = json!({
        "n_frames": n_frames,
        "points": cloud.len(),
        "channels": grid.channels,
        "bounds": bounds,
        "occupied_voxels": grid.occupied(),
        "total_voxels": bounds.num_voxels(),
        "accumulation": mode,
        "coverage": stats,
    });
    Ok(Outcome::ok(manifest.write(out, summary)?))
}

fn last_pose_index(seq: &Path) -> Result<usize> {
    let poses = ssc_fusion::dataio::parse_poses(&read_text(&poses_path(seq))?)?;
    Ok(poses.len() - 1)
}

fn read_pred(path: &Path, dims: [usize; 3]) -> Result<LabelGrid> {
    let bytes = read_bytes(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("label") => {
            let n: usize = dims.iter().product();
            Ok(read_label_grid_dims(dims, &bytes, &vec![0u8; n.div_ceil(8)])
                .with_context(|| format!("in {}", path.display()))?)
        }
        Some("tensor") => {
            let t = read_tensor(&bytes).with_context(|| format!("in {}", path.display()))?;
            let [gx, gy, gz, c] = t.dims[..] else {
                bail!("{}: expected an XYZC voxel grid, got dims {:?}", path.display(), t.dims);
            };
            let data = match t.data {
                TensorData::F32(v) => v,
                _ => t.to_f64_vec().into_iter().map(|v| v as f32).collect(),
            };
            let labels = argmax_labels(&Volume3D::from_vec([gx, gy, gz], c, data)?, dims)?;
            let n = labels.len();
            Ok(LabelGrid::new(dims, labels, vec![false; n])?)
        }
        _ => bail!("{}: prediction must be a .label or .tensor file", path.display()),
    }
}

/// Camera model of the current frame for the view-region masks.
fn view_geometry(cmd: &EvalCmd, frame: Option<usize>) -> Result<Option<(CameraIntrinsics, RigidTransform)>> {
    let calib_file = cmd.calib.clone().or_else(|| cmd.seq.as_deref().map(calib_path));
    let Some(calib_file) = calib_file else {
        return Ok(None);
    };
    let calib = load_calib(&calib_file)?;
    let [w, h] = match (cmd.image, &cmd.seq, frame) {
        (Some(size), _, _) => size,
        (None, Some(seq), Some(f)) => {
            let t = depth_tensor_path(seq, f);
            if t.exists() {
                let d = read_tensor(&read_bytes(&t)?)?;
                [d.dims[1], d.dims[0]]
            } else {
                let d = ssc_fusion::dataio::read_depth_png(&read_bytes(&depth_png_path(seq, f))?)?;
                [d.width(), d.height()]
            }
        }
        _ => bail!("--calib needs --image W,H to know the image size"),
    };
    Ok(Some((calib.intrinsics(w, h)?, calib.camera_from_ego()?)))
}

pub fn eval_cmd(cli: &Cli, cmd: &EvalCmd) -> Result<Outcome> {
    let manifest = Manifest::start("eval", cli, false)?;
    let frame = match (&cmd.seq, cmd.frame) {
        (_, Some(f)) => Some(f),
        (Some(seq), None) => Some(last_pose_index(seq)?),
        (None, None) => None,
    };
    let gt_path: PathBuf = match (&cmd.gt, &cmd.seq, frame) {
        (Some(p), _, _) => p.clone(),
        (None, Some(seq), Some(f)) => label_paths(seq, f).0,
        _ => bail!("--gt or --seq is required"),
    };
    let invalid_path = cmd
        .gt_invalid
        .clone()
        .or_else(|| Some(gt_path.with_extension("invalid")).filter(|p| p.exists()));
    let dims = cmd.grid.res.unwrap_or(SEMANTIC_KITTI_DIMS);
    let bounds = cmd
        .grid
        .resolve(VoxelBounds::semantic_kitti_labels().with_resolution(dims)?)
        .context("invalid grid configuration")?;
    let mut missing: Vec<&Path> = vec![cmd.pred.as_path(), gt_path.as_path()];
    missing.extend(invalid_path.as_deref());
    missing.retain(|p| !p.exists());
    if !missing.is_empty() {
        let list: Vec<String> = missing.iter().map(|p| format!("  {}", p.display())).collect();
        bail!("missing input files:\n{}", list.join("\n"));
    }

    let n: usize = dims.iter().product();
    let invalid_bytes = match &invalid_path {
        Some(p) => read_bytes(p)?,
        None => vec![0u8; n.div_ceil(8)],
    };
    let gt = read_label_grid_dims(dims, &read_bytes(&gt_path)?, &invalid_bytes)
        .with_context(|| format!("in {}", gt_path.display()))?;
    let pred = read_pred(&cmd.pred, dims)?;
    let max_label = gt.labels.iter().chain(&pred.labels).copied().max().unwrap_or(0) as usize;
    let num_classes = cmd.classes.unwrap_or((max_label + 1).max(2));

    let region: Region = cmd.region.into();
    let view = view_geometry(cmd, frame)?;
    let mut all = ConfusionAccumulator::new(num_classes);
    all.accumulate(&pred, &gt, None)?;
    let (selected, decomposition) = match &view {
        Some((intr, cam_from_ego)) => {
            let mask = oov_mask(&bounds, intr, cam_from_ego);
            let outside = mask.out_of_view();
            let mut inside = ConfusionAccumulator::new(num_classes);
            inside.accumulate(&pred, &gt, Some(&mask.in_view))?;
            let mut oov = ConfusionAccumulator::new(num_classes);
            oov.accumulate(&pred, &gt, Some(&outside))?;
            let mut merged = inside.clone();
            merged.merge(&oov)?;
            let passed = merged == all;
            let selected = match region {
                Region::All => all.clone(),
                Region::InView => inside,
                Region::Oov => oov,
            };
            (selected, Some(passed))
        }
        None if matches!(region, Region::All) => (all.clone(), None),
        None => bail!("region {:?} needs camera geometry: pass --seq, or --calib with --image", cmd.region),
    };
    let report = selected.finalize();
    let check = match decomposition {
        Some(true) => "pass",
        Some(false) => "fail",
        None => "skipped",
    };
    let region_name = serde_json::to_value(region)?;
    let text = format!(
        "region = {}\n{}decomposition_check = {check}\n",
        region_name.as_str().unwrap_or("all"),
        report.to_text()
    );
    let summary = json!({
        "region": region_name,
        "num_classes": num_classes,
        "metrics": report,
        "decomposition_check": check,
    });
    let summary = match &cmd.out {
        Some(dir) => {
            prepare_out(dir)?;
            write_file(&dir.join("metrics.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
            write_file(&dir.join("metrics.txt"), &text)?;
            manifest.write(dir, summary)?
        }
        None => manifest.finish(summary),
    };
    Ok(Outcome {
        summary,
        report: Some(text),
        checks_passed: decomposition != Some(false),
    })
}

fn build_scene(cmd: &SynthCmd) -> Result<(SceneSpec, Value)> {
    let (mut spec, extra) = match (cmd.template, &cmd.spec) {
        (_, Some(path)) => (SceneSpec::from_json(&read_text(path)?).with_context(|| format!("in {}", path.display()))?, json!({})),
        (Some(Template::OovCar), None) => {
            let mut t = OovTemplate::default();
            if let Some(f) = cmd.frame_count {
                if f < 2 {
                    bail!("the oov-car template needs at least 2 frames");
                }
                t.history = f - 1;
            }
            if let Some(s) = cmd.speed {
                t.speed = s;
            }
            let sc = make_oov_scenario(&t)?;
            let extra = json!({
                "hidden_primitive": sc.hidden,
                "hidden_class": sc.hidden_class(),
                "visible_frames": sc.visible_frames,
            });
            (sc.spec, extra)
        }
        (Some(Template::Corridor), None) => (
            corridor_scene(cmd.frame_count.unwrap_or(6), cmd.speed.unwrap_or(CORRIDOR_STEP))?,
            json!({}),
        ),
        (None, None) => return Err(anyhow!("--template or --spec is required")),
    };
    if let Some(seed) = cmd.seed {
        spec.seed = seed;
    }
    if let Some(noise) = cmd.noise {
        spec.depth_noise_std = noise;
    }
    spec.validate()?;
    Ok((spec, extra))
}

pub fn synth_cmd(cli: &Cli, cmd: &SynthCmd) -> Result<Outcome> {
    // generation is deterministic per seed, so the manifest never records
    // wall-clock time
    let manifest = Manifest::start("synth", cli, false)?;
    let (spec, extra) = build_scene(cmd)?;
    prepare_out(&cmd.out)?;
    let dir = &cmd.out;
    let i = &spec.intrinsics;
    let projection = [[i.fx, 0.0, i.cx, 0.0], [0.0, i.fy, i.cy, 0.0], [0.0, 0.0, 1.0, 0.0]];
    write_file(&calib_path(dir), write_calib(&CalibSet::new(projection, spec.camera_from_ego)?))?;
    write_poses_file(dir, &PoseTrack((0..spec.frame_count).map(|k| spec.camera_pose(k)).collect()))?;
    write_file(&dir.join("scene.json"), spec.to_json()? + "\n")?;
    for k in 0..spec.frame_count {
        let depth = spec.render_depth(k)?;
        let (h, w) = (depth.height(), depth.width());
        write_file(&depth_png_path(dir, k), write_depth_png(&depth)?)?;
        write_file(&depth_tensor_path(dir, k), tensor_bytes(vec![h, w], "HW", TensorData::F64(depth.into_vec()))?)?;
        let feats = spec.render_features(k)?;
        let c = feats.channels();
        write_file(&features_path(dir, k), tensor_bytes(vec![h, w, c], "HWC", TensorData::F32(feats.into_vec()))?)?;
    }
    let current = spec.current_index();
    let labels = spec.ground_truth_labels(&VoxelBounds::semantic_kitti_labels())?;
    let (label_bytes, invalid_bytes) = write_label_grid(&labels);
    let (label_file, invalid_file) = label_paths(dir, current);
    write_file(&label_file, label_bytes)?;
    write_file(&invalid_file, invalid_bytes)?;
    info!("wrote {} frames to {}", spec.frame_count, dir.display());

    let mut summary = json!({
        "frame_count": spec.frame_count,
        "current_frame": current,
        "num_classes": spec.num_classes,
        "labeled_voxels": labels.labels.iter().filter(|&&l| l > 0).count(),
    });
    if let (Value::Object(s), Value::Object(e)) = (&mut summary, extra) {
        s.extend(e);
    }
    Ok(Outcome::ok(manifest.write(dir, summary)?))
}
