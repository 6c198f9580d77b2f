//! Analytic scenes for oracle testing.
//!
//! A scene is a list of axis-aligned boxes and planar slabs in a world frame,
//! observed by a pinhole camera moving along a straight line. Depth maps are
//! exact per-pixel ray casts, feature maps are one-hot class codes of the hit
//! primitive, and voxel labels come from primitive containment of voxel
//! centers. Frame `frame_count - 1` is the current frame.

// `!(x > 0.0)` style checks below also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use nalgebra::Matrix3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fusion::FrameBundle;
use crate::geometry::{project_point, CameraIntrinsics, Point3, RigidTransform};
use crate::metrics::LabelGrid;
use crate::resample::Plane2D;
use crate::voxel::VoxelBounds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    /// Closed box `[min, max]`.
    Box { min: Point3, max: Point3, class: u16 },
    /// Surface `normal . p = offset`; the solid is the slab of `thickness`
    /// behind the surface (opposite the normal).
    Plane {
        normal: [f64; 3],
        offset: f64,
        thickness: f64,
        class: u16,
    },
}

impl Primitive {
    pub fn class(&self) -> u16 {
        match self {
            Primitive::Box { class, .. } | Primitive::Plane { class, .. } => *class,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Primitive::Box { min, max, .. } => {
                if (0..3).any(|a| !(max[a] > min[a]) || !min[a].is_finite() || !max[a].is_finite()) {
                    return invalid(format!("degenerate box {min:?}..{max:?}"));
                }
            }
            Primitive::Plane {
                normal,
                offset,
                thickness,
                ..
            } => {
                let n2: f64 = normal.iter().map(|v| v * v).sum();
                if !(n2 > 0.0) || !n2.is_finite() || !offset.is_finite() || !(*thickness > 0.0) {
                    return invalid("plane needs a non-zero normal and positive thickness");
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &Point3) -> bool {
        match self {
            Primitive::Box { min, max, .. } => (0..3).all(|a| p[a] >= min[a] && p[a] <= max[a]),
            Primitive::Plane {
                normal,
                offset,
                thickness,
                ..
            } => {
                let norm = dot(normal, normal).sqrt();
                let s = (dot(normal, p) - offset) / norm;
                s <= 0.0 && s >= -thickness
            }
        }
    }

    /// Smallest positive ray parameter `t` with `o + t d` on the surface.
    pub fn intersect(&self, o: &Point3, d: &Point3) -> Option<f64> {
        match self {
            Primitive::Box { min, max, .. } => {
                let mut t_enter = f64::NEG_INFINITY;
                let mut t_exit = f64::INFINITY;
                for a in 0..3 {
                    if d[a] == 0.0 {
                        if o[a] < min[a] || o[a] > max[a] {
                            return None;
                        }
                        continue;
                    }
                    let t0 = (min[a] - o[a]) / d[a];
                    let t1 = (max[a] - o[a]) / d[a];
                    t_enter = t_enter.max(t0.min(t1));
                    t_exit = t_exit.min(t0.max(t1));
                }
                if t_enter > t_exit || t_exit <= 0.0 {
                    None
                } else if t_enter > 0.0 {
                    Some(t_enter)
                } else {
                    Some(t_exit)
                }
            }
            Primitive::Plane { normal, offset, .. } => {
                let denom = dot(normal, d);
                if denom == 0.0 {
                    return None;
                }
                let t = (offset - dot(normal, o)) / denom;
                (t > 0.0).then_some(t)
            }
        }
    }
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Camera poses `world <- camera` of frame `k`: `start` shifted by `k * step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraPath {
    pub start: RigidTransform,
    pub step: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub primitives: Vec<Primitive>,
    pub camera_path: CameraPath,
    /// Camera <- ego mounting; labels are produced in the current ego frame.
    #[serde(default)]
    pub camera_from_ego: RigidTransform,
    pub intrinsics: CameraIntrinsics,
    pub frame_count: usize,
    /// Label ids are `0..num_classes`, 0 meaning empty.
    pub num_classes: usize,
    #[serde(default)]
    pub seed: u64,
    /// Standard deviation of additive Gaussian depth noise in meters.
    #[serde(default)]
    pub depth_noise_std: f64,
}

/// Camera <- ego rotation for an ego frame with +X forward, +Y left, +Z up.
pub fn forward_left_up_camera() -> RigidTransform {
    let r = Matrix3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0);
    RigidTransform::new(r, nalgebra::Vector3::zeros()).expect("axis permutation is a rotation")
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        if self.frame_count == 0 {
            return invalid("frame_count must be at least 1");
        }
        if self.num_classes < 2 {
            return invalid("scenes need at least one non-empty class");
        }
        if !(self.depth_noise_std >= 0.0) {
            return invalid("depth_noise_std must be non-negative");
        }
        for p in &self.primitives {
            p.validate()?;
            let c = p.class() as usize;
            if c == 0 || c >= self.num_classes {
                return invalid(format!(
                    "primitive class {c} outside 1..{}",
                    self.num_classes
                ));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn current_index(&self) -> usize {
        self.frame_count - 1
    }

    pub fn offset_of(&self, frame: usize) -> usize {
        self.current_index() - frame
    }

    /// `world <- camera` of frame `k`.
    pub fn camera_pose(&self, k: usize) -> RigidTransform {
        let s = self.camera_path.step;
        let f = k as f64;
        RigidTransform::from_translation([f * s[0], f * s[1], f * s[2]]).compose(&self.camera_path.start)
    }

    /// `world <- ego` of frame `k`.
    pub fn ego_pose(&self, k: usize) -> RigidTransform {
        self.camera_pose(k).compose(&self.camera_from_ego)
    }

    fn check_frame(&self, k: usize) -> Result<()> {
        if k >= self.frame_count {
            return invalid(format!(
                "frame {k} out of range for {} frames",
                self.frame_count
            ));
        }
        Ok(())
    }

    /// Nearest hit `(depth, class)` per pixel, row-major.
    fn cast(&self, k: usize) -> Vec<Option<(f64, u16)>> {
        let pose = self.camera_pose(k);
        let intr = &self.intrinsics;
        let origin = pose.apply(&[0.0; 3]);
        let rot = *pose.rotation();
        let w = intr.width;
        let mut hits = vec![None; intr.width * intr.height];
        hits.par_chunks_mut(w).enumerate().for_each(|(r, row)| {
            for (c, slot) in row.iter_mut().enumerate() {
                let d_cam = nalgebra::Vector3::new(
                    (c as f64 - intr.cx) / intr.fx,
                    (r as f64 - intr.cy) / intr.fy,
                    1.0,
                );
                let d = rot * d_cam;
                let d = [d[0], d[1], d[2]];
                let mut best: Option<(f64, u16)> = None;
                for p in &self.primitives {
                    if let Some(t) = p.intersect(&origin, &d) {
                        if best.is_none_or(|(bt, _)| t < bt) {
                            best = Some((t, p.class()));
                        }
                    }
                }
                *slot = best;
            }
        });
        hits
    }

    /// The direction has unit camera-z, so the ray parameter is the depth.
    pub fn render_depth(&self, k: usize) -> Result<Plane2D<f64>> {
        self.check_frame(k)?;
        let mut depth: Vec<f64> = self
            .cast(k)
            .iter()
            .map(|h| h.map_or(f64::NAN, |(t, _)| t))
            .collect();
        if self.depth_noise_std > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let noise = Normal::new(0.0, self.depth_noise_std)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            for d in depth.iter_mut().filter(|d| d.is_finite()) {
                *d += noise.sample(&mut rng);
            }
        }
        Plane2D::from_vec(self.intrinsics.height, self.intrinsics.width, 1, depth)
    }

    /// One-hot class code of the hit primitive; zeros where nothing is hit.
    pub fn render_features(&self, k: usize) -> Result<Plane2D<f32>> {
        self.check_frame(k)?;
        let nc = self.num_classes;
        let mut data = vec![0f32; self.intrinsics.width * self.intrinsics.height * nc];
        for (i, h) in self.cast(k).iter().enumerate() {
            if let Some((_, class)) = h {
                data[i * nc + *class as usize] = 1.0;
            }
        }
        Plane2D::from_vec(self.intrinsics.height, self.intrinsics.width, nc, data)
    }

    pub fn render_frame(&self, k: usize) -> Result<FrameBundle> {
        FrameBundle::new(
            self.render_features(k)?,
            self.render_depth(k)?,
            self.intrinsics,
            self.camera_pose(k),
            self.offset_of(k),
        )
    }

    /// The latest `n` frames, current first.
    pub fn render_latest(&self, n: usize) -> Result<Vec<FrameBundle>> {
        if n == 0 || n > self.frame_count {
            return invalid(format!(
                "cannot take {n} frames from a {}-frame scene",
                self.frame_count
            ));
        }
        let cur = self.current_index();
        (0..n).into_par_iter().map(|o| self.render_frame(cur - o)).collect()
    }

    /// Ego <- current camera, for moving fused clouds into the label frame.
    pub fn ego_from_camera(&self) -> RigidTransform {
        self.camera_from_ego.inverse()
    }

    /// Labels of voxel centers in the current ego frame: class of the first
    /// listed primitive containing the center, 0 otherwise. Nothing is
    /// marked invalid.
    pub fn ground_truth_labels(&self, bounds: &VoxelBounds) -> Result<LabelGrid> {
        bounds.validate()?;
        let world_from_ego = self.ego_pose(self.current_index());
        let [rx, ry, rz] = bounds.resolution;
        let labels: Vec<u16> = (0..rx * ry * rz)
            .into_par_iter()
            .map(|flat| {
                let c = world_from_ego.apply(&bounds.voxel_center(bounds.unflatten(flat)));
                self.primitives
                    .iter()
                    .find(|p| p.contains(&c))
                    .map_or(0, |p| p.class())
            })
            .collect();
        LabelGrid::new(bounds.resolution, labels, vec![false; rx * ry * rz])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Eight corners of a box.
fn corners(min: &Point3, max: &Point3) -> [Point3; 8] {
    std::array::from_fn(|i| {
        [
            if i & 1 == 0 { min[0] } else { max[0] },
            if i & 2 == 0 { min[1] } else { max[1] },
            if i & 4 == 0 { min[2] } else { max[2] },
        ]
    })
}

/// Every corner of a world-frame box projects inside the image of frame `k`.
pub fn box_fully_in_view(spec: &SceneSpec, k: usize, min: &Point3, max: &Point3) -> bool {
    let cam_from_world = spec.camera_pose(k).inverse();
    corners(min, max).iter().all(|c| {
        project_point(&cam_from_world.apply(c), &spec.intrinsics).in_image(&spec.intrinsics)
    })
}

/// The box lies entirely on the outer side of one frustum plane of frame
/// `k`, hence does not intersect the frustum.
pub fn box_fully_out_of_view(spec: &SceneSpec, k: usize, min: &Point3, max: &Point3) -> bool {
    let cam_from_world = spec.camera_pose(k).inverse();
    let cs: Vec<Point3> = corners(min, max).iter().map(|c| cam_from_world.apply(c)).collect();
    let i = &spec.intrinsics;
    let (w, h) = (i.width as f64, i.height as f64);
    let planes: [&dyn Fn(&Point3) -> bool; 5] = [
        &|p| p[2] <= 0.0,
        &|p| i.fx * p[0] + i.cx * p[2] < 0.0,
        &|p| i.fx * p[0] + (i.cx - w) * p[2] >= 0.0,
        &|p| i.fy * p[1] + i.cy * p[2] < 0.0,
        &|p| i.fy * p[1] + (i.cy - h) * p[2] >= 0.0,
    ];
    planes.iter().any(|outside| cs.iter().all(outside))
}

/// Parameters of the out-of-view scenario: a thin box to the left of the
/// road that is visible in the `history` previous frames and has left the
/// current camera's view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OovTemplate {
    pub intrinsics: CameraIntrinsics,
    /// Camera height above the ground surface in meters.
    pub camera_height: f64,
    /// Forward motion per frame in meters.
    pub speed: f64,
    /// Number of previous frames that must see the box.
    pub history: usize,
    /// Lateral `[y_min, y_max]` of the box in the ego frame (left positive).
    pub box_lateral: [f64; 2],
    /// Vertical `[z_min, z_max]` of the box in the ego frame.
    pub box_vertical: [f64; 2],
    /// Forward thickness of the box; it is centered in one label voxel layer.
    pub box_thickness: f64,
    pub box_class: u16,
    pub ground_class: u16,
    pub label_bounds: VoxelBounds,
    pub seed: u64,
}

impl Default for OovTemplate {
    fn default() -> Self {
        Self {
            // KITTI odometry camera at half resolution
            intrinsics: CameraIntrinsics {
                fx: 353.5456,
                fy: 353.5456,
                cx: 300.94365,
                cy: 91.5552,
                width: 613,
                height: 185,
            },
            camera_height: 1.65,
            speed: 3.0,
            history: 3,
            box_lateral: [3.05, 4.95],
            box_vertical: [-1.55, -0.05],
            box_thickness: 0.1,
            box_class: 2,
            ground_class: 1,
            label_bounds: VoxelBounds::semantic_kitti_labels(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OovScenario {
    pub spec: SceneSpec,
    /// Index of the hidden box in `spec.primitives`.
    pub hidden: usize,
    /// Frames whose image contains the whole box.
    pub visible_frames: Vec<usize>,
}

impl OovScenario {
    pub fn hidden_class(&self) -> u16 {
        self.spec.primitives[self.hidden].class()
    }
}

/// Places the box in the nearest forward voxel layer of the current ego
/// frame for which it is outside the current frustum and fully inside the
/// frustum of each of the `history` previous frames, and checks by ray
/// casting that it is actually hit in those frames and not in the current
/// one.
pub fn make_oov_scenario(t: &OovTemplate) -> Result<OovScenario> {
    t.intrinsics.validate()?;
    t.label_bounds.validate()?;
    if t.history == 0 {
        return Err(Error::Generation("history must be at least one frame".into()));
    }
    if !(t.speed > 0.0) {
        return Err(Error::Generation(
            "the ego vehicle must move forward for the box to leave the view".into(),
        ));
    }
    let num_classes = t.box_class.max(t.ground_class) as usize + 1;
    let cur = t.history;
    let ground_top = -t.camera_height;
    let make_spec = |primitives: Vec<Primitive>| SceneSpec {
        primitives,
        camera_path: CameraPath {
            start: forward_left_up_camera().inverse(),
            step: [t.speed, 0.0, 0.0],
        },
        camera_from_ego: forward_left_up_camera(),
        intrinsics: t.intrinsics,
        frame_count: t.history + 1,
        num_classes,
        seed: t.seed,
        depth_noise_std: 0.0,
    };
    let ground = Primitive::Box {
        min: [-60.0, -40.0, ground_top - 0.5],
        max: [140.0 + cur as f64 * t.speed, 40.0, ground_top],
        class: t.ground_class,
    };

    let b = &t.label_bounds;
    let size = b.voxel_size()[0];
    if !(t.box_thickness > 0.0 && t.box_thickness < size) {
        return Err(Error::Generation(format!(
            "box thickness {} must fit inside one {size} m voxel layer",
            t.box_thickness
        )));
    }
    let world_from_ego = make_spec(vec![]).ego_pose(cur);
    for layer in 0..b.resolution[0] {
        let mid = b.voxel_lower(0, layer) + 0.5 * size;
        let ego_min = [mid - 0.5 * t.box_thickness, t.box_lateral[0], t.box_vertical[0]];
        let ego_max = [mid + 0.5 * t.box_thickness, t.box_lateral[1], t.box_vertical[1]];
        // the ego frame of the current camera differs from the world by a
        // pure translation
        let min = world_from_ego.apply(&ego_min);
        let max = world_from_ego.apply(&ego_max);
        let (min, max) = (
            std::array::from_fn(|a| min[a].min(max[a])),
            std::array::from_fn(|a| min[a].max(max[a])),
        );
        let spec = make_spec(vec![
            Primitive::Box {
                min,
                max,
                class: t.box_class,
            },
            ground.clone(),
        ]);
        if !box_fully_out_of_view(&spec, cur, &min, &max) {
            continue;
        }
        let visible: Vec<usize> = (0..cur).filter(|&k| box_fully_in_view(&spec, k, &min, &max)).collect();
        if visible.len() != t.history {
            continue;
        }
        verify_by_ray_casting(&spec, t.box_class, &visible)?;
        return Ok(OovScenario {
            spec,
            hidden: 0,
            visible_frames: visible,
        });
    }
    Err(Error::Generation(format!(
        "no forward position puts the box out of the current view while all {} previous frames see it (speed {} m/frame)",
        t.history, t.speed
    )))
}

fn verify_by_ray_casting(spec: &SceneSpec, class: u16, visible: &[usize]) -> Result<()> {
    let hits = |k: usize| {
        spec.cast(k)
            .iter()
            .filter(|h| h.is_some_and(|(_, c)| c == class))
            .count()
    };
    if hits(spec.current_index()) != 0 {
        return Err(Error::Generation("hidden box is hit by current-frame rays".into()));
    }
    if let Some(&k) = visible.iter().find(|&&k| hits(k) == 0) {
        return Err(Error::Generation(format!("hidden box is occluded in frame {k}")));
    }
    Ok(())
}

/// Default corridor step. Larger than the 6.2 m ground blind zone in front
/// of the camera, so even `t-1` loses points behind the ego origin, as with
/// temporally strided key frames.
pub const CORRIDOR_STEP: f64 = 8.0;

/// Straight corridor with ground, two side walls and an end wall, driven
/// along at `speed` m/frame; used to study how much of each past frame
/// survives in the current voxel grid.
pub fn corridor_scene(frame_count: usize, speed: f64) -> Result<SceneSpec> {
    let t = OovTemplate::default();
    let travel = frame_count as f64 * speed;
    let spec = SceneSpec {
        primitives: vec![
            Primitive::Box {
                min: [-80.0, -40.0, -2.15],
                max: [200.0, 40.0, -1.65],
                class: 1,
            },
            Primitive::Box {
                min: [-80.0, 7.05, -1.65],
                max: [200.0, 7.55, 2.95],
                class: 2,
            },
            Primitive::Box {
                min: [-80.0, -7.55, -1.65],
                max: [200.0, -7.05, 2.95],
                class: 2,
            },
            Primitive::Box {
                min: [travel + 40.05, -7.05, -1.65],
                max: [travel + 40.55, 7.05, 2.95],
                class: 3,
            },
        ],
        camera_path: CameraPath {
            start: forward_left_up_camera().inverse(),
            step: [speed, 0.0, 0.0],
        },
        camera_from_ego: forward_left_up_camera(),
        intrinsics: t.intrinsics,
        frame_count,
        num_classes: 4,
        seed: 0,
        depth_noise_std: 0.0,
    };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane_scene(primitives: Vec<Primitive>) -> SceneSpec {
        SceneSpec {
            primitives,
            camera_path: CameraPath {
                start: RigidTransform::identity(),
                step: [0.0; 3],
            },
            camera_from_ego: RigidTransform::identity(),
            intrinsics: CameraIntrinsics::new(50.0, 40.0, 16.0, 12.0, 33, 25).unwrap(),
            frame_count: 1,
            num_classes: 3,
            seed: 0,
            depth_noise_std: 0.0,
        }
    }

    #[test]
    fn fronto_parallel_plane() {
        let s = plane_scene(vec![Primitive::Plane {
            normal: [0.0, 0.0, 1.0],
            offset: 10.0,
            thickness: 1.0,
            class: 1,
        }]);
        let d = s.render_depth(0).unwrap();
        assert_eq!(d.get(12, 16, 0), 10.0);
    }

    #[test]
    fn empty_scene_all_invalid() {
        let d = plane_scene(vec![]).render_depth(0).unwrap();
        assert!(d.data().iter().all(|v| v.is_nan()));
        assert!(plane_scene(vec![]).render_depth(1).is_err());
    }

    #[test]
    fn tilted_plane_closed_form() {
        let n = [0.2, -0.3, 1.0];
        let s = plane_scene(vec![Primitive::Plane {
            normal: n,
            offset: 8.0,
            thickness: 1.0,
            class: 1,
        }]);
        let d = s.render_depth(0).unwrap();
        let i = s.intrinsics;
        for (r, c) in [(0, 0), (3, 29), (24, 32), (11, 5)] {
            let ray = [(c as f64 - i.cx) / i.fx, (r as f64 - i.cy) / i.fy, 1.0];
            let want = 8.0 / (n[0] * ray[0] + n[1] * ray[1] + n[2] * ray[2]);
            assert!((d.get(r, c, 0) - want).abs() < 1e-9);
        }
    }

    #[test]
    fn nearest_primitive_wins() {
        let s = plane_scene(vec![
            Primitive::Plane {
                normal: [0.0, 0.0, 1.0],
                offset: 10.0,
                thickness: 1.0,
                class: 1,
            },
            Primitive::Box {
                min: [-1.0, -1.0, 4.0],
                max: [1.0, 1.0, 5.0],
                class: 2,
            },
        ]);
        let d = s.render_depth(0).unwrap();
        let f = s.render_features(0).unwrap();
        assert_eq!(d.get(12, 16, 0), 4.0);
        assert_eq!(f.pixel(12, 16), &[0.0, 0.0, 1.0]);
        assert_eq!(d.get(0, 0, 0), 10.0);
        assert_eq!(f.pixel(0, 0), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn labels_by_center_containment() {
        let b = VoxelBounds::new([0.0; 3], [2.0; 3], [10; 3]).unwrap();
        // spans [0.4, 0.8)^3 exactly: voxel centers 0.5, 0.7 on each axis
        let s = plane_scene(vec![Primitive::Box {
            min: [0.4; 3],
            max: [0.8; 3],
            class: 2,
        }]);
        let g = s.ground_truth_labels(&b).unwrap();
        assert_eq!(g.labels.iter().filter(|&&l| l == 2).count(), 8);
        assert!(g.invalid.iter().all(|&v| !v));

        let g = plane_scene(vec![]).ground_truth_labels(&b).unwrap();
        assert!(g.labels.iter().all(|&l| l == 0));

        let s = plane_scene(vec![
            Primitive::Box {
                min: [0.0; 3],
                max: [0.5; 3],
                class: 1,
            },
            Primitive::Box {
                min: [1.0; 3],
                max: [1.5; 3],
                class: 2,
            },
        ]);
        let g = s.ground_truth_labels(&b).unwrap();
        assert!(g.labels.contains(&1) && g.labels.contains(&2));
        for i in 0..g.len() {
            let c = b.voxel_center(b.unflatten(i));
            match g.labels[i] {
                1 => assert!(c.iter().all(|&v| v <= 0.5)),
                2 => assert!(c.iter().all(|&v| v >= 1.0)),
                _ => {}
            }
        }
    }

    #[test]
    fn validation() {
        let mut s = plane_scene(vec![Primitive::Box {
            min: [0.0; 3],
            max: [0.0, 1.0, 1.0],
            class: 1,
        }]);
        assert!(s.validate().is_err());
        s.primitives = vec![Primitive::Box {
            min: [0.0; 3],
            max: [1.0; 3],
            class: 3,
        }];
        assert!(s.validate().is_err());
        s.primitives.clear();
        s.frame_count = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = corridor_scene(3, 1.0).unwrap();
        let back = SceneSpec::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn oov_default_template() {
        let sc = make_oov_scenario(&OovTemplate::default()).unwrap();
        let Primitive::Box { min, max, .. } = sc.spec.primitives[sc.hidden] else {
            panic!("hidden primitive is a box")
        };
        let cur = sc.spec.current_index();
        assert!(box_fully_out_of_view(&sc.spec, cur, &min, &max));
        assert_eq!(sc.visible_frames, (0..cur).collect::<Vec<_>>());
    }

    #[test]
    fn oov_needs_motion() {
        let t = OovTemplate {
            speed: 0.0,
            ..Default::default()
        };
        assert!(matches!(make_oov_scenario(&t), Err(Error::Generation(_))));
    }

    #[test]
    fn oov_single_history_frame() {
        let t = OovTemplate {
            history: 1,
            ..Default::default()
        };
        let sc = make_oov_scenario(&t).unwrap();
        assert_eq!(sc.spec.frame_count, 2);
        assert_eq!(sc.visible_frames, vec![0]);
    }
}
