//! End-to-end checks of fusion and voxelization on synthetic scenes.

use ssc_fusion::fusion::{fuse, FuseConfig};
use ssc_fusion::metrics::{oov_mask, ConfusionAccumulator, LabelGrid};
use ssc_fusion::synth::{corridor_scene, CORRIDOR_STEP, make_oov_scenario, OovTemplate, Primitive, SceneSpec};
use ssc_fusion::voxel::{argmax_labels, coverage_stats, voxelize, Accumulation, VoxelBounds};
use ssc_fusion::Point3;

struct OovOutcome {
    coverage: f64,
    hidden_iou: Option<f64>,
}

fn run_oov(n: usize) -> OovOutcome {
    let sc = make_oov_scenario(&OovTemplate::default()).unwrap();
    let spec = &sc.spec;
    let bounds = VoxelBounds::semantic_kitti_labels();
    let gt = spec.ground_truth_labels(&bounds).unwrap();
    let cfg = FuseConfig {
        n_frames: n,
        ..FuseConfig::default()
    };
    let cloud = fuse(&spec.render_latest(n).unwrap(), &cfg)
        .unwrap()
        .transformed(&spec.ego_from_camera());
    let grid = voxelize(&cloud, &bounds, n, Accumulation::Deterministic).unwrap();

    let class = sc.hidden_class();
    let hidden: Vec<usize> = (0..gt.len()).filter(|&i| gt.labels[i] == class).collect();
    assert!(!hidden.is_empty());
    let covered = hidden
        .iter()
        .filter(|&&i| grid.feature(i).iter().any(|&v| v != 0.0))
        .count();

    let labels = argmax_labels(&grid.to_volume().unwrap(), bounds.resolution).unwrap();
    let pred = LabelGrid::new(bounds.resolution, labels, vec![false; gt.len()]).unwrap();
    let oov = oov_mask(&bounds, &spec.intrinsics, &spec.camera_from_ego).out_of_view();
    let mut acc = ConfusionAccumulator::new(spec.num_classes);
    acc.accumulate(&pred, &gt, Some(&oov)).unwrap();
    OovOutcome {
        coverage: covered as f64 / hidden.len() as f64,
        hidden_iou: acc.finalize().per_class[class as usize],
    }
}

#[test]
fn hidden_box_recovered_from_history() {
    let out = run_oov(4);
    println!("n=4 coverage {:.4} iou {:?}", out.coverage, out.hidden_iou);
    assert!(out.coverage >= 0.9);
    assert!(out.hidden_iou.unwrap() > 0.5);
}

#[test]
fn hidden_box_invisible_to_single_frame() {
    let out = run_oov(1);
    assert_eq!(out.coverage, 0.0);
}

#[test]
fn hidden_box_lies_out_of_view() {
    let sc = make_oov_scenario(&OovTemplate::default()).unwrap();
    let bounds = VoxelBounds::semantic_kitti_labels();
    let gt = sc.spec.ground_truth_labels(&bounds).unwrap();
    let view = oov_mask(&bounds, &sc.spec.intrinsics, &sc.spec.camera_from_ego);
    let class = sc.hidden_class();
    assert!((0..gt.len())
        .filter(|&i| gt.labels[i] == class)
        .all(|i| !view.in_view[i]));
}

#[test]
fn corridor_survivors_decrease_with_offset() {
    let n = 6;
    let spec = corridor_scene(n, CORRIDOR_STEP).unwrap();
    let cfg = FuseConfig {
        n_frames: n,
        enable_ccfd: false,
        ..FuseConfig::default()
    };
    let cloud = fuse(&spec.render_latest(n).unwrap(), &cfg)
        .unwrap()
        .transformed(&spec.ego_from_camera());
    let stats = coverage_stats(&cloud, &VoxelBounds::semantic_kitti_labels(), n).unwrap();
    println!("{}", stats.to_table());
    assert_eq!(stats.rows.len(), n);
    for w in stats.rows.windows(2) {
        assert!(w[1].point_fraction < w[0].point_fraction);
    }
}

/// Every lifted point lies on the surface of some primitive.
fn distance_to_surface(p: &Point3, prim: &Primitive) -> f64 {
    match prim {
        Primitive::Box { min, max, .. } => {
            let outside = (0..3)
                .map(|a| (min[a] - p[a]).max(p[a] - max[a]).max(0.0).powi(2))
                .sum::<f64>()
                .sqrt();
            if outside > 0.0 {
                outside
            } else {
                (0..3)
                    .map(|a| (p[a] - min[a]).min(max[a] - p[a]))
                    .fold(f64::INFINITY, f64::min)
            }
        }
        Primitive::Plane { normal, offset, .. } => {
            let len = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
            ((normal[0] * p[0] + normal[1] * p[1] + normal[2] * p[2]) - offset).abs() / len
        }
    }
}

fn check_depth_consistency(spec: &SceneSpec) {
    let cfg = FuseConfig {
        n_frames: 1,
        ..FuseConfig::default()
    };
    for k in 0..spec.frame_count {
        let mut frame = spec.render_frame(k).unwrap();
        frame.offset = 0;
        let cloud = ssc_fusion::lift_frame(&frame, &cfg).unwrap();
        assert!(!cloud.is_empty());
        let world = cloud.transformed(&spec.camera_pose(k));
        for p in &world.positions {
            let d = spec
                .primitives
                .iter()
                .map(|prim| distance_to_surface(p, prim))
                .fold(f64::INFINITY, f64::min);
            assert!(d < 1e-6, "frame {k}: point {p:?} is {d} m from every surface");
        }
    }
}

#[test]
fn rendered_depth_lies_on_surfaces() {
    check_depth_consistency(&make_oov_scenario(&OovTemplate::default()).unwrap().spec);
    check_depth_consistency(&corridor_scene(3, 3.0).unwrap());
}

#[test]
fn history_lands_behind_current_camera() {
    let spec = corridor_scene(2, CORRIDOR_STEP).unwrap();
    let cfg = FuseConfig {
        n_frames: 2,
        enable_hcb: false,
        enable_ccfd: false,
        ..FuseConfig::default()
    };
    let cloud = fuse(&spec.render_latest(2).unwrap(), &cfg).unwrap();
    let behind = |o: u32| {
        (0..cloud.len())
            .filter(|&i| cloud.origin[i] == o && cloud.positions[i][2] < 0.0)
            .count()
    };
    assert!(behind(1) > 0);
    assert_eq!(behind(0), 0);
}

#[test]
fn synthetic_rendering_is_deterministic() {
    let spec = make_oov_scenario(&OovTemplate::default()).unwrap().spec;
    let a = spec.render_latest(4).unwrap();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap()
        .install(|| spec.render_latest(4).unwrap());
    for (x, y) in a.iter().zip(&b) {
        let bits = |d: &[f64]| d.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(x.depth.data()), bits(y.depth.data()));
        assert_eq!(x.features, y.features);
    }
    let bounds = VoxelBounds::semantic_kitti_features();
    assert_eq!(
        spec.ground_truth_labels(&bounds).unwrap(),
        spec.ground_truth_labels(&bounds).unwrap()
    );
}
