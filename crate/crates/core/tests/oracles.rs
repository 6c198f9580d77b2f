//! Library results against independent brute-force computations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ssc_fusion::dataio::write_ply;
use ssc_fusion::fusion::{densify_current, fuse, lift_frame, FeaturedPointCloud, FrameBundle, FuseConfig};
use ssc_fusion::geometry::{CameraIntrinsics, Point3, RigidTransform};
use ssc_fusion::metrics::oov_mask;
use ssc_fusion::resample::Plane2D;
use ssc_fusion::voxel::{filter_bounds, voxelize, Accumulation, VoxelBounds};

fn random_cloud(rng: &mut ChaCha8Rng, n: usize, ch: usize, lo: Point3, hi: Point3) -> FeaturedPointCloud {
    let mut c = FeaturedPointCloud::empty(ch);
    for _ in 0..n {
        c.positions.push(std::array::from_fn(|a| rng.random_range(lo[a]..hi[a])));
        c.features.extend((0..ch).map(|_| rng.random_range(-1.0f32..1.0)));
        c.origin.push(rng.random_range(0..4));
        c.source_pixel.push([0.0, 0.0]);
    }
    c
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-3)
}

#[test]
fn voxel_sums_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let bounds = VoxelBounds::new([-1.0, 0.0, 2.0], [3.0, 1.6, 2.8], [16, 16, 16]).unwrap();
    // a margin around the box so some points fall outside
    let cloud = random_cloud(&mut rng, 1000, 3, [-1.5, -0.2, 1.9], [3.5, 1.8, 2.9]);
    let n_frames = 3;
    let size: Vec<f64> = (0..3).map(|a| (bounds.max[a] - bounds.min[a]) / 16.0).collect();

    let mut want = vec![0f64; 16 * 16 * 16 * 3];
    let mut want_counts = vec![0u32; 16 * 16 * 16];
    for x in 0..16 {
        for y in 0..16 {
            for z in 0..16 {
                let v = (x * 16 + y) * 16 + z;
                let idx = [x, y, z];
                let lo: Vec<f64> = (0..3).map(|a| bounds.min[a] + idx[a] as f64 * size[a]).collect();
                let hi: Vec<f64> = (0..3)
                    .map(|a| if idx[a] == 15 { bounds.max[a] } else { bounds.min[a] + (idx[a] + 1) as f64 * size[a] })
                    .collect();
                for (i, p) in cloud.positions.iter().enumerate() {
                    if (0..3).all(|a| p[a] >= lo[a] && p[a] < hi[a]) {
                        want_counts[v] += 1;
                        for c in 0..3 {
                            want[v * 3 + c] += cloud.feature(i)[c] as f64;
                        }
                    }
                }
            }
        }
    }

    for mode in [Accumulation::Deterministic, Accumulation::Parallel] {
        let grid = voxelize(&cloud, &bounds, n_frames, mode).unwrap();
        assert_eq!(grid.counts, want_counts);
        for (got, w) in grid.features.iter().zip(&want) {
            assert!(close(*got as f64, w / n_frames as f64, 1e-4), "{got} vs {}", w / 3.0);
        }
    }
}

#[test]
fn voxel_conservation_on_a_million_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let bounds = VoxelBounds::semantic_kitti_features();
    let cloud = random_cloud(&mut rng, 1_000_000, 2, bounds.min, bounds.max);
    let n_frames = 4;
    let grid = voxelize(&cloud, &bounds, n_frames, Accumulation::Deterministic).unwrap();
    assert_eq!(grid.counts.iter().map(|&c| c as usize).sum::<usize>(), cloud.len());
    for c in 0..2 {
        let points: f64 = (0..cloud.len()).map(|i| cloud.feature(i)[c] as f64).sum();
        let voxels: f64 = grid.features.chunks(2).map(|f| f[c] as f64).sum();
        assert!(close(n_frames as f64 * voxels, points, 1e-4));
    }
}

#[test]
fn bounds_filter_matches_per_point_test() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let bounds = VoxelBounds::new([0.0, 0.0, 0.0], [1.0, 2.0, 3.0], [4, 4, 4]).unwrap();
    let mut cloud = random_cloud(&mut rng, 5000, 1, [-0.5, -0.5, -0.5], [1.5, 2.5, 3.5]);
    cloud.positions.push(bounds.max);
    cloud.features.push(0.0);
    cloud.origin.push(0);
    cloud.source_pixel.push([0.0, 0.0]);
    let kept = filter_bounds(&cloud, &bounds);
    let want: Vec<Point3> = cloud
        .positions
        .iter()
        .filter(|p| p[0] >= 0.0 && p[0] < 1.0 && p[1] >= 0.0 && p[1] < 2.0 && p[2] >= 0.0 && p[2] < 3.0)
        .copied()
        .collect();
    assert_eq!(kept.positions, want);
    assert!(!kept.positions.contains(&bounds.max));
}

#[test]
fn view_mask_matches_projection_loop() {
    let intr = CameraIntrinsics::new(20.0, 18.0, 7.5, 5.5, 16, 12).unwrap();
    let bounds = VoxelBounds::new([-4.0, -4.0, -1.0], [4.0, 4.0, 3.0], [8, 8, 4]).unwrap();
    let cam_from_ego = RigidTransform::from_axis_angle([0.2, 1.0, -0.1], 0.7)
        .compose(&RigidTransform::from_translation([0.3, -0.2, 1.5]));
    let mask = oov_mask(&bounds, &intr, &cam_from_ego);
    let r = cam_from_ego.rows();
    let mut want = vec![];
    for x in 0..8 {
        for y in 0..8 {
            for z in 0..4 {
                let c = [-3.5 + x as f64, -3.5 + y as f64, -0.5 + z as f64];
                let q: Vec<f64> = (0..3).map(|i| r[i][0] * c[0] + r[i][1] * c[1] + r[i][2] * c[2] + r[i][3]).collect();
                let u = intr.fx * q[0] / q[2] + intr.cx;
                let v = intr.fy * q[1] / q[2] + intr.cy;
                want.push(q[2] > 0.0 && (0.0..16.0).contains(&u) && (0.0..12.0).contains(&v));
            }
        }
    }
    assert_eq!(mask.in_view, want);
    assert!(want.iter().any(|&v| v) && want.iter().any(|&v| !v));
}

fn frame(rng: &mut ChaCha8Rng, h: usize, w: usize, ch: usize, pose: RigidTransform, offset: usize) -> FrameBundle {
    let intr = CameraIntrinsics::new(30.0, 28.0, (w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0, w, h).unwrap();
    let depth = (0..h * w).map(|_| rng.random_range(1.0..20.0)).collect();
    let feats = (0..h * w * ch).map(|_| rng.random_range(0.0f32..1.0)).collect();
    FrameBundle::new(
        Plane2D::from_vec(h, w, ch, feats).unwrap(),
        Plane2D::from_vec(h, w, 1, depth).unwrap(),
        intr,
        pose,
        offset,
    )
    .unwrap()
}

fn moving_frames(rng: &mut ChaCha8Rng, n: usize, h: usize, w: usize) -> Vec<FrameBundle> {
    (0..n)
        .map(|o| {
            let pose = RigidTransform::from_translation([0.1 * o as f64, 0.0, -1.5 * o as f64]);
            frame(rng, h, w, 3, pose, o)
        })
        .collect()
}

#[test]
fn fused_cardinality_counts_densified_current_frame() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (h, w) = (9, 14);
    for (n, f) in [(1, 1), (1, 2), (3, 2), (4, 3)] {
        let frames = moving_frames(&mut rng, n, h, w);
        let cfg = FuseConfig {
            n_frames: n,
            densify_factor: f,
            ..FuseConfig::default()
        };
        let cloud = fuse(&frames, &cfg).unwrap();
        assert_eq!(cloud.len(), f * f * h * w + (n - 1) * h * w);
        assert_eq!(cloud.origin.iter().filter(|&&o| o == 0).count(), f * f * h * w);
    }
}

#[test]
fn densification_shapes_and_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let fr = frame(&mut rng, 5, 7, 2, RigidTransform::identity(), 0);
    let d2 = densify_current(&fr, 2, None).unwrap();
    assert_eq!((d2.depth.height(), d2.depth.width()), (10, 14));
    assert_eq!(d2.grid.len(), 4 * 5 * 7);
    assert_eq!(d2.features.channels(), 2);

    let d1 = densify_current(&fr, 1, None).unwrap();
    assert_eq!(d1.depth.data(), fr.depth.data());
    assert_eq!(d1.features, fr.features);

    let on = FuseConfig {
        n_frames: 1,
        densify_factor: 1,
        ..FuseConfig::default()
    };
    let off = FuseConfig {
        enable_ccfd: false,
        densify_factor: 2,
        ..on.clone()
    };
    let a = fuse(std::slice::from_ref(&fr), &on).unwrap();
    let b = fuse(std::slice::from_ref(&fr), &off).unwrap();
    let c = lift_frame(&fr, &on).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn history_is_warped_into_current_camera() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let current = RigidTransform::from_axis_angle([0.0, 1.0, 0.0], 0.3)
        .compose(&RigidTransform::from_translation([1.0, 0.5, 2.0]));
    let past = RigidTransform::from_axis_angle([1.0, 0.0, 0.2], -0.2);
    let frames = vec![frame(&mut rng, 4, 6, 1, current, 0), frame(&mut rng, 4, 6, 1, past, 1)];
    let cfg = FuseConfig {
        n_frames: 2,
        densify_factor: 1,
        enable_hcb: false,
        ..FuseConfig::default()
    };
    let fused = fuse(&frames, &cfg).unwrap();
    let mut solo = frames[1].clone();
    solo.offset = 0;
    let local = lift_frame(&solo, &cfg).unwrap();
    // independent: camera -> world through the past pose, world -> camera
    // through the inverse of the current pose, written out by hand
    let (pr, cr) = (past.rows(), current.rows());
    let hist: Vec<&Point3> = (0..fused.len()).filter(|&i| fused.origin[i] == 1).map(|i| &fused.positions[i]).collect();
    assert_eq!(hist.len(), local.len());
    for (p, got) in local.positions.iter().zip(hist) {
        let wp: Vec<f64> = (0..3).map(|i| pr[i][0] * p[0] + pr[i][1] * p[1] + pr[i][2] * p[2] + pr[i][3]).collect();
        let d: Vec<f64> = (0..3).map(|i| wp[i] - cr[i][3]).collect();
        for j in 0..3 {
            let want = cr[0][j] * d[0] + cr[1][j] * d[1] + cr[2][j] * d[2];
            assert!((got[j] - want).abs() < 1e-9);
        }
    }
}

#[test]
fn blurring_leaves_geometry_alone() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let frames = moving_frames(&mut rng, 3, 6, 8);
    let base = FuseConfig {
        n_frames: 3,
        densify_factor: 1,
        enable_hcb: false,
        ..FuseConfig::default()
    };
    let blurred = FuseConfig {
        enable_hcb: true,
        ..base.clone()
    };
    let a = fuse(&frames, &base).unwrap();
    let b = fuse(&frames, &blurred).unwrap();
    assert_eq!(a.positions, b.positions);
    assert_eq!(a.origin, b.origin);
    let cur = |c: &FeaturedPointCloud| -> Vec<f32> {
        (0..c.len()).filter(|&i| c.origin[i] == 0).flat_map(|i| c.feature(i).to_vec()).collect()
    };
    assert_eq!(cur(&a), cur(&b));
    assert!(a.features.iter().zip(&b.features).all(|(x, y)| y.abs() <= x.abs()));
}

#[test]
fn identical_frames_overlap_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let f0 = frame(&mut rng, 5, 5, 2, RigidTransform::from_translation([1.0, 2.0, 3.0]), 0);
    let mut f1 = f0.clone();
    f1.offset = 1;
    let cfg = FuseConfig {
        n_frames: 2,
        densify_factor: 1,
        enable_hcb: false,
        ..FuseConfig::default()
    };
    let cloud = fuse(&[f0, f1], &cfg).unwrap();
    let half = cloud.len() / 2;
    assert_eq!(cloud.len(), 50);
    assert_eq!(cloud.positions[..half], cloud.positions[half..]);
}

/// Minimal ASCII PLY reader used as an external check of the writer.
fn parse_ply(text: &str) -> (usize, Vec<Vec<f64>>) {
    let (header, body) = text.split_once("end_header\n").unwrap();
    let mut lines = header.lines();
    assert_eq!(lines.next(), Some("ply"));
    let mut count = 0;
    let mut props = 0;
    for l in lines {
        let parts: Vec<&str> = l.split_whitespace().collect();
        match parts.as_slice() {
            ["element", "vertex", n] => count = n.parse().unwrap(),
            ["property", _, _] => props += 1,
            _ => {}
        }
    }
    let rows: Vec<Vec<f64>> = body
        .lines()
        .map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect())
        .collect();
    assert!(rows.iter().all(|r| r.len() == props));
    (count, rows)
}

#[test]
fn ply_reparses_to_same_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for n in [0, 1, 17, 300] {
        let cloud = random_cloud(&mut rng, n, 4, [-5.0; 3], [5.0; 3]);
        let text = String::from_utf8(write_ply(&cloud, 2)).unwrap();
        let (count, rows) = parse_ply(&text);
        assert_eq!(count, n);
        assert_eq!(rows.len(), n);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(&r[..3], &cloud.positions[i]);
            assert_eq!(r[3] as f32, cloud.feature(i)[0]);
            assert_eq!(r[5] as u32, cloud.origin[i]);
        }
    }
}
