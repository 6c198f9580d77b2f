use proptest::prelude::*;

use ssc_fusion::dataio::{
    parse_poses, read_label_grid_dims, read_tensor, write_label_grid, write_poses, write_tensor, PoseTrack, Tensor,
    TensorData,
};
use ssc_fusion::fusion::{hcb_weights, FeaturedPointCloud};
use ssc_fusion::geometry::{relative_pose, Point3, RigidTransform};
use ssc_fusion::metrics::{ConfusionAccumulator, LabelGrid};
use ssc_fusion::resample::{bilinear_resize, minmax_normalize, Plane2D};
use ssc_fusion::voxel::{voxelize, Accumulation, VoxelBounds};

fn transform() -> impl Strategy<Value = RigidTransform> {
    (
        prop::array::uniform3(-1.0f64..1.0),
        -3.1f64..3.1,
        prop::array::uniform3(-50.0f64..50.0),
    )
        .prop_filter("axis", |(a, _, _)| a.iter().map(|v| v * v).sum::<f64>() > 1e-3)
        .prop_map(|(axis, angle, t)| {
            RigidTransform::from_translation(t).compose(&RigidTransform::from_axis_angle(axis, angle))
        })
}

fn point() -> impl Strategy<Value = Point3> {
    prop::array::uniform3(-100.0f64..100.0)
}

fn dist(a: &Point3, b: &Point3) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt()
}

fn labels(n: usize, classes: u16) -> impl Strategy<Value = Vec<u16>> {
    prop::collection::vec(0..classes, n)
}

proptest! {
    #[test]
    fn inverse_round_trip(t in transform(), p in point()) {
        let q = t.inverse().apply(&t.apply(&p));
        prop_assert!(dist(&p, &q) < 1e-9);
    }

    #[test]
    fn transforms_preserve_distance(t in transform(), a in point(), b in point()) {
        prop_assert!((dist(&a, &b) - dist(&t.apply(&a), &t.apply(&b))).abs() < 1e-9);
    }

    #[test]
    fn relative_poses_cancel(a in transform(), b in transform(), p in point()) {
        let round = relative_pose(&a, &b).compose(&relative_pose(&b, &a));
        prop_assert!(dist(&round.apply(&p), &p) < 1e-9);
    }

    #[test]
    fn upsampling_stays_within_source_range(
        data in prop::collection::vec(-10.0f64..10.0, 12),
        oh in 1usize..12,
        ow in 1usize..12,
    ) {
        let src = Plane2D::from_vec(3, 4, 1, data.clone()).unwrap();
        let out = bilinear_resize(&src, oh, ow).unwrap();
        let lo = data.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(out.data().iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
    }

    #[test]
    fn monotone_rows_stay_monotone(steps in prop::collection::vec(0.0f64..5.0, 6), ow in 2usize..30) {
        let row: Vec<f64> = steps.iter().scan(0.0, |s, d| { *s += d; Some(*s) }).collect();
        let out = bilinear_resize(&Plane2D::from_vec(1, 6, 1, row).unwrap(), 1, ow).unwrap();
        prop_assert!(out.data().windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn normalizing_twice_changes_nothing(data in prop::collection::vec(0.0f64..100.0, 2..40)) {
        let n = data.len();
        let once = minmax_normalize(&Plane2D::from_vec(1, n, 1, data).unwrap()).unwrap();
        let twice = minmax_normalize(&once).unwrap();
        for (a, b) in once.data().iter().zip(twice.data()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn blur_weights_in_unit_range(data in prop::collection::vec(0.1f64..80.0, 2..60)) {
        let n = data.len();
        let w = hcb_weights(&Plane2D::from_vec(1, n, 1, data.clone()).unwrap()).unwrap();
        prop_assert!(w.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        let imin = (0..n).min_by(|&a, &b| data[a].total_cmp(&data[b])).unwrap();
        let imax = (0..n).max_by(|&a, &b| data[a].total_cmp(&data[b])).unwrap();
        if data[imin] < data[imax] {
            prop_assert_eq!(w.data()[imin], 1.0);
            prop_assert_eq!(w.data()[imax], 0.0);
        }
    }

    #[test]
    fn voxel_counts_and_order_invariance(
        pts in prop::collection::vec((prop::array::uniform3(-1.0f64..5.0), -1.0f32..1.0), 0..200),
        seed in any::<u64>(),
    ) {
        let bounds = VoxelBounds::new([0.0; 3], [4.0; 3], [5, 3, 4]).unwrap();
        let mut cloud = FeaturedPointCloud::empty(1);
        for (p, f) in &pts {
            cloud.positions.push(*p);
            cloud.features.push(*f);
            cloud.origin.push(0);
            cloud.source_pixel.push([0.0, 0.0]);
        }
        let grid = voxelize(&cloud, &bounds, 2, Accumulation::Deterministic).unwrap();
        let inside = pts.iter().filter(|(p, _)| bounds.contains(p)).count();
        prop_assert_eq!(grid.counts.iter().map(|&c| c as usize).sum::<usize>(), inside);

        // a permutation of the points keeps counts and, up to reassociation,
        // sums
        let n = pts.len();
        let mut order: Vec<usize> = (0..n).collect();
        if n > 1 {
            order.rotate_left((seed % n as u64) as usize);
            order.reverse();
        }
        let mut perm = FeaturedPointCloud::empty(1);
        for &i in &order {
            perm.positions.push(cloud.positions[i]);
            perm.features.push(cloud.features[i]);
            perm.origin.push(0);
            perm.source_pixel.push([0.0, 0.0]);
        }
        let other = voxelize(&perm, &bounds, 2, Accumulation::Parallel).unwrap();
        prop_assert_eq!(&grid.counts, &other.counts);
        for (a, b) in grid.features.iter().zip(&other.features) {
            prop_assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn region_counts_decompose(
        pred in labels(60, 4),
        gt in labels(60, 4),
        mask in prop::collection::vec(any::<bool>(), 60),
        invalid in prop::collection::vec(prop::bool::weighted(0.2), 60),
    ) {
        let dims = [3, 4, 5];
        let p = LabelGrid::new(dims, pred, vec![false; 60]).unwrap();
        let g = LabelGrid::new(dims, gt, invalid).unwrap();
        let inverse: Vec<bool> = mask.iter().map(|v| !v).collect();
        let mut all = ConfusionAccumulator::new(4);
        all.accumulate(&p, &g, None).unwrap();
        let mut parts = ConfusionAccumulator::new(4);
        parts.accumulate(&p, &g, Some(&mask)).unwrap();
        let mut rest = ConfusionAccumulator::new(4);
        rest.accumulate(&p, &g, Some(&inverse)).unwrap();
        parts.merge(&rest).unwrap();
        prop_assert_eq!(parts, all);
    }

    #[test]
    fn invalid_voxels_never_count(
        pred in labels(40, 3),
        other in labels(40, 3),
        gt in labels(40, 3),
        invalid in prop::collection::vec(any::<bool>(), 40),
    ) {
        let dims = [2, 4, 5];
        let g = LabelGrid::new(dims, gt, invalid.clone()).unwrap();
        // change predictions only where the ground truth is invalid
        let mixed: Vec<u16> = (0..40).map(|i| if invalid[i] { other[i] } else { pred[i] }).collect();
        let mut a = ConfusionAccumulator::new(3);
        a.accumulate(&LabelGrid::new(dims, pred, vec![false; 40]).unwrap(), &g, None).unwrap();
        let mut b = ConfusionAccumulator::new(3);
        b.accumulate(&LabelGrid::new(dims, mixed, vec![false; 40]).unwrap(), &g, None).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn relabeling_classes_keeps_occupancy(pred in labels(30, 4), gt in labels(30, 4)) {
        // swap classes 1 and 3 in both grids
        let swap = |v: &Vec<u16>| v.iter().map(|&l| match l { 1 => 3, 3 => 1, l => l }).collect::<Vec<_>>();
        let dims = [1, 5, 6];
        let score = |p: Vec<u16>, g: Vec<u16>| {
            let mut acc = ConfusionAccumulator::new(4);
            acc.accumulate(
                &LabelGrid::new(dims, p, vec![false; 30]).unwrap(),
                &LabelGrid::new(dims, g, vec![false; 30]).unwrap(),
                None,
            ).unwrap();
            acc.finalize()
        };
        let a = score(pred.clone(), gt.clone());
        let b = score(swap(&pred), swap(&gt));
        prop_assert_eq!(a.iou, b.iou);
        prop_assert_eq!(a.per_class[1], b.per_class[3]);
        prop_assert!((a.miou - b.miou).abs() < 1e-12);
    }

    #[test]
    fn label_grids_round_trip(
        lab in labels(2 * 3 * 9, 20),
        invalid in prop::collection::vec(any::<bool>(), 2 * 3 * 9),
    ) {
        let grid = LabelGrid::new([2, 3, 9], lab, invalid).unwrap();
        let (l, m) = write_label_grid(&grid);
        prop_assert_eq!(read_label_grid_dims([2, 3, 9], &l, &m).unwrap(), grid);
    }

    #[test]
    fn tensors_round_trip(data in prop::collection::vec(any::<f32>(), 24)) {
        let t = Tensor::new(vec![2, 3, 4], "HWC", TensorData::F32(data)).unwrap();
        let back = read_tensor(&write_tensor(&t).unwrap()).unwrap();
        let bits = |t: &Tensor| t.as_f32().unwrap().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&t));
        prop_assert_eq!(back.dims, t.dims);
    }

    #[test]
    fn poses_round_trip(ts in prop::collection::vec(transform(), 1..6)) {
        let back = parse_poses(&write_poses(&PoseTrack(ts.clone()))).unwrap();
        prop_assert_eq!(back.len(), ts.len());
        for (a, b) in ts.iter().zip(&back.0) {
            for (ra, rb) in a.rows().iter().zip(b.rows()) {
                for (x, y) in ra.iter().zip(rb) {
                    prop_assert!((x - y).abs() < 1e-9);
                }
            }
        }
    }
}
