//! Semantic scene completion metrics.
//!
//! Occupancy IoU treats every non-zero label as occupied. Per-class IoU is
//! computed for the semantic classes `1..num_classes`; classes never seen in
//! either prediction or ground truth are left out of the mIoU mean. Voxels
//! marked invalid in the ground truth are never scored.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{project_point, CameraIntrinsics, RigidTransform};
use crate::voxel::VoxelBounds;

/// Dense voxel labels (`x` slowest, `z` fastest) with an exclusion mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelGrid {
    pub dims: [usize; 3],
    pub labels: Vec<u16>,
    pub invalid: Vec<bool>,
}

impl LabelGrid {
    pub fn new(dims: [usize; 3], labels: Vec<u16>, invalid_mask: Vec<bool>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if labels.len() != n || invalid_mask.len() != n {
            return invalid(format!(
                "label grid {dims:?} needs {n} labels and flags, got {} and {}",
                labels.len(),
                invalid_mask.len()
            ));
        }
        Ok(Self {
            dims,
            labels,
            invalid: invalid_mask,
        })
    }

    pub fn empty(dims: [usize; 3]) -> Self {
        let n = dims.iter().product();
        Self {
            dims,
            labels: vec![0; n],
            invalid: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn flat_index(&self, x: usize, y: usize, z: usize) -> usize {
        (x * self.dims[1] + y) * self.dims[2] + z
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Counts {
    pub fn iou(&self) -> Option<f64> {
        let denom = self.tp + self.fp + self.fn_;
        (denom > 0).then(|| self.tp as f64 / denom as f64)
    }

    fn add(&mut self, other: &Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

/// Mergeable confusion counters for occupancy and every class id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionAccumulator {
    pub num_classes: usize,
    pub occupancy: Counts,
    pub classes: Vec<Counts>,
    pub scored_voxels: u64,
}

impl ConfusionAccumulator {
    pub fn new(num_classes: usize) -> Self {
        Self {
            num_classes,
            occupancy: Counts::default(),
            classes: vec![Counts::default(); num_classes],
            scored_voxels: 0,
        }
    }

    /// Adds every voxel that is valid in `gt` and, when `region` is given,
    /// inside it.
    pub fn accumulate(&mut self, pred: &LabelGrid, gt: &LabelGrid, region: Option<&[bool]>) -> Result<()> {
        if pred.dims != gt.dims {
            return invalid(format!(
                "prediction grid {:?} does not match ground truth {:?}",
                pred.dims, gt.dims
            ));
        }
        if let Some(r) = region {
            if r.len() != gt.len() {
                return invalid(format!(
                    "region mask has {} voxels, grid has {}",
                    r.len(),
                    gt.len()
                ));
            }
        }
        let nc = self.num_classes;
        if let Some(&bad) = pred.labels.iter().chain(&gt.labels).find(|&&l| l as usize >= nc) {
            return invalid(format!("label {bad} out of range for {nc} classes"));
        }
        for i in 0..gt.len() {
            if gt.invalid[i] || region.is_some_and(|r| !r[i]) {
                continue;
            }
            let (p, g) = (pred.labels[i] as usize, gt.labels[i] as usize);
            self.scored_voxels += 1;
            match (p > 0, g > 0) {
                (true, true) => self.occupancy.tp += 1,
                (true, false) => self.occupancy.fp += 1,
                (false, true) => self.occupancy.fn_ += 1,
                (false, false) => {}
            }
            if p == g {
                self.classes[p].tp += 1;
            } else {
                self.classes[p].fp += 1;
                self.classes[g].fn_ += 1;
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionAccumulator) -> Result<()> {
        if other.num_classes != self.num_classes {
            return invalid(format!(
                "cannot merge accumulators over {} and {} classes",
                self.num_classes, other.num_classes
            ));
        }
        self.occupancy.add(&other.occupancy);
        for (a, b) in self.classes.iter_mut().zip(&other.classes) {
            a.add(b);
        }
        self.scored_voxels += other.scored_voxels;
        Ok(())
    }

    pub fn finalize(&self) -> MetricsReport {
        let per_class: Vec<Option<f64>> = self.classes.iter().map(Counts::iou).collect();
        let defined: Vec<f64> = per_class.iter().skip(1).flatten().copied().collect();
        let miou = if defined.is_empty() {
            0.0
        } else {
            defined.iter().sum::<f64>() / defined.len() as f64
        };
        MetricsReport {
            empty: self.scored_voxels == 0,
            iou: self.occupancy.iou().unwrap_or(0.0),
            miou,
            per_class,
            scored_voxels: self.scored_voxels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// No voxel was scored; all values are zero.
    pub empty: bool,
    pub iou: f64,
    pub miou: f64,
    /// Index = class id; `None` where the class appeared nowhere.
    pub per_class: Vec<Option<f64>>,
    pub scored_voxels: u64,
}

impl MetricsReport {
    /// `key = value` lines.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "empty = {}\nscored_voxels = {}\niou = {:.6}\nmiou = {:.6}\n",
            self.empty, self.scored_voxels, self.iou, self.miou
        );
        for (c, v) in self.per_class.iter().enumerate().skip(1) {
            match v {
                Some(v) => s.push_str(&format!("class_{c}_iou = {v:.6}\n")),
                None => s.push_str(&format!("class_{c}_iou = n/a\n")),
            }
        }
        s
    }
}

/// Voxels whose center projects inside the current camera image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewMask {
    pub dims: [usize; 3],
    pub in_view: Vec<bool>,
}

impl ViewMask {
    pub fn out_of_view(&self) -> Vec<bool> {
        self.in_view.iter().map(|&v| !v).collect()
    }
}

/// Frustum test of every voxel center: in view iff the center is in front
/// of the camera and projects to `0 <= u < width`, `0 <= v < height`.
pub fn oov_mask(bounds: &VoxelBounds, intr: &CameraIntrinsics, cam_from_ego: &RigidTransform) -> ViewMask {
    let [rx, ry, rz] = bounds.resolution;
    let mut in_view = Vec::with_capacity(rx * ry * rz);
    for x in 0..rx {
        for y in 0..ry {
            for z in 0..rz {
                let c = cam_from_ego.apply(&bounds.voxel_center([x, y, z]));
                in_view.push(project_point(&c, intr).in_image(intr));
            }
        }
    }
    ViewMask {
        dims: bounds.resolution,
        in_view,
    }
}

/// Evaluation region selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    #[default]
    All,
    InView,
    Oov,
}
