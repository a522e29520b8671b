//! Per-node input features: coordinates normalized by the upper-body frame,
//! plus distance and angle to the neck.
//!
//! Every node carries `[x, y, d, a]`: coordinates shifted by the human
//! bounding box corner and scaled by the shoulder/hip box diagonal, the
//! Euclidean distance to the neck (shoulder midpoint), and the arctangent of
//! `|dy/dx|` rescaled to `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{HokemError, Result};
use crate::geometry::ObjectKeypoints;
use crate::hograph::{nodes, N_HUMAN, N_NODES};
use crate::tensor::Tensor;

/// Minimum upper-body diagonal, in pixels, below which a sample is rejected.
pub const MIN_DIAGONAL: f64 = 1e-6;

/// Input feature width per node.
pub const FEATURE_DIM: usize = 4;

/// One person plus one object in image-frame coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeypointSet {
    /// COCO-order joints.
    pub human: [[f64; 2]; N_HUMAN],
    /// Per-joint detection validity. Invalid joints keep their reported
    /// coordinates; nothing is imputed.
    pub valid: [bool; N_HUMAN],
    pub object: ObjectKeypoints,
    /// (x_min, y_min, x_max, y_max) of the person detection.
    pub human_bbox: [f64; 4],
}

impl KeypointSet {
    fn require_joint(&self, idx: usize) -> Result<[f64; 2]> {
        if !self.valid[idx] {
            return Err(HokemError::Normalization(format!(
                "required joint {} is not valid",
                crate::hograph::node_name(idx)
            )));
        }
        Ok(self.human[idx])
    }

    fn check_bbox(&self) -> Result<()> {
        let [x0, y0, x1, y1] = self.human_bbox;
        if !(x1 > x0 && y1 > y0) {
            return Err(HokemError::Normalization(format!(
                "human bbox must have positive extent, got {:?}",
                self.human_bbox
            )));
        }
        Ok(())
    }
}

/// `N_NODES x 4` feature rows in graph node order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    rows: Vec<[f64; FEATURE_DIM]>,
}

impl FeatureMatrix {
    pub fn rows(&self) -> &[[f64; FEATURE_DIM]] {
        &self.rows
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            self.rows.len(),
            FEATURE_DIM,
            self.rows.iter().flatten().copied().collect(),
        )
    }
}

/// Midpoint of the shoulders; the surrogate for the missing neck joint.
pub fn neck_point(kps: &KeypointSet) -> Result<(f64, f64)> {
    let l = kps.require_joint(nodes::LEFT_SHOULDER)?;
    let r = kps.require_joint(nodes::RIGHT_SHOULDER)?;
    Ok(((l[0] + r[0]) / 2.0, (l[1] + r[1]) / 2.0))
}

/// The normalization frame: bbox upper-left corner and the diagonal of the
/// tight box around shoulders and hips.
fn upper_body_frame(kps: &KeypointSet) -> Result<((f64, f64), f64)> {
    kps.check_bbox()?;
    let anchors = [
        kps.require_joint(nodes::LEFT_SHOULDER)?,
        kps.require_joint(nodes::RIGHT_SHOULDER)?,
        kps.require_joint(nodes::LEFT_HIP)?,
        kps.require_joint(nodes::RIGHT_HIP)?,
    ];
    let min = |f: fn(&[f64; 2]) -> f64| anchors.iter().map(f).fold(f64::INFINITY, f64::min);
    let max = |f: fn(&[f64; 2]) -> f64| anchors.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let (w, h) = (max(|p| p[0]) - min(|p| p[0]), max(|p| p[1]) - min(|p| p[1]));
    let diag = w.hypot(h);
    if diag <= MIN_DIAGONAL {
        return Err(HokemError::Normalization(format!(
            "upper-body diagonal {diag} below {MIN_DIAGONAL}"
        )));
    }
    Ok(((kps.human_bbox[0], kps.human_bbox[1]), diag))
}

/// Shifts all 26 points by the bbox upper-left corner and divides by the
/// diagonal of the tight box around shoulders and hips. Returns points in
/// graph node order.
pub fn normalize_coordinates(kps: &KeypointSet) -> Result<Vec<(f64, f64)>> {
    let ((ux, uy), diag) = upper_body_frame(kps)?;
    let map = |p: [f64; 2]| ((p[0] - ux) / diag, (p[1] - uy) / diag);
    let mut out = Vec::with_capacity(N_NODES);
    out.extend(kps.human.iter().map(|&p| map(p)));
    out.extend(kps.object.points().iter().map(|&p| map(p)));
    Ok(out)
}

/// Distance and angle features relative to the neck, appended to the given
/// normalized coordinates. The angle is `atan(|dy/dx|) * 2/pi`, pinned to 1
/// on the vertical (`dx = 0`) and to 0 at the neck itself.
pub fn compute_features(coords: &[(f64, f64)], neck: (f64, f64)) -> FeatureMatrix {
    let rows = coords
        .iter()
        .map(|&(x, y)| {
            let (dx, dy) = (x - neck.0, y - neck.1);
            let d = dx.hypot(dy);
            let a = if dx == 0.0 {
                if dy == 0.0 {
                    0.0
                } else {
                    1.0
                }
            } else {
                (dy / dx).abs().atan() * std::f64::consts::FRAC_2_PI
            };
            [x, y, d, a]
        })
        .collect();
    FeatureMatrix { rows }
}

/// Full pipeline from an image-frame keypoint set to the feature matrix.
pub fn features_for(kps: &KeypointSet) -> Result<FeatureMatrix> {
    let coords = normalize_coordinates(kps)?;
    let neck = neck_point(kps)?;
    let ((ux, uy), diag) = upper_body_frame(kps)?;
    let neck_norm = ((neck.0 - ux) / diag, (neck.1 - uy) / diag);
    Ok(compute_features(&coords, neck_norm))
}
