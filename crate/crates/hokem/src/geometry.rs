//! Binary object masks and the nine-point object keypoint extraction.
//!
//! A pixel `(i, j)` is the unit square centered on the integer coordinate
//! `(i, j)`; the containing pixel of a continuous point is found by rounding.
//! Keypoints are the mask centroid ("gravity"), the four extreme pixels, and
//! four boundary points obtained by marching rays from gravity through
//! midpoints of adjacent extremes, capped at the bounding box.

use serde::{Deserialize, Serialize};

use crate::error::{HokemError, Result};

/// Coarse ray-march step in pixels.
const MARCH_STEP: f64 = 0.25;
/// Refinement step around the farthest occupied coarse sample.
const REFINE_STEP: f64 = 0.01;

/// Binary occupancy grid with a tight bounding box over occupied pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
    /// (x_min, y_min, x_max, y_max), inclusive pixel coordinates.
    bbox: (usize, usize, usize, usize),
}

impl RasterMask {
    /// Builds a mask from row-major occupancy bits.
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(HokemError::Contract(format!(
                "mask bits length {} does not match {}x{}",
                bits.len(),
                width,
                height
            )));
        }
        let mut bbox: Option<(usize, usize, usize, usize)> = None;
        for j in 0..height {
            for i in 0..width {
                if bits[j * width + i] {
                    bbox = Some(match bbox {
                        None => (i, j, i, j),
                        Some((x0, y0, x1, y1)) => (x0.min(i), y0.min(j), x1.max(i), y1.max(j)),
                    });
                }
            }
        }
        let bbox =
            bbox.ok_or_else(|| HokemError::Contract("mask has no occupied pixels".into()))?;
        Ok(RasterMask {
            width,
            height,
            bits,
            bbox,
        })
    }

    /// Builds a mask from a per-pixel predicate.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        let mut bits = vec![false; width * height];
        for j in 0..height {
            for i in 0..width {
                bits[j * width + i] = f(i, j);
            }
        }
        RasterMask::new(width, height, bits)
    }

    /// Rasterizes a union of polygons (flat `[x0, y0, x1, y1, ...]` rings)
    /// with an even-odd pixel-center-inside test. Polygon coordinates live in
    /// the continuous frame where pixel `(i, j)` spans `[i, i+1)`.
    pub fn from_polygons(width: usize, height: usize, polygons: &[Vec<f64>]) -> Result<Self> {
        for (idx, poly) in polygons.iter().enumerate() {
            if poly.len() < 6 || poly.len() % 2 != 0 {
                return Err(HokemError::Contract(format!(
                    "polygon {idx} must hold an even number of >= 6 coordinates, got {}",
                    poly.len()
                )));
            }
        }
        RasterMask::from_fn(width, height, |i, j| {
            let (cx, cy) = (i as f64 + 0.5, j as f64 + 0.5);
            let mut inside = false;
            for poly in polygons {
                let n = poly.len() / 2;
                let mut k_prev = n - 1;
                for k in 0..n {
                    let (x0, y0) = (poly[2 * k_prev], poly[2 * k_prev + 1]);
                    let (x1, y1) = (poly[2 * k], poly[2 * k + 1]);
                    if (y1 > cy) != (y0 > cy) {
                        let t = (cy - y1) / (y0 - y1);
                        if cx < x1 + t * (x0 - x1) {
                            inside = !inside;
                        }
                    }
                    k_prev = k;
                }
            }
            inside
        })
    }

    /// Decodes uncompressed column-major run-length counts (runs alternate
    /// unoccupied/occupied, starting unoccupied).
    pub fn from_rle(width: usize, height: usize, counts: &[u32]) -> Result<Self> {
        let total: u64 = counts.iter().map(|&c| c as u64).sum();
        if total != (width * height) as u64 {
            return Err(HokemError::Contract(format!(
                "run-length counts sum to {total}, expected {}",
                width * height
            )));
        }
        let mut bits = vec![false; width * height];
        let mut pos = 0usize;
        for (run, &count) in counts.iter().enumerate() {
            let value = run % 2 == 1;
            for _ in 0..count {
                if value {
                    let (i, j) = (pos / height, pos % height);
                    bits[j * width + i] = true;
                }
                pos += 1;
            }
        }
        RasterMask::new(width, height, bits)
    }

    /// Column-major run-length counts; inverse of [`RasterMask::from_rle`].
    pub fn to_rle_counts(&self) -> Vec<u32> {
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u32;
        for i in 0..self.width {
            for j in 0..self.height {
                let bit = self.bits[j * self.width + i];
                if bit == current {
                    run += 1;
                } else {
                    counts.push(run);
                    current = bit;
                    run = 1;
                }
            }
        }
        counts.push(run);
        counts
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Tight bounds of occupied pixels: (x_min, y_min, x_max, y_max).
    pub fn bbox(&self) -> (usize, usize, usize, usize) {
        self.bbox
    }

    pub fn is_occupied(&self, i: i64, j: i64) -> bool {
        if i < 0 || j < 0 || i >= self.width as i64 || j >= self.height as i64 {
            return false;
        }
        self.bits[j as usize * self.width + i as usize]
    }

    /// Whether the pixel containing the continuous point is occupied.
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        self.is_occupied(x.round() as i64, y.round() as i64)
    }

    pub fn occupied_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn occupied_pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let width = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(idx, _)| (idx % width, idx / width))
    }

    /// Arithmetic mean of occupied pixel coordinates.
    pub fn centroid(&self) -> (f64, f64) {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
        for (i, j) in self.occupied_pixels() {
            sx += i as f64;
            sy += j as f64;
            n += 1.0;
        }
        (sx / n, sy / n)
    }

    /// Extreme pixels in the order (top, left, bottom, right). Ties along the
    /// extremal row/column resolve to the lower median of the run.
    pub fn extreme_points(&self) -> [(f64, f64); 4] {
        let (x0, y0, x1, y1) = self.bbox;
        let median = |mut run: Vec<usize>| -> usize {
            run.sort_unstable();
            run[(run.len() - 1) / 2]
        };
        let top_x = median(
            (x0..=x1)
                .filter(|&i| self.bits[y0 * self.width + i])
                .collect(),
        );
        let bottom_x = median(
            (x0..=x1)
                .filter(|&i| self.bits[y1 * self.width + i])
                .collect(),
        );
        let left_y = median(
            (y0..=y1)
                .filter(|&j| self.bits[j * self.width + x0])
                .collect(),
        );
        let right_y = median(
            (y0..=y1)
                .filter(|&j| self.bits[j * self.width + x1])
                .collect(),
        );
        [
            (top_x as f64, y0 as f64),
            (x0 as f64, left_y as f64),
            (bottom_x as f64, y1 as f64),
            (x1 as f64, right_y as f64),
        ]
    }

    /// Boundary point on the ray from `gravity` through the midpoint of two
    /// adjacent extremes: the farthest ray sample (0.25 px steps, 0.01 px
    /// refinement) whose containing pixel is occupied, marching as far as the
    /// closed bounding box. Degenerate direction or a ray that never meets
    /// the mask yields the midpoint itself.
    pub fn intermediate_keypoint(
        &self,
        gravity: (f64, f64),
        pa: (f64, f64),
        pb: (f64, f64),
    ) -> (f64, f64) {
        let m = ((pa.0 + pb.0) / 2.0, (pa.1 + pb.1) / 2.0);
        let (dx, dy) = (m.0 - gravity.0, m.1 - gravity.1);
        let norm = (dx * dx + dy * dy).sqrt();
        if norm == 0.0 {
            return m;
        }
        let dir = (dx / norm, dy / norm);
        let inside = |t: f64| {
            let (x, y) = (gravity.0 + t * dir.0, gravity.1 + t * dir.1);
            let (bx0, by0, bx1, by1) = self.bbox;
            x >= bx0 as f64 && x <= bx1 as f64 && y >= by0 as f64 && y <= by1 as f64
        };
        let sample = |t: f64| (gravity.0 + t * dir.0, gravity.1 + t * dir.1);

        let mut farthest: Option<f64> = None;
        let mut t = 0.0;
        while inside(t) {
            let (x, y) = sample(t);
            if self.contains_point(x, y) {
                farthest = Some(t);
            }
            t += MARCH_STEP;
        }
        let Some(coarse) = farthest else { return m };
        let mut best = coarse;
        let mut t = coarse;
        while t <= coarse + MARCH_STEP && inside(t) {
            let (x, y) = sample(t);
            if self.contains_point(x, y) {
                best = t;
            }
            t += REFINE_STEP;
        }
        sample(best)
    }
}

/// Names of the nine object keypoints, in canonical order.
/// Serializable column-major run-length form of a [`RasterMask`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RleMask {
    pub width: usize,
    pub height: usize,
    pub counts: Vec<u32>,
}

impl RleMask {
    pub fn from_mask(mask: &RasterMask) -> Self {
        RleMask {
            width: mask.width(),
            height: mask.height(),
            counts: mask.to_rle_counts(),
        }
    }

    pub fn decode(&self) -> Result<RasterMask> {
        RasterMask::from_rle(self.width, self.height, &self.counts)
    }
}

pub const OBJECT_KEYPOINT_NAMES: [&str; 9] = [
    "gravity", "top", "left", "bottom", "right", "inter_tl", "inter_lb", "inter_br", "inter_rt",
];

/// The nine object keypoints. Field order is the canonical node order:
/// gravity, the four extremes, then the four intermediates between adjacent
/// extremes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectKeypoints {
    pub gravity: [f64; 2],
    pub top: [f64; 2],
    pub left: [f64; 2],
    pub bottom: [f64; 2],
    pub right: [f64; 2],
    pub inter_tl: [f64; 2],
    pub inter_lb: [f64; 2],
    pub inter_br: [f64; 2],
    pub inter_rt: [f64; 2],
}

impl ObjectKeypoints {
    /// All nine points in canonical order.
    pub fn points(&self) -> [[f64; 2]; 9] {
        [
            self.gravity,
            self.top,
            self.left,
            self.bottom,
            self.right,
            self.inter_tl,
            self.inter_lb,
            self.inter_br,
            self.inter_rt,
        ]
    }

    pub fn from_points(points: [[f64; 2]; 9]) -> Self {
        ObjectKeypoints {
            gravity: points[0],
            top: points[1],
            left: points[2],
            bottom: points[3],
            right: points[4],
            inter_tl: points[5],
            inter_lb: points[6],
            inter_br: points[7],
            inter_rt: points[8],
        }
    }
}

/// Extracts the nine object keypoints from a mask.
pub fn extract_object_keypoints(mask: &RasterMask) -> ObjectKeypoints {
    let gravity = mask.centroid();
    let [top, left, bottom, right] = mask.extreme_points();
    let inter_tl = mask.intermediate_keypoint(gravity, top, left);
    let inter_lb = mask.intermediate_keypoint(gravity, left, bottom);
    let inter_br = mask.intermediate_keypoint(gravity, bottom, right);
    let inter_rt = mask.intermediate_keypoint(gravity, right, top);
    ObjectKeypoints {
        gravity: [gravity.0, gravity.1],
        top: [top.0, top.1],
        left: [left.0, left.1],
        bottom: [bottom.0, bottom.1],
        right: [right.0, right.1],
        inter_tl: [inter_tl.0, inter_tl.1],
        inter_lb: [inter_lb.0, inter_lb.1],
        inter_br: [inter_br.0, inter_br.1],
        inter_rt: [inter_rt.0, inter_rt.1],
    }
}
