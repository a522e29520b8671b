//! Scene records, JSON-lines persistence, and validating ingestion.
//!
//! Bulk data lives as one JSON document per line. Ingestion is permissive
//! at the file level: malformed or contract-violating records are collected
//! into an error report carrying a JSON pointer to the offending field,
//! while valid records pass through in file order.

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{HokemError, Result};
use crate::features::KeypointSet;
use crate::geometry::{extract_object_keypoints, RasterMask, RleMask};
use crate::hograph::N_HUMAN;

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path)?;
    let mut items = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        items.push(serde_json::from_str(&line)?);
    }
    Ok(items)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanInstance {
    /// 17 COCO-order joints.
    pub keypoints: Vec<[f64; 2]>,
    pub valid: Vec<bool>,
    pub bbox: [f64; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolygonSet {
    pub width: usize,
    pub height: usize,
    /// Flat `[x0, y0, x1, y1, ...]` rings, rasterized even-odd.
    pub rings: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segmentation {
    Rle(RleMask),
    Polygons(PolygonSet),
}

impl Segmentation {
    pub fn decode(&self) -> Result<RasterMask> {
        match self {
            Segmentation::Rle(rle) => rle.decode(),
            Segmentation::Polygons(p) => RasterMask::from_polygons(p.width, p.height, &p.rings),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub segmentation: Segmentation,
    pub bbox: [f64; 4],
    pub category: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub human: usize,
    pub object: usize,
    pub classes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairBaseline {
    pub human: usize,
    pub object: usize,
    pub probs: Vec<f64>,
}

/// One image worth of upstream detector output: posed humans, segmented
/// objects, labeled interactions, and optional per-pair baseline scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub image_id: u64,
    pub width: usize,
    pub height: usize,
    pub humans: Vec<HumanInstance>,
    pub objects: Vec<ObjectInstance>,
    #[serde(default)]
    pub interactions: Vec<Interaction>,
    #[serde(default)]
    pub baselines: Vec<PairBaseline>,
}

/// A rejected input line: where it sat in the file and which field broke.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestError {
    /// 1-based line number.
    pub line: usize,
    /// JSON pointer into the record ("" when the line is not valid JSON).
    pub pointer: String,
    pub message: String,
}

fn validate_scene(scene: &SceneRecord) -> std::result::Result<(), (String, String)> {
    for (i, h) in scene.humans.iter().enumerate() {
        if h.keypoints.len() != N_HUMAN {
            return Err((
                format!("/humans/{i}/keypoints"),
                format!("expected {N_HUMAN} keypoints, got {}", h.keypoints.len()),
            ));
        }
        if h.valid.len() != N_HUMAN {
            return Err((
                format!("/humans/{i}/valid"),
                format!("expected {N_HUMAN} validity flags, got {}", h.valid.len()),
            ));
        }
    }
    for (i, o) in scene.objects.iter().enumerate() {
        match o.segmentation.decode() {
            Err(e) => return Err((format!("/objects/{i}/segmentation"), e.to_string())),
            Ok(mask) if mask.occupied_count() == 0 => {
                return Err((
                    format!("/objects/{i}/segmentation"),
                    "mask decodes to an empty raster".to_string(),
                ))
            }
            Ok(_) => {}
        }
    }
    for (i, it) in scene.interactions.iter().enumerate() {
        if it.human >= scene.humans.len() {
            return Err((
                format!("/interactions/{i}/human"),
                format!("human index {} out of range", it.human),
            ));
        }
        if it.object >= scene.objects.len() {
            return Err((
                format!("/interactions/{i}/object"),
                format!("object index {} out of range", it.object),
            ));
        }
    }
    for (i, b) in scene.baselines.iter().enumerate() {
        if b.human >= scene.humans.len() || b.object >= scene.objects.len() {
            return Err((
                format!("/baselines/{i}"),
                "pair index out of range".to_string(),
            ));
        }
    }
    Ok(())
}

/// Reads scene JSONL. An unreadable file is fatal; bad records land in the
/// error report and good ones come back in file order.
pub fn ingest(path: &Path) -> Result<(Vec<SceneRecord>, Vec<IngestError>)> {
    let file = std::fs::File::open(path)?;
    let mut scenes = Vec::new();
    let mut errors = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        match serde_json::from_str::<SceneRecord>(&line) {
            Err(e) => errors.push(IngestError {
                line: lineno,
                pointer: String::new(),
                message: e.to_string(),
            }),
            Ok(scene) => match validate_scene(&scene) {
                Ok(()) => scenes.push(scene),
                Err((pointer, message)) => errors.push(IngestError {
                    line: lineno,
                    pointer,
                    message,
                }),
            },
        }
    }
    Ok((scenes, errors))
}

/// Human-major Cartesian product of the scene's instances.
pub fn enumerate_pairs(scene: &SceneRecord) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(scene.humans.len() * scene.objects.len());
    for h in 0..scene.humans.len() {
        for o in 0..scene.objects.len() {
            pairs.push((h, o));
        }
    }
    pairs
}

/// Runs object-keypoint extraction for one pair of a validated scene.
pub fn keypoints_for_pair(scene: &SceneRecord, human: usize, object: usize) -> Result<KeypointSet> {
    let h = scene
        .humans
        .get(human)
        .ok_or_else(|| HokemError::Contract(format!("human index {human} out of range")))?;
    let o = scene
        .objects
        .get(object)
        .ok_or_else(|| HokemError::Contract(format!("object index {object} out of range")))?;
    let mask = o.segmentation.decode()?;
    let keypoints: [[f64; 2]; N_HUMAN] = h.keypoints.clone().try_into().map_err(|_| {
        HokemError::Contract(format!(
            "expected {N_HUMAN} keypoints, got {}",
            h.keypoints.len()
        ))
    })?;
    let valid: [bool; N_HUMAN] = h.valid.clone().try_into().map_err(|_| {
        HokemError::Contract(format!(
            "expected {N_HUMAN} validity flags, got {}",
            h.valid.len()
        ))
    })?;
    Ok(KeypointSet {
        human: keypoints,
        valid,
        object: extract_object_keypoints(&mask),
        human_bbox: h.bbox,
    })
}
