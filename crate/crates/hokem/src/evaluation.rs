//! Probability fusion and role-AP scoring over ranked human-object
//! detections.
//!
//! A detection counts as a true positive for a class when its human box
//! overlaps a ground truth of that class with IoU > 0.5 and the object
//! condition holds. Ground truths without an object box model occluded
//! objects: Scenario 1 then demands the detection carry no object box,
//! Scenario 2 drops the object condition entirely. Matching is greedy in
//! score order with single-use ground truths; AP integrates the all-point
//! interpolated precision-recall curve.

use serde::{Deserialize, Serialize};

use crate::error::{HokemError, Result};
use crate::network::Model;
use crate::par::par_map;
use crate::training::HOSample;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionSource {
    Baseline,
    Hokem,
    Fused,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: u64,
    pub human_box: [f64; 4],
    /// Absent means the detector reported the object as occluded.
    pub object_box: Option<[f64; 4]>,
    /// One score per class, each in [0, 1].
    pub scores: Vec<f64>,
    pub source: DetectionSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub image_id: u64,
    pub human_box: [f64; 4],
    /// Absent marks an occluded object.
    pub object_box: Option<[f64; 4]>,
    /// Non-empty set of class indices.
    pub classes: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Scenario {
    One,
    Two,
}

impl TryFrom<u8> for Scenario {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Scenario::One),
            2 => Ok(Scenario::Two),
            other => Err(format!("scenario must be 1 or 2, got {other}")),
        }
    }
}

impl From<Scenario> for u8 {
    fn from(s: Scenario) -> u8 {
        match s {
            Scenario::One => 1,
            Scenario::Two => 2,
        }
    }
}

/// Elementwise product of two probability vectors.
pub fn fuse(baseline: &[f64], hokem: &[f64]) -> Result<Vec<f64>> {
    if baseline.len() != hokem.len() {
        return Err(HokemError::Contract(format!(
            "fusion arity mismatch: {} vs {}",
            baseline.len(),
            hokem.len()
        )));
    }
    Ok(baseline.iter().zip(hokem).map(|(a, b)| a * b).collect())
}

/// Intersection over union of two `[x0, y0, x1, y1]` boxes. Degenerate
/// (zero-area) boxes score 0 against everything.
pub fn iou(a: [f64; 4], b: [f64; 4]) -> f64 {
    let area = |r: [f64; 4]| (r[2] - r[0]).max(0.0) * (r[3] - r[1]).max(0.0);
    let (aa, ab) = (area(a), area(b));
    if aa == 0.0 || ab == 0.0 {
        return 0.0;
    }
    let iw = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let ih = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = iw * ih;
    inter / (aa + ab - inter)
}

/// How a detection relates to one ground truth for matching purposes:
/// `None` if ineligible, otherwise a preference key (larger is better).
/// Box-to-box matches always outrank ignored-object matches because their
/// key exceeds 1.
fn match_key(det: &Detection, gt: &GroundTruth, scenario: Scenario) -> Option<f64> {
    if det.image_id != gt.image_id {
        return None;
    }
    let human = iou(det.human_box, gt.human_box);
    if human <= 0.5 {
        return None;
    }
    match (gt.object_box, det.object_box) {
        (Some(gbox), Some(dbox)) => {
            let object = iou(dbox, gbox);
            (object > 0.5).then_some(human + object)
        }
        (Some(_), None) => None,
        (None, dbox) => match scenario {
            Scenario::One => dbox.is_none().then_some(human),
            Scenario::Two => Some(human),
        },
    }
}

/// Area under the all-point interpolated precision-recall curve for ranked
/// true/false-positive flags.
fn average_precision(ranked_tp: &[bool], n_gt: usize) -> f64 {
    let mut precisions = Vec::with_capacity(ranked_tp.len());
    let mut recalls = Vec::with_capacity(ranked_tp.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for &is_tp in ranked_tp {
        if is_tp {
            tp += 1;
        } else {
            fp += 1;
        }
        precisions.push(tp as f64 / (tp + fp) as f64);
        recalls.push(tp as f64 / n_gt as f64);
    }
    for i in (0..precisions.len().saturating_sub(1)).rev() {
        precisions[i] = precisions[i].max(precisions[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (r, p) in recalls.iter().zip(&precisions) {
        ap += (r - prev_recall) * p;
        prev_recall = *r;
    }
    ap
}

/// AP for one class, or `None` when no ground truth mentions the class.
/// Detections are ranked by the class score, ties keeping input order, and
/// matched greedily against unused ground truths of the same image.
pub fn compute_role_ap(
    detections: &[Detection],
    ground_truths: &[GroundTruth],
    scenario: Scenario,
    class: usize,
) -> Option<f64> {
    let gt_indices: Vec<usize> = ground_truths
        .iter()
        .enumerate()
        .filter(|(_, g)| g.classes.contains(&class))
        .map(|(i, _)| i)
        .collect();
    if gt_indices.is_empty() {
        return None;
    }
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| {
        detections[b].scores[class]
            .partial_cmp(&detections[a].scores[class])
            .expect("scores are finite")
    });
    let mut used = vec![false; ground_truths.len()];
    let mut ranked_tp = Vec::with_capacity(detections.len());
    for &di in &order {
        let det = &detections[di];
        let best = gt_indices
            .iter()
            .filter(|&&gi| !used[gi])
            .filter_map(|&gi| match_key(det, &ground_truths[gi], scenario).map(|k| (gi, k)))
            // Max key, ties to the lowest ground-truth index.
            .fold(None::<(usize, f64)>, |acc, (gi, k)| match acc {
                Some((_, bk)) if bk >= k => acc,
                _ => Some((gi, k)),
            });
        match best {
            Some((gi, _)) => {
                used[gi] = true;
                ranked_tp.push(true);
            }
            None => ranked_tp.push(false),
        }
    }
    Some(average_precision(&ranked_tp, gt_indices.len()))
}

/// Arithmetic mean over classes whose AP is defined.
pub fn mean_ap(per_class: &[Option<f64>]) -> Result<f64> {
    let defined: Vec<f64> = per_class.iter().filter_map(|&a| a).collect();
    if defined.is_empty() {
        return Err(HokemError::Evaluation(
            "no class has ground truth; mAP is undefined".into(),
        ));
    }
    Ok(defined.iter().sum::<f64>() / defined.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: String,
    pub n_gt: usize,
    /// `None` when the class never appears in the ground truth.
    pub ap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scenario: Scenario,
    pub source: DetectionSource,
    pub per_class: Vec<ClassReport>,
    pub map: f64,
}

impl EvalReport {
    /// Plain-text table, one class per row.
    pub fn table(&self) -> String {
        let mut out = format!(
            "scenario {}  source {:?}\n{:<20} {:>6} {:>10}\n",
            u8::from(self.scenario),
            self.source,
            "class",
            "n_gt",
            "AP"
        );
        for c in &self.per_class {
            let ap = match c.ap {
                Some(v) => format!("{v:.4}"),
                None => "--".to_string(),
            };
            out.push_str(&format!("{:<20} {:>6} {:>10}\n", c.class, c.n_gt, ap));
        }
        out.push_str(&format!("mAP {:.4}\n", self.map));
        out
    }
}

/// Per-class role AP plus mAP for one detection source.
pub fn evaluate(
    detections: &[Detection],
    ground_truths: &[GroundTruth],
    scenario: Scenario,
    class_names: &[String],
    source: DetectionSource,
) -> Result<EvalReport> {
    let filtered: Vec<Detection> = detections
        .iter()
        .filter(|d| d.source == source)
        .cloned()
        .collect();
    let classes: Vec<usize> = (0..class_names.len()).collect();
    let aps = par_map(&classes, |&c| {
        compute_role_ap(&filtered, ground_truths, scenario, c)
    });
    let map = mean_ap(&aps)?;
    let per_class = class_names
        .iter()
        .zip(&aps)
        .enumerate()
        .map(|(c, (name, &ap))| ClassReport {
            class: name.clone(),
            n_gt: ground_truths
                .iter()
                .filter(|g| g.classes.contains(&c))
                .count(),
            ap,
        })
        .collect();
    Ok(EvalReport {
        scenario,
        source,
        per_class,
        map,
    })
}

/// One detection per sample for each requested source, scores taken from
/// the baseline vector, the network, or their product.
pub fn detections_from_samples(
    model: &Model,
    samples: &[HOSample],
    sources: &[DetectionSource],
) -> Result<Vec<Detection>> {
    let probs = par_map(samples, |s| model.forward(&s.features.to_tensor()));
    let mut out = Vec::with_capacity(samples.len() * sources.len());
    for (s, p) in samples.iter().zip(probs) {
        let hokem = p?;
        for &source in sources {
            let scores = match source {
                DetectionSource::Baseline => s.baseline_probs.clone(),
                DetectionSource::Hokem => hokem.clone(),
                DetectionSource::Fused => fuse(&s.baseline_probs, &hokem)?,
            };
            out.push(Detection {
                image_id: s.image_id,
                human_box: s.human_box,
                object_box: Some(s.object_box),
                scores,
                source,
            });
        }
    }
    Ok(out)
}

pub fn ground_truths_from_samples(samples: &[HOSample]) -> Vec<GroundTruth> {
    samples
        .iter()
        .map(|s| GroundTruth {
            image_id: s.image_id,
            human_box: s.human_box,
            object_box: Some(s.object_box),
            classes: s
                .labels
                .iter()
                .enumerate()
                .filter(|(_, &l)| l != 0.0)
                .map(|(i, _)| i)
                .collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn det(image_id: u64, human: [f64; 4], object: Option<[f64; 4]>, score: f64) -> Detection {
        Detection {
            image_id,
            human_box: human,
            object_box: object,
            scores: vec![score],
            source: DetectionSource::Hokem,
        }
    }

    fn gt(image_id: u64, human: [f64; 4], object: Option<[f64; 4]>) -> GroundTruth {
        GroundTruth {
            image_id,
            human_box: human,
            object_box: object,
            classes: vec![0],
        }
    }

    const H: [f64; 4] = [0.0, 0.0, 10.0, 10.0];
    const O: [f64; 4] = [20.0, 0.0, 30.0, 10.0];

    #[test]
    fn fuse_fixtures_and_property() {
        assert_eq!(fuse(&[1.0, 1.0], &[0.3, 0.9]).unwrap(), vec![0.3, 0.9]);
        assert!((fuse(&[0.8], &[0.5]).unwrap()[0] - 0.4).abs() < 1e-15);
        assert!(fuse(&[0.5], &[0.5, 0.5]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let a: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..=1.0)).collect();
            let b: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..=1.0)).collect();
            for (f, (x, y)) in fuse(&a, &b).unwrap().iter().zip(a.iter().zip(&b)) {
                assert!(*f <= x.min(*y) + 1e-15);
            }
        }
    }

    #[test]
    fn fusion_argmax_dominance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let a: Vec<f64> = (0..5).map(|_| rng.gen_range(0.01..=1.0)).collect();
            let b: Vec<f64> = (0..5).map(|_| rng.gen_range(0.01..=1.0)).collect();
            let argmax = |v: &[f64]| {
                v.iter()
                    .enumerate()
                    .max_by(|x, y| x.1.partial_cmp(y.1).unwrap())
                    .unwrap()
                    .0
            };
            if argmax(&a) == argmax(&b) {
                assert_eq!(argmax(&fuse(&a, &b).unwrap()), argmax(&a));
            }
        }
    }

    #[test]
    fn iou_fixtures() {
        assert_eq!(iou(H, H), 1.0);
        let v = iou([0.0, 0.0, 10.0, 10.0], [5.0, 0.0, 15.0, 10.0]);
        assert!((v - 50.0 / 150.0).abs() < 1e-12);
        assert_eq!(iou(H, [40.0, 40.0, 50.0, 50.0]), 0.0);
        assert_eq!(iou([3.0, 3.0, 3.0, 9.0], H), 0.0, "degenerate box");
    }

    #[test]
    fn hand_fixture_is_five_sixths() {
        let gts = vec![gt(0, H, Some(O)), gt(1, H, Some(O))];
        let dets = vec![
            det(0, H, Some(O), 0.9),
            det(0, [100.0, 100.0, 110.0, 110.0], Some(O), 0.8),
            det(1, H, Some(O), 0.7),
        ];
        let ap = compute_role_ap(&dets, &gts, Scenario::One, 0).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-12);
        assert!((ap - (0.5 + 0.5 * (2.0 / 3.0))).abs() < 1e-15);
    }

    #[test]
    fn perfect_detector_scores_one() {
        let gts: Vec<GroundTruth> = (0..4).map(|i| gt(i, H, Some(O))).collect();
        let dets: Vec<Detection> = (0..4)
            .map(|i| det(i, H, Some(O), 0.9 - 0.1 * i as f64))
            .collect();
        assert_eq!(compute_role_ap(&dets, &gts, Scenario::One, 0).unwrap(), 1.0);
        assert!(
            compute_role_ap(&dets, &gts, Scenario::One, 3).is_none(),
            "unseen class"
        );
    }

    #[test]
    fn occlusion_scenario_rules() {
        let gts = vec![gt(0, H, None)];
        // Detection carries an object box against an occluded ground truth.
        let with_box = vec![det(0, H, Some(O), 0.9)];
        assert_eq!(
            compute_role_ap(&with_box, &gts, Scenario::Two, 0).unwrap(),
            1.0
        );
        assert_eq!(
            compute_role_ap(&with_box, &gts, Scenario::One, 0).unwrap(),
            0.0
        );
        // An empty-box detection is the Scenario 1 true positive.
        let no_box = vec![det(0, H, None, 0.9)];
        assert_eq!(
            compute_role_ap(&no_box, &gts, Scenario::One, 0).unwrap(),
            1.0
        );
        assert_eq!(
            compute_role_ap(&no_box, &gts, Scenario::Two, 0).unwrap(),
            1.0
        );
    }

    #[test]
    fn scenario_two_never_scores_below_scenario_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n_gt = rng.gen_range(2..6);
            let gts: Vec<GroundTruth> = (0..n_gt)
                .map(|i| {
                    let occluded = rng.gen_bool(0.4);
                    gt(i as u64, H, if occluded { None } else { Some(O) })
                })
                .collect();
            let dets: Vec<Detection> = (0..rng.gen_range(2..10))
                .map(|_| {
                    let img = rng.gen_range(0..n_gt) as u64;
                    let boxed = rng.gen_bool(0.6);
                    let jx = rng.gen_range(-3.0..3.0);
                    det(
                        img,
                        [jx, 0.0, 10.0 + jx, 10.0],
                        boxed.then_some(O),
                        rng.gen_range(0.0..1.0),
                    )
                })
                .collect();
            let s1 = compute_role_ap(&dets, &gts, Scenario::One, 0).unwrap();
            let s2 = compute_role_ap(&dets, &gts, Scenario::Two, 0).unwrap();
            assert!(s2 >= s1 - 1e-12, "s1={s1} s2={s2}");
        }
    }

    #[test]
    fn ap_depends_only_on_ranking() {
        let gts = vec![gt(0, H, Some(O)), gt(1, H, Some(O)), gt(2, H, Some(O))];
        let mut dets = vec![
            det(0, H, Some(O), 0.9),
            det(2, [50.0; 4], Some(O), 0.6),
            det(1, H, Some(O), 0.3),
        ];
        let base = compute_role_ap(&dets, &gts, Scenario::One, 0).unwrap();
        for d in &mut dets {
            d.scores[0] = 0.1 + 0.8 * d.scores[0].powi(3);
        }
        assert_eq!(
            compute_role_ap(&dets, &gts, Scenario::One, 0).unwrap(),
            base
        );
    }

    #[test]
    fn trailing_false_positives_never_help() {
        let gts = vec![gt(0, H, Some(O)), gt(1, H, Some(O))];
        let mut dets = vec![
            det(0, H, Some(O), 0.9),
            det(1, [100.0; 4], Some(O), 0.5),
            det(1, H, Some(O), 0.4),
        ];
        let base = compute_role_ap(&dets, &gts, Scenario::One, 0).unwrap();
        dets.push(det(0, [100.0; 4], Some(O), 0.01));
        let with_junk = compute_role_ap(&dets, &gts, Scenario::One, 0).unwrap();
        assert!(with_junk <= base + 1e-15);
    }

    #[test]
    fn mean_ap_fixtures() {
        assert_eq!(mean_ap(&[Some(0.6)]).unwrap(), 0.6);
        assert_eq!(mean_ap(&[Some(1.0), Some(0.0)]).unwrap(), 0.5);
        assert_eq!(mean_ap(&[Some(0.8), None]).unwrap(), 0.8);
        assert!(mean_ap(&[None, None]).is_err());
    }

    /// Independent AP implementation: for every rank where recall rises,
    /// scan the whole tail for the best precision at or beyond that recall.
    fn brute_force_ap(ranked_tp: &[bool], n_gt: usize) -> f64 {
        let n = ranked_tp.len();
        let prec_at = |k: usize| {
            let tp = ranked_tp[..=k].iter().filter(|&&t| t).count();
            tp as f64 / (k + 1) as f64
        };
        let recall_at =
            |k: usize| ranked_tp[..=k].iter().filter(|&&t| t).count() as f64 / n_gt as f64;
        let mut ap = 0.0;
        let mut prev = 0.0;
        for k in 0..n {
            let r = recall_at(k);
            if r > prev {
                let best = (k..n).map(prec_at).fold(0.0, f64::max);
                ap += (r - prev) * best;
                prev = r;
            }
        }
        ap
    }

    #[test]
    fn matches_brute_force_on_toy_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let gts: Vec<GroundTruth> = (0..8).map(|i| gt(i, H, Some(O))).collect();
            let dets: Vec<Detection> = (0..30)
                .map(|_| {
                    let img = rng.gen_range(0..10) as u64;
                    let correct = rng.gen_bool(0.5);
                    let hbox = if correct { H } else { [60.0, 60.0, 70.0, 70.0] };
                    det(img, hbox, Some(O), rng.gen_range(0.0..1.0))
                })
                .collect();
            let ap = compute_role_ap(&dets, &gts, Scenario::One, 0).unwrap();

            // Recompute the ranked TP flags with a separate, simpler matcher
            // (all boxes here either coincide or are disjoint).
            let mut order: Vec<usize> = (0..dets.len()).collect();
            order.sort_by(|&a, &b| dets[b].scores[0].partial_cmp(&dets[a].scores[0]).unwrap());
            let mut used = vec![false; gts.len()];
            let flags: Vec<bool> = order
                .iter()
                .map(|&i| {
                    let d = &dets[i];
                    let hit = (d.image_id as usize) < gts.len()
                        && d.human_box == H
                        && !used[d.image_id as usize];
                    if hit {
                        used[d.image_id as usize] = true;
                    }
                    hit
                })
                .collect();
            assert!((ap - brute_force_ap(&flags, gts.len())).abs() < 1e-12);
        }
    }

    #[test]
    fn report_table_lists_classes() {
        let gts = vec![gt(0, H, Some(O))];
        let dets = vec![det(0, H, Some(O), 0.9)];
        let names = vec!["hold".to_string(), "kick".to_string()];
        let report = evaluate(&dets, &gts, Scenario::One, &names, DetectionSource::Hokem).unwrap();
        assert_eq!(report.map, 1.0);
        assert_eq!(report.per_class[0].ap, Some(1.0));
        assert_eq!(report.per_class[1].ap, None, "kick has no ground truth");
        let table = report.table();
        assert!(table.contains("hold") && table.contains("kick") && table.contains("mAP"));
        let json = serde_json::to_string(&report).unwrap();
        assert_eq!(serde_json::from_str::<EvalReport>(&json).unwrap(), report);
    }
}
