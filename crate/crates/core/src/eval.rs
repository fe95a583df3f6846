//! Scoring protocols: IoU, multi-threshold average precision with pooled
//! matching, detection accuracy, encoder classification accuracy, oracle
//! modes, and the half-resolution ground-truth round trip.
//!
//! Matching is the benchmark-standard greedy rule: predictions ranked by
//! descending score (ties: larger mask first, then input order) each claim
//! the unmatched ground-truth instance of their class with the highest IoU,
//! provided that IoU reaches the threshold. The precision/recall curve uses
//! all-points interpolation. When several images are evaluated together the
//! match outcomes are pooled into one curve per class, never averaged
//! per image.

use std::collections::BTreeMap;

use crate::codec::{CenterOfMass, Detection};
use crate::error::{Error, Result};
use crate::grid::class_of_instance;
use crate::types::{ClassGrid, ClassId, InstanceId, InstanceLabelMap, PixelSet};

/// IoU thresholds for mean-AP computation. Strictly increasing, each in (0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ApThresholds {
    values: Vec<f64>,
}

impl ApThresholds {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::validation("threshold list cannot be empty"));
        }
        for w in values.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::validation(
                    "thresholds must be strictly increasing",
                ));
            }
        }
        if values[0] <= 0.0 || *values.last().unwrap() > 1.0 {
            return Err(Error::validation("thresholds must lie in (0, 1]"));
        }
        Ok(ApThresholds { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl Default for ApThresholds {
    /// 0.50, 0.55, ..., 0.95.
    fn default() -> Self {
        ApThresholds {
            values: (10..20).map(|i| i as f64 / 20.0).collect(),
        }
    }
}

/// Intersection over union of two pixel sets; 0 when both are empty.
pub fn iou(a: &PixelSet, b: &PixelSet) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let inter = a.intersection_count(b);
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// Per-class AP figures, percentages in [0, 100].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassEval {
    pub ap: f64,
    pub ap50: f64,
    pub gt_count: usize,
}

/// Evaluation result over one or more images.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_class: BTreeMap<ClassId, ClassEval>,
    pub mean_ap: f64,
    pub mean_ap50: f64,
}

/// Per-class classification tallies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassAccuracy {
    pub instances: usize,
    pub correct: usize,
}

impl ClassAccuracy {
    pub fn percent(&self) -> f64 {
        if self.instances == 0 {
            100.0
        } else {
            100.0 * self.correct as f64 / self.instances as f64
        }
    }
}

/// Classification accuracy table plus its consistent total row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccuracyReport {
    pub per_class: BTreeMap<ClassId, ClassAccuracy>,
}

impl AccuracyReport {
    pub fn total_instances(&self) -> usize {
        self.per_class.values().map(|c| c.instances).sum()
    }

    pub fn total_correct(&self) -> usize {
        self.per_class.values().map(|c| c.correct).sum()
    }

    pub fn total_accuracy(&self) -> f64 {
        let n = self.total_instances();
        if n == 0 {
            100.0
        } else {
            100.0 * self.total_correct() as f64 / n as f64
        }
    }
}

/// One pooled match outcome: the prediction's ranking keys plus whether it
/// claimed a ground-truth instance.
#[derive(Debug, Clone, Copy)]
struct MatchRecord {
    score: f64,
    area: usize,
    seq: usize,
    tp: bool,
}

/// Rank prediction indices by descending score, then descending mask area,
/// then input order.
fn ranking(preds: &[(f64, &PixelSet)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| {
        preds[b]
            .0
            .partial_cmp(&preds[a].0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(preds[b].1.len().cmp(&preds[a].1.len()))
            .then(a.cmp(&b))
    });
    order
}

/// Greedy within-image matching at one threshold. `seq_base` offsets the
/// stable pooling key so records from successive images interleave
/// deterministically. Returns the per-prediction outcomes in rank order.
fn match_image(
    preds: &[(f64, &PixelSet)],
    gts: &[&PixelSet],
    threshold: f64,
    seq_base: usize,
) -> Vec<MatchRecord> {
    let order = ranking(preds);
    let mut gt_used = vec![false; gts.len()];
    let mut records = Vec::with_capacity(preds.len());
    for (rank, &pi) in order.iter().enumerate() {
        let (score, mask) = preds[pi];
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in gts.iter().enumerate() {
            if gt_used[gi] {
                continue;
            }
            let v = iou(mask, gt);
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((gi, v));
            }
        }
        let tp = match best {
            Some((gi, v)) if v >= threshold => {
                gt_used[gi] = true;
                true
            }
            _ => false,
        };
        records.push(MatchRecord {
            score,
            area: mask.len(),
            seq: seq_base + rank,
            tp,
        });
    }
    records
}

/// All-points-interpolated AP (fraction in [0, 1]) from pooled records.
/// With no ground truth: 1 when there are no predictions either, else 0.
fn ap_fraction(mut records: Vec<MatchRecord>, total_gt: usize) -> f64 {
    if total_gt == 0 {
        return if records.is_empty() { 1.0 } else { 0.0 };
    }
    if records.is_empty() {
        return 0.0;
    }
    records.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.area.cmp(&a.area))
            .then(a.seq.cmp(&b.seq))
    });

    // Precision at every rank, then the envelope from high recall backwards.
    let mut precisions = Vec::with_capacity(records.len());
    let mut tp = 0usize;
    for (i, r) in records.iter().enumerate() {
        if r.tp {
            tp += 1;
        }
        precisions.push(tp as f64 / (i + 1) as f64);
    }
    let mut envelope = precisions.clone();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    // Each true positive advances recall by exactly 1/total_gt; summing the
    // envelope at those ranks and dividing once keeps the perfect case exact.
    let sum: f64 = records
        .iter()
        .zip(&envelope)
        .filter(|(r, _)| r.tp)
        .map(|(_, e)| *e)
        .sum();
    sum / total_gt as f64
}

/// Average precision (percent) of one class at one IoU threshold.
pub fn average_precision(
    predictions: &[(f64, &PixelSet)],
    gts: &[&PixelSet],
    threshold: f64,
) -> f64 {
    let records = match_image(predictions, gts, threshold, 0);
    100.0 * ap_fraction(records, gts.len())
}

/// One image's worth of evaluation input.
#[derive(Debug, Clone, Copy)]
pub struct EvalImage<'a> {
    pub detections: &'a [Detection],
    pub gt: &'a InstanceLabelMap,
}

/// Pooled evaluation over an ordered image set (order is the tie-break for
/// equal-scoring detections, so callers should sort by file name).
pub fn evaluate_set(images: &[EvalImage<'_>], thresholds: &ApThresholds) -> Result<EvalReport> {
    for img in images {
        for det in img.detections {
            if let Some(p) = det.mask.as_slice().last() {
                if !img.gt.dims().contains(*p) {
                    return Err(Error::validation(format!(
                        "detection mask pixel ({}, {}) is outside the {}x{} ground truth",
                        p.x,
                        p.y,
                        img.gt.dims().rows,
                        img.gt.dims().cols
                    )));
                }
            }
        }
    }

    // Collect the class vocabulary: every class with ground truth or with a
    // non-background prediction.
    let mut class_set = std::collections::BTreeSet::new();
    for img in images {
        class_set.extend(img.gt.present_classes());
        class_set.extend(
            img.detections
                .iter()
                .map(|d| d.class)
                .filter(|c| !c.is_background()),
        );
    }

    // Per-image instance masks grouped by class, computed once.
    struct ImageData<'a> {
        gt_by_class: BTreeMap<ClassId, Vec<PixelSet>>,
        detections: &'a [Detection],
    }
    let data: Vec<ImageData> = images
        .iter()
        .map(|img| {
            let pixels = img.gt.instance_pixels();
            let mut gt_by_class: BTreeMap<ClassId, Vec<PixelSet>> = BTreeMap::new();
            for (id, set) in pixels {
                let class = img.gt.class_of(id).expect("validated map");
                gt_by_class.entry(class).or_default().push(set);
            }
            ImageData {
                gt_by_class,
                detections: img.detections,
            }
        })
        .collect();

    let mut per_class = BTreeMap::new();
    for class in class_set {
        let mut total_gt = 0usize;
        // records per threshold, pooled across images
        let mut pooled: Vec<Vec<MatchRecord>> =
            vec![Vec::new(); thresholds.values().len() + 1];
        let mut seq_base = 0usize;
        for img in &data {
            let empty = Vec::new();
            let gts: Vec<&PixelSet> = img
                .gt_by_class
                .get(&class)
                .unwrap_or(&empty)
                .iter()
                .collect();
            total_gt += gts.len();
            let preds: Vec<(f64, &PixelSet)> = img
                .detections
                .iter()
                .filter(|d| d.class == class)
                .map(|d| (d.score, &d.mask))
                .collect();
            for (ti, t) in thresholds.values().iter().enumerate() {
                pooled[ti].extend(match_image(&preds, &gts, *t, seq_base));
            }
            // AP50 is always reported at 0.50 regardless of the sweep.
            pooled[thresholds.values().len()].extend(match_image(&preds, &gts, 0.5, seq_base));
            seq_base += preds.len();
        }

        let mut ap50 = 0.0;
        let mut ap_sum = 0.0;
        let n_thresholds = thresholds.values().len();
        for (ti, records) in pooled.into_iter().enumerate() {
            let ap = 100.0 * ap_fraction(records, total_gt);
            if ti == n_thresholds {
                ap50 = ap;
            } else {
                ap_sum += ap;
            }
        }
        per_class.insert(
            class,
            ClassEval {
                ap: ap_sum / n_thresholds as f64,
                ap50,
                gt_count: total_gt,
            },
        );
    }

    let counted: Vec<&ClassEval> = per_class.values().filter(|c| c.gt_count > 0).collect();
    let (mean_ap, mean_ap50) = if counted.is_empty() {
        (0.0, 0.0)
    } else {
        let n = counted.len() as f64;
        (
            counted.iter().map(|c| c.ap).sum::<f64>() / n,
            counted.iter().map(|c| c.ap50).sum::<f64>() / n,
        )
    };
    Ok(EvalReport {
        per_class,
        mean_ap,
        mean_ap50,
    })
}

/// Single-image evaluation: class-wise AP averaged over `thresholds`, plus
/// AP at 0.50. Background-classed detections are ignored.
pub fn evaluate(
    detections: &[Detection],
    gt: &InstanceLabelMap,
    thresholds: &ApThresholds,
) -> Result<EvalReport> {
    evaluate_set(&[EvalImage { detections, gt }], thresholds)
}

/// Class-agnostic detection accuracy at an IoU threshold given in percent
/// (the 25/50/75 protocol). A ground-truth instance counts as detected when
/// some prediction overlaps it at or above the threshold; every prediction
/// certifies at most one instance, assigned greedily by descending IoU.
/// Returns (detected count, percent detected).
pub fn detection_accuracy(
    detections: &[Detection],
    gt: &InstanceLabelMap,
    threshold_percent: u32,
) -> (usize, f64) {
    let gts: Vec<PixelSet> = gt.instance_pixels().into_values().collect();
    let total = gts.len();
    if total == 0 {
        return (0, 100.0);
    }
    let threshold = threshold_percent as f64 / 100.0;
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for (pi, det) in detections.iter().enumerate() {
        for (gi, g) in gts.iter().enumerate() {
            let v = iou(&det.mask, g);
            if v >= threshold {
                pairs.push((pi, gi, v));
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
    });
    let mut pred_used = vec![false; detections.len()];
    let mut gt_used = vec![false; total];
    let mut detected = 0usize;
    for (pi, gi, _) in pairs {
        if !pred_used[pi] && !gt_used[gi] {
            pred_used[pi] = true;
            gt_used[gi] = true;
            detected += 1;
        }
    }
    (detected, 100.0 * detected as f64 / total as f64)
}

/// Classification accuracy of a grid against ground truth: every instance is
/// predicted as the class of the grid block containing its rounded center of
/// mass, and the grid label counts verbatim (a background block simply
/// scores as incorrect).
pub fn classification_accuracy(
    gt: &InstanceLabelMap,
    grid: &ClassGrid,
) -> Result<AccuracyReport> {
    classification_accuracy_set(&[(gt, grid)])
}

/// Pooled classification accuracy over (ground truth, grid) pairs.
pub fn classification_accuracy_set(
    pairs: &[(&InstanceLabelMap, &ClassGrid)],
) -> Result<AccuracyReport> {
    let mut per_class: BTreeMap<ClassId, ClassAccuracy> = BTreeMap::new();
    for (gt, grid) in pairs {
        check_grid_covers(gt, grid)?;
        for (id, pixels) in gt.instance_pixels() {
            let class = gt.class_of(id).expect("validated map");
            let cm = CenterOfMass::of_pixels(&pixels)?.to_pixel(gt.dims());
            let predicted = class_of_instance(cm, grid)?;
            let entry = per_class.entry(class).or_default();
            entry.instances += 1;
            if predicted == class {
                entry.correct += 1;
            }
        }
    }
    Ok(AccuracyReport { per_class })
}

fn check_grid_covers(gt: &InstanceLabelMap, grid: &ClassGrid) -> Result<()> {
    let expected = grid.grid().block_dims(gt.dims());
    if expected != grid.block_dims() {
        return Err(Error::validation(format!(
            "grid of {}x{} blocks does not cover a {}x{} image at grid size {} (expected {}x{})",
            grid.block_dims().rows,
            grid.block_dims().cols,
            gt.dims().rows,
            gt.dims().cols,
            grid.grid().grid_size(),
            expected.rows,
            expected.cols,
        )));
    }
    Ok(())
}

/// Perfect-detection predictions: the ground-truth masks themselves (score
/// 1.0), classified through the grid by center-of-mass lookup. Instances
/// whose lookup lands on a background block come back background-classed and
/// will be ignored by evaluation.
pub fn oracle_detections(gt: &InstanceLabelMap, grid: &ClassGrid) -> Result<Vec<Detection>> {
    check_grid_covers(gt, grid)?;
    let mut out = Vec::new();
    for (_, pixels) in gt.instance_pixels() {
        let center = CenterOfMass::of_pixels(&pixels)?;
        let class = class_of_instance(center.to_pixel(gt.dims()), grid)?;
        out.push(Detection {
            mask: pixels,
            center,
            score: 1.0,
            class,
        });
    }
    Ok(out)
}

/// Detection-with-instance-oracle evaluation: isolates classification
/// quality by assuming every instance is perfectly detected.
pub fn instance_oracle_eval(
    gt: &InstanceLabelMap,
    grid: &ClassGrid,
    thresholds: &ApThresholds,
) -> Result<EvalReport> {
    let dets = oracle_detections(gt, grid)?;
    evaluate(&dets, gt, thresholds)
}

/// Replace every prediction's class with the class of the ground-truth
/// instance it overlaps most; predictions overlapping nothing are dropped.
pub fn with_oracle_classes(
    detections: &[Detection],
    gt: &InstanceLabelMap,
) -> Vec<Detection> {
    let instances: Vec<(InstanceId, PixelSet)> = gt.instance_pixels().into_iter().collect();
    detections
        .iter()
        .filter_map(|det| {
            let mut best: Option<(InstanceId, f64)> = None;
            for (id, pixels) in &instances {
                let v = iou(&det.mask, pixels);
                if v > 0.0 && best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((*id, v));
                }
            }
            best.map(|(id, _)| Detection {
                class: gt.class_of(id).expect("validated map"),
                ..det.clone()
            })
        })
        .collect()
}

/// Classification-with-class-oracle evaluation: isolates detection and
/// delineation quality by assuming every surviving mask is classified
/// correctly.
pub fn class_oracle_eval(
    detections: &[Detection],
    gt: &InstanceLabelMap,
    thresholds: &ApThresholds,
) -> Result<EvalReport> {
    let oracled = with_oracle_classes(detections, gt);
    evaluate(&oracled, gt, thresholds)
}

/// Downsample by 2 (keeping even coordinates), upsample back by replication,
/// and re-extract the surviving instances. Odd dimensions are padded by
/// replicating the last row/column before the round trip and cropped after.
pub fn halfres_roundtrip_map(gt: &InstanceLabelMap) -> InstanceLabelMap {
    let dims = gt.dims();
    let prows = dims.rows + dims.rows % 2;
    let pcols = dims.cols + dims.cols % 2;

    let padded_label = |x: usize, y: usize| -> InstanceId {
        let sx = x.min(dims.cols - 1);
        let sy = y.min(dims.rows - 1);
        gt.labels()[sy * dims.cols + sx]
    };

    let mut out = vec![InstanceId::BACKGROUND; dims.len()];
    for by in 0..prows / 2 {
        for bx in 0..pcols / 2 {
            let id = padded_label(2 * bx, 2 * by);
            if id.is_background() {
                continue;
            }
            for (x, y) in [
                (2 * bx, 2 * by),
                (2 * bx + 1, 2 * by),
                (2 * bx, 2 * by + 1),
                (2 * bx + 1, 2 * by + 1),
            ] {
                if x < dims.cols && y < dims.rows {
                    out[y * dims.cols + x] = id;
                }
            }
        }
    }

    let mut classes = BTreeMap::new();
    for id in out.iter().filter(|id| !id.is_background()) {
        classes
            .entry(*id)
            .or_insert_with(|| gt.class_of(*id).expect("id came from gt"));
    }
    InstanceLabelMap::new(dims, out, classes).expect("round trip preserves map invariants")
}

/// Detections for the half-resolution round trip: the surviving masks with
/// score 1.0 and their own (oracle) classes.
pub fn halfres_detections(gt: &InstanceLabelMap) -> Vec<Detection> {
    let round_tripped = halfres_roundtrip_map(gt);
    round_tripped
        .instance_pixels()
        .into_iter()
        .map(|(id, pixels)| {
            let center = CenterOfMass::of_pixels(&pixels).expect("non-empty by construction");
            Detection {
                mask: pixels,
                center,
                score: 1.0,
                class: round_tripped.class_of(id).expect("validated map"),
            }
        })
        .collect()
}

/// How much representation is lost by halving the resolution: round-trips
/// the ground truth through half resolution and scores it against itself.
pub fn halfres_roundtrip_eval(
    gt: &InstanceLabelMap,
    thresholds: &ApThresholds,
) -> Result<EvalReport> {
    let dets = halfres_detections(gt);
    evaluate(&dets, gt, thresholds)
}
