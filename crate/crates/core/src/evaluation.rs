//! Detection-to-ground-truth matching and the miss-rate / AP metric stack.
//!
//! Matching is score-greedy with single assignment: detections are visited
//! in descending score order, each claiming the unmatched non-ignored
//! ground-truth object of highest IoU at or above the match threshold.
//! Unmatched detections that sit (IoA >= 0.5) on an ignore region or an
//! ignored object are discarded without penalty; the rest are false
//! positives.
//!
//! The headline number is the log-average miss rate: the geometric mean of
//! the miss rate sampled at nine FPPI points log-spaced over `[1e-2, 1]`,
//! reading each reference off the operating point with the largest FPPI not
//! exceeding it (miss 1.0 when no point qualifies).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::density::{Detection, GroundTruthObject};
use crate::geometry::BoundingBox;

/// Default IoU criterion for a true positive.
pub const DEFAULT_MATCH_IOU: f64 = 0.5;

/// IoA at or above which an unmatched detection is absorbed by an ignore
/// region or an ignored object.
pub const IGNORE_IOA: f64 = 0.5;

/// Miss rates are clamped up to this floor before taking logs.
pub const MISS_RATE_FLOOR: f64 = 1e-10;

/// Ground-truth density bin edges: `d <= 0.4`, `(0.4, 0.5]`, `(0.5, 0.6]`,
/// `(0.6, 0.7]`, `d > 0.7`.
pub const DENSITY_BIN_EDGES: [f64; 4] = [0.4, 0.5, 0.6, 0.7];

/// Minimum ground-truth pixel height for the density-binned analysis.
pub const BIN_MIN_HEIGHT: f64 = 50.0;

/// Number of density bins.
pub const NUM_DENSITY_BINS: usize = 5;

/// The nine reference FPPI values, log-spaced over `[1e-2, 1e0]`.
pub fn reference_fppi_points() -> [f64; 9] {
    core::array::from_fn(|k| libm::pow(10.0, -2.0 + 0.25 * k as f64))
}

/// Bin index (0-based) for a density value.
pub fn density_bin(density: f64) -> usize {
    DENSITY_BIN_EDGES
        .iter()
        .position(|edge| density <= *edge)
        .unwrap_or(NUM_DENSITY_BINS - 1)
}

/// A final detection that survived ignore filtering, labeled TP or FP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledDetection {
    pub score: f64,
    /// Index into the record's ground-truth entries when this is a TP.
    pub matched_gt: Option<usize>,
}

impl LabeledDetection {
    pub fn is_tp(&self) -> bool {
        self.matched_gt.is_some()
    }
}

/// Per-object outcome for a non-ignored ground-truth entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtOutcome {
    pub matched: bool,
    pub density: f64,
    pub height: f64,
}

/// One image's matching outcome; the unit the metrics aggregate over.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageEvalRecord {
    pub image_id: String,
    /// Score-descending; each ground-truth entry is claimed at most once.
    pub labeled: Vec<LabeledDetection>,
    /// One entry per non-ignored ground-truth object.
    pub gt: Vec<GtOutcome>,
}

impl ImageEvalRecord {
    pub fn num_gt(&self) -> usize {
        self.gt.len()
    }
}

/// One operating point of the FPPI / miss-rate curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub fppi: f64,
    pub miss_rate: f64,
}

/// Aggregated metrics over a record set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mr2: f64,
    pub ap: f64,
    pub recall: f64,
    pub curve: Vec<CurvePoint>,
    /// Per-density-bin log-average miss rate; `None` for empty bins.
    /// Only populated when requested.
    pub bin_mr2: Option<[Option<f64>; NUM_DENSITY_BINS]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalError {
    NoImages,
    NoGroundTruth,
    EmptyCurve,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::NoImages => write!(f, "no images to evaluate"),
            EvalError::NoGroundTruth => write!(f, "no non-ignored ground-truth objects"),
            EvalError::EmptyCurve => write!(f, "empty FPPI/miss-rate curve"),
        }
    }
}

impl core::error::Error for EvalError {}

/// Matches one image's detections against its ground truth.
///
/// `ignore_regions` are extra absorber boxes on top of any `gts` flagged as
/// ignored; both use the IoA >= [`IGNORE_IOA`] rule. Ignored objects never
/// appear in the output's ground-truth entries.
pub fn match_detections(
    image_id: String,
    dets: &[Detection],
    gts: &[GroundTruthObject],
    ignore_regions: &[BoundingBox],
    iou_thresh: f64,
) -> ImageEvalRecord {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .total_cmp(&dets[a].score)
            .then(dets[a].source_index.cmp(&dets[b].source_index))
    });

    let eval_gts: Vec<usize> = (0..gts.len()).filter(|&g| !gts[g].ignore).collect();
    let mut matched = vec![false; eval_gts.len()];
    let mut labeled = Vec::with_capacity(dets.len());

    for &di in &order {
        let det = &dets[di];
        let mut best: Option<(usize, f64)> = None;
        for (slot, &g) in eval_gts.iter().enumerate() {
            if matched[slot] {
                continue;
            }
            let v = det.bbox.iou(&gts[g].bbox);
            if v >= iou_thresh && best.map_or(true, |(_, bv)| v > bv) {
                best = Some((slot, v));
            }
        }
        if let Some((slot, _)) = best {
            matched[slot] = true;
            labeled.push(LabeledDetection {
                score: det.score,
                matched_gt: Some(slot),
            });
            continue;
        }
        let absorbed = ignore_regions
            .iter()
            .copied()
            .chain(gts.iter().filter(|g| g.ignore).map(|g| g.bbox))
            .any(|region| det.bbox.ioa(&region) >= IGNORE_IOA);
        if !absorbed {
            labeled.push(LabeledDetection {
                score: det.score,
                matched_gt: None,
            });
        }
    }

    let gt = eval_gts
        .iter()
        .zip(&matched)
        .map(|(&g, &m)| GtOutcome {
            matched: m,
            density: gts[g].density,
            height: gts[g].bbox.height(),
        })
        .collect();

    ImageEvalRecord {
        image_id,
        labeled,
        gt,
    }
}

/// Pools all labeled detections and sweeps a threshold over every distinct
/// score, producing `(fppi, miss_rate)` points sorted by ascending FPPI.
pub fn fppi_missrate_curve(records: &[ImageEvalRecord]) -> Result<Vec<CurvePoint>, EvalError> {
    if records.is_empty() {
        return Err(EvalError::NoImages);
    }
    let total_gt: usize = records.iter().map(|r| r.num_gt()).sum();
    if total_gt == 0 {
        return Err(EvalError::NoGroundTruth);
    }
    let num_images = records.len() as f64;

    let mut pooled: Vec<(f64, bool)> = records
        .iter()
        .flat_map(|r| r.labeled.iter().map(|l| (l.score, l.is_tp())))
        .collect();
    pooled.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = Vec::new();
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < pooled.len() {
        let score = pooled[i].0;
        while i < pooled.len() && pooled[i].0 == score {
            if pooled[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(CurvePoint {
            fppi: fp as f64 / num_images,
            miss_rate: 1.0 - tp as f64 / total_gt as f64,
        });
    }

    // lowering the threshold never decreases tp or fp, so the points already
    // ascend in fppi; the suffix max makes the miss rate monotone even so
    let mut running = 0.0f64;
    for p in points.iter_mut().rev() {
        running = running.max(p.miss_rate);
        p.miss_rate = running;
    }
    Ok(points)
}

/// Geometric mean of the miss rate over the nine reference FPPI points.
///
/// Each reference reads the operating point with the largest FPPI at or
/// below it, or miss 1.0 when none exists; values are clamped up to
/// [`MISS_RATE_FLOOR`] before the log.
pub fn log_average_miss_rate(curve: &[CurvePoint]) -> Result<f64, EvalError> {
    if curve.is_empty() {
        return Err(EvalError::EmptyCurve);
    }
    let references = reference_fppi_points();
    let mut log_sum = 0.0f64;
    let mut all_equal = true;
    let mut first_sample = None;
    for reference in references {
        let mut sampled = None;
        for p in curve {
            if p.fppi <= reference {
                sampled = Some(p.miss_rate);
            } else {
                break;
            }
        }
        let miss = sampled.unwrap_or(1.0).max(MISS_RATE_FLOOR);
        match first_sample {
            None => first_sample = Some(miss),
            Some(v) if v != miss => all_equal = false,
            Some(_) => {}
        }
        log_sum += libm::log(miss);
    }
    // the geometric mean of nine equal values is that value; returning it
    // directly avoids an exp/log round-trip wobble of a few ulps
    if all_equal {
        return Ok(first_sample.unwrap_or(1.0));
    }
    Ok(libm::exp(log_sum / references.len() as f64))
}

/// All-points interpolated average precision over the pooled detections.
pub fn average_precision(records: &[ImageEvalRecord]) -> Result<f64, EvalError> {
    let total_gt: usize = records.iter().map(|r| r.num_gt()).sum();
    if total_gt == 0 {
        return Err(EvalError::NoGroundTruth);
    }
    let mut pooled: Vec<(f64, bool)> = records
        .iter()
        .flat_map(|r| r.labeled.iter().map(|l| (l.score, l.is_tp())))
        .collect();
    pooled.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut steps: Vec<(f64, f64)> = Vec::with_capacity(pooled.len());
    let mut tp = 0usize;
    let mut fp = 0usize;
    for (_, is_tp) in pooled {
        if is_tp {
            tp += 1;
        } else {
            fp += 1;
        }
        steps.push((
            tp as f64 / total_gt as f64,
            tp as f64 / (tp + fp) as f64,
        ));
    }

    // precision envelope from the right, integrated over recall steps
    let mut envelope = vec![0.0f64; steps.len()];
    let mut best = 0.0f64;
    for k in (0..steps.len()).rev() {
        best = best.max(steps[k].1);
        envelope[k] = best;
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (k, &(recall, _)) in steps.iter().enumerate() {
        ap += (recall - prev_recall) * envelope[k];
        prev_recall = recall;
    }
    Ok(ap)
}

/// Fraction of ground truth matched by the final kept set.
pub fn overall_recall(records: &[ImageEvalRecord]) -> Result<f64, EvalError> {
    let total_gt: usize = records.iter().map(|r| r.num_gt()).sum();
    if total_gt == 0 {
        return Err(EvalError::NoGroundTruth);
    }
    let tp: usize = records
        .iter()
        .flat_map(|r| r.labeled.iter())
        .filter(|l| l.is_tp())
        .count();
    Ok(tp as f64 / total_gt as f64)
}

/// Restricts a record to the ground truth of one density bin.
///
/// Out-of-bin objects (including those under [`BIN_MIN_HEIGHT`]) vanish, and
/// detections matched to them are treated as ignored; false positives are
/// kept as-is since they penalize every bin.
fn restrict_to_bin(record: &ImageEvalRecord, bin: usize) -> ImageEvalRecord {
    let mut remap: Vec<Option<usize>> = Vec::with_capacity(record.gt.len());
    let mut gt = Vec::new();
    for outcome in &record.gt {
        if outcome.height >= BIN_MIN_HEIGHT && density_bin(outcome.density) == bin {
            remap.push(Some(gt.len()));
            gt.push(*outcome);
        } else {
            remap.push(None);
        }
    }
    let labeled = record
        .labeled
        .iter()
        .filter_map(|l| match l.matched_gt {
            Some(slot) => remap[slot].map(|new_slot| LabeledDetection {
                score: l.score,
                matched_gt: Some(new_slot),
            }),
            None => Some(*l),
        })
        .collect();
    ImageEvalRecord {
        image_id: record.image_id.clone(),
        labeled,
        gt,
    }
}

/// Log-average miss rate per density bin; `None` where a bin has no
/// ground truth.
pub fn density_binned_mr2(records: &[ImageEvalRecord]) -> [Option<f64>; NUM_DENSITY_BINS] {
    core::array::from_fn(|bin| {
        let filtered: Vec<ImageEvalRecord> =
            records.iter().map(|r| restrict_to_bin(r, bin)).collect();
        match fppi_missrate_curve(&filtered) {
            Ok(curve) => log_average_miss_rate(&curve).ok(),
            Err(_) => None,
        }
    })
}

/// Assembles the full report over a record set.
pub fn evaluate(records: &[ImageEvalRecord], with_bins: bool) -> Result<EvalReport, EvalError> {
    let curve = fppi_missrate_curve(records)?;
    let mr2 = log_average_miss_rate(&curve)?;
    let ap = average_precision(records)?;
    let recall = overall_recall(records)?;
    let bin_mr2 = with_bins.then(|| density_binned_mr2(records));
    Ok(EvalReport {
        mr2,
        ap,
        recall,
        curve,
        bin_mr2,
    })
}
