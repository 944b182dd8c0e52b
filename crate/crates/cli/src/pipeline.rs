//! Per-image orchestration of density attachment, suppression and matching,
//! with optional worker-pool parallelism.
//!
//! Work is distributed per image and results are reassembled into maps
//! keyed by image id, so the output is byte-identical for any worker count.

use std::collections::BTreeMap;

use crowdnms_core::density::{annotate_densities, attach_densities, DensityError, DensitySource};
use crowdnms_core::evaluation::{
    evaluate, match_detections, EvalError, EvalReport, ImageEvalRecord,
};
use crowdnms_core::suppression::{suppress, SuppressionConfig, SuppressionError};
use crowdnms_core::{Detection, GroundTruthObject};
use rayon::prelude::*;
use thiserror::Error;

use crate::formats::{AnnotationSet, DetectionSet, ImageAnnotation};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("detections reference image ids missing from the annotations: {}", ids.join(", "))]
    UnknownImages { ids: Vec<String> },
    #[error("image \"{image_id}\": {source}")]
    Density {
        image_id: String,
        #[source]
        source: DensityError,
    },
    #[error("image \"{image_id}\": {source}")]
    Suppression {
        image_id: String,
        #[source]
        source: SuppressionError,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("building worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// Totals reported by a suppression run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SuppressStats {
    pub kept: usize,
    pub suppressed: usize,
}

/// Ground-truth view of one image with densities freshly computed from the
/// box geometry (any densities carried by the file are recomputed, so the
/// values always follow the pairwise-IoU definition).
pub fn ground_truth_with_densities(annotation: &ImageAnnotation) -> Vec<GroundTruthObject> {
    let mut gts: Vec<GroundTruthObject> = annotation
        .objects
        .iter()
        .map(|o| o.to_ground_truth())
        .collect();
    annotate_densities(&mut gts);
    gts
}

fn run_pool<T, E, F>(jobs: usize, work: F) -> Result<T, PipelineError>
where
    T: Send,
    E: Send,
    F: FnOnce() -> Result<T, E> + Send,
    PipelineError: From<E>,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()?;
    Ok(pool.install(work)?)
}

fn check_ids_covered(
    detections: &DetectionSet,
    annotations: &AnnotationSet,
) -> Result<(), PipelineError> {
    let missing: Vec<String> = detections
        .keys()
        .filter(|id| !annotations.contains_key(*id))
        .cloned()
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(PipelineError::UnknownImages { ids: missing })
    }
}

/// Attaches densities (when a source is given) and suppresses every image.
///
/// `annotations` is only required for [`DensitySource::Oracle`]; images the
/// annotation set does not cover are rejected up front in that case.
pub fn suppress_set(
    detections: &DetectionSet,
    annotations: Option<&AnnotationSet>,
    source: Option<&DensitySource>,
    config: &SuppressionConfig,
    jobs: usize,
) -> Result<(DetectionSet, SuppressStats), PipelineError> {
    if matches!(source, Some(DensitySource::Oracle)) {
        let annotations = annotations.ok_or(PipelineError::Density {
            image_id: "<all>".to_string(),
            source: DensityError::MissingGroundTruth,
        })?;
        check_ids_covered(detections, annotations)?;
    }

    let results: Vec<(String, Vec<Detection>, SuppressStats)> = run_pool(jobs, || {
        detections
            .par_iter()
            .map(|(image_id, dets)| {
                let prepared = match source {
                    Some(src) => {
                        let gts = annotations
                            .and_then(|a| a.get(image_id))
                            .map(ground_truth_with_densities);
                        attach_densities(dets, gts.as_deref(), src).map_err(|source| {
                            PipelineError::Density {
                                image_id: image_id.clone(),
                                source,
                            }
                        })?
                    }
                    None => dets.clone(),
                };
                let result =
                    suppress(&prepared, config).map_err(|source| PipelineError::Suppression {
                        image_id: image_id.clone(),
                        source,
                    })?;
                let stats = SuppressStats {
                    kept: result.kept.len(),
                    suppressed: result.suppressed_count,
                };
                Ok((image_id.clone(), result.kept, stats))
            })
            .collect::<Result<_, PipelineError>>()
    })?;

    let mut out = DetectionSet::new();
    let mut totals = SuppressStats::default();
    for (image_id, kept, stats) in results {
        totals.kept += stats.kept;
        totals.suppressed += stats.suppressed;
        out.insert(image_id, kept);
    }
    Ok((out, totals))
}

/// Matches every annotated image against its detections (images without a
/// detection record count as all-missed) and aggregates the metrics.
pub fn evaluate_set(
    annotations: &AnnotationSet,
    detections: &DetectionSet,
    iou_thresh: f64,
    with_bins: bool,
    jobs: usize,
) -> Result<(EvalReport, Vec<ImageEvalRecord>), PipelineError> {
    check_ids_covered(detections, annotations)?;

    let empty: Vec<Detection> = Vec::new();
    let mut records: Vec<ImageEvalRecord> = run_pool(jobs, || {
        let recs: Vec<ImageEvalRecord> = annotations
            .par_iter()
            .map(|(image_id, annotation)| {
                let gts = ground_truth_with_densities(annotation);
                let dets = detections.get(image_id).unwrap_or(&empty);
                match_detections(image_id.clone(), dets, &gts, &[], iou_thresh)
            })
            .collect();
        Ok::<_, PipelineError>(recs)
    })?;
    // fixed id order no matter how the pool scheduled the work
    records.sort_by(|a, b| a.image_id.cmp(&b.image_id));

    let report = evaluate(&records, with_bins)?;
    Ok((report, records))
}

/// Density-annotates every image of an annotation set.
pub fn annotate_set_densities(annotations: &AnnotationSet) -> AnnotationSet {
    let mut out = BTreeMap::new();
    for (image_id, annotation) in annotations {
        let gts = ground_truth_with_densities(annotation);
        let objects = annotation
            .objects
            .iter()
            .zip(&gts)
            .map(|(obj, gt)| {
                let mut updated = obj.clone();
                updated.density = Some(gt.density);
                updated
            })
            .collect();
        out.insert(
            image_id.clone(),
            ImageAnnotation {
                width: annotation.width,
                height: annotation.height,
                objects,
            },
        );
    }
    out
}
