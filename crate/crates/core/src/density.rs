//! Object density and the pluggable sources that attach it to detections.
//!
//! The density of a ground-truth object is its maximum IoU with any *other*
//! non-ignored object in the same image; an isolated object has density 0.
//! Detections pick up a density through one of three [`DensitySource`]s so
//! the adaptive suppression threshold can be driven by ground truth, by
//! co-detections, or by values produced upstream (e.g. a learned model).

use alloc::vec::Vec;
use core::fmt;

use crate::geometry::BoundingBox;

/// IoU a detection must reach against a ground-truth object before the
/// oracle source transfers that object's density.
pub const ORACLE_MATCH_IOU: f64 = 0.5;

/// Default co-detection score floor for [`DensitySource::SelfEstimate`].
pub const DEFAULT_SELF_ESTIMATE_SCORE_FLOOR: f64 = 0.05;

/// A scored candidate box, optionally annotated with a crowd density.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: BoundingBox,
    /// Confidence in `[0, 1]`.
    pub score: f64,
    /// Crowd density in `[0, 1]` once a source has attached one.
    pub density: Option<f64>,
    /// Stable input position, used for deterministic tie-breaking.
    pub source_index: usize,
}

impl Detection {
    pub fn new(bbox: BoundingBox, score: f64, source_index: usize) -> Result<Self, DensityError> {
        if !(0.0..=1.0).contains(&score) {
            return Err(DensityError::ScoreOutOfRange(score));
        }
        Ok(Self {
            bbox,
            score,
            density: None,
            source_index,
        })
    }

    pub fn with_density(mut self, density: f64) -> Result<Self, DensityError> {
        if !(0.0..=1.0).contains(&density) {
            return Err(DensityError::DensityOutOfRange(density));
        }
        self.density = Some(density);
        Ok(self)
    }
}

/// An annotated object: the evaluation reference.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthObject {
    pub bbox: BoundingBox,
    /// Ignored objects absorb detections during evaluation but are never
    /// counted as targets, and do not contribute to neighbours' densities.
    pub ignore: bool,
    /// Max IoU with any other non-ignored object; 0 until computed.
    pub density: f64,
}

impl GroundTruthObject {
    pub fn new(bbox: BoundingBox, ignore: bool) -> Self {
        Self {
            bbox,
            ignore,
            density: 0.0,
        }
    }

    pub fn height(&self) -> f64 {
        self.bbox.height()
    }
}

/// Where per-detection densities come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensitySource {
    /// Transfer the density of the ground-truth object with the highest IoU
    /// to the detection, or 0 when the best IoU is below
    /// [`ORACLE_MATCH_IOU`].
    Oracle,
    /// Ground-truth-free proxy: the max IoU with any *other* detection in
    /// the raw pre-suppression set whose score is at least `score_floor`.
    SelfEstimate { score_floor: f64 },
    /// Densities are already present on the input detections.
    Provided,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DensityError {
    ScoreOutOfRange(f64),
    DensityOutOfRange(f64),
    /// Oracle source used without ground truth.
    MissingGroundTruth,
    /// Provided source used on a detection without a density.
    MissingDensity { index: usize },
}

impl fmt::Display for DensityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensityError::ScoreOutOfRange(s) => write!(f, "score {s} outside [0, 1]"),
            DensityError::DensityOutOfRange(d) => write!(f, "density {d} outside [0, 1]"),
            DensityError::MissingGroundTruth => {
                write!(f, "oracle density source requires ground-truth objects")
            }
            DensityError::MissingDensity { index } => {
                write!(f, "detection {index} carries no density")
            }
        }
    }
}

impl core::error::Error for DensityError {}

/// Density of every object: `d_i = max_{j != i, j not ignored} iou(b_i, b_j)`.
///
/// The brute-force double loop *is* the definition; output order matches
/// input order and ignored objects still receive a density of their own.
pub fn gt_densities(objects: &[GroundTruthObject]) -> Vec<f64> {
    objects
        .iter()
        .enumerate()
        .map(|(i, obj)| {
            let mut best = 0.0f64;
            for (j, other) in objects.iter().enumerate() {
                if j == i || other.ignore {
                    continue;
                }
                best = best.max(obj.bbox.iou(&other.bbox));
            }
            best
        })
        .collect()
}

/// Computes [`gt_densities`] and stores the values on the objects.
pub fn annotate_densities(objects: &mut [GroundTruthObject]) {
    let densities = gt_densities(objects);
    for (obj, d) in objects.iter_mut().zip(densities) {
        obj.density = d;
    }
}

/// Returns the input detections with a density attached per `source`.
///
/// `gts` is only consulted by the oracle source. Self-estimation runs on the
/// raw detection set passed in, so call this before any suppression.
pub fn attach_densities(
    dets: &[Detection],
    gts: Option<&[GroundTruthObject]>,
    source: &DensitySource,
) -> Result<Vec<Detection>, DensityError> {
    match source {
        DensitySource::Provided => dets
            .iter()
            .map(|d| {
                if d.density.is_some() {
                    Ok(d.clone())
                } else {
                    Err(DensityError::MissingDensity {
                        index: d.source_index,
                    })
                }
            })
            .collect(),
        DensitySource::Oracle => {
            let gts = gts.ok_or(DensityError::MissingGroundTruth)?;
            Ok(dets
                .iter()
                .map(|d| {
                    let mut best_iou = 0.0f64;
                    let mut best_density = 0.0f64;
                    for gt in gts {
                        let v = d.bbox.iou(&gt.bbox);
                        if v > best_iou {
                            best_iou = v;
                            best_density = gt.density;
                        }
                    }
                    let density = if best_iou >= ORACLE_MATCH_IOU {
                        best_density
                    } else {
                        0.0
                    };
                    let mut out = d.clone();
                    out.density = Some(density);
                    out
                })
                .collect())
        }
        DensitySource::SelfEstimate { score_floor } => Ok(dets
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let mut best = 0.0f64;
                for (j, other) in dets.iter().enumerate() {
                    if j == i || other.score < *score_floor {
                        continue;
                    }
                    best = best.max(d.bbox.iou(&other.bbox));
                }
                let mut out = d.clone();
                out.density = Some(best);
                out
            })
            .collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn bb(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox {
        BoundingBox::new(x1, y1, x2, y2).unwrap()
    }

    fn gt(b: BoundingBox) -> GroundTruthObject {
        GroundTruthObject::new(b, false)
    }

    #[test]
    fn single_object_has_zero_density() {
        let objs = vec![gt(bb(0.0, 0.0, 2.0, 2.0))];
        assert_eq!(gt_densities(&objs), vec![0.0]);
    }

    #[test]
    fn pair_densities_are_symmetric() {
        let objs = vec![gt(bb(0.0, 0.0, 2.0, 2.0)), gt(bb(1.0, 0.0, 3.0, 2.0))];
        let d = gt_densities(&objs);
        assert!((d[0] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(d[0], d[1]);
    }

    #[test]
    fn three_object_densities() {
        // A-B IoU 0.6, A-C IoU 0.2, B-C disjoint (touching edges).
        let a = bb(0.0, 0.0, 2.0, 2.0);
        let b = bb(0.5, 0.0, 2.5, 2.0);
        let c = bb(0.0, 0.0, 0.4, 2.0);
        assert_eq!(a.iou(&b), 0.6);
        assert_eq!(a.iou(&c), 0.2);
        assert_eq!(b.iou(&c), 0.0);
        let d = gt_densities(&[gt(a), gt(b), gt(c)]);
        assert_eq!(d, vec![0.6, 0.6, 0.2]);
    }

    #[test]
    fn ignored_objects_do_not_feed_neighbour_densities() {
        let mut crowd = GroundTruthObject::new(bb(0.0, 0.0, 2.0, 2.0), true);
        crowd.ignore = true;
        let person = gt(bb(1.0, 0.0, 3.0, 2.0));
        let d = gt_densities(&[crowd.clone(), person.clone()]);
        // the person sees no non-ignored neighbour; the ignored region still
        // gets its own density against the person
        assert!((d[0] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(d[1], 0.0);
    }

    #[test]
    fn provided_source_is_a_validated_pass_through() {
        let d0 = Detection::new(bb(0.0, 0.0, 1.0, 1.0), 0.9, 0)
            .unwrap()
            .with_density(0.4)
            .unwrap();
        let out = attach_densities(&[d0.clone()], None, &DensitySource::Provided).unwrap();
        assert_eq!(out, vec![d0]);

        let missing = Detection::new(bb(0.0, 0.0, 1.0, 1.0), 0.9, 7).unwrap();
        assert_eq!(
            attach_densities(&[missing], None, &DensitySource::Provided),
            Err(DensityError::MissingDensity { index: 7 })
        );
    }

    #[test]
    fn oracle_on_lone_ground_truth_gives_zero() {
        let g = gt(bb(0.0, 0.0, 2.0, 4.0));
        let det = Detection::new(g.bbox, 0.95, 0).unwrap();
        let out = attach_densities(&[det], Some(&[g]), &DensitySource::Oracle).unwrap();
        assert_eq!(out[0].density, Some(0.0));
    }

    #[test]
    fn oracle_requires_ground_truth_and_half_iou() {
        let det = Detection::new(bb(0.0, 0.0, 1.0, 1.0), 0.9, 0).unwrap();
        assert_eq!(
            attach_densities(&[det.clone()], None, &DensitySource::Oracle),
            Err(DensityError::MissingGroundTruth)
        );
        // best IoU below 0.5 -> density 0 even if the gt is crowded
        let mut g = gt(bb(10.0, 10.0, 12.0, 14.0));
        g.density = 0.8;
        let out = attach_densities(&[det], Some(&[g]), &DensitySource::Oracle).unwrap();
        assert_eq!(out[0].density, Some(0.0));
    }

    #[test]
    fn self_estimate_uses_codetections_above_floor() {
        // mutual IoU 0.55: boxes (0,0,2,2) and offset so iou = (2-dx)/(2+dx)
        let dx = 2.0 * (1.0 - 0.55) / (1.0 + 0.55);
        let a = bb(0.0, 0.0, 2.0, 2.0);
        let b = bb(dx, 0.0, 2.0 + dx, 2.0);
        assert!((a.iou(&b) - 0.55).abs() < 1e-12);
        let d0 = Detection::new(a, 0.9, 0).unwrap();
        let d1 = Detection::new(b, 0.8, 1).unwrap();
        let out = attach_densities(
            &[d0, d1],
            None,
            &DensitySource::SelfEstimate { score_floor: 0.1 },
        )
        .unwrap();
        assert!((out[0].density.unwrap() - 0.55).abs() < 1e-12);
        assert_eq!(out[0].density, out[1].density);
    }

    #[test]
    fn self_estimate_ignores_low_scored_neighbours() {
        let a = bb(0.0, 0.0, 2.0, 2.0);
        let d0 = Detection::new(a, 0.9, 0).unwrap();
        let d1 = Detection::new(a, 0.01, 1).unwrap();
        let out = attach_densities(
            &[d0, d1],
            None,
            &DensitySource::SelfEstimate { score_floor: 0.05 },
        )
        .unwrap();
        // the 0.01 neighbour is below the floor; the 0.9 one is not
        assert_eq!(out[0].density, Some(0.0));
        assert_eq!(out[1].density, Some(1.0));
    }

    #[test]
    fn score_and_density_ranges_enforced() {
        let b = bb(0.0, 0.0, 1.0, 1.0);
        assert!(Detection::new(b, 1.5, 0).is_err());
        assert!(Detection::new(b, -0.1, 0).is_err());
        assert!(Detection::new(b, f64::NAN, 0).is_err());
        assert!(Detection::new(b, 0.5, 0).unwrap().with_density(1.2).is_err());
    }
}
