//! Seeded crowd-scene and detector simulation for desk-scale experiments.
//!
//! Scenes are box-only: a Poisson-distributed number of persons per image,
//! some of which are placed as constructed crowd pairs whose mutual IoU is
//! drawn uniformly from the open interval (0.5, 0.8). All other placements
//! are re-drawn while they overlap an existing box above the pair
//! threshold, so the constructed pairs are exactly the scene's crowd pairs
//! and the pair-rate parameter stays interpretable. The simulated detector
//! emits a configurable number of jittered proposals per object with scores
//! that decay with localization error, plus Poisson background false
//! positives.
//!
//! Everything is driven by ChaCha8 streams seeded from explicit `u64`
//! seeds, and [`derive_seed`] (a SplitMix64 step over master seed and
//! stream index) is the documented splitting rule, so datasets regenerate
//! byte-identically on any platform and under any parallel schedule.

use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::density::{annotate_densities, Detection, GroundTruthObject};
use crate::geometry::BoundingBox;

/// Constructed crowd pairs draw their target IoU from this open interval.
pub const PAIR_IOU_RANGE: (f64, f64) = (0.5, 0.8);

/// Background false positives score uniformly within this range.
pub const FP_SCORE_RANGE: (f64, f64) = (0.02, 0.30);

/// A background box is re-drawn while it overlaps any object above this IoU.
pub const FP_MAX_GT_IOU: f64 = 0.3;

/// Attempts before an impossible placement is skipped.
pub const PLACEMENT_RETRIES: usize = 32;

/// Scene-geometry parameters. All randomness comes from `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneParams {
    pub image_width: f64,
    pub image_height: f64,
    /// Poisson mean of persons per image.
    pub persons_per_image: f64,
    /// Poisson mean of constructed high-overlap pairs per image.
    pub crowd_pair_rate: f64,
    /// Person heights are drawn uniformly from this range (min >= 50).
    pub person_height_range: (f64, f64),
    /// Box width as a fraction of height.
    pub aspect_ratio: f64,
    pub seed: u64,
}

impl SceneParams {
    /// Street-scene preset: ~6.47 persons and ~0.32 crowd pairs per image.
    pub fn citypersons(seed: u64) -> Self {
        Self {
            image_width: 2048.0,
            image_height: 1024.0,
            persons_per_image: 6.47,
            crowd_pair_rate: 0.32,
            person_height_range: (50.0, 420.0),
            aspect_ratio: 0.41,
            seed,
        }
    }

    /// Dense web-image preset: ~22.64 persons and ~2.40 crowd pairs per image.
    pub fn crowdhuman(seed: u64) -> Self {
        Self {
            image_width: 1600.0,
            image_height: 900.0,
            persons_per_image: 22.64,
            crowd_pair_rate: 2.40,
            person_height_range: (50.0, 350.0),
            aspect_ratio: 0.41,
            seed,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        let (hmin, hmax) = self.person_height_range;
        let size_ok = self.image_width > 0.0 && self.image_height > 0.0;
        if !size_ok {
            return Err(SynthError::InvalidSceneParams("image size must be positive"));
        }
        // NaN fails every comparison, so it is rejected everywhere below
        let rates_ok = self.persons_per_image >= 0.0 && self.crowd_pair_rate >= 0.0;
        if !rates_ok {
            return Err(SynthError::InvalidSceneParams(
                "person and pair rates must be non-negative",
            ));
        }
        let heights_ok = hmin >= 50.0 && hmax >= hmin;
        if !heights_ok {
            return Err(SynthError::InvalidSceneParams(
                "height range must satisfy 50 <= min <= max",
            ));
        }
        let aspect_ok = self.aspect_ratio > 0.0;
        if !aspect_ok {
            return Err(SynthError::InvalidSceneParams(
                "aspect ratio must be positive",
            ));
        }
        Ok(())
    }
}

/// Detector-behaviour parameters. All randomness comes from `seed`.
///
/// Proposal scores follow
/// `clamp(score_base - score_slope * (1 - iou(proposal, object)) + eps, 0, 1)`
/// with `eps` uniform in `[-score_noise, score_noise]`, so tighter proposals
/// score higher, mimicking the correlated neighbour scores real detectors
/// produce.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorParams {
    /// Std of center/size jitter relative to box size.
    pub localization_noise: f64,
    /// Proposals emitted per object (>= 1).
    pub duplicate_count: usize,
    /// Base proposal score before the localization penalty.
    pub score_base: f64,
    /// Penalty per unit of (1 - IoU with the source object).
    pub score_slope: f64,
    /// Half-width of the uniform score noise.
    pub score_noise: f64,
    /// Poisson mean of background false positives per image.
    pub fp_rate: f64,
    pub seed: u64,
}

impl DetectorParams {
    pub fn new(seed: u64) -> Self {
        Self {
            localization_noise: 0.05,
            duplicate_count: 3,
            score_base: 0.95,
            score_slope: 1.0,
            score_noise: 0.02,
            fp_rate: 1.0,
            seed,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        if !(self.localization_noise >= 0.0) {
            return Err(SynthError::InvalidDetectorParams(
                "localization noise must be non-negative",
            ));
        }
        if self.duplicate_count < 1 {
            return Err(SynthError::InvalidDetectorParams(
                "duplicate count must be at least 1",
            ));
        }
        if !(self.score_base > 0.0 && self.score_base <= 1.0) {
            return Err(SynthError::InvalidDetectorParams(
                "score base must be in (0, 1]",
            ));
        }
        if !(self.score_slope >= 0.0 && self.score_noise >= 0.0) {
            return Err(SynthError::InvalidDetectorParams(
                "score slope and noise must be non-negative",
            ));
        }
        if !(self.fp_rate >= 0.0) {
            return Err(SynthError::InvalidDetectorParams(
                "false-positive rate must be non-negative",
            ));
        }
        Ok(())
    }
}

/// Generated ground truth for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    /// Objects with densities already computed.
    pub gts: Vec<GroundTruthObject>,
    /// Absorber regions detections may land on without penalty. The
    /// generator itself places none; the slot exists for annotation files
    /// that carry them.
    pub ignore_regions: Vec<BoundingBox>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthError {
    InvalidSceneParams(&'static str),
    InvalidDetectorParams(&'static str),
}

impl fmt::Display for SynthError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SynthError::InvalidSceneParams(msg) => write!(f, "scene params: {msg}"),
            SynthError::InvalidDetectorParams(msg) => write!(f, "detector params: {msg}"),
        }
    }
}

impl core::error::Error for SynthError {}

/// SplitMix64 step combining a master seed and a stream index.
///
/// This is the seed-splitting rule used throughout: per-image seeds are
/// `derive_seed(master, image_index)`, so any image can be regenerated in
/// isolation and parallel generation equals sequential generation.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn poisson_count(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("validated mean");
    dist.sample(rng) as usize
}

fn sample_box_at(
    rng: &mut ChaCha8Rng,
    params: &SceneParams,
    width: f64,
    height: f64,
    extra_right_margin: f64,
) -> Option<BoundingBox> {
    let max_x1 = params.image_width - width - extra_right_margin;
    let max_y1 = params.image_height - height;
    if max_x1 < 0.0 || max_y1 < 0.0 {
        return None;
    }
    let x1 = rng.random_range(0.0..=max_x1);
    let y1 = rng.random_range(0.0..=max_y1);
    Some(BoundingBox::new(x1, y1, x1 + width, y1 + height).expect("positive extent"))
}

fn clear_of_crowd_overlap(candidate: &BoundingBox, placed: &[BoundingBox]) -> bool {
    placed
        .iter()
        .all(|b| candidate.iou(b) <= PAIR_IOU_RANGE.0)
}

fn place_single(rng: &mut ChaCha8Rng, params: &SceneParams, out: &mut Vec<BoundingBox>) {
    let (hmin, hmax) = params.person_height_range;
    for _ in 0..PLACEMENT_RETRIES {
        let height = rng.random_range(hmin..=hmax);
        let width = height * params.aspect_ratio;
        let Some(b) = sample_box_at(rng, params, width, height, 0.0) else {
            continue;
        };
        // constructed pairs are the only crowd pairs: everything else is
        // re-drawn until it stays at or below the pair threshold
        if clear_of_crowd_overlap(&b, out) {
            out.push(b);
            return;
        }
    }
}

fn place_pair(rng: &mut ChaCha8Rng, params: &SceneParams, out: &mut Vec<BoundingBox>) {
    let (hmin, hmax) = params.person_height_range;
    for _ in 0..PLACEMENT_RETRIES {
        let height = rng.random_range(hmin..=hmax);
        let width = height * params.aspect_ratio;
        let target_iou = rng.random_range(PAIR_IOU_RANGE.0..PAIR_IOU_RANGE.1);
        if target_iou <= PAIR_IOU_RANGE.0 {
            continue;
        }
        // equal-size boxes offset horizontally by dx have
        // iou = (w - dx) / (w + dx); invert for the target
        let dx = width * (1.0 - target_iou) / (1.0 + target_iou);
        let Some(first) = sample_box_at(rng, params, width, height, dx) else {
            continue;
        };
        let second = BoundingBox::new(
            first.x1() + dx,
            first.y1(),
            first.x2() + dx,
            first.y2(),
        )
        .expect("positive extent");
        let achieved = first.iou(&second);
        if achieved <= PAIR_IOU_RANGE.0 || achieved >= PAIR_IOU_RANGE.1 {
            continue;
        }
        if !clear_of_crowd_overlap(&first, out) || !clear_of_crowd_overlap(&second, out) {
            continue;
        }
        out.push(first);
        out.push(second);
        return;
    }
}

/// Generates one image's ground truth, fully determined by `params.seed`.
pub fn generate_scene(params: &SceneParams) -> Result<Scene, SynthError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let person_count = poisson_count(&mut rng, params.persons_per_image);
    let pair_count = poisson_count(&mut rng, params.crowd_pair_rate).min(person_count / 2);
    let single_count = person_count - 2 * pair_count;

    let mut boxes = Vec::with_capacity(person_count);
    for _ in 0..pair_count {
        place_pair(&mut rng, params, &mut boxes);
    }
    for _ in 0..single_count {
        place_single(&mut rng, params, &mut boxes);
    }

    let mut gts: Vec<GroundTruthObject> = boxes
        .into_iter()
        .map(|b| GroundTruthObject::new(b, false))
        .collect();
    annotate_densities(&mut gts);

    Ok(Scene {
        gts,
        ignore_regions: Vec::new(),
    })
}

fn jitter_box(rng: &mut ChaCha8Rng, source: &BoundingBox, noise: f64) -> BoundingBox {
    if noise == 0.0 {
        return *source;
    }
    let normal = Normal::new(0.0, noise).expect("validated noise");
    let (cx, cy) = source.center();
    let w = source.width();
    let h = source.height();
    let cx = cx + normal.sample(rng) * w;
    let cy = cy + normal.sample(rng) * h;
    let w = w * libm::exp(normal.sample(rng));
    let h = h * libm::exp(normal.sample(rng));
    BoundingBox::new(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h)
        .expect("jittered extent stays positive")
}

fn sample_background_box(
    rng: &mut ChaCha8Rng,
    gts: &[GroundTruthObject],
) -> Option<BoundingBox> {
    // size borrowed from a random object, position uniform over the hull
    let mut x_min = f64::INFINITY;
    let mut y_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for gt in gts {
        x_min = x_min.min(gt.bbox.x1());
        y_min = y_min.min(gt.bbox.y1());
        x_max = x_max.max(gt.bbox.x2());
        y_max = y_max.max(gt.bbox.y2());
    }
    for _ in 0..PLACEMENT_RETRIES {
        let template = &gts[rng.random_range(0..gts.len())].bbox;
        let w = template.width();
        let h = template.height();
        let cx = rng.random_range(x_min..=x_max);
        let cy = rng.random_range(y_min..=y_max);
        let candidate = BoundingBox::new(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h)
            .expect("positive extent");
        if gts.iter().all(|gt| candidate.iou(&gt.bbox) <= FP_MAX_GT_IOU) {
            return Some(candidate);
        }
    }
    None
}

/// Emits simulated proposals for a scene's objects.
///
/// With `localization_noise = 0` and `duplicate_count = 1` every proposal
/// equals its source box exactly. Background boxes are only produced when
/// the scene has objects to borrow a size from.
pub fn simulate_detector(
    gts: &[GroundTruthObject],
    params: &DetectorParams,
) -> Result<Vec<Detection>, SynthError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut dets = Vec::with_capacity(gts.len() * params.duplicate_count);

    for gt in gts {
        for _ in 0..params.duplicate_count {
            let bbox = jitter_box(&mut rng, &gt.bbox, params.localization_noise);
            let overlap = bbox.iou(&gt.bbox);
            let eps = if params.score_noise > 0.0 {
                rng.random_range(-params.score_noise..=params.score_noise)
            } else {
                0.0
            };
            let score =
                (params.score_base - params.score_slope * (1.0 - overlap) + eps).clamp(0.0, 1.0);
            let index = dets.len();
            dets.push(Detection::new(bbox, score, index).expect("clamped score"));
        }
    }

    if !gts.is_empty() {
        let fp_count = poisson_count(&mut rng, params.fp_rate);
        for _ in 0..fp_count {
            if let Some(bbox) = sample_background_box(&mut rng, gts) {
                let score = rng.random_range(FP_SCORE_RANGE.0..=FP_SCORE_RANGE.1);
                let index = dets.len();
                dets.push(Detection::new(bbox, score, index).expect("score in range"));
            }
        }
    }

    Ok(dets)
}
