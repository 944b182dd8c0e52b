//! The unified NMS engine: greedy, soft and density-adaptive suppression as
//! one parameterized rescoring loop.
//!
//! Each round selects the highest-scored remaining detection `M`, moves it
//! to the kept set, and rescores every remaining neighbour whose IoU with
//! `M` exceeds the active threshold. The threshold is the fixed base `nt`,
//! or `max(nt, density(M))` when adaptive mode is on, so crowded instances
//! tolerate closer neighbours while sparse regions keep the strict base
//! threshold. The rescoring weight is 0 (greedy), `1 - iou` (soft linear)
//! or `exp(-iou^2 / sigma)` (soft Gaussian); rescored detections whose score
//! falls below the configured floor are dropped.
//!
//! Neighbours at an IoU *equal* to the active threshold are left untouched.
//! This keeps the exact-overlap case alive: a perfectly localized pair of
//! detections whose mutual IoU equals their density would otherwise always
//! lose one member, defeating the point of the adaptive threshold.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::density::Detection;

/// How neighbours overlapping the kept detection are rescored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RescoreMethod {
    /// Weight 0: overlapping neighbours are removed outright.
    Greedy,
    /// Weight `1 - iou`.
    SoftLinear,
    /// Weight `exp(-iou^2 / sigma)`.
    SoftGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuppressionConfig {
    pub method: RescoreMethod,
    /// Scale each round's threshold by the kept detection's density.
    pub adaptive: bool,
    /// Base overlap threshold, in `(0, 1)`.
    pub nt: f64,
    /// Gaussian decay width; only read by [`RescoreMethod::SoftGaussian`].
    pub sigma: f64,
    /// Rescored detections whose score falls below this are dropped.
    /// A rescored score of exactly 0 is always dropped.
    pub score_floor: f64,
}

impl SuppressionConfig {
    pub const DEFAULT_SIGMA: f64 = 0.5;
    pub const DEFAULT_SCORE_FLOOR: f64 = 0.001;

    /// Config with the default sigma and score floor.
    pub fn new(method: RescoreMethod, adaptive: bool, nt: f64) -> Self {
        Self {
            method,
            adaptive,
            nt,
            sigma: Self::DEFAULT_SIGMA,
            score_floor: Self::DEFAULT_SCORE_FLOOR,
        }
    }

    fn validate(&self) -> Result<(), SuppressionError> {
        // NaN fails every comparison, so it is rejected everywhere below
        let nt_ok = self.nt > 0.0 && self.nt < 1.0;
        if !nt_ok {
            return Err(SuppressionError::ThresholdOutOfRange(self.nt));
        }
        let sigma_ok = self.sigma > 0.0;
        if !sigma_ok {
            return Err(SuppressionError::SigmaOutOfRange(self.sigma));
        }
        let floor_ok = self.score_floor >= 0.0;
        if !floor_ok {
            return Err(SuppressionError::NegativeScoreFloor(self.score_floor));
        }
        Ok(())
    }
}

/// Output of [`suppress`]: the kept set, sorted by final score descending.
#[derive(Debug, Clone, PartialEq)]
pub struct SuppressionResult {
    pub kept: Vec<Detection>,
    pub suppressed_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SuppressionError {
    ThresholdOutOfRange(f64),
    SigmaOutOfRange(f64),
    NegativeScoreFloor(f64),
    /// Adaptive mode with a detection that carries no density.
    MissingDensity { index: usize },
    InvalidScore { index: usize, score: f64 },
    InvalidDensity { index: usize, density: f64 },
}

impl fmt::Display for SuppressionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SuppressionError::ThresholdOutOfRange(nt) => {
                write!(f, "threshold nt {nt} outside (0, 1)")
            }
            SuppressionError::SigmaOutOfRange(s) => write!(f, "sigma {s} must be positive"),
            SuppressionError::NegativeScoreFloor(v) => {
                write!(f, "score floor {v} must be non-negative")
            }
            SuppressionError::MissingDensity { index } => {
                write!(f, "adaptive suppression: detection {index} has no density")
            }
            SuppressionError::InvalidScore { index, score } => {
                write!(f, "detection {index}: score {score} outside [0, 1]")
            }
            SuppressionError::InvalidDensity { index, density } => {
                write!(f, "detection {index}: density {density} outside [0, 1]")
            }
        }
    }
}

impl core::error::Error for SuppressionError {}

/// Per-round threshold: the base `nt`, raised to the kept detection's
/// density when that is larger.
pub fn adaptive_threshold(nt: f64, d_m: f64) -> f64 {
    nt.max(d_m)
}

/// Score multiplier applied to a neighbour at the given overlap.
pub fn rescore_weight(method: RescoreMethod, overlap: f64, sigma: f64) -> f64 {
    match method {
        RescoreMethod::Greedy => 0.0,
        RescoreMethod::SoftLinear => 1.0 - overlap,
        RescoreMethod::SoftGaussian => libm::exp(-(overlap * overlap) / sigma),
    }
}

/// Runs the suppression loop over one image's detections.
///
/// Deterministic: score ties are broken by the smaller `source_index`.
/// Kept detections carry their final (possibly decayed) scores; boxes are
/// never mutated.
pub fn suppress(
    dets: &[Detection],
    cfg: &SuppressionConfig,
) -> Result<SuppressionResult, SuppressionError> {
    cfg.validate()?;
    for (index, det) in dets.iter().enumerate() {
        if !(0.0..=1.0).contains(&det.score) {
            return Err(SuppressionError::InvalidScore {
                index,
                score: det.score,
            });
        }
        if cfg.adaptive {
            match det.density {
                None => return Err(SuppressionError::MissingDensity { index }),
                Some(d) if !(0.0..=1.0).contains(&d) => {
                    return Err(SuppressionError::InvalidDensity { index, density: d })
                }
                Some(_) => {}
            }
        }
    }

    let mut scores: Vec<f64> = dets.iter().map(|d| d.score).collect();
    let mut alive = vec![true; dets.len()];
    let mut remaining = dets.len();
    let mut kept = Vec::new();

    while remaining > 0 {
        let mut m = usize::MAX;
        for i in 0..dets.len() {
            if !alive[i] {
                continue;
            }
            if m == usize::MAX
                || scores[i] > scores[m]
                || (scores[i] == scores[m] && dets[i].source_index < dets[m].source_index)
            {
                m = i;
            }
        }

        alive[m] = false;
        remaining -= 1;

        let threshold = if cfg.adaptive {
            adaptive_threshold(cfg.nt, dets[m].density.unwrap_or(0.0))
        } else {
            cfg.nt
        };

        let mut kept_det = dets[m].clone();
        kept_det.score = scores[m];
        kept.push(kept_det);

        for i in 0..dets.len() {
            if !alive[i] {
                continue;
            }
            let overlap = dets[m].bbox.iou(&dets[i].bbox);
            if overlap > threshold {
                scores[i] *= rescore_weight(cfg.method, overlap, cfg.sigma);
                if scores[i] < cfg.score_floor || scores[i] <= 0.0 {
                    alive[i] = false;
                    remaining -= 1;
                }
            }
        }
    }

    let suppressed_count = dets.len() - kept.len();
    Ok(SuppressionResult {
        kept,
        suppressed_count,
    })
}
