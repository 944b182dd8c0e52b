//! Shared test support: the brute-force greedy-NMS reference and random
//! instance generators.
//!
//! Each test binary compiles this module separately and uses a subset.
#![allow(dead_code)]

use crowdnms_core::{BoundingBox, Detection};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Naive greedy NMS with an explicit removal list.
///
/// Written independently of the production loop and kept deliberately
/// simple: pick the highest-scored survivor, list every survivor whose IoU
/// with it exceeds `nt`, remove the listed ones, repeat. Ties break on the
/// smaller `source_index`.
pub fn brute_force_greedy(dets: &[Detection], nt: f64) -> Vec<Detection> {
    let mut removed = vec![false; dets.len()];
    let mut kept = Vec::new();
    loop {
        let mut best: Option<usize> = None;
        for i in 0..dets.len() {
            if removed[i] {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(b) => {
                    if dets[i].score > dets[b].score
                        || (dets[i].score == dets[b].score
                            && dets[i].source_index < dets[b].source_index)
                    {
                        Some(i)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        let Some(m) = best else {
            break;
        };
        removed[m] = true;
        kept.push(dets[m].clone());

        let mut removal_list = Vec::new();
        for i in 0..dets.len() {
            if !removed[i] && dets[m].bbox.iou(&dets[i].bbox) > nt {
                removal_list.push(i);
            }
        }
        for i in removal_list {
            removed[i] = true;
        }
    }
    kept
}

/// Random cluttered detections in a 120x120 region, sizes up to 30.
pub fn random_detections(rng: &mut ChaCha8Rng, max_n: usize) -> Vec<Detection> {
    let n = rng.random_range(0..=max_n);
    (0..n)
        .map(|i| {
            let x1 = rng.random_range(0.0..90.0);
            let y1 = rng.random_range(0.0..90.0);
            let w = rng.random_range(1.0..30.0);
            let h = rng.random_range(1.0..30.0);
            let score = rng.random_range(0.0..=1.0);
            Detection::new(
                BoundingBox::new(x1, y1, x1 + w, y1 + h).unwrap(),
                score,
                i,
            )
            .unwrap()
        })
        .collect()
}

/// Fresh deterministic RNG for a test.
pub fn test_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two equal-sized boxes whose mutual IoU is exactly `v` (up to rounding),
/// built by offsetting a clone horizontally.
pub fn box_pair_with_iou(v: f64) -> (BoundingBox, BoundingBox) {
    let w = 2.0;
    let h = 4.0;
    let dx = w * (1.0 - v) / (1.0 + v);
    let a = BoundingBox::new(0.0, 0.0, w, h).unwrap();
    let b = BoundingBox::new(dx, 0.0, w + dx, h).unwrap();
    (a, b)
}
