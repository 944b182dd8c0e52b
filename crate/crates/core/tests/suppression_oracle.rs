//! Differential tests of the suppression loop against the brute-force
//! reference, plus the loop's behavioural invariants.

mod common;

use common::{box_pair_with_iou, brute_force_greedy, random_detections, test_rng};
use crowdnms_core::suppression::{suppress, RescoreMethod, SuppressionConfig};
use crowdnms_core::Detection;
use rand::Rng;

const METHODS: [RescoreMethod; 3] = [
    RescoreMethod::Greedy,
    RescoreMethod::SoftLinear,
    RescoreMethod::SoftGaussian,
];

#[test]
fn greedy_matches_brute_force_on_random_instances() {
    let mut rng = test_rng(0xD1FF);
    for _ in 0..1000 {
        let dets = random_detections(&mut rng, 10);
        let nt = rng.random_range(0.2..0.8);
        let cfg = SuppressionConfig::new(RescoreMethod::Greedy, false, nt);
        let got = suppress(&dets, &cfg).unwrap();
        let expected = brute_force_greedy(&dets, nt);
        assert_eq!(got.kept, expected, "nt={nt} dets={dets:?}");
        assert_eq!(got.suppressed_count, dets.len() - expected.len());
    }
}

#[test]
fn adaptive_with_low_densities_equals_plain_nms() {
    let mut rng = test_rng(0xADA9);
    for round in 0..1000 {
        let nt = rng.random_range(0.3..0.7);
        let dets: Vec<Detection> = random_detections(&mut rng, 10)
            .into_iter()
            .map(|d| {
                let density = rng.random_range(0.0..=nt);
                d.with_density(density).unwrap()
            })
            .collect();
        let method = METHODS[round % 3];
        let plain = suppress(&dets, &SuppressionConfig::new(method, false, nt)).unwrap();
        let adaptive = suppress(&dets, &SuppressionConfig::new(method, true, nt)).unwrap();
        assert_eq!(plain.kept, adaptive.kept, "method={method:?} nt={nt}");
    }
}

#[test]
fn adaptive_dominance_on_crowded_pairs() {
    let mut rng = test_rng(0xC0DE);
    for _ in 0..500 {
        let nt = rng.random_range(0.3..0.7);
        let v = rng.random_range(nt + 0.01..0.95);
        let (a, b) = box_pair_with_iou(v);
        let density = rng.random_range(v..=1.0);
        let dets = [
            Detection::new(a, 0.9, 0).unwrap().with_density(density).unwrap(),
            Detection::new(b, 0.85, 1).unwrap().with_density(density).unwrap(),
        ];
        assert!(a.iou(&b) > nt);
        let greedy = suppress(&dets, &SuppressionConfig::new(RescoreMethod::Greedy, false, nt))
            .unwrap();
        assert_eq!(greedy.kept.len(), 1);
        let adaptive = suppress(&dets, &SuppressionConfig::new(RescoreMethod::Greedy, true, nt))
            .unwrap();
        assert_eq!(adaptive.kept.len(), 2, "v={v} density={density} nt={nt}");
    }
}

#[test]
fn greedy_is_idempotent() {
    let mut rng = test_rng(0x1DE0);
    for _ in 0..300 {
        let dets = random_detections(&mut rng, 12);
        let cfg = SuppressionConfig::new(RescoreMethod::Greedy, false, 0.5);
        let once = suppress(&dets, &cfg).unwrap();
        let twice = suppress(&once.kept, &cfg).unwrap();
        assert_eq!(once.kept, twice.kept);
        assert_eq!(twice.suppressed_count, 0);
    }
}

#[test]
fn raising_nt_never_shrinks_the_greedy_kept_set() {
    let mut rng = test_rng(0x307);
    for _ in 0..300 {
        let dets = random_detections(&mut rng, 12);
        let lo = rng.random_range(0.2..0.5);
        let hi = rng.random_range(lo..0.9);
        let kept_lo = suppress(&dets, &SuppressionConfig::new(RescoreMethod::Greedy, false, lo))
            .unwrap()
            .kept
            .len();
        let kept_hi = suppress(&dets, &SuppressionConfig::new(RescoreMethod::Greedy, false, hi))
            .unwrap()
            .kept
            .len();
        assert!(kept_lo <= kept_hi, "lo={lo} hi={hi}");
    }
}

#[test]
fn scores_never_increase_and_boxes_are_verbatim() {
    let mut rng = test_rng(0x5C0);
    for round in 0..600 {
        let dets = random_detections(&mut rng, 12);
        let method = METHODS[round % 3];
        let cfg = SuppressionConfig::new(method, false, 0.5);
        let out = suppress(&dets, &cfg).unwrap();
        assert!(out.kept.len() <= dets.len());
        assert_eq!(out.suppressed_count, dets.len() - out.kept.len());
        for kept in &out.kept {
            let original = &dets[kept.source_index];
            assert_eq!(kept.bbox, original.bbox);
            assert!(kept.score <= original.score);
            if method == RescoreMethod::Greedy {
                assert_eq!(kept.score, original.score);
            }
            assert!((0.0..=1.0).contains(&kept.score));
        }
        for pair in out.kept.windows(2) {
            assert!(pair[0].score >= pair[1].score);
        }
    }
}

#[test]
fn untouched_when_all_overlaps_below_threshold() {
    // a diagonal line of disjoint boxes: nothing can be suppressed
    let dets: Vec<Detection> = (0..6)
        .map(|i| {
            let off = i as f64 * 10.0;
            Detection::new(
                crowdnms_core::BoundingBox::new(off, off, off + 3.0, off + 3.0).unwrap(),
                0.1 + 0.1 * i as f64,
                i,
            )
            .unwrap()
        })
        .collect();
    for method in METHODS {
        let out = suppress(&dets, &SuppressionConfig::new(method, false, 0.5)).unwrap();
        assert_eq!(out.suppressed_count, 0);
        let mut expected = dets.clone();
        expected.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());
        assert_eq!(out.kept, expected);
    }
}

#[test]
fn soft_gaussian_sigma_widens_survival() {
    // same overlap, larger sigma decays less
    let (a, b) = box_pair_with_iou(0.7);
    let dets = [
        Detection::new(a, 0.9, 0).unwrap(),
        Detection::new(b, 0.8, 1).unwrap(),
    ];
    let mut narrow = SuppressionConfig::new(RescoreMethod::SoftGaussian, false, 0.5);
    narrow.sigma = 0.1;
    let mut wide = narrow;
    wide.sigma = 1.0;
    let out_narrow = suppress(&dets, &narrow).unwrap();
    let out_wide = suppress(&dets, &wide).unwrap();
    assert!(out_narrow.kept[1].score < out_wide.kept[1].score);
}
