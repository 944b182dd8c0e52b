//! Property tests for the box arithmetic, including agreement with an
//! independent pixel-membership counting oracle on integer boxes.

use crowdnms_core::BoundingBox;
use proptest::prelude::*;

/// IoU by literally counting unit pixel cells. Only valid for
/// integer-coordinate boxes.
fn pixel_counting_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let corners: Vec<i64> = a
        .corners()
        .iter()
        .chain(b.corners().iter())
        .map(|&c| c as i64)
        .collect();
    let x_lo = corners[0].min(corners[4]);
    let x_hi = corners[2].max(corners[6]);
    let y_lo = corners[1].min(corners[5]);
    let y_hi = corners[3].max(corners[7]);

    let inside = |bb: &BoundingBox, x: i64, y: i64| {
        (x as f64) >= bb.x1() && ((x + 1) as f64) <= bb.x2()
            && (y as f64) >= bb.y1() && ((y + 1) as f64) <= bb.y2()
    };

    let mut in_a = 0u64;
    let mut in_b = 0u64;
    let mut in_both = 0u64;
    for x in x_lo..x_hi {
        for y in y_lo..y_hi {
            let ia = inside(a, x, y);
            let ib = inside(b, x, y);
            in_a += ia as u64;
            in_b += ib as u64;
            in_both += (ia && ib) as u64;
        }
    }
    in_both as f64 / (in_a + in_b - in_both) as f64
}

fn int_box() -> impl Strategy<Value = BoundingBox> {
    (0i64..25, 0i64..25, 1i64..12, 1i64..12).prop_map(|(x, y, w, h)| {
        BoundingBox::new(x as f64, y as f64, (x + w) as f64, (y + h) as f64).unwrap()
    })
}

fn float_box() -> impl Strategy<Value = BoundingBox> {
    (0.0f64..100.0, 0.0f64..100.0, 0.01f64..40.0, 0.01f64..40.0)
        .prop_map(|(x, y, w, h)| BoundingBox::new(x, y, x + w, y + h).unwrap())
}

proptest! {
    #[test]
    fn iou_agrees_with_pixel_counting_on_integer_boxes(a in int_box(), b in int_box()) {
        let analytic = a.iou(&b);
        let counted = pixel_counting_iou(&a, &b);
        let tol = 1e-12 * counted.max(1e-300);
        prop_assert!((analytic - counted).abs() <= tol.max(1e-15),
            "analytic {analytic} vs counted {counted}");
    }

    #[test]
    fn iou_is_symmetric(a in float_box(), b in float_box()) {
        prop_assert_eq!(a.iou(&b), b.iou(&a));
    }

    #[test]
    fn iou_of_box_with_itself_is_one(a in float_box()) {
        prop_assert_eq!(a.iou(&a), 1.0);
    }

    #[test]
    fn iou_bounded_by_both_ioa(a in float_box(), b in float_box()) {
        let iou = a.iou(&b);
        let ioa_ab = a.ioa(&b);
        let ioa_ba = b.ioa(&a);
        prop_assert!(iou >= 0.0);
        prop_assert!(iou <= ioa_ab.min(ioa_ba) + 1e-12);
        prop_assert!(ioa_ab <= 1.0 + 1e-12 && ioa_ba <= 1.0 + 1e-12);
    }

    #[test]
    fn area_positive_and_matches_extent(a in float_box()) {
        prop_assert!(a.area() > 0.0);
        prop_assert_eq!(a.area(), a.width() * a.height());
    }
}
