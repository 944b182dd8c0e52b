//! Axis-aligned box arithmetic underlying every other module.
//!
//! Boxes use the corner-to-corner convention `(x1, y1, x2, y2)` in
//! continuous image coordinates; widths are `x2 - x1` with no `+1` pixel
//! convention. Degenerate boxes are rejected at construction rather than
//! clamped, so every [`BoundingBox`] in flight has strictly positive area.

use core::fmt;

/// Axis-aligned rectangle with `x1 < x2`, `y1 < y2` and finite coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

/// Rejection reasons for [`BoundingBox::new`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoxError {
    /// A coordinate is NaN or infinite.
    NonFinite,
    /// Width or height is zero or negative.
    EmptyExtent { width: f64, height: f64 },
}

impl fmt::Display for BoxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoxError::NonFinite => write!(f, "box coordinate is not finite"),
            BoxError::EmptyExtent { width, height } => {
                write!(f, "box extent {width}x{height} is not strictly positive")
            }
        }
    }
}

impl core::error::Error for BoxError {}

impl BoundingBox {
    /// Validates the invariants and builds a box.
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, BoxError> {
        if !(x1.is_finite() && y1.is_finite() && x2.is_finite() && y2.is_finite()) {
            return Err(BoxError::NonFinite);
        }
        if x2 <= x1 || y2 <= y1 {
            return Err(BoxError::EmptyExtent {
                width: x2 - x1,
                height: y2 - y1,
            });
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn y1(&self) -> f64 {
        self.y1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    pub fn y2(&self) -> f64 {
        self.y2
    }

    /// Corner coordinates as `[x1, y1, x2, y2]`.
    pub fn corners(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2))
    }

    /// Strictly positive by the construction invariants.
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Overlap area with `other`; zero when the boxes are disjoint.
    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let w = (self.x2.min(other.x2) - self.x1.max(other.x1)).max(0.0);
        let h = (self.y2.min(other.y2) - self.y1.max(other.y1)).max(0.0);
        w * h
    }

    /// Intersection over union; symmetric, in `[0, 1]`.
    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let inter = self.intersection_area(other);
        inter / (self.area() + other.area() - inter)
    }

    /// Intersection over *own* area; the ignore-region matching convention.
    ///
    /// Not symmetric: a small detection fully inside a large region scores
    /// 1.0 while the region scores only a fraction against the detection.
    pub fn ioa(&self, region: &BoundingBox) -> f64 {
        self.intersection_area(region) / self.area()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bb(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox {
        BoundingBox::new(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn area_examples() {
        assert_eq!(bb(0.0, 0.0, 2.0, 2.0).area(), 4.0);
        assert_eq!(bb(0.0, 0.0, 1.0, 3.0).area(), 3.0);
        assert_eq!(bb(1.5, 2.5, 4.0, 3.5).area(), 2.5);
    }

    #[test]
    fn iou_identical_boxes_is_exactly_one() {
        let a = bb(0.0, 0.0, 2.0, 2.0);
        assert_eq!(a.iou(&a), 1.0);
        let b = bb(3.7, -1.2, 9.25, 4.75);
        assert_eq!(b.iou(&b), 1.0);
    }

    #[test]
    fn iou_disjoint_boxes_is_zero() {
        let a = bb(0.0, 0.0, 1.0, 1.0);
        let b = bb(5.0, 5.0, 6.0, 6.0);
        assert_eq!(a.iou(&b), 0.0);
        // touching edges count as disjoint
        let c = bb(1.0, 0.0, 2.0, 1.0);
        assert_eq!(a.iou(&c), 0.0);
    }

    #[test]
    fn iou_one_third_example() {
        let a = bb(0.0, 0.0, 2.0, 2.0);
        let b = bb(1.0, 0.0, 3.0, 2.0);
        // intersection 2, union 6
        assert!((a.iou(&b) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(a.iou(&b), b.iou(&a));
    }

    #[test]
    fn ioa_examples() {
        let det = bb(2.0, 2.0, 3.0, 3.0);
        let region = bb(0.0, 0.0, 10.0, 10.0);
        assert_eq!(det.ioa(&region), 1.0);
        assert!(region.ioa(&det) < 1.0);

        let far = bb(20.0, 20.0, 21.0, 21.0);
        assert_eq!(det.ioa(&far), 0.0);

        let d = bb(0.0, 0.0, 2.0, 2.0);
        let r = bb(1.0, 0.0, 3.0, 2.0);
        assert_eq!(d.ioa(&r), 0.5);
    }

    #[test]
    fn degenerate_boxes_rejected() {
        assert_eq!(
            BoundingBox::new(0.0, 0.0, 0.0, 1.0),
            Err(BoxError::EmptyExtent {
                width: 0.0,
                height: 1.0
            })
        );
        assert!(BoundingBox::new(1.0, 0.0, 0.0, 1.0).is_err());
        assert_eq!(
            BoundingBox::new(0.0, f64::NAN, 1.0, 1.0),
            Err(BoxError::NonFinite)
        );
        assert_eq!(
            BoundingBox::new(0.0, 0.0, f64::INFINITY, 1.0),
            Err(BoxError::NonFinite)
        );
    }
}
