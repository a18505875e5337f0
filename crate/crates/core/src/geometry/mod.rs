//! Axis-aligned box algebra shared by the tracker, the cascade and the
//! evaluator.
//!
//! Coordinates are continuous pixels with the origin at the top-left corner
//! of the frame. A box is `[x1, x2) x [y1, y2)` in spirit, but since values
//! are real-valued the distinction never matters: touching boxes have zero
//! intersection area.

mod nms;
mod union;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::classes::ClassId;

pub use nms::{nms, nms_class_agnostic};
pub use union::union_area;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BoundingBox {
    /// Corner-form constructor. Callers are expected to pass `x1 <= x2` and
    /// `y1 <= y2`; use [`BoundingBox::is_valid`] when the input is untrusted.
    pub const fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self { x1, y1, x2, y2 }
    }

    /// Box of the given width and height centred on `(cx, cy)`.
    pub fn from_center(cx: f64, cy: f64, width: f64, height: f64) -> Self {
        Self {
            x1: cx - width / 2.0,
            y1: cy - height / 2.0,
            x2: cx + width / 2.0,
            y2: cy + height / 2.0,
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.x1, self.y1, self.x2, self.y2]
            .iter()
            .all(|v| v.is_finite())
            && self.x1 <= self.x2
            && self.y1 <= self.y2
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    /// Overlapping part of two boxes, `None` when they share no positive area.
    pub fn intersection(&self, other: &Self) -> Option<Self> {
        let x1 = self.x1.max(other.x1);
        let y1 = self.y1.max(other.y1);
        let x2 = self.x2.min(other.x2);
        let y2 = self.y2.min(other.y2);
        (x2 > x1 && y2 > y1).then_some(Self { x1, y1, x2, y2 })
    }

    pub fn intersection_area(&self, other: &Self) -> f64 {
        self.intersection(other).map_or(0.0, |b| b.area())
    }

    /// Intersection over union. Zero-area boxes have IoU 0 with everything,
    /// including themselves.
    pub fn iou(&self, other: &Self) -> f64 {
        let inter = self.intersection_area(other);
        if inter <= 0.0 {
            return 0.0;
        }
        let union = self.area() + other.area() - inter;
        (inter / union).clamp(0.0, 1.0)
    }

    /// Smallest box containing both.
    pub fn hull(&self, other: &Self) -> Self {
        Self {
            x1: self.x1.min(other.x1),
            y1: self.y1.min(other.y1),
            x2: self.x2.max(other.x2),
            y2: self.y2.max(other.y2),
        }
    }

    /// Clamps every coordinate into `[0, frame_w] x [0, frame_h]`.
    pub fn clip(&self, frame_w: f64, frame_h: f64) -> Self {
        Self {
            x1: self.x1.clamp(0.0, frame_w),
            y1: self.y1.clamp(0.0, frame_h),
            x2: self.x2.clamp(0.0, frame_w),
            y2: self.y2.clamp(0.0, frame_h),
        }
    }

    /// Grows the box by `margin` on all four sides without clipping.
    pub fn expand(&self, margin: f64) -> Self {
        Self {
            x1: self.x1 - margin,
            y1: self.y1 - margin,
            x2: self.x2 + margin,
            y2: self.y2 + margin,
        }
    }

    /// Grows the box by `margin` and clips it to the frame.
    pub fn dilate(&self, margin: f64, frame_w: f64, frame_h: f64) -> Self {
        debug_assert!(margin >= 0.0, "negative dilation margin {margin}");
        self.expand(margin).clip(frame_w, frame_h)
    }

    /// Fraction of this box's area lying outside the frame.
    pub fn outside_fraction(&self, frame_w: f64, frame_h: f64) -> f64 {
        let area = self.area();
        if area <= 0.0 {
            return 0.0;
        }
        let inside = self.clip(frame_w, frame_h).area();
        ((area - inside) / area).clamp(0.0, 1.0)
    }

    /// Total order on geometry: lower `x1`, then lower `y1`, then smaller
    /// area, then lower `x2`, then lower `y2`.
    pub fn geometry_cmp(&self, other: &Self) -> Ordering {
        self.x1
            .total_cmp(&other.x1)
            .then(self.y1.total_cmp(&other.y1))
            .then(self.area().total_cmp(&other.area()))
            .then(self.x2.total_cmp(&other.x2))
            .then(self.y2.total_cmp(&other.y2))
    }
}

/// One detector output: a scored, classified box in a given frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub class_id: ClassId,
    pub score: f64,
    pub frame_index: u32,
}

impl Detection {
    pub fn new(frame_index: u32, class_id: ClassId, score: f64, bbox: BoundingBox) -> Self {
        Self {
            bbox,
            class_id,
            score,
            frame_index,
        }
    }

    /// Canonical ordering used wherever detections are ranked: frame
    /// ascending, score descending, then [`BoundingBox::geometry_cmp`], then
    /// class id. Sorting with this order makes every downstream result
    /// independent of input order.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.frame_index
            .cmp(&other.frame_index)
            .then(other.score.total_cmp(&self.score))
            .then(self.bbox.geometry_cmp(&other.bbox))
            .then(self.class_id.cmp(&other.class_id))
    }
}

pub fn sort_canonical(dets: &mut [Detection]) {
    dets.sort_by(Detection::canonical_cmp);
}

/// The set of frame regions the refinement source may spend compute on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMask {
    pub frame_w: f64,
    pub frame_h: f64,
    pub regions: Vec<BoundingBox>,
}

impl RegionMask {
    pub fn empty(frame_w: f64, frame_h: f64) -> Self {
        Self {
            frame_w,
            frame_h,
            regions: Vec::new(),
        }
    }

    pub fn full(frame_w: f64, frame_h: f64) -> Self {
        Self {
            frame_w,
            frame_h,
            regions: vec![BoundingBox::new(0.0, 0.0, frame_w, frame_h)],
        }
    }

    /// Mask made of `boxes`, each dilated by `margin` and clipped to the frame.
    pub fn from_boxes<'a, I>(boxes: I, margin: f64, frame_w: f64, frame_h: f64) -> Self
    where
        I: IntoIterator<Item = &'a BoundingBox>,
    {
        let regions = boxes
            .into_iter()
            .map(|b| b.dilate(margin, frame_w, frame_h))
            .filter(|b| b.area() > 0.0)
            .collect();
        Self {
            frame_w,
            frame_h,
            regions,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.regions.iter().all(|r| r.area() <= 0.0)
    }

    pub fn frame_area(&self) -> f64 {
        self.frame_w * self.frame_h
    }

    /// Area of the union of all regions; overlaps are counted once.
    pub fn covered_area(&self) -> f64 {
        union_area(&self.regions)
    }

    /// Area of `bbox` that falls inside the mask.
    pub fn covered_area_within(&self, bbox: &BoundingBox) -> f64 {
        let clipped: Vec<BoundingBox> = self
            .regions
            .iter()
            .filter_map(|r| r.intersection(bbox))
            .collect();
        union_area(&clipped)
    }

    /// Fraction of `bbox` covered by the mask. Degenerate boxes count as
    /// fully covered when they touch any region and uncovered otherwise.
    pub fn coverage_of(&self, bbox: &BoundingBox) -> f64 {
        let area = bbox.area();
        if area <= 0.0 {
            let touches = self
                .regions
                .iter()
                .any(|r| bbox.x1 <= r.x2 && bbox.x2 >= r.x1 && bbox.y1 <= r.y2 && bbox.y2 >= r.y1);
            return if touches { 1.0 } else { 0.0 };
        }
        (self.covered_area_within(bbox) / area).clamp(0.0, 1.0)
    }

    pub fn intersects(&self, bbox: &BoundingBox) -> bool {
        self.coverage_of(bbox) > 0.0
    }

    /// Union of two masks over the same frame.
    pub fn union(&self, other: &Self) -> Self {
        let mut regions = self.regions.clone();
        regions.extend_from_slice(&other.regions);
        Self {
            frame_w: self.frame_w,
            frame_h: self.frame_h,
            regions,
        }
    }
}

/// Covered fraction of the frame, in `[0, 1]`. Empty masks cover nothing.
pub fn mask_coverage(mask: &RegionMask) -> f64 {
    let frame = mask.frame_area();
    if frame <= 0.0 || mask.regions.is_empty() {
        return 0.0;
    }
    (mask.covered_area() / frame).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox {
        BoundingBox::new(x1, y1, x2, y2)
    }

    #[test]
    fn iou_examples() {
        let a = b(0.0, 0.0, 10.0, 10.0);
        assert_eq!(a.iou(&a), 1.0);
        assert_eq!(a.iou(&b(10.0, 0.0, 20.0, 10.0)), 0.0);
        let third = a.iou(&b(5.0, 0.0, 15.0, 10.0));
        assert!((third - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn iou_of_degenerate_boxes_is_zero() {
        let line = b(0.0, 0.0, 10.0, 0.0);
        assert_eq!(line.iou(&line), 0.0);
        assert_eq!(line.iou(&b(0.0, 0.0, 10.0, 10.0)), 0.0);
        let point = b(3.0, 3.0, 3.0, 3.0);
        assert_eq!(point.iou(&point), 0.0);
    }

    #[test]
    fn dilate_examples() {
        let d = b(100.0, 100.0, 200.0, 200.0).dilate(30.0, 1242.0, 375.0);
        assert_eq!(d, b(70.0, 70.0, 230.0, 230.0));
        let d = b(5.0, 5.0, 50.0, 50.0).dilate(30.0, 1242.0, 375.0);
        assert_eq!(d, b(0.0, 0.0, 80.0, 80.0));
        let inside = b(12.5, 3.0, 40.0, 41.0);
        assert_eq!(inside.dilate(0.0, 1242.0, 375.0), inside);
        let outside = b(-10.0, 300.0, 40.0, 400.0);
        assert_eq!(
            outside.dilate(0.0, 1242.0, 375.0),
            b(0.0, 300.0, 40.0, 375.0)
        );
    }

    #[test]
    fn coverage_examples() {
        let disjoint = RegionMask {
            frame_w: 100.0,
            frame_h: 100.0,
            regions: vec![b(0.0, 0.0, 10.0, 10.0), b(50.0, 50.0, 60.0, 60.0)],
        };
        assert!((mask_coverage(&disjoint) - 0.02).abs() < 1e-15);

        let same = RegionMask {
            frame_w: 100.0,
            frame_h: 100.0,
            regions: vec![b(0.0, 0.0, 10.0, 10.0), b(0.0, 0.0, 10.0, 10.0)],
        };
        assert!((mask_coverage(&same) - 0.01).abs() < 1e-15);

        let halves = RegionMask {
            frame_w: 100.0,
            frame_h: 100.0,
            regions: vec![b(0.0, 0.0, 60.0, 100.0), b(40.0, 0.0, 100.0, 100.0)],
        };
        assert_eq!(mask_coverage(&halves), 1.0);

        assert_eq!(mask_coverage(&RegionMask::empty(100.0, 100.0)), 0.0);
    }

    #[test]
    fn coverage_of_box() {
        let mask = RegionMask {
            frame_w: 100.0,
            frame_h: 100.0,
            regions: vec![b(0.0, 0.0, 50.0, 100.0)],
        };
        assert_eq!(mask.coverage_of(&b(10.0, 10.0, 20.0, 20.0)), 1.0);
        assert!((mask.coverage_of(&b(40.0, 0.0, 60.0, 10.0)) - 0.5).abs() < 1e-15);
        assert_eq!(mask.coverage_of(&b(60.0, 0.0, 70.0, 10.0)), 0.0);
        assert_eq!(mask.coverage_of(&b(50.0, 5.0, 50.0, 5.0)), 1.0);
    }

    #[test]
    fn outside_fraction() {
        let half_out = b(-10.0, 0.0, 10.0, 10.0);
        assert!((half_out.outside_fraction(100.0, 100.0) - 0.5).abs() < 1e-15);
        assert_eq!(b(1.0, 1.0, 2.0, 2.0).outside_fraction(100.0, 100.0), 0.0);
    }
}
