use super::Detection;

/// Greedy per-class non-maximum suppression.
///
/// Detections of one frame are ranked by [`Detection::canonical_cmp`] (score descending,
/// geometry tie-break) and a detection is kept iff its IoU with every
/// already-kept detection of the same class is `<= iou_threshold`. Output is
/// in rank order.
pub fn nms(dets: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    suppress(dets, iou_threshold, true)
}

/// Like [`nms`] but boxes of different classes suppress each other too.
pub fn nms_class_agnostic(dets: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    suppress(dets, iou_threshold, false)
}

fn suppress(dets: &[Detection], iou_threshold: f64, per_class: bool) -> Vec<Detection> {
    let mut ranked = dets.to_vec();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.bbox.geometry_cmp(&b.bbox))
            .then(a.class_id.cmp(&b.class_id))
    });

    let mut kept: Vec<Detection> = Vec::with_capacity(ranked.len());
    for det in ranked {
        let suppressed = kept.iter().any(|k| {
            (!per_class || k.class_id == det.class_id) && k.bbox.iou(&det.bbox) > iou_threshold
        });
        if !suppressed {
            kept.push(det);
        }
    }
    kept
}
