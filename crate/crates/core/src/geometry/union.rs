use super::BoundingBox;

/// Exact area of the union of `rects`, counting overlaps once.
///
/// Sweeps vertical slabs between consecutive distinct x-coordinates and
/// merges the y-intervals of the rectangles spanning each slab. O(n^2 log n),
/// which is plenty for the few hundred regions a frame produces.
pub fn union_area(rects: &[BoundingBox]) -> f64 {
    let rects: Vec<&BoundingBox> = rects.iter().filter(|r| r.area() > 0.0).collect();
    match rects.len() {
        0 => return 0.0,
        1 => return rects[0].area(),
        _ => {}
    }

    let mut xs: Vec<f64> = rects.iter().flat_map(|r| [r.x1, r.x2]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();

    let mut spans: Vec<(f64, f64)> = Vec::with_capacity(rects.len());
    let mut total = 0.0;
    for slab in xs.windows(2) {
        let (left, right) = (slab[0], slab[1]);
        spans.clear();
        spans.extend(
            rects
                .iter()
                .filter(|r| r.x1 <= left && r.x2 >= right)
                .map(|r| (r.y1, r.y2)),
        );
        if spans.is_empty() {
            continue;
        }
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut covered = 0.0;
        let (mut lo, mut hi) = spans[0];
        for &(y1, y2) in &spans[1..] {
            if y1 > hi {
                covered += hi - lo;
                lo = y1;
                hi = y2;
            } else if y2 > hi {
                hi = y2;
            }
        }
        covered += hi - lo;
        total += covered * (right - left);
    }
    total
}
