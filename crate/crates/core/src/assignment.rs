//! IoU-based bipartite association between track predictions and detections.

use crate::geometry::BoundingBox;

/// Minimum-cost perfect assignment on a square matrix (Kuhn-Munkres with
/// row/column potentials, O(n^3)). Returns `assignment[row] = column`.
///
/// Ties resolve towards the lowest column index reached first, so the result
/// is a deterministic function of the matrix.
pub fn hungarian(costs: &[Vec<f64>]) -> Vec<usize> {
    let n = costs.len();
    if n == 0 {
        return Vec::new();
    }
    debug_assert!(costs.iter().all(|row| row.len() == n));

    // 1-based with a virtual row/column 0.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0usize;
        let mut min_slack = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0usize;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let reduced = costs[r - 1][col - 1] - u[r] - v[col];
                if reduced < min_slack[col] {
                    min_slack[col] = reduced;
                    way[col] = col0;
                }
                if min_slack[col] < delta {
                    delta = min_slack[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    min_slack[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for col in 1..=n {
        if owner[col] > 0 {
            assignment[owner[col] - 1] = col - 1;
        }
    }
    assignment
}

/// Result of associating `N` track predictions with `M` detections.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Association {
    /// `(track index, detection index)` pairs, ordered by track index.
    pub matches: Vec<(usize, usize)>,
    /// Track indices left unmatched, ascending.
    pub lost: Vec<usize>,
    /// Detection indices left unmatched, ascending.
    pub emerging: Vec<usize>,
}

/// Matches tracks to detections by maximising total IoU.
///
/// The N x M matrix of negative IoUs is padded to square with zero-cost
/// dummies. Pairs whose IoU is `<= beta` are priced like dummies and never
/// reported as matches, so every returned pair has IoU `> beta` and the
/// matched IoU total is the maximum attainable under that constraint.
/// Detections are ranked by geometry before solving, which makes the
/// outcome independent of the order they were supplied in.
pub fn associate(tracks: &[BoundingBox], detections: &[BoundingBox], beta: f64) -> Association {
    let (n, m) = (tracks.len(), detections.len());
    if n == 0 || m == 0 {
        return Association {
            matches: Vec::new(),
            lost: (0..n).collect(),
            emerging: (0..m).collect(),
        };
    }

    let mut det_order: Vec<usize> = (0..m).collect();
    det_order.sort_by(|&a, &b| detections[a].geometry_cmp(&detections[b]).then(a.cmp(&b)));

    let size = n.max(m);
    let mut iou = vec![vec![0.0f64; m]; n];
    let mut costs = vec![vec![0.0f64; size]; size];
    for (t, track) in tracks.iter().enumerate() {
        for (slot, &d) in det_order.iter().enumerate() {
            let overlap = track.iou(&detections[d]);
            iou[t][d] = overlap;
            if overlap > beta {
                costs[t][slot] = -overlap;
            }
        }
    }

    let assignment = hungarian(&costs);
    let mut result = Association::default();
    let mut det_taken = vec![false; m];
    for (t, &slot) in assignment.iter().enumerate().take(n) {
        if slot < m {
            let d = det_order[slot];
            if iou[t][d] > beta {
                result.matches.push((t, d));
                det_taken[d] = true;
                continue;
            }
        }
        result.lost.push(t);
    }
    result.emerging = (0..m).filter(|&d| !det_taken[d]).collect();
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox {
        BoundingBox::new(x1, y1, x2, y2)
    }

    #[test]
    fn hungarian_small_matrix() {
        let costs = vec![
            vec![4.0, 1.0, 3.0],
            vec![2.0, 0.0, 5.0],
            vec![3.0, 2.0, 2.0],
        ];
        let a = hungarian(&costs);
        let total: f64 = a.iter().enumerate().map(|(r, &c)| costs[r][c]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn identical_boxes_match() {
        let a = associate(&[b(0.0, 0.0, 10.0, 10.0)], &[b(0.0, 0.0, 10.0, 10.0)], 0.0);
        assert_eq!(a.matches, vec![(0, 0)]);
        assert!(a.lost.is_empty() && a.emerging.is_empty());
    }

    #[test]
    fn disjoint_boxes_are_non_relevant() {
        let a = associate(
            &[b(0.0, 0.0, 10.0, 10.0)],
            &[b(100.0, 100.0, 110.0, 110.0)],
            0.0,
        );
        assert!(a.matches.is_empty());
        assert_eq!(a.lost, vec![0]);
        assert_eq!(a.emerging, vec![0]);
    }

    #[test]
    fn empty_sides() {
        let a = associate(&[], &[b(0.0, 0.0, 1.0, 1.0)], 0.0);
        assert_eq!(a.emerging, vec![0]);
        let a = associate(&[b(0.0, 0.0, 1.0, 1.0)], &[], 0.0);
        assert_eq!(a.lost, vec![0]);
    }

    #[test]
    fn prefers_larger_total_overlap() {
        // Track 0 overlaps both detections; track 1 only the first one.
        let tracks = [b(0.0, 0.0, 10.0, 10.0), b(2.0, 0.0, 12.0, 10.0)];
        let dets = [b(2.0, 0.0, 12.0, 10.0), b(-3.0, 0.0, 7.0, 10.0)];
        let a = associate(&tracks, &dets, 0.0);
        assert_eq!(a.matches, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn beta_severs_weak_pairs() {
        let tracks = [b(0.0, 0.0, 10.0, 10.0)];
        let dets = [b(8.0, 0.0, 18.0, 10.0)];
        assert_eq!(associate(&tracks, &dets, 0.0).matches.len(), 1);
        let a = associate(&tracks, &dets, 0.2);
        assert!(a.matches.is_empty());
        assert_eq!((a.lost.len(), a.emerging.len()), (1, 1));
    }
}
