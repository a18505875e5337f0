use crate::geometry::{BoundingBox, Detection};

/// Role of a ground-truth box during matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GtKind {
    /// Counts towards recall; an unmatched care box is a false negative.
    Care,
    /// Object of the evaluated class (or a neighbouring class) that fails
    /// the difficulty filter. Claimable one-to-one but never scored.
    Ignore,
    /// Unlabelled area; any detection lying mostly inside it is ignored.
    DontCareRegion,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtBox {
    pub bbox: BoundingBox,
    pub kind: GtKind,
}

impl GtBox {
    pub fn care(bbox: BoundingBox) -> Self {
        Self {
            bbox,
            kind: GtKind::Care,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetOutcome {
    TruePositive {
        gt: usize,
    },
    FalsePositive,
    /// Neither true nor false; `gt` is the ignore box it claimed, if any.
    Ignored {
        gt: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FrameMatch {
    /// One outcome per input detection, in input order.
    pub outcomes: Vec<DetOutcome>,
    /// Care boxes left unclaimed (false negatives).
    pub missed: Vec<usize>,
}

impl FrameMatch {
    pub fn true_positives(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.outcomes
            .iter()
            .enumerate()
            .filter_map(|(d, o)| match o {
                DetOutcome::TruePositive { gt } => Some((d, *gt)),
                _ => None,
            })
    }

    pub fn false_positives(&self) -> impl Iterator<Item = usize> + '_ {
        self.outcomes
            .iter()
            .enumerate()
            .filter_map(|(d, o)| matches!(o, DetOutcome::FalsePositive).then_some(d))
    }

    /// Detection index that claimed ground truth `gt`, if any.
    pub fn claimant(&self, gt: usize) -> Option<usize> {
        self.outcomes.iter().position(|o| match o {
            DetOutcome::TruePositive { gt: g } => *g == gt,
            DetOutcome::Ignored { gt: Some(g) } => *g == gt,
            _ => false,
        })
    }
}

/// Minimum share of a detection's area inside a don't-care region for the
/// detection to be ignored.
pub const DONT_CARE_OVERLAP: f64 = 0.5;

/// Greedy one-to-one matching for one frame and one class.
///
/// `dets` must already be in rank order (score descending). Each detection
/// claims the unclaimed care box with the highest IoU `>= iou_threshold`;
/// failing that, the best unclaimed ignore box; failing that it is ignored
/// if it lies mostly inside a don't-care region or if `too_small` flags it,
/// and is a false positive otherwise. IoU ties go to the lower index.
pub fn match_frame(
    gts: &[GtBox],
    dets: &[Detection],
    iou_threshold: f64,
    too_small: impl Fn(&BoundingBox) -> bool,
) -> FrameMatch {
    let mut claimed = vec![false; gts.len()];
    let mut outcomes = Vec::with_capacity(dets.len());

    let best = |det: &BoundingBox, kind: GtKind, claimed: &[bool]| -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if gt.kind != kind || claimed[g] {
                continue;
            }
            let iou = gt.bbox.iou(det);
            if iou >= iou_threshold && iou > 0.0 && best.is_none_or(|(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        best.map(|(g, _)| g)
    };

    for det in dets {
        let outcome = if let Some(g) = best(&det.bbox, GtKind::Care, &claimed) {
            claimed[g] = true;
            DetOutcome::TruePositive { gt: g }
        } else if let Some(g) = best(&det.bbox, GtKind::Ignore, &claimed) {
            claimed[g] = true;
            DetOutcome::Ignored { gt: Some(g) }
        } else if in_dont_care(gts, &det.bbox) || too_small(&det.bbox) {
            DetOutcome::Ignored { gt: None }
        } else {
            DetOutcome::FalsePositive
        };
        outcomes.push(outcome);
    }

    let missed = gts
        .iter()
        .enumerate()
        .filter(|(g, gt)| gt.kind == GtKind::Care && !claimed[*g])
        .map(|(g, _)| g)
        .collect();
    FrameMatch { outcomes, missed }
}

fn in_dont_care(gts: &[GtBox], det: &BoundingBox) -> bool {
    let area = det.area();
    if area <= 0.0 {
        return false;
    }
    gts.iter()
        .filter(|g| g.kind == GtKind::DontCareRegion)
        .any(|g| g.bbox.intersection_area(det) / area >= DONT_CARE_OVERLAP)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::ClassId;
    use proptest::prelude::*;

    fn det(score: f64, x1: f64, y1: f64, x2: f64, y2: f64) -> Detection {
        Detection::new(0, ClassId(0), score, BoundingBox::new(x1, y1, x2, y2))
    }

    fn never_small(_: &BoundingBox) -> bool {
        false
    }

    #[test]
    fn single_exact_hit() {
        let gts = [GtBox::care(BoundingBox::new(0.0, 0.0, 10.0, 10.0))];
        let m = match_frame(&gts, &[det(0.9, 0.0, 0.0, 10.0, 10.0)], 0.7, never_small);
        assert_eq!(m.outcomes, vec![DetOutcome::TruePositive { gt: 0 }]);
        assert!(m.missed.is_empty());
    }

    #[test]
    fn second_detection_on_same_object_is_false_positive() {
        let gts = [GtBox::care(BoundingBox::new(0.0, 0.0, 10.0, 10.0))];
        let dets = [
            det(0.9, 0.0, 0.0, 10.0, 10.0),
            det(0.8, 0.5, 0.0, 10.5, 10.0),
        ];
        let m = match_frame(&gts, &dets, 0.5, never_small);
        assert_eq!(
            m.outcomes,
            vec![
                DetOutcome::TruePositive { gt: 0 },
                DetOutcome::FalsePositive
            ]
        );
    }

    #[test]
    fn ignore_and_dont_care() {
        let gts = [
            GtBox {
                bbox: BoundingBox::new(0.0, 0.0, 10.0, 10.0),
                kind: GtKind::Ignore,
            },
            GtBox {
                bbox: BoundingBox::new(100.0, 0.0, 200.0, 100.0),
                kind: GtKind::DontCareRegion,
            },
        ];
        let dets = [
            det(0.9, 0.0, 0.0, 10.0, 10.0),
            det(0.8, 120.0, 10.0, 140.0, 30.0),
            det(0.7, 300.0, 0.0, 310.0, 10.0),
        ];
        let m = match_frame(&gts, &dets, 0.5, never_small);
        assert_eq!(
            m.outcomes,
            vec![
                DetOutcome::Ignored { gt: Some(0) },
                DetOutcome::Ignored { gt: None },
                DetOutcome::FalsePositive
            ]
        );
        assert!(m.missed.is_empty());
        assert_eq!(m.claimant(0), Some(0));
    }

    #[test]
    fn small_unmatched_detections_are_ignored() {
        let m = match_frame(&[], &[det(0.5, 0.0, 0.0, 5.0, 5.0)], 0.5, |b| {
            b.height() < 25.0
        });
        assert_eq!(m.outcomes, vec![DetOutcome::Ignored { gt: None }]);
    }

    /// Independent restatement: walk detections in order, scan all boxes of
    /// a kind for the best admissible unclaimed one.
    fn oracle_tp_count(gts: &[BoundingBox], dets: &[Detection], thr: f64) -> usize {
        let mut taken = vec![false; gts.len()];
        let mut tp = 0;
        for d in dets {
            let mut pick: Option<usize> = None;
            for g in 0..gts.len() {
                let iou = gts[g].iou(&d.bbox);
                if taken[g] || iou < thr || iou == 0.0 {
                    continue;
                }
                if pick.is_none_or(|p| iou > gts[p].iou(&d.bbox)) {
                    pick = Some(g);
                }
            }
            if let Some(g) = pick {
                taken[g] = true;
                tp += 1;
            }
        }
        tp
    }

    fn arb_box() -> impl Strategy<Value = BoundingBox> {
        (0.0f64..40.0, 0.0f64..40.0, 5.0f64..20.0, 5.0f64..20.0)
            .prop_map(|(x, y, w, h)| BoundingBox::new(x, y, x + w, y + h))
    }

    proptest! {
        #[test]
        fn tp_count_matches_oracle(
            gts in prop::collection::vec(arb_box(), 0..=5),
            boxes in prop::collection::vec((arb_box(), 0.0f64..1.0), 0..=5),
            thr in 0.1f64..0.8,
        ) {
            let mut dets: Vec<Detection> = boxes.iter().map(|(b, s)| Detection::new(0, ClassId(0), *s, *b)).collect();
            dets.sort_by(Detection::canonical_cmp);
            let care: Vec<GtBox> = gts.iter().map(|b| GtBox::care(*b)).collect();
            let m = match_frame(&care, &dets, thr, never_small);
            let tp = m.true_positives().count();
            prop_assert_eq!(tp, oracle_tp_count(&gts, &dets, thr));
            prop_assert_eq!(tp + m.missed.len(), gts.len());
            prop_assert_eq!(tp + m.false_positives().count(), dets.len());
            let mut seen = std::collections::BTreeSet::new();
            for (_, g) in m.true_positives() {
                prop_assert!(seen.insert(g));
            }
        }
    }
}
