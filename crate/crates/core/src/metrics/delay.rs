use serde::Serialize;

use super::ap::precision_at;
use super::EvalError;
use crate::classes::ClassId;

/// Detection history of one counted ground-truth track.
///
/// `records` holds the prefix maxima of claimant scores over the track's
/// frames from entry on: `(score, frames since entry)`, both increasing. At
/// threshold `t` the object is first detected at the first record whose
/// score is `>= t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackDelay {
    pub sequence: usize,
    pub track_id: i64,
    pub entry_frame: u32,
    /// Frames from entry to the last labelled frame, inclusive.
    pub span: u32,
    pub records: Vec<(f64, u32)>,
}

impl TrackDelay {
    /// Builds the record list from `(frame, claimant score)` pairs in frame
    /// order, all at or after `entry_frame`.
    pub fn from_claims(
        sequence: usize,
        track_id: i64,
        entry_frame: u32,
        last_frame: u32,
        claims: impl IntoIterator<Item = (u32, f64)>,
    ) -> Self {
        let mut records: Vec<(f64, u32)> = Vec::new();
        for (frame, score) in claims {
            if frame < entry_frame {
                continue;
            }
            if records.last().is_none_or(|r| score > r.0) {
                records.push((score, frame - entry_frame));
            }
        }
        Self {
            sequence,
            track_id,
            entry_frame,
            span: last_frame - entry_frame + 1,
            records,
        }
    }

    /// Frames until first detection at threshold `t`; `None` if never.
    pub fn first_detection(&self, t: f64) -> Option<u32> {
        self.records.iter().find(|r| r.0 >= t).map(|r| r.1)
    }

    /// Delay at threshold `t`. Objects never detected are charged their
    /// whole labelled span.
    pub fn delay_at(&self, t: f64) -> u32 {
        self.first_detection(t).unwrap_or(self.span)
    }
}

/// Everything needed to score one class at any threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassEvaluation {
    pub class_id: ClassId,
    pub name: String,
    /// `(score, is_true_positive)` of non-ignored detections, score
    /// descending.
    pub scored: Vec<(f64, bool)>,
    /// Number of qualifying ground-truth boxes.
    pub n_care: usize,
    /// Tracks with at least one qualifying frame.
    pub tracks: Vec<TrackDelay>,
}

impl ClassEvaluation {
    pub fn precision_at(&self, t: f64) -> f64 {
        precision_at(&self.scored, t).2
    }

    pub fn recall_at(&self, t: f64) -> f64 {
        if self.n_care == 0 {
            return 0.0;
        }
        precision_at(&self.scored, t).0 as f64 / self.n_care as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassDelay {
    pub class_id: ClassId,
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    /// True and false positives at the threshold, and the qualifying ground
    /// truth count: `precision = tp / (tp + fp)`, `recall = tp / n_gt`.
    pub tp: usize,
    pub fp: usize,
    pub n_gt: usize,
    pub mean_delay: f64,
    /// Sum of per-track delays: `mean_delay = total_delay / counted_tracks`.
    pub total_delay: u64,
    pub counted_tracks: usize,
    pub never_detected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayReport {
    pub beta: f64,
    pub t_beta: f64,
    /// Mean class precision actually reached at `t_beta`.
    pub mean_precision: f64,
    pub classes: Vec<ClassDelay>,
    /// Unweighted mean of the per-class delays.
    pub mean_delay: f64,
}

impl DelayReport {
    pub fn never_detected(&self) -> usize {
        self.classes.iter().map(|c| c.never_detected).sum()
    }
}

/// Mean delay of one class with detections scoring `>= t`.
pub fn delay_per_class(class: &ClassEvaluation, t: f64) -> ClassDelay {
    let counted = class.tracks.len();
    let total: u64 = class
        .tracks
        .iter()
        .map(|tr| u64::from(tr.delay_at(t)))
        .sum();
    let never = class
        .tracks
        .iter()
        .filter(|tr| tr.first_detection(t).is_none())
        .count();
    let (tp, fp, precision) = precision_at(&class.scored, t);
    ClassDelay {
        class_id: class.class_id,
        name: class.name.clone(),
        precision,
        recall: class.recall_at(t),
        tp,
        fp,
        n_gt: class.n_care,
        mean_delay: if counted == 0 {
            0.0
        } else {
            total as f64 / counted as f64
        },
        total_delay: total,
        counted_tracks: counted,
        never_detected: never,
    }
}

fn delay_classes(classes: &[ClassEvaluation]) -> Vec<&ClassEvaluation> {
    classes.iter().filter(|c| !c.tracks.is_empty()).collect()
}

fn mean_precision(classes: &[&ClassEvaluation], t: f64) -> f64 {
    classes.iter().map(|c| c.precision_at(t)).sum::<f64>() / classes.len() as f64
}

/// Smallest detection score `t` at which the mean precision over the
/// classes that have counted tracks is `>= beta`. Returns `(t, precision)`.
pub fn find_t_beta(classes: &[ClassEvaluation], beta: f64) -> Result<(f64, f64), EvalError> {
    let active = delay_classes(classes);
    if active.is_empty() {
        return Err(EvalError::NoTracks);
    }
    let mut candidates: Vec<f64> = active
        .iter()
        .flat_map(|c| c.scored.iter().map(|s| s.0))
        .collect();
    if candidates.is_empty() {
        // Nothing detected anywhere: every class is vacuously precise.
        return Ok((0.0, 1.0));
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let mut best = f64::NEG_INFINITY;
    for &t in &candidates {
        let p = mean_precision(&active, t);
        if p >= beta {
            return Ok((t, p));
        }
        best = best.max(p);
    }
    Err(EvalError::BetaUnreachable {
        beta,
        max_precision: best,
    })
}

/// Class-mean delay at the shared threshold `t_beta`.
pub fn mean_delay(classes: &[ClassEvaluation], beta: f64) -> Result<DelayReport, EvalError> {
    let (t_beta, precision) = find_t_beta(classes, beta)?;
    let per_class: Vec<ClassDelay> = delay_classes(classes)
        .into_iter()
        .map(|c| delay_per_class(c, t_beta))
        .collect();
    let mean = per_class.iter().map(|c| c.mean_delay).sum::<f64>() / per_class.len() as f64;
    Ok(DelayReport {
        beta,
        t_beta,
        mean_precision: precision,
        classes: per_class,
        mean_delay: mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn class(scored: Vec<(f64, bool)>, tracks: Vec<TrackDelay>) -> ClassEvaluation {
        let mut scored = scored;
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        ClassEvaluation {
            class_id: ClassId(0),
            name: "Car".into(),
            n_care: tracks.len(),
            scored,
            tracks,
        }
    }

    #[test]
    fn records_keep_prefix_maxima() {
        let t = TrackDelay::from_claims(
            0,
            1,
            10,
            14,
            [(9, 0.99), (10, 0.3), (11, 0.2), (12, 0.8), (13, 0.5)],
        );
        assert_eq!(t.records, vec![(0.3, 0), (0.8, 2)]);
        assert_eq!(t.span, 5);
        assert_eq!(t.delay_at(0.1), 0);
        assert_eq!(t.delay_at(0.5), 2);
        assert_eq!(t.delay_at(0.9), 5);
        assert_eq!(t.first_detection(0.9), None);
    }

    #[test]
    fn detected_at_entry_has_zero_delay() {
        let t = TrackDelay::from_claims(0, 1, 0, 4, [(0, 0.6)]);
        let c = class(vec![(0.6, true)], vec![t]);
        assert_eq!(delay_per_class(&c, 0.0).mean_delay, 0.0);
    }

    #[test]
    fn never_detected_costs_full_span() {
        let t = TrackDelay::from_claims(0, 1, 0, 4, std::iter::empty());
        let c = class(vec![], vec![t]);
        let d = delay_per_class(&c, 0.0);
        assert_eq!(d.mean_delay, 5.0);
        assert_eq!(d.never_detected, 1);
    }

    #[test]
    fn all_true_positives_pick_lowest_score() {
        let tracks = vec![TrackDelay::from_claims(0, 1, 0, 2, [(0, 0.2)])];
        let c = class(vec![(0.9, true), (0.5, true), (0.2, true)], tracks);
        let (t, p) = find_t_beta(&[c], 0.8).unwrap();
        assert_eq!((t, p), (0.2, 1.0));
    }

    #[test]
    fn unreachable_beta_reports_best() {
        let tracks = vec![TrackDelay::from_claims(0, 1, 0, 2, [(0, 0.2)])];
        let c = class(vec![(0.9, false), (0.5, true)], tracks);
        match find_t_beta(&[c], 0.8) {
            Err(EvalError::BetaUnreachable { max_precision, .. }) => assert_eq!(max_precision, 0.5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn class_mean_is_unweighted() {
        let mk = |id: u16, delays: &[u32]| {
            let tracks = delays
                .iter()
                .enumerate()
                .map(|(i, &d)| TrackDelay::from_claims(0, i as i64, 0, 20, [(d, 0.9)]))
                .collect();
            ClassEvaluation {
                class_id: ClassId(id),
                name: format!("c{id}"),
                scored: vec![(0.9, true)],
                n_care: delays.len(),
                tracks,
            }
        };
        // 2.6 over five tracks, 4.0 over two
        let a = mk(0, &[1, 2, 3, 3, 4]);
        let b = mk(1, &[3, 5]);
        let report = mean_delay(&[a, b], 0.8).unwrap();
        assert!((report.classes[0].mean_delay - 2.6).abs() < 1e-12);
        assert!((report.classes[1].mean_delay - 4.0).abs() < 1e-12);
        assert!((report.mean_delay - 3.3).abs() < 1e-12);
    }
}
