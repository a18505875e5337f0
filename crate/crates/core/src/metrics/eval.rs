use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ap::{average_precision, pr_curve, RecallPoints};
use super::delay::{delay_per_class, mean_delay, ClassEvaluation, DelayReport, TrackDelay};
use super::difficulty::DifficultyFilter;
use super::matching::{match_frame, DetOutcome, GtBox, GtKind};
use super::{EvalError, SequenceGroundTruth};
use crate::classes::{ClassId, ClassMap};
use crate::geometry::{sort_canonical, Detection};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Evaluated classes and their minimum match IoU.
    pub class_iou: BTreeMap<String, f64>,
    /// Labels of these classes are "ignore" boxes for the keyed class.
    pub neighbor_classes: BTreeMap<String, Vec<String>>,
    pub ap_recall_points: RecallPoints,
    /// Target mean precision for the delay operating point.
    pub beta: f64,
    /// Preset names: easy, moderate, hard, all.
    pub difficulties: Vec<String>,
    pub custom_difficulties: Vec<DifficultyFilter>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            class_iou: BTreeMap::from([("Car".to_string(), 0.7), ("Pedestrian".to_string(), 0.5)]),
            neighbor_classes: BTreeMap::from([
                ("Car".to_string(), vec!["Van".to_string()]),
                ("Pedestrian".to_string(), vec!["Person_sitting".to_string()]),
            ]),
            ap_recall_points: RecallPoints::Sampled(11),
            beta: 0.8,
            difficulties: vec!["moderate".to_string(), "hard".to_string()],
            custom_difficulties: Vec::new(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.class_iou.is_empty() {
            return Err(EvalError::InvalidConfig("no evaluated classes".into()));
        }
        for (class, iou) in &self.class_iou {
            if !(*iou > 0.0 && *iou <= 1.0) {
                return Err(EvalError::InvalidConfig(format!(
                    "match IoU for {class} must lie in (0, 1], got {iou}"
                )));
            }
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(EvalError::InvalidConfig(format!(
                "beta must lie in (0, 1), got {}",
                self.beta
            )));
        }
        Ok(())
    }

    pub fn filters(&self) -> Result<Vec<DifficultyFilter>, EvalError> {
        let mut out: Vec<DifficultyFilter> = self
            .difficulties
            .iter()
            .map(|n| {
                DifficultyFilter::by_name(n).ok_or_else(|| EvalError::UnknownDifficulty(n.clone()))
            })
            .collect::<Result<_, _>>()?;
        out.extend(self.custom_difficulties.iter().cloned());
        if out.is_empty() {
            out.push(DifficultyFilter::all());
        }
        Ok(out)
    }

    /// Evaluated classes in class-map order with their match IoU.
    pub fn resolve_classes(
        &self,
        classes: &ClassMap,
    ) -> Result<Vec<(ClassId, String, f64)>, EvalError> {
        let mut out = Vec::new();
        for (name, &iou) in &self.class_iou {
            let id = classes
                .id(name)
                .ok_or_else(|| EvalError::UnknownClass(name.clone()))?;
            let canonical = classes.name(id).unwrap_or(name).to_string();
            out.push((id, canonical, iou));
        }
        out.sort_by_key(|c| c.0);
        Ok(out)
    }
}

/// Ground truth plus the detections produced for one sequence.
#[derive(Debug, Clone, Default)]
pub struct EvalSequence {
    pub ground_truth: SequenceGroundTruth,
    pub detections: Vec<Detection>,
}

/// Matches one class over every sequence under one difficulty filter.
pub fn build_class_evaluation(
    sequences: &[EvalSequence],
    class_id: ClassId,
    name: &str,
    iou_threshold: f64,
    neighbors: &BTreeSet<ClassId>,
    filter: &DifficultyFilter,
) -> ClassEvaluation {
    let mut scored: Vec<(f64, bool)> = Vec::new();
    let mut n_care = 0usize;
    let mut tracks: Vec<TrackDelay> = Vec::new();

    for (seq_index, seq) in sequences.iter().enumerate() {
        let gt = &seq.ground_truth;
        let in_scope = |f: u32| gt.labeled_frames.as_ref().is_none_or(|l| l.contains(&f));

        // (track, observation) per frame for the class and its neighbours.
        let mut per_frame: BTreeMap<u32, Vec<(usize, usize)>> = BTreeMap::new();
        for (t, track) in gt.tracks.iter().enumerate() {
            let Some(cid) = track.class_id else { continue };
            if cid != class_id && !neighbors.contains(&cid) {
                continue;
            }
            for (o, obs) in track.frames.iter().enumerate() {
                if in_scope(obs.frame_index) {
                    per_frame.entry(obs.frame_index).or_default().push((t, o));
                }
            }
        }
        let mut dets_by_frame: BTreeMap<u32, Vec<Detection>> = BTreeMap::new();
        for d in seq.detections.iter().filter(|d| d.class_id == class_id) {
            if in_scope(d.frame_index) {
                dets_by_frame.entry(d.frame_index).or_default().push(*d);
            }
        }
        let frames: BTreeSet<u32> = per_frame
            .keys()
            .chain(dets_by_frame.keys())
            .copied()
            .collect();

        // claims[track][obs] = claimant score
        let mut claims: Vec<Vec<Option<f64>>> = gt
            .tracks
            .iter()
            .map(|t| vec![None; t.frames.len()])
            .collect();

        for frame in frames {
            let refs = per_frame.get(&frame).map(Vec::as_slice).unwrap_or(&[]);
            let mut boxes: Vec<GtBox> = refs
                .iter()
                .map(|&(t, o)| {
                    let track = &gt.tracks[t];
                    let obs = &track.frames[o];
                    let care = track.class_id == Some(class_id)
                        && filter.qualifies(&obs.bbox, obs.occluded, obs.truncated);
                    GtBox {
                        bbox: obs.bbox,
                        kind: if care { GtKind::Care } else { GtKind::Ignore },
                    }
                })
                .collect();
            if let Some(regions) = gt.dont_care.get(&frame) {
                boxes.extend(regions.iter().map(|&bbox| GtBox {
                    bbox,
                    kind: GtKind::DontCareRegion,
                }));
            }
            n_care += boxes.iter().filter(|b| b.kind == GtKind::Care).count();

            let mut dets = dets_by_frame.remove(&frame).unwrap_or_default();
            sort_canonical(&mut dets);
            let m = match_frame(&boxes, &dets, iou_threshold, |b| {
                filter.detection_too_small(b)
            });
            for (d, outcome) in m.outcomes.iter().enumerate() {
                match outcome {
                    DetOutcome::TruePositive { gt: g } | DetOutcome::Ignored { gt: Some(g) } => {
                        if *g < refs.len() {
                            let (t, o) = refs[*g];
                            claims[t][o] = Some(dets[d].score);
                        }
                        if matches!(outcome, DetOutcome::TruePositive { .. }) {
                            scored.push((dets[d].score, true));
                        }
                    }
                    DetOutcome::FalsePositive => scored.push((dets[d].score, false)),
                    DetOutcome::Ignored { gt: None } => {}
                }
            }
        }

        for (t, track) in gt.tracks.iter().enumerate() {
            if track.class_id != Some(class_id) {
                continue;
            }
            let entry = track
                .frames
                .iter()
                .filter(|o| in_scope(o.frame_index))
                .find(|o| filter.qualifies(&o.bbox, o.occluded, o.truncated))
                .map(|o| o.frame_index);
            let (Some(entry), Some(last)) = (entry, track.frames.last()) else {
                continue;
            };
            let track_claims = track
                .frames
                .iter()
                .zip(&claims[t])
                .filter_map(|(o, c)| c.map(|score| (o.frame_index, score)));
            tracks.push(TrackDelay::from_claims(
                seq_index,
                track.track_id,
                entry,
                last.frame_index,
                track_claims,
            ));
        }
    }

    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.cmp(&a.1)));
    ClassEvaluation {
        class_id,
        name: name.to_string(),
        scored,
        n_care,
        tracks,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassAp {
    pub class_id: ClassId,
    pub name: String,
    /// `None` when the class has no qualifying ground truth.
    pub ap: Option<f64>,
    pub n_gt: usize,
    pub tp: usize,
    pub fp: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub precision: f64,
    pub recall: f64,
    /// Mean delay of the class at this threshold; `None` without tracks.
    pub delay: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassCurve {
    pub class_id: ClassId,
    pub name: String,
    /// One row per distinct detection score, threshold ascending.
    pub rows: Vec<CurveRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum DelayOutcome {
    Report(DelayReport),
    Refused { reason: String },
}

impl DelayOutcome {
    pub fn report(&self) -> Option<&DelayReport> {
        match self {
            Self::Report(r) => Some(r),
            Self::Refused { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifficultyReport {
    pub difficulty: String,
    pub classes: Vec<ClassAp>,
    /// Mean over classes whose AP is defined.
    pub map: Option<f64>,
    pub delay: DelayOutcome,
    pub curves: Vec<ClassCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub beta: f64,
    pub ap_recall_points: String,
    pub difficulties: Vec<DifficultyReport>,
}

impl EvalReport {
    pub fn any_delay_refused(&self) -> bool {
        self.difficulties
            .iter()
            .any(|d| matches!(d.delay, DelayOutcome::Refused { .. }))
    }
}

/// Full evaluation: AP, mAP and mean delay for every configured difficulty.
pub fn evaluate(
    sequences: &[EvalSequence],
    classes: &ClassMap,
    cfg: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    cfg.validate()?;
    for seq in sequences {
        for track in &seq.ground_truth.tracks {
            track.validate()?;
        }
    }
    let evaluated = cfg.resolve_classes(classes)?;
    let filters = cfg.filters()?;
    let sparse = sequences.iter().any(|s| s.ground_truth.is_sparse());

    let mut difficulties = Vec::with_capacity(filters.len());
    for filter in &filters {
        let per_class: Vec<ClassEvaluation> = evaluated
            .iter()
            .map(|(id, name, iou)| {
                let neighbors: BTreeSet<ClassId> = cfg
                    .neighbor_classes
                    .get(name)
                    .into_iter()
                    .flatten()
                    .filter_map(|n| classes.id(n))
                    .collect();
                build_class_evaluation(sequences, *id, name, *iou, &neighbors, filter)
            })
            .collect();

        let aps: Vec<ClassAp> = per_class
            .iter()
            .map(|c| {
                let tp = c.scored.iter().filter(|s| s.1).count();
                ClassAp {
                    class_id: c.class_id,
                    name: c.name.clone(),
                    ap: average_precision(&c.scored, c.n_care, cfg.ap_recall_points),
                    n_gt: c.n_care,
                    tp,
                    fp: c.scored.len() - tp,
                }
            })
            .collect();
        let defined: Vec<f64> = aps.iter().filter_map(|a| a.ap).collect();
        let map = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);

        let delay = if sparse {
            DelayOutcome::Refused {
                reason: EvalError::SparseAnnotation.to_string(),
            }
        } else {
            match mean_delay(&per_class, cfg.beta) {
                Ok(r) => DelayOutcome::Report(r),
                Err(e) => DelayOutcome::Refused {
                    reason: e.to_string(),
                },
            }
        };

        let curves = per_class.iter().map(|c| class_curve(c, !sparse)).collect();
        difficulties.push(DifficultyReport {
            difficulty: filter.name.clone(),
            classes: aps,
            map,
            delay,
            curves,
        });
    }

    Ok(EvalReport {
        beta: cfg.beta,
        ap_recall_points: cfg.ap_recall_points.to_string(),
        difficulties,
    })
}

fn class_curve(class: &ClassEvaluation, with_delay: bool) -> ClassCurve {
    let mut rows: Vec<CurveRow> = pr_curve(&class.scored, class.n_care)
        .into_iter()
        .map(|p| CurveRow {
            threshold: p.threshold,
            tp: p.tp,
            fp: p.fp,
            precision: p.precision,
            recall: p.recall,
            delay: (with_delay && !class.tracks.is_empty())
                .then(|| delay_per_class(class, p.threshold).mean_delay),
        })
        .collect();
    rows.reverse();
    ClassCurve {
        class_id: class.class_id,
        name: class.name.clone(),
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundingBox;
    use crate::metrics::{GroundTruthTrack, GtObservation, Occlusion};

    fn obs(frame: u32, x: f64) -> GtObservation {
        GtObservation {
            frame_index: frame,
            bbox: BoundingBox::new(x, 100.0, x + 60.0, 150.0),
            truncated: 0.0,
            occluded: Occlusion::FullyVisible,
        }
    }

    fn one_track_sequence(frames: u32) -> SequenceGroundTruth {
        SequenceGroundTruth {
            tracks: vec![GroundTruthTrack {
                track_id: 0,
                class_name: "Car".into(),
                class_id: Some(ClassId(0)),
                frames: (0..frames)
                    .map(|f| obs(f, 100.0 + 5.0 * f as f64))
                    .collect(),
            }],
            ..Default::default()
        }
    }

    fn car_only() -> EvalConfig {
        EvalConfig {
            class_iou: BTreeMap::from([("Car".to_string(), 0.7)]),
            difficulties: vec!["all".into()],
            ..EvalConfig::default()
        }
    }

    #[test]
    fn perfect_detections() {
        let gt = one_track_sequence(6);
        let dets = gt.tracks[0]
            .frames
            .iter()
            .map(|o| Detection::new(o.frame_index, ClassId(0), 0.9, o.bbox))
            .collect();
        let seq = EvalSequence {
            ground_truth: gt,
            detections: dets,
        };
        let report = evaluate(&[seq], &ClassMap::kitti(), &car_only()).unwrap();
        let d = &report.difficulties[0];
        assert_eq!(d.map, Some(1.0));
        assert_eq!(d.delay.report().unwrap().mean_delay, 0.0);
    }

    #[test]
    fn sparse_annotation_refuses_delay() {
        let mut gt = one_track_sequence(6);
        gt.labeled_frames = Some(BTreeSet::from([3]));
        let dets = vec![Detection::new(3, ClassId(0), 0.9, obs(3, 115.0).bbox)];
        let seq = EvalSequence {
            ground_truth: gt,
            detections: dets,
        };
        let report = evaluate(&[seq], &ClassMap::kitti(), &car_only()).unwrap();
        let d = &report.difficulties[0];
        assert_eq!(d.classes[0].n_gt, 1);
        assert_eq!(d.map, Some(1.0));
        assert!(report.any_delay_refused());
    }

    #[test]
    fn neighbour_class_detections_are_not_false_positives() {
        let mut gt = one_track_sequence(1);
        gt.tracks.push(GroundTruthTrack {
            track_id: 1,
            class_name: "Van".into(),
            class_id: Some(ClassId(1)),
            frames: vec![obs(0, 400.0)],
        });
        let dets = vec![
            Detection::new(0, ClassId(0), 0.9, obs(0, 100.0).bbox),
            Detection::new(0, ClassId(0), 0.8, obs(0, 400.0).bbox),
        ];
        let seq = EvalSequence {
            ground_truth: gt,
            detections: dets,
        };
        let report = evaluate(&[seq], &ClassMap::kitti(), &car_only()).unwrap();
        let c = &report.difficulties[0].classes[0];
        assert_eq!((c.tp, c.fp, c.n_gt), (1, 0, 1));
    }

    #[test]
    fn curve_rows_ascend() {
        let gt = one_track_sequence(4);
        let dets = gt.tracks[0]
            .frames
            .iter()
            .enumerate()
            .map(|(i, o)| Detection::new(o.frame_index, ClassId(0), 0.2 + 0.2 * i as f64, o.bbox))
            .collect();
        let seq = EvalSequence {
            ground_truth: gt,
            detections: dets,
        };
        let report = evaluate(&[seq], &ClassMap::kitti(), &car_only()).unwrap();
        let rows = &report.difficulties[0].curves[0].rows;
        assert_eq!(rows.len(), 4);
        assert!(rows.windows(2).all(|w| w[0].threshold < w[1].threshold));
        // raising the threshold pushes the first hit later
        assert_eq!(rows[0].delay, Some(0.0));
        assert_eq!(rows[3].delay, Some(3.0));
    }

    #[test]
    fn unknown_evaluated_class() {
        let cfg = EvalConfig {
            class_iou: BTreeMap::from([("Bus".to_string(), 0.5)]),
            ..EvalConfig::default()
        };
        assert_eq!(
            evaluate(&[], &ClassMap::kitti(), &cfg).unwrap_err(),
            EvalError::UnknownClass("Bus".into())
        );
    }
}
