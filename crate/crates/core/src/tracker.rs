//! Lightweight multi-object tracker that turns the current frame's
//! detections into next-frame regions of interest.
//!
//! Each object is a centre/width state `[x, y, s]` plus a per-frame motion
//! vector and an aspect ratio `r = height / width`. On a match the motion is
//! smoothed with an exponential decay,
//!
//! ```text
//! motion <- eta * motion + (1 - eta) * (observed - position)
//! ```
//!
//! and the next-frame box is `position + motion` with the aspect ratio held.
//! Unmatched tracks keep coasting on their frozen motion while a bounded
//! confidence counter drains; they are dropped once it goes negative.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::associate;
use crate::classes::{ClassId, ClassMap};
use crate::geometry::{BoundingBox, Detection};

/// Score attached to tracker predictions so they always clear downstream
/// score thresholds.
pub const PREDICTION_SCORE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// Association cut-off: pairs with IoU at or below it never match.
    pub iou_threshold_beta: f64,
    /// Motion smoothing coefficient, in `[0, 1]`.
    pub decay_eta: f64,
    /// Predictions narrower than this (pixels) are not emitted.
    pub min_width: f64,
    /// Predictions with more than this fraction of their area outside the
    /// frame are not emitted.
    pub boundary_chop_fraction: f64,
    pub confidence_cap: i32,
    pub match_gain: i32,
    pub miss_cost: i32,
    /// Detections scoring below this never reach the tracker.
    pub input_score_threshold: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            iou_threshold_beta: 0.0,
            decay_eta: 0.7,
            min_width: 10.0,
            boundary_chop_fraction: 0.5,
            confidence_cap: 3,
            match_gain: 1,
            miss_cost: 1,
            input_score_threshold: 0.0,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), TrackerError> {
        let bad = |what: &str| Err(TrackerError::InvalidConfig(what.to_string()));
        if !(0.0..=1.0).contains(&self.decay_eta) {
            return bad("decay_eta must lie in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.iou_threshold_beta) {
            return bad("iou_threshold_beta must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.boundary_chop_fraction) {
            return bad("boundary_chop_fraction must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.input_score_threshold) {
            return bad("input_score_threshold must lie in [0, 1]");
        }
        if self.min_width < 0.0 {
            return bad("min_width must be non-negative");
        }
        if self.confidence_cap < 0 || self.match_gain < 0 || self.miss_cost <= 0 {
            return bad("confidence_cap and match_gain must be >= 0 and miss_cost > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackerError {
    #[error("detection in frame {frame} has unknown class id {class_id}")]
    UnknownClass { frame: u32, class_id: ClassId },
    #[error("invalid tracker config: {0}")]
    InvalidConfig(String),
}

/// Kinematic state of one tracked object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackState {
    pub track_id: u64,
    pub class_id: ClassId,
    /// `[centre x, centre y, width]`.
    pub position: [f64; 3],
    /// Per-frame deltas of `position`.
    pub motion: [f64; 3],
    /// Height over width.
    pub aspect: f64,
    pub confidence: i32,
    /// Consecutive unmatched frames.
    pub misses: u32,
}

impl TrackState {
    /// Fresh track at rest on `bbox`.
    pub fn from_box(track_id: u64, class_id: ClassId, bbox: &BoundingBox, confidence: i32) -> Self {
        Self {
            track_id,
            class_id,
            position: box_to_state(bbox).0,
            motion: [0.0; 3],
            aspect: box_to_state(bbox).1,
            confidence,
            misses: 0,
        }
    }

    pub fn current_box(&self) -> BoundingBox {
        state_to_box(self.position, self.aspect)
    }
}

/// `([cx, cy, width], height / width)` of a box. Zero-width boxes get an
/// aspect of 1 so the state stays finite.
pub fn box_to_state(bbox: &BoundingBox) -> ([f64; 3], f64) {
    let (cx, cy) = bbox.center();
    let w = bbox.width();
    let aspect = if w > 0.0 { bbox.height() / w } else { 1.0 };
    ([cx, cy, w], aspect)
}

pub fn state_to_box(position: [f64; 3], aspect: f64) -> BoundingBox {
    let [cx, cy, s] = position;
    BoundingBox::from_center(cx, cy, s, aspect * s)
}

/// Exponential-decay motion update for a matched observation. Position and
/// aspect snap to the observation, confidence grows by `match_gain` up to
/// `confidence_cap`, and the miss counter resets.
pub fn update_motion(
    state: &TrackState,
    observed: [f64; 3],
    observed_aspect: f64,
    cfg: &TrackerConfig,
) -> TrackState {
    let eta = cfg.decay_eta;
    let mut next = *state;
    for ((m, obs), pos) in next.motion.iter_mut().zip(observed).zip(state.position) {
        *m = eta * *m + (1.0 - eta) * (obs - pos);
    }
    next.position = observed;
    next.aspect = observed_aspect;
    next.confidence = (state.confidence + cfg.match_gain).min(cfg.confidence_cap);
    next.misses = 0;
    next
}

/// Next-frame box: `position + motion`, same aspect ratio.
pub fn predict(state: &TrackState) -> BoundingBox {
    let mut p = state.position;
    for (x, m) in p.iter_mut().zip(state.motion) {
        *x += m;
    }
    state_to_box(p, state.aspect)
}

/// Per-sequence tracker. Owns the live track set for one video.
#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    classes: ClassMap,
    frame_w: f64,
    frame_h: f64,
    tracks: Vec<TrackState>,
    next_id: u64,
}

impl Tracker {
    pub fn new(
        cfg: TrackerConfig,
        classes: ClassMap,
        frame_w: f64,
        frame_h: f64,
    ) -> Result<Self, TrackerError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            classes,
            frame_w,
            frame_h,
            tracks: Vec::new(),
            next_id: 0,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    /// Live tracks ordered by track id.
    pub fn tracks(&self) -> &[TrackState] {
        &self.tracks
    }

    pub fn reset(&mut self) {
        self.tracks.clear();
        self.next_id = 0;
    }

    /// Consumes the detections of `frame_index` and returns the predicted
    /// boxes for `frame_index + 1`.
    ///
    /// Detections scoring below `input_score_threshold` are ignored. Per
    /// class, live tracks are associated with the remaining detections by
    /// their predicted boxes; matched tracks get a motion update, unmatched
    /// tracks coast and lose confidence, and unmatched detections start new
    /// tracks at rest. Every surviving track, including coasting ones, emits
    /// a prediction unless it is too narrow or mostly outside the frame.
    pub fn step(
        &mut self,
        frame_index: u32,
        detections: &[Detection],
    ) -> Result<Vec<Detection>, TrackerError> {
        if let Some(bad) = detections
            .iter()
            .find(|d| !self.classes.contains(d.class_id))
        {
            return Err(TrackerError::UnknownClass {
                frame: frame_index,
                class_id: bad.class_id,
            });
        }
        let accepted: Vec<&Detection> = detections
            .iter()
            .filter(|d| d.score >= self.cfg.input_score_threshold)
            .collect();

        let classes: BTreeSet<ClassId> = self
            .tracks
            .iter()
            .map(|t| t.class_id)
            .chain(accepted.iter().map(|d| d.class_id))
            .collect();

        let mut survivors: Vec<TrackState> = Vec::with_capacity(self.tracks.len());
        let mut born: Vec<(ClassId, BoundingBox)> = Vec::new();
        for class in classes {
            let class_tracks: Vec<&TrackState> =
                self.tracks.iter().filter(|t| t.class_id == class).collect();
            let class_dets: Vec<&Detection> = accepted
                .iter()
                .copied()
                .filter(|d| d.class_id == class)
                .collect();

            let predicted: Vec<BoundingBox> = class_tracks.iter().map(|t| predict(t)).collect();
            let det_boxes: Vec<BoundingBox> = class_dets.iter().map(|d| d.bbox).collect();
            let assoc = associate(&predicted, &det_boxes, self.cfg.iou_threshold_beta);

            for &(t, d) in &assoc.matches {
                let (observed, aspect) = box_to_state(&det_boxes[d]);
                survivors.push(update_motion(class_tracks[t], observed, aspect, &self.cfg));
            }
            for &t in &assoc.lost {
                if let Some(coasting) = self.coast(class_tracks[t]) {
                    survivors.push(coasting);
                }
            }
            born.extend(assoc.emerging.iter().map(|&d| (class, det_boxes[d])));
        }

        // New ids follow the class-then-geometry order of their detections.
        born.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.geometry_cmp(&b.1)));
        for (class, bbox) in born {
            let id = self.next_id;
            self.next_id += 1;
            survivors.push(TrackState::from_box(
                id,
                class,
                &bbox,
                self.cfg.match_gain.min(self.cfg.confidence_cap),
            ));
        }
        survivors.sort_by_key(|t| t.track_id);
        self.tracks = survivors;

        Ok(self.predictions(frame_index + 1))
    }

    /// Filtered predictions of every live track, labelled `frame_index`.
    pub fn predictions(&self, frame_index: u32) -> Vec<Detection> {
        self.tracks
            .iter()
            .filter_map(|t| {
                let bbox = predict(t);
                if bbox.width() < self.cfg.min_width {
                    return None;
                }
                if bbox.outside_fraction(self.frame_w, self.frame_h)
                    > self.cfg.boundary_chop_fraction
                {
                    return None;
                }
                Some(Detection::new(
                    frame_index,
                    t.class_id,
                    PREDICTION_SCORE,
                    bbox.clip(self.frame_w, self.frame_h),
                ))
            })
            .collect()
    }

    fn coast(&self, track: &TrackState) -> Option<TrackState> {
        let mut next = *track;
        next.confidence -= self.cfg.miss_cost;
        next.misses += 1;
        for k in 0..3 {
            next.position[k] += next.motion[k];
        }
        (next.confidence >= 0 && next.position[2] > 0.0).then_some(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> TrackerConfig {
        TrackerConfig::default()
    }

    fn tracker() -> Tracker {
        Tracker::new(cfg(), ClassMap::kitti(), 1242.0, 375.0).unwrap()
    }

    fn car(frame: u32, x1: f64, y1: f64, x2: f64, y2: f64) -> Detection {
        Detection::new(frame, ClassId(0), 0.9, BoundingBox::new(x1, y1, x2, y2))
    }

    fn state(position: [f64; 3], motion: [f64; 3], aspect: f64) -> TrackState {
        TrackState {
            track_id: 0,
            class_id: ClassId(0),
            position,
            motion,
            aspect,
            confidence: 1,
            misses: 0,
        }
    }

    #[test]
    fn stationary_update_keeps_zero_motion() {
        let s = state([10.0, 10.0, 20.0], [0.0; 3], 1.0);
        let next = update_motion(&s, [10.0, 10.0, 20.0], 1.0, &cfg());
        assert_eq!(next.motion, [0.0; 3]);
    }

    #[test]
    fn update_blends_displacement() {
        let s = state([0.0, 0.0, 10.0], [0.0; 3], 1.0);
        let next = update_motion(&s, [10.0, 0.0, 10.0], 1.0, &cfg());
        assert!((next.motion[0] - 3.0).abs() < 1e-12);
        assert_eq!(next.motion[1], 0.0);
        assert_eq!(next.position, [10.0, 0.0, 10.0]);
    }

    #[test]
    fn full_decay_retains_motion() {
        let c = TrackerConfig {
            decay_eta: 1.0,
            ..cfg()
        };
        let s = state([0.0, 0.0, 10.0], [1.0, -2.0, 0.5], 1.0);
        let next = update_motion(&s, [50.0, 7.0, 30.0], 1.0, &c);
        assert_eq!(next.motion, [1.0, -2.0, 0.5]);
    }

    #[test]
    fn confidence_is_capped() {
        let mut s = state([0.0, 0.0, 10.0], [0.0; 3], 1.0);
        for _ in 0..10 {
            s = update_motion(&s, s.position, 1.0, &cfg());
        }
        assert_eq!(s.confidence, cfg().confidence_cap);
    }

    #[test]
    fn prediction_arithmetic() {
        let s = state([100.0, 100.0, 20.0], [5.0, 0.0, 0.0], 2.0);
        assert_eq!(predict(&s), BoundingBox::new(95.0, 80.0, 115.0, 120.0));
        let still = state([100.0, 100.0, 20.0], [0.0; 3], 2.0);
        assert_eq!(predict(&still), still.current_box());
    }

    #[test]
    fn new_track_predicts_in_place() {
        let mut t = tracker();
        let preds = t.step(0, &[car(0, 100.0, 100.0, 150.0, 140.0)]).unwrap();
        assert_eq!(preds.len(), 1);
        assert_eq!(preds[0].bbox, BoundingBox::new(100.0, 100.0, 150.0, 140.0));
        assert_eq!(preds[0].frame_index, 1);
        assert_eq!(preds[0].score, PREDICTION_SCORE);
    }

    #[test]
    fn constant_velocity_motion_after_two_updates() {
        let mut t = tracker();
        let mut preds = Vec::new();
        for f in 0..3u32 {
            let x = 100.0 + 10.0 * f as f64;
            preds = t.step(f, &[car(f, x, 100.0, x + 40.0, 140.0)]).unwrap();
        }
        // m1 = 0.3 * 10 = 3, m2 = 0.7 * 3 + 0.3 * 10 = 5.1
        let offset = preds[0].bbox.x1 - 120.0;
        assert!((offset - 5.1).abs() < 1e-9, "offset {offset}");
    }

    #[test]
    fn narrow_tracks_are_not_emitted() {
        let mut t = tracker();
        let preds = t.step(0, &[car(0, 100.0, 100.0, 108.0, 130.0)]).unwrap();
        assert!(preds.is_empty());
        assert_eq!(t.tracks().len(), 1);
    }

    #[test]
    fn mostly_outside_predictions_are_dropped() {
        let mut t = tracker();
        // 40 px wide, moving 20 px per frame towards the right edge at 1242.
        let mut state = TrackState::from_box(
            0,
            ClassId(0),
            &BoundingBox::new(1180.0, 100.0, 1220.0, 140.0),
            3,
        );
        state.motion = [20.0, 0.0, 0.0];
        t.tracks = vec![state];
        // Prediction spans 1200..1240: fully inside.
        assert_eq!(t.predictions(1).len(), 1);
        // 1240..1280 would be 95% outside.
        t.tracks[0].position[0] += 40.0;
        assert!(t.predictions(1).is_empty());
        // 1225..1265 is 57.5% outside, still over the 50% cut.
        t.tracks[0].position[0] -= 15.0;
        assert!(t.predictions(1).is_empty());
        // 1210..1250 is 20% outside and gets clipped to the frame.
        t.tracks[0].position[0] -= 15.0;
        let preds = t.predictions(1);
        assert_eq!(preds[0].bbox.x2, 1242.0);
    }

    #[test]
    fn missed_track_coasts_then_dies() {
        let mut t = tracker();
        t.step(0, &[car(0, 100.0, 100.0, 140.0, 140.0)]).unwrap();
        t.step(1, &[car(1, 110.0, 100.0, 150.0, 140.0)]).unwrap();
        let motion = t.tracks()[0].motion;
        let conf = t.tracks()[0].confidence;
        assert_eq!(conf, 2);

        let p1 = t.step(2, &[]).unwrap();
        let p2 = t.step(3, &[]).unwrap();
        assert_eq!(t.tracks()[0].motion, motion);
        assert!((p2[0].bbox.x1 - p1[0].bbox.x1 - motion[0]).abs() < 1e-9);

        // confidence 2 with miss_cost 1 dies on the 3rd consecutive miss
        assert_eq!(t.tracks().len(), 1);
        t.step(4, &[]).unwrap();
        assert!(t.tracks().is_empty());
    }

    #[test]
    fn classes_are_associated_separately() {
        let mut t = tracker();
        t.step(0, &[car(0, 100.0, 100.0, 140.0, 140.0)]).unwrap();
        let ped = Detection::new(
            1,
            ClassId(3),
            0.9,
            BoundingBox::new(100.0, 100.0, 140.0, 140.0),
        );
        t.step(1, &[ped]).unwrap();
        assert_eq!(t.tracks().len(), 2);
        assert_eq!(t.tracks()[0].misses, 1);
    }

    #[test]
    fn unknown_class_is_rejected() {
        let mut t = Tracker::new(cfg(), ClassMap::new(["Car"]), 100.0, 100.0).unwrap();
        let err = t
            .step(
                4,
                &[Detection::new(
                    4,
                    ClassId(9),
                    0.9,
                    BoundingBox::new(0.0, 0.0, 5.0, 5.0),
                )],
            )
            .unwrap_err();
        assert_eq!(
            err,
            TrackerError::UnknownClass {
                frame: 4,
                class_id: ClassId(9)
            }
        );
    }

    #[test]
    fn low_scores_never_enter() {
        let c = TrackerConfig {
            input_score_threshold: 0.95,
            ..cfg()
        };
        let mut t = Tracker::new(c, ClassMap::kitti(), 1242.0, 375.0).unwrap();
        assert!(t
            .step(0, &[car(0, 0.0, 0.0, 50.0, 50.0)])
            .unwrap()
            .is_empty());
        assert!(t.tracks().is_empty());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let c = TrackerConfig {
            decay_eta: 1.5,
            ..cfg()
        };
        assert!(Tracker::new(c, ClassMap::kitti(), 10.0, 10.0).is_err());
    }
}
