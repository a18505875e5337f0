use std::ops::Range;

use serde::Serialize;

use super::{DetectorSource, FileBackedSource, Mode, PipelineConfig, PipelineError};
use crate::classes::ClassMap;
use crate::costmodel::{greedy_merge, refine_cost, regions_time, WorkReport};
use crate::geometry::{
    nms, nms_class_agnostic, sort_canonical, BoundingBox, Detection, RegionMask,
};
use crate::ingest::{DetectionStore, SequenceMeta};
use crate::tracker::Tracker;

/// Outcome of one frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameResult {
    pub frame_index: u32,
    /// NMS-clean, in canonical order.
    pub final_detections: Vec<Detection>,
    /// Region the refinement detector ran on: the union of the two masks
    /// below, or the whole frame in single mode.
    pub mask: RegionMask,
    pub tracker_mask: RegionMask,
    pub proposal_mask: RegionMask,
    pub proposals_from_tracker: usize,
    pub proposals_from_proposal_net: usize,
    /// Proposals left after merging near-duplicates; each one costs a
    /// classifier run.
    pub refined_proposals: usize,
    pub work: WorkReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceResult {
    pub frames: Vec<FrameResult>,
    pub totals: WorkReport,
}

impl SequenceResult {
    pub fn detections(&self) -> Vec<Detection> {
        self.frames
            .iter()
            .flat_map(|f| f.final_detections.iter().copied())
            .collect()
    }

    pub fn mean_work(&self) -> WorkReport {
        self.totals.per_frame(self.frames.len())
    }
}

/// One sequence's worth of cascade state: the two detector sources and the
/// tracker feeding predictions from frame to frame.
pub struct Pipeline {
    cfg: PipelineConfig,
    frame_w: f64,
    frame_h: f64,
    proposal: Box<dyn DetectorSource + Send>,
    refinement: Box<dyn DetectorSource + Send>,
    tracker: Tracker,
    /// Predictions made at the end of the previous frame.
    pending: Vec<Detection>,
}

impl Pipeline {
    pub fn new(
        cfg: PipelineConfig,
        classes: ClassMap,
        frame_w: f64,
        frame_h: f64,
        proposal: Box<dyn DetectorSource + Send>,
        refinement: Box<dyn DetectorSource + Send>,
    ) -> Result<Self, PipelineError> {
        cfg.validate()?;
        if !(frame_w > 0.0 && frame_h > 0.0) {
            return Err(PipelineError::InvalidConfig(format!(
                "frame dimensions must be positive, got {frame_w} x {frame_h}"
            )));
        }
        let tracker = Tracker::new(cfg.tracker.clone(), classes, frame_w, frame_h)?;
        Ok(Self {
            cfg,
            frame_w,
            frame_h,
            proposal,
            refinement,
            tracker,
            pending: Vec::new(),
        })
    }

    /// Pipeline over recorded proposal and refinement outputs.
    pub fn file_backed(
        cfg: PipelineConfig,
        classes: ClassMap,
        meta: &SequenceMeta,
        proposal: DetectionStore,
        refinement: DetectionStore,
    ) -> Result<Self, PipelineError> {
        let min_coverage = cfg.mask_min_coverage;
        Self::new(
            cfg,
            classes,
            meta.frame_w,
            meta.frame_h,
            Box::new(FileBackedSource::new(
                "proposal",
                proposal,
                meta.frame_count,
            )),
            Box::new(
                FileBackedSource::new("refinement", refinement, meta.frame_count)
                    .with_min_coverage(min_coverage),
            ),
        )
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn tracker(&self) -> &Tracker {
        &self.tracker
    }

    pub fn reset(&mut self) {
        self.tracker.reset();
        self.pending.clear();
    }

    /// Runs one frame. Frames must be fed in increasing order for the
    /// tracker's predictions to make sense.
    pub fn run_frame(&mut self, frame_index: u32) -> Result<FrameResult, PipelineError> {
        match self.cfg.mode {
            Mode::Single => self.run_single(frame_index),
            Mode::Cascaded | Mode::Catdet => self.run_cascade(frame_index),
        }
    }

    pub fn run_sequence(&mut self, frames: Range<u32>) -> Result<SequenceResult, PipelineError> {
        self.reset();
        let mut results = Vec::with_capacity(frames.len());
        let mut totals = WorkReport::default();
        for frame in frames {
            let r = self.run_frame(frame)?;
            totals.accumulate(&r.work);
            results.push(r);
        }
        Ok(SequenceResult {
            frames: results,
            totals,
        })
    }

    fn run_single(&mut self, frame_index: u32) -> Result<FrameResult, PipelineError> {
        let raw = self
            .refinement
            .detect(frame_index, None, None)
            .map_err(|source| PipelineError::Source {
                frame: frame_index,
                source,
            })?;
        let final_detections = self.suppress(&raw);
        let mask = RegionMask::full(self.frame_w, self.frame_h);
        let cost = &self.cfg.cost;
        let refine_ops = cost.refine_fullframe_ops();
        let mut work = WorkReport::new(0.0, refine_ops);
        if let Some(timing) = cost.timing {
            work.estimated_time = Some(timing.estimate_time(refine_ops));
            work.merged_region_count = 1;
        }
        Ok(FrameResult {
            frame_index,
            final_detections,
            mask,
            tracker_mask: RegionMask::empty(self.frame_w, self.frame_h),
            proposal_mask: RegionMask::empty(self.frame_w, self.frame_h),
            proposals_from_tracker: 0,
            proposals_from_proposal_net: 0,
            refined_proposals: self.cfg.cost.baseline_proposal_count as usize,
            work,
        })
    }

    fn run_cascade(&mut self, frame_index: u32) -> Result<FrameResult, PipelineError> {
        let (w, h) = (self.frame_w, self.frame_h);
        let c_thresh = self.cfg.c_thresh;
        let proposals: Vec<Detection> = self
            .proposal
            .detect(frame_index, None, None)
            .map_err(|source| PipelineError::Source {
                frame: frame_index,
                source,
            })?
            .into_iter()
            .filter(|d| d.score >= c_thresh)
            .collect();

        let predictions: Vec<Detection> = if self.cfg.mode.uses_tracker() {
            self.pending
                .iter()
                .filter(|d| d.frame_index == frame_index)
                .copied()
                .collect()
        } else {
            Vec::new()
        };

        let margin = self.cfg.margin;
        let tracker_mask =
            RegionMask::from_boxes(predictions.iter().map(|d| &d.bbox), margin, w, h);
        let proposal_mask = RegionMask::from_boxes(proposals.iter().map(|d| &d.bbox), margin, w, h);
        let mask = tracker_mask.union(&proposal_mask);

        let mut proposal_list: Vec<Detection> = predictions.clone();
        proposal_list.extend_from_slice(&proposals);
        let dedup_iou = self.cfg.proposal_dedup_iou;
        let proposal_list = nms(&proposal_list, dedup_iou);
        let n_tracker = nms(&predictions, dedup_iou).len();
        let n_proposal = nms(&proposals, dedup_iou).len();

        let refined = self
            .refinement
            .detect(frame_index, Some(&mask), Some(&proposal_list))
            .map_err(|source| PipelineError::Source {
                frame: frame_index,
                source,
            })?;
        // Anything a source reports outside the computed region is discarded.
        let refined: Vec<Detection> = refined
            .into_iter()
            .filter(|d| mask.intersects(&d.bbox))
            .collect();
        let final_detections = self.suppress(&refined);

        if self.cfg.mode.uses_tracker() {
            let t_thresh = self.cfg.t_thresh;
            let input: Vec<Detection> = final_detections
                .iter()
                .filter(|d| d.score >= t_thresh)
                .copied()
                .collect();
            self.pending = self.tracker.step(frame_index, &input)?;
        }

        let cost = &self.cfg.cost;
        let refine_ops = refine_cost(&mask, proposal_list.len(), cost);
        let mut work = WorkReport::new(cost.proposal_fullframe_ops, refine_ops);
        work.refine_from_tracker_ops = refine_cost(&tracker_mask, n_tracker, cost);
        work.refine_from_proposal_ops = refine_cost(&proposal_mask, n_proposal, cost);
        if let Some(timing) = cost.timing {
            let merged: Vec<BoundingBox> = greedy_merge(&mask.regions, w, h, cost, &timing);
            let classifier = cost.refine_per_proposal_ops * proposal_list.len() as f64;
            work.estimated_time = Some(
                timing.estimate_time(cost.proposal_fullframe_ops)
                    + regions_time(&merged, w, h, cost, &timing)
                    + timing.alpha * classifier,
            );
            work.merged_region_count = merged.len();
        }

        Ok(FrameResult {
            frame_index,
            final_detections,
            mask,
            tracker_mask,
            proposal_mask,
            proposals_from_tracker: predictions.len(),
            proposals_from_proposal_net: proposals.len(),
            refined_proposals: proposal_list.len(),
            work,
        })
    }

    fn suppress(&self, dets: &[Detection]) -> Vec<Detection> {
        let mut kept = if self.cfg.class_agnostic_nms {
            nms_class_agnostic(dets, self.cfg.nms_iou)
        } else {
            nms(dets, self.cfg.nms_iou)
        };
        sort_canonical(&mut kept);
        kept
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::ClassId;

    const W: f64 = 1242.0;
    const H: f64 = 375.0;

    fn meta(frames: u32) -> SequenceMeta {
        SequenceMeta {
            sequence_id: "t".into(),
            frame_count: frames,
            frame_w: W,
            frame_h: H,
            frame_rate: 10.0,
            labeled_frames: None,
        }
    }

    fn car(frame: u32, score: f64, x: f64) -> Detection {
        Detection::new(
            frame,
            ClassId(0),
            score,
            BoundingBox::new(x, 100.0, x + 80.0, 160.0),
        )
    }

    fn pipeline(
        mode: Mode,
        proposal: Vec<Detection>,
        refinement: Vec<Detection>,
        frames: u32,
    ) -> Pipeline {
        let cfg = PipelineConfig {
            mode,
            ..PipelineConfig::default()
        };
        Pipeline::file_backed(
            cfg,
            ClassMap::kitti(),
            &meta(frames),
            DetectionStore::from_detections(proposal),
            DetectionStore::from_detections(refinement),
        )
        .unwrap()
    }

    #[test]
    fn empty_range() {
        let mut p = pipeline(Mode::Catdet, vec![], vec![], 3);
        let r = p.run_sequence(0..0).unwrap();
        assert!(r.frames.is_empty());
        assert_eq!(r.totals.total_ops, 0.0);
    }

    #[test]
    fn single_mode_is_full_frame_refinement() {
        let refinement = vec![car(0, 0.9, 100.0), car(0, 0.8, 105.0), car(1, 0.7, 400.0)];
        let mut p = pipeline(Mode::Single, vec![], refinement.clone(), 3);
        let r = p.run_sequence(0..3).unwrap();
        let expected = nms(&refinement, 0.5);
        assert_eq!(r.detections(), expected);
        let full = p.config().cost.refine_fullframe_ops();
        assert!((r.totals.total_ops - 3.0 * full).abs() < 1e-9);
    }

    #[test]
    fn tracker_rescues_dropped_proposal() {
        let refinement: Vec<Detection> = (0..3)
            .map(|f| car(f, 0.9, 100.0 + 5.0 * f as f64))
            .collect();
        let proposal = vec![car(0, 0.9, 100.0), car(2, 0.9, 110.0)];

        let mut catdet = pipeline(Mode::Catdet, proposal.clone(), refinement.clone(), 3);
        let r = catdet.run_sequence(0..3).unwrap();
        assert_eq!(r.frames[1].final_detections.len(), 1);
        assert_eq!(r.frames[1].proposals_from_proposal_net, 0);
        assert_eq!(r.frames[1].proposals_from_tracker, 1);

        let mut cascaded = pipeline(Mode::Cascaded, proposal, refinement, 3);
        let r = cascaded.run_sequence(0..3).unwrap();
        assert!(r.frames[1].final_detections.is_empty());
        assert_eq!(r.frames[1].work.refine_ops, 0.0);
    }

    #[test]
    fn disabled_tracker_matches_cascade() {
        let refinement: Vec<Detection> = (0..4)
            .map(|f| car(f, 0.9, 100.0 + 5.0 * f as f64))
            .collect();
        let proposal = vec![car(0, 0.9, 100.0), car(2, 0.9, 110.0)];
        let mut a = pipeline(Mode::Cascaded, proposal.clone(), refinement.clone(), 4);
        let cfg = PipelineConfig {
            mode: Mode::Catdet,
            t_thresh: 1.01,
            ..PipelineConfig::default()
        };
        let mut b = Pipeline::file_backed(
            cfg,
            ClassMap::kitti(),
            &meta(4),
            DetectionStore::from_detections(proposal),
            DetectionStore::from_detections(refinement),
        )
        .unwrap();
        assert_eq!(a.run_sequence(0..4).unwrap(), b.run_sequence(0..4).unwrap());
    }

    #[test]
    fn missing_frame_halts() {
        let mut p = pipeline(Mode::Catdet, vec![], vec![], 2);
        let err = p.run_sequence(0..3).unwrap_err();
        assert!(matches!(err, PipelineError::Source { frame: 2, .. }));
    }

    #[test]
    fn overlapping_masks_are_subadditive() {
        let refinement = vec![car(0, 0.9, 100.0), car(1, 0.9, 104.0)];
        let proposal = vec![car(0, 0.9, 100.0), car(1, 0.9, 104.0)];
        let mut p = pipeline(Mode::Catdet, proposal, refinement, 2);
        let r = p.run_sequence(0..2).unwrap();
        let w = r.frames[1].work;
        assert!(w.refine_ops <= w.refine_from_tracker_ops + w.refine_from_proposal_ops);
        assert!(w.refine_ops < w.refine_from_tracker_ops + w.refine_from_proposal_ops);
    }
}
