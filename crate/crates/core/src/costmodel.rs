//! Arithmetic-operation accounting for the cascade.
//!
//! All work is measured in Gops (10^9 multiply-accumulates in convolutional
//! and fully-connected layers). The refinement detector is split into a
//! feature extractor, whose cost scales with the fraction of the frame it
//! has to compute, and a per-proposal classifier head.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{mask_coverage, BoundingBox, RegionMask};

/// Full-frame op counts of the proposal backbones on 1242x375 KITTI frames
/// with 300 proposals.
pub mod presets {
    pub const RES18_PROPOSAL_OPS: f64 = 138.3;
    pub const RES10A_PROPOSAL_OPS: f64 = 20.7;
    pub const RES10B_PROPOSAL_OPS: f64 = 7.5;
    pub const RES10C_PROPOSAL_OPS: f64 = 4.5;

    /// ResNet-50 Faster R-CNN total at 300 proposals.
    pub const RES50_FULL_OPS: f64 = 254.3;
    /// conv1..res4 on the whole frame.
    pub const RES50_FEATURE_OPS: f64 = 30.5;
    /// res5 head on one 14x14 RoI crop.
    pub const RES50_PER_PROPOSAL_OPS: f64 = 0.746;

    pub const BASELINE_PROPOSALS: u32 = 300;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("unknown cost preset '{0}' (expected res18-res50, res10a-res50, res10b-res50 or res10c-res50)")]
    UnknownPreset(String),
    #[error("cost constant {0} must be finite and non-negative")]
    Negative(&'static str),
}

/// Linear execution-time model `T = alpha * W + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingModel {
    /// Seconds per Gop.
    pub alpha: f64,
    /// Seconds per launch.
    pub b: f64,
}

impl TimingModel {
    pub fn estimate_time(&self, work_gops: f64) -> f64 {
        self.alpha * work_gops + self.b
    }

    /// Fits `alpha` and `b` through two `(work, seconds)` measurements.
    pub fn fit(p: (f64, f64), q: (f64, f64)) -> Option<Self> {
        let dw = q.0 - p.0;
        if dw == 0.0 {
            return None;
        }
        let alpha = (q.1 - p.1) / dw;
        Some(Self {
            alpha,
            b: p.1 - alpha * p.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModelConfig {
    pub proposal_fullframe_ops: f64,
    pub refine_feature_fullframe_ops: f64,
    pub refine_per_proposal_ops: f64,
    pub baseline_proposal_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingModel>,
}

impl Default for CostModelConfig {
    fn default() -> Self {
        Self::res50_refinement(presets::RES10A_PROPOSAL_OPS)
    }
}

impl CostModelConfig {
    pub fn res50_refinement(proposal_fullframe_ops: f64) -> Self {
        Self {
            proposal_fullframe_ops,
            refine_feature_fullframe_ops: presets::RES50_FEATURE_OPS,
            refine_per_proposal_ops: presets::RES50_PER_PROPOSAL_OPS,
            baseline_proposal_count: presets::BASELINE_PROPOSALS,
            timing: None,
        }
    }

    /// Named `<proposal>-<refinement>` preset, e.g. `res10a-res50`.
    pub fn preset(name: &str) -> Result<Self, CostError> {
        let ops = match name.to_ascii_lowercase().as_str() {
            "res18-res50" => presets::RES18_PROPOSAL_OPS,
            "res10a-res50" => presets::RES10A_PROPOSAL_OPS,
            "res10b-res50" => presets::RES10B_PROPOSAL_OPS,
            "res10c-res50" => presets::RES10C_PROPOSAL_OPS,
            _ => return Err(CostError::UnknownPreset(name.to_string())),
        };
        Ok(Self::res50_refinement(ops))
    }

    pub fn validate(&self) -> Result<(), CostError> {
        let check = |v: f64, name| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(CostError::Negative(name))
            }
        };
        check(self.proposal_fullframe_ops, "proposal_fullframe_ops")?;
        check(
            self.refine_feature_fullframe_ops,
            "refine_feature_fullframe_ops",
        )?;
        check(self.refine_per_proposal_ops, "refine_per_proposal_ops")?;
        if let Some(t) = self.timing {
            check(t.alpha, "alpha")?;
            check(t.b, "b")?;
        }
        Ok(())
    }

    /// Cost of running the refinement detector over the whole frame with
    /// the baseline proposal count.
    pub fn refine_fullframe_ops(&self) -> f64 {
        self.refine_feature_fullframe_ops
            + self.refine_per_proposal_ops * f64::from(self.baseline_proposal_count)
    }

    /// Feature-extraction work for one rectangular region of the frame.
    pub fn region_work(&self, region: &BoundingBox, frame_w: f64, frame_h: f64) -> f64 {
        let frame = frame_w * frame_h;
        if frame <= 0.0 {
            return 0.0;
        }
        self.refine_feature_fullframe_ops * (region.area() / frame)
    }
}

/// Refinement work restricted to `mask` with `n_proposals` classifier runs.
pub fn refine_cost(mask: &RegionMask, n_proposals: usize, cfg: &CostModelConfig) -> f64 {
    cfg.refine_feature_fullframe_ops * mask_coverage(mask)
        + cfg.refine_per_proposal_ops * n_proposals as f64
}

/// Refinement work split by the source that asked for it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostAttribution {
    pub from_tracker: f64,
    pub from_proposal: f64,
    /// Actual work over the union; never more than the sum of the parts.
    pub combined: f64,
}

pub fn attribute_costs(
    tracker_mask: &RegionMask,
    proposal_mask: &RegionMask,
    union_mask: &RegionMask,
    cfg: &CostModelConfig,
    n_tracker_props: usize,
    n_proposal_props: usize,
) -> CostAttribution {
    CostAttribution {
        from_tracker: refine_cost(tracker_mask, n_tracker_props, cfg),
        from_proposal: refine_cost(proposal_mask, n_proposal_props, cfg),
        combined: refine_cost(union_mask, n_tracker_props + n_proposal_props, cfg),
    }
}

/// Per-frame (or aggregated) work report. All values in Gops.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkReport {
    pub proposal_ops: f64,
    pub refine_ops: f64,
    pub total_ops: f64,
    pub refine_from_tracker_ops: f64,
    pub refine_from_proposal_ops: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimated_time: Option<f64>,
    pub merged_region_count: usize,
}

impl WorkReport {
    pub fn new(proposal_ops: f64, refine_ops: f64) -> Self {
        Self {
            proposal_ops,
            refine_ops,
            total_ops: proposal_ops + refine_ops,
            ..Self::default()
        }
    }

    pub fn accumulate(&mut self, other: &WorkReport) {
        self.proposal_ops += other.proposal_ops;
        self.refine_ops += other.refine_ops;
        self.total_ops += other.total_ops;
        self.refine_from_tracker_ops += other.refine_from_tracker_ops;
        self.refine_from_proposal_ops += other.refine_from_proposal_ops;
        self.merged_region_count += other.merged_region_count;
        self.estimated_time = match (self.estimated_time, other.estimated_time) {
            (Some(a), Some(b)) => Some(a + b),
            (a, b) => a.or(b),
        };
    }

    /// Every field divided by `frames`; the region count is rounded down.
    pub fn per_frame(&self, frames: usize) -> WorkReport {
        if frames == 0 {
            return WorkReport::default();
        }
        let n = frames as f64;
        WorkReport {
            proposal_ops: self.proposal_ops / n,
            refine_ops: self.refine_ops / n,
            total_ops: self.total_ops / n,
            refine_from_tracker_ops: self.refine_from_tracker_ops / n,
            refine_from_proposal_ops: self.refine_from_proposal_ops / n,
            estimated_time: self.estimated_time.map(|t| t / n),
            merged_region_count: self.merged_region_count / frames,
        }
    }
}

/// Greedy rectangle merging under the linear timing model.
///
/// While some pair of regions can be replaced by their bounding hull with a
/// lower estimated time, merge the pair with the largest saving (ties go to
/// the lowest index pair). The result is a fixed point: no remaining pair
/// satisfies `T(hull) < T(a) + T(b)`.
pub fn greedy_merge(
    regions: &[BoundingBox],
    frame_w: f64,
    frame_h: f64,
    cfg: &CostModelConfig,
    timing: &TimingModel,
) -> Vec<BoundingBox> {
    let time = |r: &BoundingBox| timing.estimate_time(cfg.region_work(r, frame_w, frame_h));
    let mut current: Vec<BoundingBox> = regions.to_vec();
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..current.len() {
            for j in i + 1..current.len() {
                let hull = current[i].hull(&current[j]);
                let saving = time(&current[i]) + time(&current[j]) - time(&hull);
                if saving > 0.0 && best.is_none_or(|(_, _, s)| saving > s) {
                    best = Some((i, j, saving));
                }
            }
        }
        match best {
            Some((i, j, _)) => {
                let hull = current[i].hull(&current[j]);
                current.remove(j);
                current[i] = hull;
            }
            None => return current,
        }
    }
}

/// Estimated time of running each region as its own launch.
pub fn regions_time(
    regions: &[BoundingBox],
    frame_w: f64,
    frame_h: f64,
    cfg: &CostModelConfig,
    timing: &TimingModel,
) -> f64 {
    regions
        .iter()
        .map(|r| timing.estimate_time(cfg.region_work(r, frame_w, frame_h)))
        .sum()
}
