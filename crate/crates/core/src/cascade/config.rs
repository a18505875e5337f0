use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::costmodel::CostModelConfig;
use crate::tracker::TrackerConfig;

/// Which stages run.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Refinement detector over the full frame, nothing else.
    Single,
    /// Proposal detector seeds the refinement regions.
    Cascaded,
    /// Proposal detector and tracker predictions seed the refinement regions.
    #[default]
    Catdet,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Single, Mode::Cascaded, Mode::Catdet];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Single => "single",
            Mode::Cascaded => "cascaded",
            Mode::Catdet => "catdet",
        }
    }

    pub fn uses_tracker(self) -> bool {
        self == Mode::Catdet
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| PipelineError::InvalidConfig(format!("unknown mode '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub mode: Mode,
    /// Proposal detections scoring below this are dropped.
    pub c_thresh: f64,
    /// Final detections scoring below this do not reach the tracker. Values
    /// above 1 disable the tracker's input entirely.
    pub t_thresh: f64,
    /// Dilation applied to every proposal box, in pixels.
    pub margin: f64,
    pub nms_iou: f64,
    pub class_agnostic_nms: bool,
    /// IoU above which overlapping proposals count as one classifier run.
    pub proposal_dedup_iou: f64,
    /// Fraction of a stored detection that must lie inside the mask for a
    /// file-backed refinement source to report it.
    pub mask_min_coverage: f64,
    pub tracker: TrackerConfig,
    pub cost: CostModelConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Catdet,
            c_thresh: 0.5,
            t_thresh: 0.5,
            margin: 30.0,
            nms_iou: 0.5,
            class_agnostic_nms: false,
            proposal_dedup_iou: 0.7,
            mask_min_coverage: 0.5,
            tracker: TrackerConfig::default(),
            cost: CostModelConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: String| Err(PipelineError::InvalidConfig(msg));
        for (name, v) in [("c_thresh", self.c_thresh), ("t_thresh", self.t_thresh)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be a non-negative number, got {v}"));
            }
        }
        if !(self.margin.is_finite() && self.margin >= 0.0) {
            return bad(format!("margin must be non-negative, got {}", self.margin));
        }
        for (name, v) in [
            ("nms_iou", self.nms_iou),
            ("proposal_dedup_iou", self.proposal_dedup_iou),
            ("mask_min_coverage", self.mask_min_coverage),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        self.tracker
            .validate()
            .map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
        self.cost
            .validate()
            .map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
        Ok(())
    }
}
