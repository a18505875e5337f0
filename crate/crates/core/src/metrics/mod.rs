//! Detection quality metrics: per-class average precision under KITTI-style
//! matching and difficulty filtering, and the entry-delay metric measured at
//! a shared precision operating point.

mod ap;
mod delay;
mod difficulty;
mod eval;
mod matching;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::classes::ClassId;
use crate::geometry::BoundingBox;

pub use ap::{average_precision, pr_curve, precision_at, PrPoint, RecallPoints};
pub use delay::{
    delay_per_class, find_t_beta, mean_delay, ClassDelay, ClassEvaluation, DelayReport, TrackDelay,
};
pub use difficulty::{DifficultyFilter, Occlusion, SizeAxis};
pub use eval::{
    build_class_evaluation, evaluate, ClassAp, ClassCurve, CurveRow, DelayOutcome,
    DifficultyReport, EvalConfig, EvalReport, EvalSequence,
};
pub use matching::{match_frame, DetOutcome, FrameMatch, GtBox, GtKind, DONT_CARE_OVERLAP};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("delay cannot be measured on sparsely annotated sequences; only labelled frames are evaluated")]
    SparseAnnotation,
    #[error(
        "no score threshold reaches mean precision {beta}; best achievable is {max_precision:.4}"
    )]
    BetaUnreachable { beta: f64, max_precision: f64 },
    #[error("no evaluated class has a qualifying ground-truth track")]
    NoTracks,
    #[error("evaluated class '{0}' is not in the class map")]
    UnknownClass(String),
    #[error("unknown difficulty '{0}'")]
    UnknownDifficulty(String),
    #[error("invalid evaluation config: {0}")]
    InvalidConfig(String),
    #[error("track {track_id}: frame {frame} does not follow frame {previous}")]
    NonMonotoneTrack {
        track_id: i64,
        previous: u32,
        frame: u32,
    },
}

/// One labelled appearance of a ground-truth object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtObservation {
    pub frame_index: u32,
    pub bbox: BoundingBox,
    pub truncated: f64,
    pub occluded: Occlusion,
}

/// A labelled object sequence. Frames are strictly increasing and the first
/// one is the entry frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthTrack {
    pub track_id: i64,
    pub class_name: String,
    /// `None` when the label's class is not in the class map.
    pub class_id: Option<ClassId>,
    pub frames: Vec<GtObservation>,
}

impl GroundTruthTrack {
    pub fn entry_frame(&self) -> Option<u32> {
        self.frames.first().map(|o| o.frame_index)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        for pair in self.frames.windows(2) {
            if pair[1].frame_index <= pair[0].frame_index {
                return Err(EvalError::NonMonotoneTrack {
                    track_id: self.track_id,
                    previous: pair[0].frame_index,
                    frame: pair[1].frame_index,
                });
            }
        }
        Ok(())
    }
}

/// Ground truth of one sequence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SequenceGroundTruth {
    pub tracks: Vec<GroundTruthTrack>,
    /// Unlabelled regions per frame.
    pub dont_care: BTreeMap<u32, Vec<BoundingBox>>,
    /// `Some` for sparsely annotated data: only these frames are labelled.
    pub labeled_frames: Option<BTreeSet<u32>>,
}

impl SequenceGroundTruth {
    pub fn is_sparse(&self) -> bool {
        self.labeled_frames.is_some()
    }
}
