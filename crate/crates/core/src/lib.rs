//! Tracker-assisted cascaded object detection for video.
//!
//! A cheap proposal detector scans every frame, a lightweight tracker
//! predicts where last frame's objects will be, and an expensive refinement
//! detector only computes features inside the union of those regions. This
//! crate implements the tracker, the cascade loop over pluggable detector
//! sources, the operation-count cost model, and an evaluator reporting mAP
//! alongside the entry-delay metric.

pub mod assignment;
pub mod cascade;
pub mod classes;
pub mod costmodel;
pub mod geometry;
pub mod ingest;
pub mod metrics;
pub mod tracker;

pub use cascade::{
    DetectorSource, FileBackedSource, FrameResult, Mode, Pipeline, PipelineConfig, PipelineError,
    SequenceResult,
};
pub use classes::{ClassId, ClassMap};
pub use costmodel::{CostModelConfig, TimingModel, WorkReport};
pub use geometry::{mask_coverage, nms, BoundingBox, Detection, RegionMask};
pub use metrics::{
    evaluate, DelayReport, DifficultyFilter, EvalConfig, EvalReport, GroundTruthTrack,
    SequenceGroundTruth,
};
pub use tracker::{TrackState, Tracker, TrackerConfig};
