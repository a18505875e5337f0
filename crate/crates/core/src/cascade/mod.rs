//! The cascade loop: proposal detector and tracker predictions select the
//! regions the refinement detector runs on, and its NMS-clean output feeds
//! the tracker for the next frame.

mod config;
mod pipeline;
mod source;

use thiserror::Error;

pub use config::{Mode, PipelineConfig};
pub use pipeline::{FrameResult, Pipeline, SequenceResult};
pub use source::{DetectorSource, FileBackedSource, SourceError};

use crate::tracker::TrackerError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error("frame {frame}: {source}")]
    Source {
        frame: u32,
        #[source]
        source: SourceError,
    },
    #[error(transparent)]
    Tracker(#[from] TrackerError),
}
