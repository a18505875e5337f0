//! File formats: detection files, KITTI tracking labels, per-sequence meta
//! files, the pipeline config file, and the synthetic scenario generator.

mod config;
mod detfile;
mod kitti;
mod meta;
pub mod synthetic;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{ConfigFile, CostSection, PipelineSection, ResolvedConfig};
pub use detfile::{
    parse_detections, read_detections, write_detections, write_detections_file, DetectionStore,
};
pub use kitti::{
    parse_kitti_tracking_labels, read_kitti_tracking_labels, write_kitti_tracking_labels,
    KittiLabels,
};
pub use meta::{SequenceDir, SequenceMeta};
pub use synthetic::{
    generate_synthetic, NoiseModel, ObjectScript, SyntheticOutput, SyntheticScenario,
};

/// Per-sequence directory layout.
pub const META_FILE: &str = "meta.toml";
pub const LABELS_FILE: &str = "labels.txt";
pub const PROPOSAL_FILE: &str = "proposal.txt";
pub const REFINEMENT_FILE: &str = "refinement.txt";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{}: {source}", path.display())]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<IngestError>,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("invalid sequence meta: {0}")]
    Meta(String),
}

impl IngestError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Self::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn in_file(self, path: &Path) -> Self {
        match self {
            e @ (Self::Io { .. } | Self::InFile { .. }) => e,
            other => Self::InFile {
                path: path.to_path_buf(),
                source: Box::new(other),
            },
        }
    }

    /// Line number of a parse error, looking through file context.
    pub fn line(&self) -> Option<usize> {
        match self {
            Self::Parse { line, .. } => Some(*line),
            Self::InFile { source, .. } => source.line(),
            _ => None,
        }
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, IngestError> {
    std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), IngestError> {
    std::fs::write(path, text).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Splits a record line into fields, dropping `#` comments. Returns `None`
/// for blank and comment-only lines.
pub(crate) fn fields(line: &str) -> Option<Vec<&str>> {
    let content = line.split('#').next().unwrap_or("");
    let parts: Vec<&str> = content.split_whitespace().collect();
    (!parts.is_empty()).then_some(parts)
}

pub(crate) fn parse_num<T: std::str::FromStr>(
    field: &str,
    what: &str,
    line: usize,
) -> Result<T, IngestError> {
    field
        .parse()
        .map_err(|_| IngestError::parse(line, format!("bad {what} '{field}'")))
}
