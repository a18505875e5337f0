use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    read_detections, read_kitti_tracking_labels, read_text, DetectionStore, IngestError,
    KittiLabels, LABELS_FILE, META_FILE, PROPOSAL_FILE, REFINEMENT_FILE,
};
use crate::classes::ClassMap;

/// Contents of a sequence's `meta.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceMeta {
    pub sequence_id: String,
    pub frame_count: u32,
    pub frame_w: f64,
    pub frame_h: f64,
    /// Informational only; nothing is scaled by it.
    #[serde(default = "default_frame_rate")]
    pub frame_rate: f64,
    /// Present for sparsely annotated sequences: the only labelled frames.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labeled_frames: Option<Vec<u32>>,
}

fn default_frame_rate() -> f64 {
    10.0
}

impl SequenceMeta {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.frame_count == 0 {
            return Err(IngestError::Meta("frame_count must be at least 1".into()));
        }
        if !(self.frame_w > 0.0
            && self.frame_h > 0.0
            && self.frame_w.is_finite()
            && self.frame_h.is_finite())
        {
            return Err(IngestError::Meta(format!(
                "frame dimensions must be positive, got {} x {}",
                self.frame_w, self.frame_h
            )));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let meta: Self = toml::from_str(text).map_err(|e| IngestError::Meta(e.to_string()))?;
        meta.validate()?;
        Ok(meta)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("sequence meta serialises")
    }

    pub fn labeled_set(&self) -> Option<BTreeSet<u32>> {
        self.labeled_frames
            .as_ref()
            .map(|v| v.iter().copied().collect())
    }
}

/// A sequence directory: `meta.toml`, and optionally `labels.txt`,
/// `proposal.txt` and `refinement.txt`.
#[derive(Debug, Clone)]
pub struct SequenceDir {
    pub root: PathBuf,
    pub meta: SequenceMeta,
}

impl SequenceDir {
    pub fn open(root: &Path) -> Result<Self, IngestError> {
        let meta_path = root.join(META_FILE);
        let meta =
            SequenceMeta::parse(&read_text(&meta_path)?).map_err(|e| e.in_file(&meta_path))?;
        Ok(Self {
            root: root.to_path_buf(),
            meta,
        })
    }

    pub fn labels_path(&self) -> PathBuf {
        self.root.join(LABELS_FILE)
    }

    pub fn proposal_path(&self) -> PathBuf {
        self.root.join(PROPOSAL_FILE)
    }

    pub fn refinement_path(&self) -> PathBuf {
        self.root.join(REFINEMENT_FILE)
    }

    /// Ground truth, with the meta file's labelled-frame set applied.
    pub fn labels(&self, classes: &ClassMap) -> Result<KittiLabels, IngestError> {
        let mut labels = read_kitti_tracking_labels(&self.labels_path(), classes)?;
        labels.ground_truth.labeled_frames = self.meta.labeled_set();
        Ok(labels)
    }

    pub fn proposal(&self, classes: &ClassMap) -> Result<DetectionStore, IngestError> {
        self.detections(&self.proposal_path(), classes)
    }

    pub fn refinement(&self, classes: &ClassMap) -> Result<DetectionStore, IngestError> {
        self.detections(&self.refinement_path(), classes)
    }

    /// Reads a detection file, rejecting frames the sequence does not have.
    fn detections(&self, path: &Path, classes: &ClassMap) -> Result<DetectionStore, IngestError> {
        let store = read_detections(path, classes)?;
        match store.last_frame() {
            Some(last) if last >= self.meta.frame_count => Err(IngestError::Meta(format!(
                "{} has detections for frame {last}, but the sequence has {} frames",
                path.display(),
                self.meta.frame_count
            ))),
            _ => Ok(store),
        }
    }
}
