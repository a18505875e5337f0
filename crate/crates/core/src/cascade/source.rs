use thiserror::Error;

use crate::geometry::{Detection, RegionMask};
use crate::ingest::DetectionStore;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SourceError {
    #[error("{source_name} source has no frame {frame} (sequence has {frame_count} frames)")]
    MissingFrame {
        source_name: String,
        frame: u32,
        frame_count: u32,
    },
    #[error("{0}")]
    Other(String),
}

/// A detector the pipeline can query.
///
/// With a mask, only detections inside the mask may be returned. The
/// proposal list, when given, is the set of boxes the refinement stage was
/// asked to look at; sources are free to ignore it. Compute is charged by the
/// cost model from the mask and proposal count, not by the source.
pub trait DetectorSource {
    fn detect(
        &mut self,
        frame_index: u32,
        mask: Option<&RegionMask>,
        proposals: Option<&[Detection]>,
    ) -> Result<Vec<Detection>, SourceError>;
}

/// Replays recorded full-frame detections. Masking keeps a stored detection
/// when at least `min_coverage` of its area lies inside the mask.
#[derive(Debug, Clone)]
pub struct FileBackedSource {
    name: String,
    store: DetectionStore,
    frame_count: u32,
    min_coverage: f64,
}

impl FileBackedSource {
    pub fn new(name: impl Into<String>, store: DetectionStore, frame_count: u32) -> Self {
        Self {
            name: name.into(),
            store,
            frame_count,
            min_coverage: 0.5,
        }
    }

    pub fn with_min_coverage(mut self, min_coverage: f64) -> Self {
        self.min_coverage = min_coverage;
        self
    }

    pub fn store(&self) -> &DetectionStore {
        &self.store
    }
}

impl DetectorSource for FileBackedSource {
    fn detect(
        &mut self,
        frame_index: u32,
        mask: Option<&RegionMask>,
        _proposals: Option<&[Detection]>,
    ) -> Result<Vec<Detection>, SourceError> {
        if frame_index >= self.frame_count {
            return Err(SourceError::MissingFrame {
                source_name: self.name.clone(),
                frame: frame_index,
                frame_count: self.frame_count,
            });
        }
        let all = self.store.frame(frame_index);
        Ok(match mask {
            None => all.to_vec(),
            Some(m) => all
                .iter()
                .filter(|d| m.intersects(&d.bbox) && m.coverage_of(&d.bbox) >= self.min_coverage)
                .copied()
                .collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::ClassId;
    use crate::geometry::BoundingBox;

    fn source() -> FileBackedSource {
        let d =
            |x: f64| Detection::new(0, ClassId(0), 0.9, BoundingBox::new(x, 0.0, x + 10.0, 10.0));
        FileBackedSource::new(
            "refinement",
            DetectionStore::from_detections([d(0.0), d(50.0), d(95.0)]),
            2,
        )
    }

    #[test]
    fn masking_uses_coverage() {
        let mut s = source();
        let mask = RegionMask {
            frame_w: 200.0,
            frame_h: 100.0,
            regions: vec![BoundingBox::new(0.0, 0.0, 100.0, 100.0)],
        };
        let got = s.detect(0, Some(&mask), None).unwrap();
        // the box at x = 95 is half inside
        assert_eq!(got.len(), 3);
        let mask = RegionMask {
            regions: vec![BoundingBox::new(0.0, 0.0, 99.0, 100.0)],
            ..mask
        };
        assert_eq!(s.detect(0, Some(&mask), None).unwrap().len(), 2);
        assert_eq!(s.detect(0, None, None).unwrap().len(), 3);
        assert!(s.detect(1, None, None).unwrap().is_empty());
    }

    #[test]
    fn missing_frame_is_an_error() {
        let err = source().detect(2, None, None).unwrap_err();
        assert!(matches!(err, SourceError::MissingFrame { frame: 2, .. }));
    }
}
