//! Detection files: one record per line,
//!
//! ```text
//! frame_index class_name score x1 y1 x2 y2
//! ```
//!
//! whitespace separated, `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{fields, parse_num, read_text, write_text, IngestError};
use crate::classes::ClassMap;
use crate::geometry::{BoundingBox, Detection};

/// Detections grouped by frame, each frame in input order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionStore {
    frames: BTreeMap<u32, Vec<Detection>>,
}

impl DetectionStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_detections(dets: impl IntoIterator<Item = Detection>) -> Self {
        let mut store = Self::new();
        for d in dets {
            store.push(d);
        }
        store
    }

    pub fn push(&mut self, det: Detection) {
        self.frames.entry(det.frame_index).or_default().push(det);
    }

    pub fn frame(&self, frame_index: u32) -> &[Detection] {
        self.frames
            .get(&frame_index)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn frames(&self) -> impl Iterator<Item = (u32, &[Detection])> {
        self.frames.iter().map(|(f, d)| (*f, d.as_slice()))
    }

    pub fn last_frame(&self) -> Option<u32> {
        self.frames.keys().next_back().copied()
    }

    pub fn len(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &Detection> {
        self.frames.values().flatten()
    }

    pub fn to_vec(&self) -> Vec<Detection> {
        self.iter().copied().collect()
    }
}

pub fn parse_detections(text: &str, classes: &ClassMap) -> Result<DetectionStore, IngestError> {
    let mut store = DetectionStore::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let Some(f) = fields(raw) else { continue };
        if f.len() != 7 {
            return Err(IngestError::parse(
                line,
                format!(
                    "expected 7 fields (frame class score x1 y1 x2 y2), found {}",
                    f.len()
                ),
            ));
        }
        let frame: u32 = parse_num(f[0], "frame index", line)?;
        let class_id = classes
            .id(f[1])
            .ok_or_else(|| IngestError::parse(line, format!("unknown class '{}'", f[1])))?;
        let score: f64 = parse_num(f[2], "score", line)?;
        if !(0.0..=1.0).contains(&score) {
            return Err(IngestError::parse(
                line,
                format!("score {score} outside [0, 1]"),
            ));
        }
        let mut c = [0.0f64; 4];
        for (k, name) in ["x1", "y1", "x2", "y2"].iter().enumerate() {
            c[k] = parse_num(f[3 + k], name, line)?;
            if !c[k].is_finite() {
                return Err(IngestError::parse(line, format!("{name} is not finite")));
            }
        }
        if c[2] < c[0] {
            return Err(IngestError::parse(
                line,
                format!("x2 {} < x1 {}", c[2], c[0]),
            ));
        }
        if c[3] < c[1] {
            return Err(IngestError::parse(
                line,
                format!("y2 {} < y1 {}", c[3], c[1]),
            ));
        }
        store.push(Detection::new(
            frame,
            class_id,
            score,
            BoundingBox::new(c[0], c[1], c[2], c[3]),
        ));
    }
    Ok(store)
}

pub fn read_detections(path: &Path, classes: &ClassMap) -> Result<DetectionStore, IngestError> {
    parse_detections(&read_text(path)?, classes).map_err(|e| e.in_file(path))
}

/// Serialises detections in frame order, preserving order within a frame.
/// Numbers use the shortest representation that parses back exactly.
pub fn write_detections(store: &DetectionStore, classes: &ClassMap) -> String {
    let mut out = String::new();
    for d in store.iter() {
        let name = classes.name(d.class_id).unwrap_or("Unknown");
        let b = d.bbox;
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {}",
            d.frame_index, name, d.score, b.x1, b.y1, b.x2, b.y2
        );
    }
    out
}

pub fn write_detections_file(
    path: &Path,
    store: &DetectionStore,
    classes: &ClassMap,
) -> Result<(), IngestError> {
    write_text(path, &write_detections(store, classes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::ClassId;

    #[test]
    fn comments_only() {
        let store = parse_detections("# header\n\n   # more\n", &ClassMap::kitti()).unwrap();
        assert!(store.is_empty());
    }

    #[test]
    fn single_record() {
        let store = parse_detections(
            "3 Car 0.75 10.5 20 110.25 80 # trailing\n",
            &ClassMap::kitti(),
        )
        .unwrap();
        let d = store.frame(3)[0];
        assert_eq!(d.class_id, ClassId(0));
        assert_eq!(d.score, 0.75);
        assert_eq!(d.bbox, BoundingBox::new(10.5, 20.0, 110.25, 80.0));
        assert_eq!(
            write_detections(&store, &ClassMap::kitti()),
            "3 Car 0.75 10.5 20 110.25 80\n"
        );
    }

    #[test]
    fn errors_carry_line_numbers() {
        let classes = ClassMap::kitti();
        let err = parse_detections("0 Car 0.5 0 0 1 1\n1 Car 1.5 0 0 1 1\n", &classes).unwrap_err();
        assert_eq!(err.line(), Some(2));
        let err = parse_detections("0 Car 0.5 5 0 1 1\n", &classes).unwrap_err();
        assert!(err.to_string().contains("x2"));
        let err = parse_detections("0 Bus 0.5 0 0 1 1\n", &classes).unwrap_err();
        assert!(err.to_string().contains("unknown class"));
        let err = parse_detections("0 Car 0.5 0 0 1\n", &classes).unwrap_err();
        assert!(err.to_string().contains("7 fields"));
    }

    #[test]
    fn frames_keep_input_order() {
        let text = "1 Car 0.2 0 0 1 1\n0 Car 0.9 0 0 1 1\n1 Car 0.8 0 0 1 1\n";
        let store = parse_detections(text, &ClassMap::kitti()).unwrap();
        let scores: Vec<f64> = store.frame(1).iter().map(|d| d.score).collect();
        assert_eq!(scores, vec![0.2, 0.8]);
        assert_eq!(store.last_frame(), Some(1));
    }
}
