//! KITTI tracking label files:
//!
//! ```text
//! frame track_id type truncated occluded alpha left top right bottom h w l x y z ry [score]
//! ```
//!
//! Only the 2D part is kept. `DontCare` lines become unlabelled regions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use super::{fields, parse_num, read_text, IngestError};
use crate::classes::ClassMap;
use crate::geometry::BoundingBox;
use crate::metrics::{GroundTruthTrack, GtObservation, Occlusion, SequenceGroundTruth};

pub const DONT_CARE: &str = "DontCare";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KittiLabels {
    pub ground_truth: SequenceGroundTruth,
    /// Class names present in the file but absent from the class map. Their
    /// tracks are kept with `class_id: None`.
    pub unknown_classes: BTreeSet<String>,
}

pub fn parse_kitti_tracking_labels(
    text: &str,
    classes: &ClassMap,
) -> Result<KittiLabels, IngestError> {
    let mut tracks: BTreeMap<i64, GroundTruthTrack> = BTreeMap::new();
    let mut dont_care: BTreeMap<u32, Vec<BoundingBox>> = BTreeMap::new();
    let mut unknown = BTreeSet::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let Some(f) = fields(raw) else { continue };
        if f.len() != 17 && f.len() != 18 {
            return Err(IngestError::parse(
                line,
                format!("expected 17 or 18 fields, found {}", f.len()),
            ));
        }
        let frame: u32 = parse_num(f[0], "frame index", line)?;
        let track_id: i64 = parse_num(f[1], "track id", line)?;
        let class_name = f[2];
        let truncated: f64 = parse_num(f[3], "truncation", line)?;
        let occluded_level: i64 = parse_num(f[4], "occlusion", line)?;
        let _alpha: f64 = parse_num(f[5], "alpha", line)?;
        let mut c = [0.0f64; 4];
        for (k, name) in ["left", "top", "right", "bottom"].iter().enumerate() {
            c[k] = parse_num(f[6 + k], name, line)?;
            if !c[k].is_finite() {
                return Err(IngestError::parse(line, format!("{name} is not finite")));
            }
        }
        for (k, field) in f[10..].iter().enumerate() {
            let _: f64 = parse_num(field, if k < 7 { "3D field" } else { "score" }, line)?;
        }
        if c[2] < c[0] || c[3] < c[1] {
            return Err(IngestError::parse(
                line,
                "box has right < left or bottom < top",
            ));
        }
        let bbox = BoundingBox::new(c[0], c[1], c[2], c[3]);

        if class_name.eq_ignore_ascii_case(DONT_CARE) {
            dont_care.entry(frame).or_default().push(bbox);
            continue;
        }

        let occluded = Occlusion::from_level(occluded_level).ok_or_else(|| {
            IngestError::parse(
                line,
                format!("occlusion level {occluded_level} not in 0..=3"),
            )
        })?;
        let class_id = classes.id(class_name);
        if class_id.is_none() {
            unknown.insert(class_name.to_string());
        }
        let track = tracks.entry(track_id).or_insert_with(|| GroundTruthTrack {
            track_id,
            class_name: class_name.to_string(),
            class_id,
            frames: Vec::new(),
        });
        if !track.class_name.eq_ignore_ascii_case(class_name) {
            return Err(IngestError::parse(
                line,
                format!(
                    "track {track_id} changes class from {} to {class_name}",
                    track.class_name
                ),
            ));
        }
        if let Some(prev) = track.frames.last() {
            if frame <= prev.frame_index {
                return Err(IngestError::parse(
                    line,
                    format!(
                        "track {track_id}: frame {frame} does not follow frame {}",
                        prev.frame_index
                    ),
                ));
            }
        }
        track.frames.push(GtObservation {
            frame_index: frame,
            bbox,
            truncated,
            occluded,
        });
    }

    Ok(KittiLabels {
        ground_truth: SequenceGroundTruth {
            tracks: tracks.into_values().collect(),
            dont_care,
            labeled_frames: None,
        },
        unknown_classes: unknown,
    })
}

pub fn read_kitti_tracking_labels(
    path: &Path,
    classes: &ClassMap,
) -> Result<KittiLabels, IngestError> {
    parse_kitti_tracking_labels(&read_text(path)?, classes).map_err(|e| e.in_file(path))
}

/// Writes labels frame by frame, tracks in id order, don't-care regions
/// last within each frame. 3D fields are written as the usual KITTI
/// placeholders.
pub fn write_kitti_tracking_labels(gt: &SequenceGroundTruth) -> String {
    let mut rows: BTreeMap<u32, Vec<String>> = BTreeMap::new();
    let mut tracks: Vec<&GroundTruthTrack> = gt.tracks.iter().collect();
    tracks.sort_by_key(|t| t.track_id);
    for t in tracks {
        for o in &t.frames {
            rows.entry(o.frame_index).or_default().push(format_row(
                o.frame_index,
                t.track_id,
                &t.class_name,
                o.truncated,
                i64::from(o.occluded.level()),
                &o.bbox,
            ));
        }
    }
    for (frame, regions) in &gt.dont_care {
        for r in regions {
            rows.entry(*frame)
                .or_default()
                .push(format_row(*frame, -1, DONT_CARE, -1.0, -1, r));
        }
    }
    let mut out = String::new();
    for lines in rows.values() {
        for l in lines {
            out.push_str(l);
            out.push('\n');
        }
    }
    out
}

fn format_row(
    frame: u32,
    track_id: i64,
    class: &str,
    truncated: f64,
    occluded: i64,
    b: &BoundingBox,
) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "{frame} {track_id} {class} {truncated} {occluded} -10 {} {} {} {} -1 -1 -1 -1000 -1000 -1000 -10",
        b.x1, b.y1, b.x2, b.y2
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
0 0 Car 0 0 -1.79 296.74 161.75 455.24 292.01 2.0 1.8 4.4 -4.5 1.6 13.4 -2.1
0 -1 DontCare -1 -1 -10 1000.5 150 1030 175 -1 -1 -1 -1000 -1000 -1000 -10
1 0 Car 0 1 -1.79 300.00 160.00 460.00 290.00 2.0 1.8 4.4 -4.5 1.6 13.4 -2.1
1 3 Tram 0.2 2 -1 10 10 50 90 2 2 2 1 1 1 0 0.9
";

    #[test]
    fn empty_file_has_no_tracks() {
        let l = parse_kitti_tracking_labels("", &ClassMap::kitti()).unwrap();
        assert!(l.ground_truth.tracks.is_empty());
    }

    #[test]
    fn sample_parses() {
        let l = parse_kitti_tracking_labels(SAMPLE, &ClassMap::kitti()).unwrap();
        let gt = &l.ground_truth;
        assert_eq!(gt.tracks.len(), 2);
        assert_eq!(gt.tracks[0].entry_frame(), Some(0));
        assert_eq!(gt.tracks[0].frames.len(), 2);
        assert_eq!(gt.tracks[0].frames[1].occluded, Occlusion::PartlyOccluded);
        assert_eq!(gt.tracks[1].frames[0].truncated, 0.2);
        assert_eq!(
            gt.dont_care[&0],
            vec![BoundingBox::new(1000.5, 150.0, 1030.0, 175.0)]
        );
        assert!(l.unknown_classes.is_empty());
    }

    #[test]
    fn unknown_classes_are_flagged() {
        let classes = ClassMap::new(["Car"]);
        let l = parse_kitti_tracking_labels(SAMPLE, &classes).unwrap();
        assert_eq!(l.unknown_classes.iter().collect::<Vec<_>>(), vec!["Tram"]);
        assert_eq!(l.ground_truth.tracks[1].class_id, None);
    }

    #[test]
    fn round_trip() {
        let classes = ClassMap::kitti();
        let a = parse_kitti_tracking_labels(SAMPLE, &classes).unwrap();
        let b =
            parse_kitti_tracking_labels(&write_kitti_tracking_labels(&a.ground_truth), &classes)
                .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn located_errors() {
        let classes = ClassMap::kitti();
        let bad = "0 0 Car 0 0 -1 0 0 10 10 1 1 1 1 1 1\n";
        assert_eq!(
            parse_kitti_tracking_labels(bad, &classes)
                .unwrap_err()
                .line(),
            Some(1)
        );
        let back =
            "1 0 Car 0 0 -1 0 0 10 10 1 1 1 1 1 1 0\n0 0 Car 0 0 -1 0 0 10 10 1 1 1 1 1 1 0\n";
        let err = parse_kitti_tracking_labels(back, &classes).unwrap_err();
        assert_eq!(err.line(), Some(2));
        assert!(err.to_string().contains("does not follow"));
    }
}
