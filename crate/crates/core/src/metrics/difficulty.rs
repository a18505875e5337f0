use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::BoundingBox;

/// KITTI occlusion levels, ordered from most to least visible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Occlusion {
    FullyVisible,
    PartlyOccluded,
    LargelyOccluded,
    Unknown,
}

impl Occlusion {
    pub fn from_level(level: i64) -> Option<Self> {
        match level {
            0 => Some(Self::FullyVisible),
            1 => Some(Self::PartlyOccluded),
            2 => Some(Self::LargelyOccluded),
            3 => Some(Self::Unknown),
            _ => None,
        }
    }

    pub fn level(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for Occlusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.level())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeAxis {
    Width,
    Height,
}

/// Which ground-truth boxes count towards recall and delay. Boxes that fail
/// the filter become "ignore" boxes: matching them is neither rewarded nor
/// punished, and leaving them unmatched is not a miss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DifficultyFilter {
    pub name: String,
    pub min_box_size: f64,
    pub size_axis: SizeAxis,
    pub max_occlusion: Occlusion,
    pub max_truncation: f64,
}

impl DifficultyFilter {
    /// KITTI devkit Easy: height >= 40 px, fully visible, truncation <= 15%.
    /// Also matches the looser "wider than 40 px and fully visible" reading
    /// when used with [`SizeAxis::Width`].
    pub fn easy() -> Self {
        Self::preset("easy", 40.0, Occlusion::FullyVisible, 0.15)
    }

    /// KITTI devkit Moderate: height >= 25 px, partly occluded at most,
    /// truncation <= 30%.
    pub fn moderate() -> Self {
        Self::preset("moderate", 25.0, Occlusion::PartlyOccluded, 0.30)
    }

    /// KITTI devkit Hard: height >= 25 px, largely occluded at most,
    /// truncation <= 50%.
    pub fn hard() -> Self {
        Self::preset("hard", 25.0, Occlusion::LargelyOccluded, 0.50)
    }

    /// Every box qualifies.
    pub fn all() -> Self {
        Self::preset("all", 0.0, Occlusion::Unknown, f64::INFINITY)
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "easy" => Some(Self::easy()),
            "moderate" => Some(Self::moderate()),
            "hard" => Some(Self::hard()),
            "all" => Some(Self::all()),
            _ => None,
        }
    }

    fn preset(name: &str, min: f64, occ: Occlusion, trunc: f64) -> Self {
        Self {
            name: name.to_string(),
            min_box_size: min,
            size_axis: SizeAxis::Height,
            max_occlusion: occ,
            max_truncation: trunc,
        }
    }

    pub fn size_of(&self, bbox: &BoundingBox) -> f64 {
        match self.size_axis {
            SizeAxis::Width => bbox.width(),
            SizeAxis::Height => bbox.height(),
        }
    }

    pub fn qualifies(&self, bbox: &BoundingBox, occluded: Occlusion, truncated: f64) -> bool {
        self.size_of(bbox) >= self.min_box_size
            && occluded <= self.max_occlusion
            && truncated <= self.max_truncation
    }

    /// Detections smaller than the filter's minimum size are ignored unless
    /// they hit a qualifying box.
    pub fn detection_too_small(&self, bbox: &BoundingBox) -> bool {
        self.size_of(bbox) < self.min_box_size
    }
}
