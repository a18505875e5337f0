use std::fmt;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

/// How the precision/recall curve is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecallPoints {
    /// Mean interpolated precision at `n` evenly spaced recall values
    /// `0, 1/(n-1), ..., 1`. Pascal VOC uses 11.
    Sampled(u32),
    /// Area under the interpolated curve at every recall change.
    All,
}

impl Default for RecallPoints {
    fn default() -> Self {
        Self::Sampled(11)
    }
}

impl fmt::Display for RecallPoints {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Sampled(n) => write!(f, "{n}"),
            Self::All => f.write_str("all"),
        }
    }
}

impl Serialize for RecallPoints {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Sampled(n) => s.serialize_u32(*n),
            Self::All => s.serialize_str("all"),
        }
    }
}

impl<'de> Deserialize<'de> for RecallPoints {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(i64),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(n) if n >= 2 && n <= u32::MAX as i64 => Ok(Self::Sampled(n as u32)),
            Raw::Count(n) => Err(de::Error::custom(format!(
                "need at least 2 recall points, got {n}"
            ))),
            Raw::Name(s) if matches!(s.as_str(), "all" | "all-points") => Ok(Self::All),
            Raw::Name(s) => Err(de::Error::custom(format!(
                "unknown recall point mode '{s}'"
            ))),
        }
    }
}

/// One operating point: everything scoring at or above `threshold` kept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub precision: f64,
    pub recall: f64,
}

/// Operating points at every distinct score, highest threshold first.
///
/// `scored` holds `(score, is_true_positive)` for every non-ignored
/// detection of one class, pooled over frames. Equal scores enter together.
pub fn pr_curve(scored: &[(f64, bool)], n_gt: usize) -> Vec<PrPoint> {
    let mut sorted = scored.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let threshold = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == threshold {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(PrPoint {
            threshold,
            tp,
            fp,
            precision: tp as f64 / (tp + fp) as f64,
            recall: if n_gt == 0 {
                0.0
            } else {
                tp as f64 / n_gt as f64
            },
        });
    }
    points
}

/// Average precision of one class, `None` when there is nothing to recall.
pub fn average_precision(scored: &[(f64, bool)], n_gt: usize, mode: RecallPoints) -> Option<f64> {
    if n_gt == 0 {
        return None;
    }
    let curve = pr_curve(scored, n_gt);
    Some(match mode {
        RecallPoints::Sampled(n) => {
            let steps = u64::from(n.max(2) - 1);
            let total: f64 = (0..=steps)
                .map(|k| {
                    // recall >= k / steps, compared exactly in integers
                    curve
                        .iter()
                        .filter(|p| p.tp as u64 * steps >= k * n_gt as u64)
                        .map(|p| p.precision)
                        .fold(0.0, f64::max)
                })
                .sum();
            total / (steps + 1) as f64
        }
        RecallPoints::All => {
            let mut area = 0.0;
            let mut prev_tp = 0usize;
            for (i, p) in curve.iter().enumerate() {
                if p.tp > prev_tp {
                    let envelope = curve[i..].iter().map(|q| q.precision).fold(0.0, f64::max);
                    area += (p.tp - prev_tp) as f64 / n_gt as f64 * envelope;
                    prev_tp = p.tp;
                }
            }
            area
        }
    })
}

/// Precision when keeping everything scoring `>= threshold`; an empty
/// selection has precision 1.
pub fn precision_at(scored_desc: &[(f64, bool)], threshold: f64) -> (usize, usize, f64) {
    let kept = scored_desc.partition_point(|s| s.0 >= threshold);
    let tp = scored_desc[..kept].iter().filter(|s| s.1).count();
    let fp = kept - tp;
    let precision = if kept == 0 {
        1.0
    } else {
        tp as f64 / kept as f64
    };
    (tp, fp, precision)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_detector() {
        let scored = [(0.9, true), (0.8, true), (0.3, true)];
        assert_eq!(
            average_precision(&scored, 3, RecallPoints::Sampled(11)),
            Some(1.0)
        );
        assert_eq!(average_precision(&scored, 3, RecallPoints::All), Some(1.0));
    }

    #[test]
    fn trailing_false_positive_does_not_hurt() {
        // One object, found by the top detection; the extra FP only lowers
        // precision at a recall that was already reached.
        let scored = [(0.9, true), (0.8, false)];
        assert_eq!(
            average_precision(&scored, 1, RecallPoints::Sampled(11)),
            Some(1.0)
        );
    }

    #[test]
    fn half_recall_gives_six_of_eleven() {
        let scored = [(0.9, true), (0.8, false)];
        let ap = average_precision(&scored, 2, RecallPoints::Sampled(11)).unwrap();
        assert!((ap - 6.0 / 11.0).abs() < 1e-15);
        let all = average_precision(&scored, 2, RecallPoints::All).unwrap();
        assert!((all - 0.5).abs() < 1e-15);
    }

    #[test]
    fn no_ground_truth_is_absent() {
        assert_eq!(
            average_precision(&[(0.5, false)], 0, RecallPoints::default()),
            None
        );
    }

    #[test]
    fn ties_enter_together() {
        let curve = pr_curve(&[(0.5, true), (0.5, false), (0.4, true)], 2);
        assert_eq!(curve.len(), 2);
        assert_eq!((curve[0].tp, curve[0].fp), (1, 1));
    }

    #[test]
    fn precision_selection() {
        let scored = [(0.9, true), (0.7, false), (0.5, true)];
        assert_eq!(precision_at(&scored, 0.95), (0, 0, 1.0));
        assert_eq!(precision_at(&scored, 0.7).2, 0.5);
        let (tp, fp, p) = precision_at(&scored, 0.0);
        assert_eq!((tp, fp), (2, 1));
        assert!((p - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn recall_points_parse() {
        #[derive(Deserialize)]
        struct W {
            p: RecallPoints,
        }
        let w: W = toml::from_str("p = 11").unwrap();
        assert_eq!(w.p, RecallPoints::Sampled(11));
        let w: W = toml::from_str("p = \"all-points\"").unwrap();
        assert_eq!(w.p, RecallPoints::All);
        assert!(toml::from_str::<W>("p = 1").is_err());
    }
}
