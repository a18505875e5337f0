//! Scripted synthetic sequences with noisy recorded detector outputs.
//!
//! A scenario lists objects (class, lifetime, initial box, motion) and a
//! noise model per detector role. Generation is a pure function of the
//! scenario: each role draws from its own seeded stream, so changing the
//! proposal noise never perturbs the refinement output and vice versa.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::{
    write_detections_file, write_kitti_tracking_labels, write_text, DetectionStore, IngestError,
    SequenceMeta, LABELS_FILE, META_FILE, PROPOSAL_FILE, REFINEMENT_FILE,
};
use crate::classes::{ClassId, ClassMap};
use crate::geometry::{BoundingBox, Detection};
use crate::metrics::{GroundTruthTrack, GtObservation, Occlusion, SequenceGroundTruth};

const WORLD_STREAM: u64 = 0;
const PROPOSAL_STREAM: u64 = 1;
const REFINEMENT_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticScenario {
    #[serde(default = "default_sequence_id")]
    pub sequence_id: String,
    pub frame_count: u32,
    #[serde(default = "default_frame_w")]
    pub frame_w: f64,
    #[serde(default = "default_frame_h")]
    pub frame_h: f64,
    #[serde(default = "default_frame_rate")]
    pub frame_rate: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub objects: Vec<ObjectScript>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_objects: Option<RandomObjects>,
    #[serde(default)]
    pub proposal: NoiseModel,
    #[serde(default)]
    pub refinement: NoiseModel,
}

fn default_sequence_id() -> String {
    "synthetic".into()
}
fn default_frame_w() -> f64 {
    1242.0
}
fn default_frame_h() -> f64 {
    375.0
}
fn default_frame_rate() -> f64 {
    10.0
}

/// One scripted object. Its box moves by `velocity` per frame and its width
/// changes by `growth` per frame with the aspect ratio held.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectScript {
    pub class: String,
    pub entry: u32,
    /// Last frame, inclusive.
    pub exit: u32,
    /// `[x1, y1, x2, y2]` at the entry frame.
    pub bbox: [f64; 4],
    #[serde(default)]
    pub velocity: [f64; 2],
    #[serde(default)]
    pub growth: f64,
    #[serde(default)]
    pub occlusion: Vec<OcclusionSpan>,
    /// Inclusive frame ranges in which the proposal detector misses it.
    #[serde(default)]
    pub proposal_gaps: Vec<[u32; 2]>,
    /// Inclusive frame ranges in which the refinement detector misses it.
    #[serde(default)]
    pub refinement_gaps: Vec<[u32; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OcclusionSpan {
    pub from: u32,
    pub to: u32,
    pub level: u8,
}

/// Extra objects drawn from the scenario seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomObjects {
    pub count: u32,
    #[serde(default = "default_random_classes")]
    pub classes: Vec<String>,
    #[serde(default = "default_min_frames")]
    pub min_frames: u32,
    #[serde(default = "default_max_frames")]
    pub max_frames: u32,
    /// Largest horizontal speed, pixels per frame.
    #[serde(default = "default_max_speed")]
    pub max_speed: f64,
}

fn default_random_classes() -> Vec<String> {
    vec!["Car".into(), "Pedestrian".into()]
}
fn default_min_frames() -> u32 {
    10
}
fn default_max_frames() -> u32 {
    40
}
fn default_max_speed() -> f64 {
    6.0
}

/// How one detector role deviates from the ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    /// Probability of missing a visible object in a frame.
    pub miss_prob: f64,
    /// Mean number of false positives per frame.
    pub fp_rate: f64,
    /// Standard deviation of each box edge, as a fraction of the box size.
    pub jitter: f64,
    /// Uniform score range of true detections.
    pub tp_score: [f64; 2],
    /// Uniform score range of false positives.
    pub fp_score: [f64; 2],
    /// Uniform width range of false positive boxes, pixels.
    pub fp_width: [f64; 2],
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            miss_prob: 0.0,
            fp_rate: 0.0,
            jitter: 0.0,
            tp_score: [1.0, 1.0],
            fp_score: [0.0, 0.5],
            fp_width: [20.0, 120.0],
        }
    }
}

impl NoiseModel {
    fn validate(&self, role: &str) -> Result<(), IngestError> {
        let bad = |m: String| Err(IngestError::Config(format!("{role} noise: {m}")));
        if !(0.0..=1.0).contains(&self.miss_prob) {
            return bad(format!("miss_prob {} outside [0, 1]", self.miss_prob));
        }
        if !(self.fp_rate.is_finite() && self.fp_rate >= 0.0) {
            return bad(format!("fp_rate {} must be non-negative", self.fp_rate));
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return bad(format!("jitter {} must be non-negative", self.jitter));
        }
        for (name, r) in [("tp_score", self.tp_score), ("fp_score", self.fp_score)] {
            if !(0.0 <= r[0] && r[0] <= r[1] && r[1] <= 1.0) {
                return bad(format!(
                    "{name} range {r:?} must satisfy 0 <= lo <= hi <= 1"
                ));
            }
        }
        if !(0.0 < self.fp_width[0] && self.fp_width[0] <= self.fp_width[1]) {
            return bad(format!("fp_width range {:?} is invalid", self.fp_width));
        }
        Ok(())
    }
}

impl SyntheticScenario {
    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let s: Self = toml::from_str(text).map_err(|e| IngestError::Config(e.to_string()))?;
        Ok(s)
    }

    pub fn read(path: &Path) -> Result<Self, IngestError> {
        Self::parse(&super::read_text(path)?).map_err(|e| e.in_file(path))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    pub fn meta(&self) -> SequenceMeta {
        SequenceMeta {
            sequence_id: self.sequence_id.clone(),
            frame_count: self.frame_count,
            frame_w: self.frame_w,
            frame_h: self.frame_h,
            frame_rate: self.frame_rate,
            labeled_frames: None,
        }
    }

    pub fn validate(&self, classes: &ClassMap) -> Result<(), IngestError> {
        self.meta().validate()?;
        self.proposal.validate("proposal")?;
        self.refinement.validate("refinement")?;
        for (i, o) in self.objects.iter().enumerate() {
            let bad = |m: String| Err(IngestError::Config(format!("object {i}: {m}")));
            if classes.id(&o.class).is_none() {
                return bad(format!("unknown class '{}'", o.class));
            }
            if o.exit < o.entry {
                return bad(format!("exit {} before entry {}", o.exit, o.entry));
            }
            let b = BoundingBox::new(o.bbox[0], o.bbox[1], o.bbox[2], o.bbox[3]);
            if !(b.is_valid() && b.area() > 0.0) {
                return bad(format!("box {:?} has no area", o.bbox));
            }
            if o.occlusion.iter().any(|s| s.level > 3) {
                return bad("occlusion level must be 0..=3".into());
            }
        }
        if let Some(r) = &self.random_objects {
            if r.classes.is_empty() {
                return Err(IngestError::Config(
                    "random objects need at least one class".into(),
                ));
            }
            if let Some(c) = r.classes.iter().find(|c| classes.id(c).is_none()) {
                return Err(IngestError::Config(format!("unknown class '{c}'")));
            }
            if r.min_frames == 0 || r.min_frames > r.max_frames {
                return Err(IngestError::Config(
                    "random objects need 1 <= min_frames <= max_frames".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticOutput {
    pub meta: SequenceMeta,
    pub ground_truth: SequenceGroundTruth,
    pub proposal: DetectionStore,
    pub refinement: DetectionStore,
}

impl SyntheticOutput {
    /// Writes a complete sequence directory.
    pub fn write_to_dir(&self, dir: &Path, classes: &ClassMap) -> Result<(), IngestError> {
        std::fs::create_dir_all(dir).map_err(|source| IngestError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        write_text(&dir.join(META_FILE), &self.meta.to_toml())?;
        write_text(
            &dir.join(LABELS_FILE),
            &write_kitti_tracking_labels(&self.ground_truth),
        )?;
        write_detections_file(&dir.join(PROPOSAL_FILE), &self.proposal, classes)?;
        write_detections_file(&dir.join(REFINEMENT_FILE), &self.refinement, classes)?;
        Ok(())
    }
}

fn default_aspect(class: &str) -> f64 {
    match class.to_ascii_lowercase().as_str() {
        "pedestrian" | "person_sitting" => 2.4,
        "cyclist" => 1.6,
        "car" | "van" => 0.6,
        "truck" | "tram" => 0.8,
        _ => 1.0,
    }
}

fn width_range(class: &str) -> (f64, f64) {
    match class.to_ascii_lowercase().as_str() {
        "pedestrian" | "person_sitting" | "cyclist" => (20.0, 60.0),
        _ => (50.0, 200.0),
    }
}

fn uniform(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    let [lo, hi] = range;
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn in_gaps(gaps: &[[u32; 2]], frame: u32) -> bool {
    gaps.iter().any(|g| g[0] <= frame && frame <= g[1])
}

fn random_scripts(
    r: &RandomObjects,
    s: &SyntheticScenario,
    rng: &mut ChaCha8Rng,
) -> Vec<ObjectScript> {
    (0..r.count)
        .map(|_| {
            let class = r.classes[rng.random_range(0..r.classes.len())].clone();
            let max_len = r.max_frames.min(s.frame_count).max(1);
            let min_len = r.min_frames.min(max_len);
            let len = rng.random_range(min_len..=max_len);
            let entry = rng.random_range(0..=s.frame_count - len);
            let (wlo, whi) = width_range(&class);
            let w = rng.random_range(wlo..=whi).min(s.frame_w);
            let h = (w * default_aspect(&class)).min(s.frame_h);
            let cx = rng.random_range(w / 2.0..=s.frame_w - w / 2.0);
            let cy = rng.random_range(h / 2.0..=(s.frame_h - h / 2.0).max(h / 2.0));
            let vx = if r.max_speed > 0.0 {
                rng.random_range(-r.max_speed..=r.max_speed)
            } else {
                0.0
            };
            let vy = vx * 0.1;
            let b = BoundingBox::from_center(cx, cy, w, h);
            ObjectScript {
                class,
                entry,
                exit: entry + len - 1,
                bbox: [b.x1, b.y1, b.x2, b.y2],
                velocity: [vx, vy],
                growth: 0.0,
                occlusion: Vec::new(),
                proposal_gaps: Vec::new(),
                refinement_gaps: Vec::new(),
            }
        })
        .collect()
}

/// Box of `o` at `frame` before clipping, or `None` once it has shrunk away.
fn scripted_box(o: &ObjectScript, frame: u32) -> Option<BoundingBox> {
    let b = BoundingBox::new(o.bbox[0], o.bbox[1], o.bbox[2], o.bbox[3]);
    let k = f64::from(frame - o.entry);
    let (cx, cy) = b.center();
    let w = b.width() + o.growth * k;
    if w <= 1.0 {
        return None;
    }
    let h = w * b.height() / b.width();
    Some(BoundingBox::from_center(
        cx + o.velocity[0] * k,
        cy + o.velocity[1] * k,
        w,
        h,
    ))
}

struct Noisy<'a> {
    model: &'a NoiseModel,
    rng: ChaCha8Rng,
    store: DetectionStore,
}

impl Noisy<'_> {
    /// Always draws the same number of values so one object's outcome does
    /// not shift the randomness of the next.
    fn observe(
        &mut self,
        frame: u32,
        class: ClassId,
        truth: &BoundingBox,
        forced_miss: bool,
        w: f64,
        h: f64,
    ) {
        let miss = self.rng.random::<f64>() < self.model.miss_prob;
        let offsets: [f64; 4] = std::array::from_fn(|_| {
            if self.model.jitter > 0.0 {
                Normal::new(0.0, self.model.jitter)
                    .expect("finite jitter")
                    .sample(&mut self.rng)
            } else {
                0.0
            }
        });
        let score = uniform(&mut self.rng, self.model.tp_score);
        if miss || forced_miss {
            return;
        }
        let bbox = if self.model.jitter > 0.0 {
            let (bw, bh) = (truth.width(), truth.height());
            let x1 = truth.x1 + offsets[0] * bw;
            let y1 = truth.y1 + offsets[1] * bh;
            let x2 = (truth.x2 + offsets[2] * bw).max(x1 + 1.0);
            let y2 = (truth.y2 + offsets[3] * bh).max(y1 + 1.0);
            BoundingBox::new(x1, y1, x2, y2).clip(w, h)
        } else {
            *truth
        };
        if bbox.area() > 0.0 {
            self.store.push(Detection::new(frame, class, score, bbox));
        }
    }

    fn false_positives(&mut self, frame: u32, classes: &[(ClassId, f64)], w: f64, h: f64) {
        if self.model.fp_rate <= 0.0 || classes.is_empty() {
            return;
        }
        let n = Poisson::new(self.model.fp_rate)
            .expect("positive rate")
            .sample(&mut self.rng) as u64;
        for _ in 0..n {
            let (class, aspect) = classes[self.rng.random_range(0..classes.len())];
            let bw = uniform(&mut self.rng, self.model.fp_width).min(w);
            let bh = (bw * aspect).min(h);
            let x1 = self.rng.random_range(0.0..=w - bw);
            let y1 = self.rng.random_range(0.0..=h - bh);
            let score = uniform(&mut self.rng, self.model.fp_score);
            self.store.push(Detection::new(
                frame,
                class,
                score,
                BoundingBox::new(x1, y1, x1 + bw, y1 + bh),
            ));
        }
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Generates ground truth and both detector recordings.
pub fn generate_synthetic(
    scenario: &SyntheticScenario,
    classes: &ClassMap,
) -> Result<SyntheticOutput, IngestError> {
    scenario.validate(classes)?;
    let (w, h) = (scenario.frame_w, scenario.frame_h);

    let mut world = stream(scenario.seed, WORLD_STREAM);
    let mut scripts = scenario.objects.clone();
    if let Some(r) = &scenario.random_objects {
        scripts.extend(random_scripts(r, scenario, &mut world));
    }

    let mut fp_classes: BTreeMap<ClassId, f64> = BTreeMap::new();
    for o in &scripts {
        let id = classes.id(&o.class).expect("validated");
        let b = BoundingBox::new(o.bbox[0], o.bbox[1], o.bbox[2], o.bbox[3]);
        fp_classes.entry(id).or_insert(b.height() / b.width());
    }
    if fp_classes.is_empty() {
        if let Some(first) = classes.ids().next() {
            fp_classes.insert(first, default_aspect(classes.name(first).unwrap_or("")));
        }
    }
    let fp_classes: Vec<(ClassId, f64)> = fp_classes.into_iter().collect();

    let mut proposal = Noisy {
        model: &scenario.proposal,
        rng: stream(scenario.seed, PROPOSAL_STREAM),
        store: DetectionStore::new(),
    };
    let mut refinement = Noisy {
        model: &scenario.refinement,
        rng: stream(scenario.seed, REFINEMENT_STREAM),
        store: DetectionStore::new(),
    };
    let mut tracks: Vec<GroundTruthTrack> = scripts
        .iter()
        .enumerate()
        .map(|(i, o)| GroundTruthTrack {
            track_id: i as i64,
            class_name: classes
                .name(classes.id(&o.class).expect("validated"))
                .unwrap_or(&o.class)
                .to_string(),
            class_id: classes.id(&o.class),
            frames: Vec::new(),
        })
        .collect();

    for frame in 0..scenario.frame_count {
        for (i, o) in scripts.iter().enumerate() {
            if frame < o.entry || frame > o.exit {
                continue;
            }
            let Some(raw) = scripted_box(o, frame) else {
                continue;
            };
            let truth = raw.clip(w, h);
            if truth.area() <= 0.0 {
                continue;
            }
            let occluded = o
                .occlusion
                .iter()
                .find(|s| s.from <= frame && frame <= s.to)
                .and_then(|s| Occlusion::from_level(i64::from(s.level)))
                .unwrap_or(Occlusion::FullyVisible);
            let class = tracks[i].class_id.expect("validated");
            tracks[i].frames.push(GtObservation {
                frame_index: frame,
                bbox: truth,
                truncated: raw.outside_fraction(w, h),
                occluded,
            });
            proposal.observe(frame, class, &truth, in_gaps(&o.proposal_gaps, frame), w, h);
            refinement.observe(
                frame,
                class,
                &truth,
                in_gaps(&o.refinement_gaps, frame),
                w,
                h,
            );
        }
        proposal.false_positives(frame, &fp_classes, w, h);
        refinement.false_positives(frame, &fp_classes, w, h);
    }
    tracks.retain(|t| !t.frames.is_empty());

    Ok(SyntheticOutput {
        meta: scenario.meta(),
        ground_truth: SequenceGroundTruth {
            tracks,
            dont_care: BTreeMap::new(),
            labeled_frames: None,
        },
        proposal: proposal.store,
        refinement: refinement.store,
    })
}
