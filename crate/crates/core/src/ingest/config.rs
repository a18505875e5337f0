//! The pipeline config file (TOML):
//!
//! ```toml
//! classes = ["Car", "Pedestrian"]   # optional, defaults to the KITTI set
//!
//! [pipeline]
//! mode = "catdet"
//! c_thresh = 0.5
//! t_thresh = 0.5
//! margin = 30.0
//!
//! [tracker]
//! decay_eta = 0.7
//!
//! [cost]
//! preset = "res10a-res50"   # or explicit *_ops values
//! alpha = 0.01              # optional timing model, both or neither
//! b = 0.5
//!
//! [eval]
//! beta = 0.8
//! ```
//!
//! Every section and key is optional.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_text, IngestError};
use crate::cascade::{Mode, PipelineConfig};
use crate::classes::{ClassMap, KITTI_CLASSES};
use crate::costmodel::{CostModelConfig, TimingModel};
use crate::metrics::EvalConfig;
use crate::tracker::TrackerConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub mode: Mode,
    pub c_thresh: f64,
    pub t_thresh: f64,
    pub margin: f64,
    pub nms_iou: f64,
    pub class_agnostic_nms: bool,
    pub proposal_dedup_iou: f64,
    pub mask_min_coverage: f64,
}

impl Default for PipelineSection {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            mode: p.mode,
            c_thresh: p.c_thresh,
            t_thresh: p.t_thresh,
            margin: p.margin,
            nms_iou: p.nms_iou,
            class_agnostic_nms: p.class_agnostic_nms,
            proposal_dedup_iou: p.proposal_dedup_iou,
            mask_min_coverage: p.mask_min_coverage,
        }
    }
}

/// Cost constants: a named preset, explicit values, or a preset with some
/// values overridden.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proposal_fullframe_ops: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refine_feature_fullframe_ops: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refine_per_proposal_ops: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_proposal_count: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
}

impl CostSection {
    pub fn resolve(&self) -> Result<CostModelConfig, IngestError> {
        let mut cfg = match &self.preset {
            Some(name) => {
                CostModelConfig::preset(name).map_err(|e| IngestError::Config(e.to_string()))?
            }
            None => CostModelConfig::default(),
        };
        if let Some(v) = self.proposal_fullframe_ops {
            cfg.proposal_fullframe_ops = v;
        }
        if let Some(v) = self.refine_feature_fullframe_ops {
            cfg.refine_feature_fullframe_ops = v;
        }
        if let Some(v) = self.refine_per_proposal_ops {
            cfg.refine_per_proposal_ops = v;
        }
        if let Some(v) = self.baseline_proposal_count {
            cfg.baseline_proposal_count = v;
        }
        cfg.timing = match (self.alpha, self.b) {
            (Some(alpha), Some(b)) => Some(TimingModel { alpha, b }),
            (None, None) => None,
            _ => {
                return Err(IngestError::Config(
                    "timing model needs both alpha and b".into(),
                ))
            }
        };
        cfg.validate()
            .map_err(|e| IngestError::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Explicit form of a resolved cost model.
    pub fn explicit(cfg: &CostModelConfig) -> Self {
        Self {
            preset: None,
            proposal_fullframe_ops: Some(cfg.proposal_fullframe_ops),
            refine_feature_fullframe_ops: Some(cfg.refine_feature_fullframe_ops),
            refine_per_proposal_ops: Some(cfg.refine_per_proposal_ops),
            baseline_proposal_count: Some(cfg.baseline_proposal_count),
            alpha: cfg.timing.map(|t| t.alpha),
            b: cfg.timing.map(|t| t.b),
        }
    }
}

/// The config file as written.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<String>>,
    pub pipeline: PipelineSection,
    pub tracker: TrackerConfig,
    pub cost: CostSection,
    pub eval: EvalConfig,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, IngestError> {
        toml::from_str(text).map_err(|e| IngestError::Config(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self, IngestError> {
        Self::parse(&read_text(path)?).map_err(|e| e.in_file(path))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn resolve(&self) -> Result<ResolvedConfig, IngestError> {
        let classes = match &self.classes {
            Some(names) if names.is_empty() => {
                return Err(IngestError::Config("class list is empty".into()))
            }
            Some(names) => ClassMap::new(names.iter().map(String::as_str)),
            None => ClassMap::new(KITTI_CLASSES),
        };
        let p = &self.pipeline;
        let pipeline = PipelineConfig {
            mode: p.mode,
            c_thresh: p.c_thresh,
            t_thresh: p.t_thresh,
            margin: p.margin,
            nms_iou: p.nms_iou,
            class_agnostic_nms: p.class_agnostic_nms,
            proposal_dedup_iou: p.proposal_dedup_iou,
            mask_min_coverage: p.mask_min_coverage,
            tracker: self.tracker.clone(),
            cost: self.cost.resolve()?,
        };
        let resolved = ResolvedConfig {
            classes,
            pipeline,
            eval: self.eval.clone(),
        };
        resolved.validate()?;
        Ok(resolved)
    }
}

/// A validated configuration ready to drive a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub classes: ClassMap,
    pub pipeline: PipelineConfig,
    pub eval: EvalConfig,
}

impl Default for ResolvedConfig {
    fn default() -> Self {
        ConfigFile::default().resolve().expect("defaults are valid")
    }
}

impl ResolvedConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        self.pipeline
            .validate()
            .map_err(|e| IngestError::Config(e.to_string()))?;
        self.eval
            .validate()
            .map_err(|e| IngestError::Config(e.to_string()))?;
        self.eval
            .filters()
            .map_err(|e| IngestError::Config(e.to_string()))?;
        Ok(())
    }

    /// Config file that resolves back to exactly this configuration, with
    /// every value spelled out.
    pub fn to_file(&self) -> ConfigFile {
        let p = &self.pipeline;
        ConfigFile {
            classes: Some(self.classes.names().to_vec()),
            pipeline: PipelineSection {
                mode: p.mode,
                c_thresh: p.c_thresh,
                t_thresh: p.t_thresh,
                margin: p.margin,
                nms_iou: p.nms_iou,
                class_agnostic_nms: p.class_agnostic_nms,
                proposal_dedup_iou: p.proposal_dedup_iou,
                mask_min_coverage: p.mask_min_coverage,
            },
            tracker: p.tracker.clone(),
            cost: CostSection::explicit(&p.cost),
            eval: self.eval.clone(),
        }
    }

    pub fn snapshot(&self) -> String {
        self.to_file().to_toml()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let r = ConfigFile::parse("").unwrap().resolve().unwrap();
        assert_eq!(r.pipeline, PipelineConfig::default());
        assert_eq!(r.eval, EvalConfig::default());
        assert_eq!(r.classes, ClassMap::kitti());
    }

    #[test]
    fn sections_and_presets() {
        let text = r#"
classes = ["Car", "Pedestrian", "Van", "Person_sitting"]
[pipeline]
mode = "cascaded"
c_thresh = 0.3
[tracker]
decay_eta = 0.5
[cost]
preset = "res18-res50"
alpha = 0.02
b = 1.5
[eval]
beta = 0.7
difficulties = ["easy"]
"#;
        let r = ConfigFile::parse(text).unwrap().resolve().unwrap();
        assert_eq!(r.pipeline.mode, Mode::Cascaded);
        assert_eq!(r.pipeline.c_thresh, 0.3);
        assert_eq!(r.pipeline.tracker.decay_eta, 0.5);
        assert_eq!(r.pipeline.cost.proposal_fullframe_ops, 138.3);
        assert_eq!(
            r.pipeline.cost.timing,
            Some(TimingModel {
                alpha: 0.02,
                b: 1.5
            })
        );
        assert_eq!(r.eval.beta, 0.7);
        assert_eq!(r.classes.len(), 4);

        let again = ConfigFile::parse(&r.snapshot()).unwrap().resolve().unwrap();
        assert_eq!(again, r);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ConfigFile::parse("[pipeline]\nbogus = 1\n").is_err());
        assert!(ConfigFile::parse("[cost]\nalpha = 1.0\n")
            .unwrap()
            .resolve()
            .is_err());
        assert!(ConfigFile::parse("[cost]\npreset = \"vgg\"\n")
            .unwrap()
            .resolve()
            .is_err());
        assert!(ConfigFile::parse("[pipeline]\nmode = \"both\"\n").is_err());
        assert!(ConfigFile::parse("[eval]\ndifficulties = [\"extreme\"]\n")
            .unwrap()
            .resolve()
            .is_err());
    }
}
