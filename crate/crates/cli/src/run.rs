use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use catdet_core::ingest::{
    write_detections, ConfigFile, DetectionStore, ResolvedConfig, SequenceDir, LABELS_FILE,
    META_FILE, PROPOSAL_FILE, REFINEMENT_FILE,
};
use catdet_core::{mask_coverage, Mode, Pipeline, SequenceResult};
use rayon::prelude::*;

use crate::manifest::{InputSequence, RunManifest, CONFIG_SNAPSHOT_FILE, MANIFEST_FILE};
use crate::output::OutputSet;
use crate::{CliError, RunArgs};

pub const DETECTIONS_FILE: &str = "detections.txt";
pub const WORK_FILE: &str = "work.tsv";
pub const MASKS_FILE: &str = "masks.txt";

pub const WORK_HEADER: &str = "frame\tproposal_ops\trefine_ops\ttotal_ops\trefine_from_tracker_ops\trefine_from_proposal_ops\tproposals_from_tracker\tproposals_from_proposal_net\trefined_proposals\tmask_coverage\testimated_time\tmerged_regions";

/// Config file contents, or the defaults when no file is given.
pub(crate) fn load_config(path: Option<&Path>) -> Result<ResolvedConfig> {
    let file = match path {
        Some(p) => ConfigFile::read(p)?,
        None => ConfigFile::default(),
    };
    Ok(file.resolve()?)
}

pub(crate) fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (cfg, dirs, dump_masks) = match &args.manifest {
        Some(path) => {
            let manifest = RunManifest::read(path)?;
            for input in &manifest.inputs {
                input.verify()?;
            }
            let cfg = ConfigFile::parse(&manifest.config)
                .and_then(|f| f.resolve())
                .with_context(|| format!("config recorded in {}", path.display()))?;
            let dirs: Vec<PathBuf> = manifest.inputs.iter().map(|i| i.path.clone()).collect();
            let dump = args.dump_masks || manifest.outputs.keys().any(|k| k.ends_with(MASKS_FILE));
            (cfg, dirs, dump)
        }
        None => {
            let mut cfg = load_config(args.config.as_deref())?;
            apply_overrides(&mut cfg, args)?;
            (cfg, args.sequences.clone(), args.dump_masks)
        }
    };

    let seqs: Vec<SequenceDir> = dirs
        .iter()
        .map(|d| SequenceDir::open(d))
        .collect::<Result<_, _>>()?;
    let mut ids = BTreeSet::new();
    for s in &seqs {
        if !ids.insert(s.meta.sequence_id.as_str()) {
            return Err(anyhow!(
                "sequence id '{}' appears more than once",
                s.meta.sequence_id
            )
            .into());
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(usize::from(args.jobs))
        .build()
        .context("starting worker threads")?;
    let results: Vec<Result<SequenceResult>> =
        pool.install(|| seqs.par_iter().map(|s| run_sequence(&cfg, s)).collect());

    let mut set = OutputSet::default();
    let mut summary = Vec::new();
    for (seq, result) in seqs.iter().zip(results) {
        let result = result?;
        let id = &seq.meta.sequence_id;
        set.add(
            format!("{id}/{DETECTIONS_FILE}"),
            detections_text(&result, &cfg),
        );
        set.add(format!("{id}/{WORK_FILE}"), work_text(&result));
        if dump_masks {
            set.add(format!("{id}/{MASKS_FILE}"), masks_text(&result));
        }
        summary.push((
            id.clone(),
            result.frames.len(),
            result.detections().len(),
            result.mean_work(),
        ));
    }
    set.add(CONFIG_SNAPSHOT_FILE, cfg.snapshot());

    let inputs = seqs
        .iter()
        .map(|s| {
            InputSequence::record(
                &s.meta.sequence_id,
                &s.root,
                &[META_FILE, LABELS_FILE, PROPOSAL_FILE, REFINEMENT_FILE],
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = RunManifest {
        tool: "catdet".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        mode: cfg.pipeline.mode.to_string(),
        config: cfg.snapshot(),
        inputs,
        outputs: set.digests(),
    };
    set.add(MANIFEST_FILE, manifest.to_json());
    set.commit(&args.out)?;

    let _ = writeln!(out, "mode {} -> {}", cfg.pipeline.mode, args.out.display());
    let _ = writeln!(
        out,
        "{:<16} {:>7} {:>11} {:>14}",
        "sequence", "frames", "detections", "ops/frame(G)"
    );
    for (id, frames, dets, work) in summary {
        let _ = writeln!(
            out,
            "{id:<16} {frames:>7} {dets:>11} {:>14.1}",
            work.total_ops
        );
    }
    Ok(())
}

fn apply_overrides(cfg: &mut ResolvedConfig, args: &RunArgs) -> Result<(), CliError> {
    let p = &mut cfg.pipeline;
    if let Some(m) = &args.mode {
        p.mode = m
            .parse::<Mode>()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    if let Some(v) = args.c_thresh {
        p.c_thresh = v;
    }
    if let Some(v) = args.t_thresh {
        p.t_thresh = v;
    }
    if let Some(v) = args.margin {
        p.margin = v;
    }
    if let Some(v) = args.nms_iou {
        p.nms_iou = v;
    }
    p.validate().map_err(|e| CliError::Usage(e.to_string()))
}

pub(crate) fn run_sequence(cfg: &ResolvedConfig, seq: &SequenceDir) -> Result<SequenceResult> {
    let classes = &cfg.classes;
    let proposal = if cfg.pipeline.mode == Mode::Single {
        DetectionStore::new()
    } else {
        seq.proposal(classes)?
    };
    let refinement = seq.refinement(classes)?;
    let mut pipeline = Pipeline::file_backed(
        cfg.pipeline.clone(),
        classes.clone(),
        &seq.meta,
        proposal,
        refinement,
    )?;
    pipeline
        .run_sequence(0..seq.meta.frame_count)
        .with_context(|| format!("sequence {}", seq.meta.sequence_id))
}

pub(crate) fn detections_text(result: &SequenceResult, cfg: &ResolvedConfig) -> String {
    let mut text = String::from("# frame class score x1 y1 x2 y2\n");
    text.push_str(&write_detections(
        &DetectionStore::from_detections(result.detections()),
        &cfg.classes,
    ));
    text
}

pub(crate) fn work_text(result: &SequenceResult) -> String {
    let mut s = String::from(WORK_HEADER);
    s.push('\n');
    for f in &result.frames {
        let w = &f.work;
        let time = w
            .estimated_time
            .map(|t| t.to_string())
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            f.frame_index,
            w.proposal_ops,
            w.refine_ops,
            w.total_ops,
            w.refine_from_tracker_ops,
            w.refine_from_proposal_ops,
            f.proposals_from_tracker,
            f.proposals_from_proposal_net,
            f.refined_proposals,
            mask_coverage(&f.mask),
            time,
            w.merged_region_count,
        );
    }
    s
}

/// One line per region: `frame source x1 y1 x2 y2`, where source is
/// `tracker`, `proposal`, or `full` for whole-frame refinement.
pub(crate) fn masks_text(result: &SequenceResult) -> String {
    let mut s = String::from("# frame source x1 y1 x2 y2\n");
    for f in &result.frames {
        let tagged: Vec<(&str, &catdet_core::RegionMask)> = if f.tracker_mask.regions.is_empty()
            && f.proposal_mask.regions.is_empty()
            && f.mask.regions.len() == 1
            && mask_coverage(&f.mask) == 1.0
        {
            vec![("full", &f.mask)]
        } else {
            vec![("tracker", &f.tracker_mask), ("proposal", &f.proposal_mask)]
        };
        for (tag, mask) in tagged {
            for r in &mask.regions {
                let _ = writeln!(
                    s,
                    "{} {tag} {} {} {} {}",
                    f.frame_index, r.x1, r.y1, r.x2, r.y2
                );
            }
        }
    }
    s
}

/// Parses a `work.tsv` back into `(frame, per-column values)`.
pub(crate) fn parse_work(text: &str, path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == WORK_HEADER => {}
        _ => bail!("{}: unexpected header", path.display()),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.split('\t')
                .map(|v| {
                    if v == "-" {
                        Ok(f64::NAN)
                    } else {
                        v.parse::<f64>()
                    }
                })
                .collect::<Result<Vec<f64>, _>>()
                .with_context(|| format!("{}: line {}", path.display(), i + 2))
        })
        .collect()
}
