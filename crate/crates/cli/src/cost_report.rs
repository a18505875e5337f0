use std::fmt::Write as _;
use std::io::Write;

use anyhow::{Context, Result};
use catdet_core::evaluate;
use catdet_core::ingest::{read_detections, read_kitti_tracking_labels, ConfigFile, LABELS_FILE};
use catdet_core::metrics::{DelayOutcome, EvalSequence};

use crate::eval_cmd::refused;
use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::run::{parse_work, DETECTIONS_FILE, WORK_FILE};
use crate::{CliError, CostReportArgs};

/// Per-frame sums of one sequence.
#[derive(Debug, Default, Clone, Copy)]
struct Sums {
    frames: usize,
    proposal: f64,
    refine: f64,
    tracker_part: f64,
    proposal_part: f64,
    total: f64,
    time: Option<f64>,
}

impl Sums {
    fn add(&mut self, o: &Sums) {
        self.frames += o.frames;
        self.proposal += o.proposal;
        self.refine += o.refine;
        self.tracker_part += o.tracker_part;
        self.proposal_part += o.proposal_part;
        self.total += o.total;
        self.time = match (self.time, o.time) {
            (Some(a), Some(b)) => Some(a + b),
            (a, b) => a.or(b),
        };
    }

    fn row(&self, name: &str) -> String {
        let n = self.frames.max(1) as f64;
        let time = self
            .time
            .map_or_else(|| "-".to_string(), |t| format!("{:.2}", t / n));
        format!(
            "{:<16} {:>7} {:>10.1} {:>10.1} {:>13.1} {:>14.1} {:>10.1} {:>8}",
            name,
            self.frames,
            self.proposal / n,
            self.refine / n,
            self.tracker_part / n,
            self.proposal_part / n,
            self.total / n,
            time
        )
    }
}

fn sequence_sums(rows: &[Vec<f64>]) -> Sums {
    let mut s = Sums {
        frames: rows.len(),
        ..Sums::default()
    };
    for r in rows {
        s.proposal += r[1];
        s.refine += r[2];
        s.total += r[3];
        s.tracker_part += r[4];
        s.proposal_part += r[5];
        if r[10].is_finite() {
            s.time = Some(s.time.unwrap_or(0.0) + r[10]);
        }
    }
    s
}

pub(crate) fn cmd_cost_report(args: &CostReportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let manifest = RunManifest::read(&args.run.join(MANIFEST_FILE))?;
    let mut text = String::new();
    let mut all = Sums::default();
    let mut rows = Vec::new();
    for input in &manifest.inputs {
        let path = args.run.join(&input.sequence_id).join(WORK_FILE);
        let contents = std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?;
        let sums = sequence_sums(&parse_work(&contents, &path)?);
        all.add(&sums);
        rows.push(sums.row(&input.sequence_id));
    }
    let _ = writeln!(
        text,
        "run {}: mode {}, {} sequence(s), {} frames; per-frame means in Gops",
        args.run.display(),
        manifest.mode,
        manifest.inputs.len(),
        all.frames
    );
    let _ = writeln!(
        text,
        "{:<16} {:>7} {:>10} {:>10} {:>13} {:>14} {:>10} {:>8}",
        "sequence",
        "frames",
        "proposal",
        "refine",
        "tracker-part",
        "proposal-part",
        "total",
        "time"
    );
    for r in rows {
        let _ = writeln!(text, "{r}");
    }
    let _ = writeln!(text, "{}", all.row("all"));

    let mut outcome = Ok(());
    if args.eval {
        let report = evaluate_run(args, &manifest)?;
        let beta = report.beta;
        let _ = writeln!(text);
        let _ = writeln!(
            text,
            "{:<12} {:>8} {:>8} {:>9}",
            "difficulty",
            "ops(G)",
            "mAP",
            format!("mD@{beta}")
        );
        let ops = all.total / all.frames.max(1) as f64;
        for d in &report.difficulties {
            let map = d.map.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
            let md = match &d.delay {
                DelayOutcome::Report(r) => format!("{:.2}", r.mean_delay),
                DelayOutcome::Refused { .. } => "refused".to_string(),
            };
            let _ = writeln!(
                text,
                "{:<12} {:>8.1} {:>8} {:>9}",
                d.difficulty, ops, map, md
            );
        }
        outcome = refused(&report);
    }
    let _ = out.write_all(text.as_bytes());
    outcome
}

fn evaluate_run(args: &CostReportArgs, manifest: &RunManifest) -> Result<catdet_core::EvalReport> {
    let cfg = ConfigFile::parse(&manifest.config)?.resolve()?;
    let mut sequences = Vec::new();
    for input in &manifest.inputs {
        let labels = read_kitti_tracking_labels(&input.path.join(LABELS_FILE), &cfg.classes)?;
        let meta = catdet_core::ingest::SequenceDir::open(&input.path)?;
        let mut ground_truth = labels.ground_truth;
        ground_truth.labeled_frames = meta.meta.labeled_set();
        let dets = read_detections(
            &args.run.join(&input.sequence_id).join(DETECTIONS_FILE),
            &cfg.classes,
        )?;
        sequences.push(EvalSequence {
            ground_truth,
            detections: dets.to_vec(),
        });
    }
    Ok(evaluate(&sequences, &cfg.classes, &cfg.eval)?)
}
