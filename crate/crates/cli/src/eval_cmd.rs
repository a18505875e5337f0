use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;

use anyhow::Context;
use catdet_core::evaluate;
use catdet_core::ingest::{read_detections, read_kitti_tracking_labels};
use catdet_core::metrics::{DelayOutcome, EvalReport, EvalSequence};

use crate::run::load_config;
use crate::{CliError, EvalArgs};

pub(crate) fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if args.labels.len() != args.detections.len() {
        return Err(CliError::Usage(format!(
            "--labels given {} times but --detections {} times; they are paired in order",
            args.labels.len(),
            args.detections.len()
        )));
    }
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(beta) = args.beta {
        cfg.eval.beta = beta;
        cfg.eval
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let labeled: Option<BTreeSet<u32>> = args
        .labeled_frames
        .as_ref()
        .map(|v| v.iter().copied().collect());

    let mut sequences = Vec::with_capacity(args.labels.len());
    for (labels_path, dets_path) in args.labels.iter().zip(&args.detections) {
        let labels = read_kitti_tracking_labels(labels_path, &cfg.classes)?;
        if !labels.unknown_classes.is_empty() {
            let names: Vec<&str> = labels.unknown_classes.iter().map(String::as_str).collect();
            let _ = writeln!(
                out,
                "note: {} has classes outside the class map, not evaluated: {}",
                labels_path.display(),
                names.join(", ")
            );
        }
        let mut ground_truth = labels.ground_truth;
        ground_truth.labeled_frames = labeled.clone();
        let detections = read_detections(dets_path, &cfg.classes)?.to_vec();
        sequences.push(EvalSequence {
            ground_truth,
            detections,
        });
    }

    let report = evaluate(&sequences, &cfg.classes, &cfg.eval).map_err(anyhow::Error::from)?;
    let _ = out.write_all(render_report(&report).as_bytes());

    if let Some(path) = &args.curves {
        std::fs::write(path, curves_text(&report))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    refused(&report)
}

pub(crate) fn refused(report: &EvalReport) -> Result<(), CliError> {
    let reasons: BTreeSet<&str> = report
        .difficulties
        .iter()
        .filter_map(|d| match &d.delay {
            DelayOutcome::Refused { reason } => Some(reason.as_str()),
            DelayOutcome::Report(_) => None,
        })
        .collect();
    if reasons.is_empty() {
        Ok(())
    } else {
        Err(CliError::Refused(
            reasons.into_iter().collect::<Vec<_>>().join("; "),
        ))
    }
}

fn opt4(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

pub(crate) fn render_report(report: &EvalReport) -> String {
    let mut s = String::new();
    for d in &report.difficulties {
        let _ = writeln!(
            s,
            "difficulty {} (AP over {} recall points)",
            d.difficulty, report.ap_recall_points
        );
        let _ = writeln!(
            s,
            "{:<16} {:>8} {:>7} {:>7} {:>7}",
            "class", "AP", "n_gt", "tp", "fp"
        );
        for c in &d.classes {
            let _ = writeln!(
                s,
                "{:<16} {:>8} {:>7} {:>7} {:>7}",
                c.name,
                opt4(c.ap),
                c.n_gt,
                c.tp,
                c.fp
            );
        }
        let _ = writeln!(s, "{:<16} {:>8}", "mAP", opt4(d.map));
        match &d.delay {
            DelayOutcome::Report(r) => {
                let _ = writeln!(
                    s,
                    "delay at beta {}: t_beta {}, mean precision {:.6}",
                    r.beta, r.t_beta, r.mean_precision
                );
                let _ = writeln!(
                    s,
                    "{:<16} {:>12} {:>12} {:>16} {:>7} {:>7}",
                    "class", "precision", "recall", "delay", "tracks", "missed"
                );
                for c in &r.classes {
                    let _ = writeln!(
                        s,
                        "{:<16} {:>12} {:>12} {:>16} {:>7} {:>7}",
                        c.name,
                        format!("{}/{}", c.tp, c.tp + c.fp),
                        format!("{}/{}", c.tp, c.n_gt),
                        format!(
                            "{}/{} = {:.4}",
                            c.total_delay, c.counted_tracks, c.mean_delay
                        ),
                        c.counted_tracks,
                        c.never_detected
                    );
                }
                let _ = writeln!(s, "mD@{} {:.4}", r.beta, r.mean_delay);
                let missed = r.never_detected();
                if missed > 0 {
                    let _ = writeln!(
                        s,
                        "note: {missed} track(s) never detected at t_beta; each counts its full labelled length"
                    );
                }
            }
            DelayOutcome::Refused { reason } => {
                let _ = writeln!(s, "delay: refused ({reason})");
            }
        }
        s.push('\n');
    }
    s
}

pub const CURVES_HEADER: &str =
    "difficulty\tclass\tthreshold\ttp\tfp\tn_gt\tprecision\trecall\tdelay";

/// Every distinct score cut-point per class, threshold ascending.
pub(crate) fn curves_text(report: &EvalReport) -> String {
    let mut s = String::from(CURVES_HEADER);
    s.push('\n');
    for d in &report.difficulties {
        for (curve, ap) in d.curves.iter().zip(&d.classes) {
            for row in &curve.rows {
                let delay = row.delay.map_or_else(|| "-".to_string(), |v| v.to_string());
                let _ = writeln!(
                    s,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    d.difficulty,
                    curve.name,
                    row.threshold,
                    row.tp,
                    row.fp,
                    ap.n_gt,
                    row.precision,
                    row.recall,
                    delay
                );
            }
        }
    }
    s
}
