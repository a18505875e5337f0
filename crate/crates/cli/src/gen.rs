use std::io::Write;

use catdet_core::ingest::{
    generate_synthetic, write_detections, write_kitti_tracking_labels, SyntheticScenario,
    LABELS_FILE, META_FILE, PROPOSAL_FILE, REFINEMENT_FILE,
};

use crate::output::OutputSet;
use crate::run::load_config;
use crate::{CliError, GenArgs};

pub(crate) fn cmd_gen(args: &GenArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_config(args.config.as_deref())?;
    let mut scenario = SyntheticScenario::read(&args.scenario).map_err(anyhow::Error::from)?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let generated = generate_synthetic(&scenario, &cfg.classes).map_err(anyhow::Error::from)?;

    let mut set = OutputSet::default();
    set.add(META_FILE, generated.meta.to_toml());
    set.add(
        LABELS_FILE,
        write_kitti_tracking_labels(&generated.ground_truth),
    );
    set.add(
        PROPOSAL_FILE,
        write_detections(&generated.proposal, &cfg.classes),
    );
    set.add(
        REFINEMENT_FILE,
        write_detections(&generated.refinement, &cfg.classes),
    );
    set.commit(&args.out)?;

    let _ = writeln!(
        out,
        "{}: {} frames, {} tracks, {} proposal and {} refinement detections (seed {}) -> {}",
        generated.meta.sequence_id,
        generated.meta.frame_count,
        generated.ground_truth.tracks.len(),
        generated.proposal.len(),
        generated.refinement.len(),
        scenario.seed,
        args.out.display()
    );
    Ok(())
}
