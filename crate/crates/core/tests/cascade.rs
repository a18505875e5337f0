use catdet_core::ingest::{
    generate_synthetic, DetectionStore, SequenceDir, SyntheticOutput, SyntheticScenario,
};
use catdet_core::{ClassMap, Mode, Pipeline, PipelineConfig, SequenceResult};

fn scenario(seed: u64) -> SyntheticOutput {
    let text = format!(
        r#"
sequence_id = "prop"
frame_count = 40
seed = {seed}

[random_objects]
count = 8
classes = ["Car", "Pedestrian"]
min_frames = 5
max_frames = 30
max_speed = 8.0

[proposal]
miss_prob = 0.2
fp_rate = 2.0
jitter = 0.1
tp_score = [0.05, 1.0]
fp_score = [0.0, 0.7]

[refinement]
miss_prob = 0.05
fp_rate = 0.5
jitter = 0.03
tp_score = [0.5, 1.0]
fp_score = [0.0, 0.6]
"#
    );
    let scenario = SyntheticScenario::parse(&text).unwrap();
    generate_synthetic(&scenario, &ClassMap::kitti()).unwrap()
}

fn run(data: &SyntheticOutput, cfg: PipelineConfig) -> SequenceResult {
    let mut p = Pipeline::file_backed(
        cfg,
        ClassMap::kitti(),
        &data.meta,
        data.proposal.clone(),
        data.refinement.clone(),
    )
    .unwrap();
    p.run_sequence(0..data.meta.frame_count).unwrap()
}

fn with(mode: Mode, c_thresh: f64) -> PipelineConfig {
    PipelineConfig {
        mode,
        c_thresh,
        ..PipelineConfig::default()
    }
}

#[test]
fn final_detections_lie_inside_the_mask() {
    for seed in 0..10 {
        let data = scenario(seed);
        for f in run(&data, with(Mode::Catdet, 0.3)).frames {
            for d in &f.final_detections {
                assert!(
                    f.mask.coverage_of(&d.bbox) >= 0.5,
                    "seed {seed} frame {}",
                    f.frame_index
                );
            }
            assert_eq!(
                f.mask.regions.len(),
                f.tracker_mask.regions.len() + f.proposal_mask.regions.len()
            );
        }
    }
}

#[test]
fn refinement_work_is_subadditive_every_frame() {
    for seed in 0..10 {
        let data = scenario(seed);
        for f in run(&data, with(Mode::Catdet, 0.5)).frames {
            let w = &f.work;
            assert!(w.refine_ops <= w.refine_from_tracker_ops + w.refine_from_proposal_ops + 1e-9);
            assert!((w.total_ops - w.proposal_ops - w.refine_ops).abs() < 1e-9);
        }
    }
}

#[test]
fn raising_the_proposal_threshold_never_adds_cascade_work() {
    for seed in 0..10 {
        let data = scenario(seed);
        let mut previous = f64::INFINITY;
        for c in [0.0, 0.2, 0.4, 0.6, 0.8, 1.0] {
            let ops = run(&data, with(Mode::Cascaded, c)).mean_work().total_ops;
            assert!(
                ops <= previous + 1e-9,
                "seed {seed}: ops rose to {ops} at c={c}"
            );
            previous = ops;
        }
    }
}

#[test]
fn single_mode_ignores_the_proposal_recording() {
    let data = scenario(3);
    let a = run(&data, with(Mode::Single, 0.5));
    let mut without = data.clone();
    without.proposal = DetectionStore::new();
    let b = run(&without, with(Mode::Single, 0.9));
    assert_eq!(a.detections(), b.detections());
    assert_eq!(a.totals, b.totals);
}

#[test]
fn catdet_finds_at_least_what_the_cascade_finds_in_its_mask() {
    // The tracker only adds regions, so each cascaded mask is covered by the
    // catdet mask of the same frame while the two runs agree.
    let data = scenario(5);
    let cascaded = run(&data, with(Mode::Cascaded, 0.5));
    let catdet = run(&data, with(Mode::Catdet, 0.5));
    for (a, b) in cascaded.frames.iter().zip(&catdet.frames) {
        assert_eq!(a.proposal_mask, b.proposal_mask);
        assert!(b.mask.covered_area() + 1e-9 >= a.mask.covered_area());
    }
}

#[test]
fn sequence_directories_round_trip_through_disk() {
    let data = scenario(11);
    let tmp = tempfile::tempdir().unwrap();
    let classes = ClassMap::kitti();
    data.write_to_dir(tmp.path(), &classes).unwrap();
    let dir = SequenceDir::open(tmp.path()).unwrap();
    assert_eq!(dir.meta, data.meta);
    assert_eq!(
        dir.labels(&classes).unwrap().ground_truth,
        data.ground_truth
    );
    assert_eq!(dir.proposal(&classes).unwrap(), data.proposal);
    assert_eq!(dir.refinement(&classes).unwrap(), data.refinement);
}
