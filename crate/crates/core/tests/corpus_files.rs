//! Rendered corpus on disk, read back through the manifest and scored.

mod common;

use dwcgp_core::evaluation::{read_manifest, run_experiment, ExperimentPlan, ExperimentSample};
use dwcgp_core::firerisk::{road_profile, RiskLabel, RoadFrame};
use dwcgp_core::segmenter::{samples_from_scene_dir, train, TrainingConfig};
use dwcgp_core::synth::{default_corpus_specs, render, render_corpus, SceneSpec};
use dwcgp_core::{PipelineConfig, RasterImage};

#[test]
fn manifest_images_match_in_memory_scenes() {
    let dir = tempfile::tempdir().unwrap();
    let specs = default_corpus_specs(6, 31);
    let summary = render_corpus(&specs, dir.path()).unwrap();
    let rows = read_manifest(&summary.manifest_path).unwrap();
    assert_eq!(rows.len(), 6);
    for (row, spec) in rows.iter().zip(&specs) {
        let on_disk = RasterImage::load(row.image_path.as_ref().unwrap()).unwrap();
        assert_eq!(on_disk, render(spec).unwrap().image, "{}", row.id);
    }

    let p = common::pipeline(PipelineConfig::default());
    let report = run_experiment(&ExperimentSample::from_manifest(&rows), ExperimentPlan::BaselineCompare, &p);
    assert!(report.issues.is_empty(), "{:?}", report.issues);
    let cell = report.cell("dwcgp").unwrap();
    assert_eq!(cell.n_samples, 6);
    assert!(cell.rmse.unwrap().is_finite());
}

#[test]
fn scene_pairs_train_a_usable_model() {
    let dir = tempfile::tempdir().unwrap();
    render_corpus(&default_corpus_specs(4, 5), dir.path()).unwrap();
    let samples = samples_from_scene_dir(dir.path().join("corpus/scenes"), 120, 3).unwrap();
    assert_eq!(samples.len(), 480);
    let model = train(
        &samples,
        &TrainingConfig {
            max_epochs: 30,
            ..TrainingConfig::default()
        },
    )
    .unwrap();
    let scene = render(&SceneSpec {
        seed: 77,
        ..SceneSpec::default()
    })
    .unwrap();
    let p = dwcgp_core::Pipeline::new(PipelineConfig::default(), model).unwrap();
    let mask = p.segment(&scene.image).unwrap();
    let agree = mask
        .labels()
        .as_slice()
        .iter()
        .zip(scene.truth.labels().as_slice())
        .filter(|(a, b)| a == b)
        .count();
    assert!(agree as f64 / mask.labels().as_slice().len() as f64 > 0.9);
}

#[test]
fn road_profile_flags_the_dense_stretch() {
    let p = common::pipeline(PipelineConfig::default());
    let frame = |count: usize, height: f64, seed: u64| {
        render(&SceneSpec {
            width: 200,
            height: 120,
            stem_count: count,
            stem_height_range: (height - 5.0, height + 5.0),
            seed,
            ..SceneSpec::default()
        })
        .unwrap()
        .image
    };
    let plan = [(2, 15.0), (2, 15.0), (80, 100.0), (80, 100.0), (80, 100.0), (2, 15.0)];
    let frames: Vec<RoadFrame> = plan
        .iter()
        .enumerate()
        .map(|(i, &(n, h))| RoadFrame {
            id: format!("f{i}"),
            image: frame(n, h, i as u64),
            chainage: Some(10.0 * i as f64),
        })
        .collect();
    let profile = road_profile(&frames, &p).unwrap();
    let labels: Vec<RiskLabel> = profile.frames.iter().map(|f| f.frame_label).collect();
    assert_eq!(
        labels,
        [RiskLabel::Low, RiskLabel::Low, RiskLabel::High, RiskLabel::High, RiskLabel::High, RiskLabel::Low]
    );
    assert_eq!(profile.segments.len(), 1);
    let seg = &profile.segments[0];
    assert_eq!((seg.start_chainage, seg.end_chainage, seg.frame_count), (20.0, 40.0, 3));
    assert!(profile.frames.iter().all(|f| f.window_outcomes.len() == 15));
}
