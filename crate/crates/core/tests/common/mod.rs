#![allow(dead_code)]

use std::sync::OnceLock;

use dwcgp_core::evaluation::{ExperimentSample, SampleSource};
use dwcgp_core::segmenter::{samples_from_labeled_image, train_with_report, TrainingReport};
use dwcgp_core::synth::{default_corpus_specs, render, tercile_categories, Scene, SceneSpec};
use dwcgp_core::{NetworkModel, Pipeline, PipelineConfig};

pub const TRAIN_SEED: u64 = 1001;
pub const HELD_OUT_SEED: u64 = 2002;
pub const HELD_OUT_SCENES: usize = 60;
const TRAIN_SCENES: usize = 12;
const PIXELS_PER_SCENE: usize = 150;

pub struct Trained {
    pub model: NetworkModel,
    pub report: TrainingReport,
}

pub fn trained() -> &'static Trained {
    static CELL: OnceLock<Trained> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = PipelineConfig::default();
        let mut samples = Vec::new();
        for (k, spec) in default_corpus_specs(TRAIN_SCENES, TRAIN_SEED)
            .iter()
            .enumerate()
        {
            let scene = render(spec).unwrap();
            samples.extend(
                samples_from_labeled_image(
                    &scene.image,
                    scene.truth.labels(),
                    Some(PIXELS_PER_SCENE),
                    k as u64,
                )
                .unwrap(),
            );
        }
        let (model, report) = train_with_report(&samples, &cfg.training_config()).unwrap();
        Trained { model, report }
    })
}

pub fn pipeline(cfg: PipelineConfig) -> Pipeline {
    Pipeline::new(cfg, trained().model.clone()).unwrap()
}

pub struct HeldOut {
    pub specs: Vec<SceneSpec>,
    pub scenes: Vec<Scene>,
}

pub fn held_out() -> &'static HeldOut {
    static CELL: OnceLock<HeldOut> = OnceLock::new();
    CELL.get_or_init(|| {
        let specs = default_corpus_specs(HELD_OUT_SCENES, HELD_OUT_SEED);
        let scenes = specs.iter().map(|s| render(s).unwrap()).collect();
        HeldOut { specs, scenes }
    })
}

/// Held-out scenes as experiment samples with height x density truth.
pub fn held_out_samples() -> Vec<ExperimentSample> {
    let h = held_out();
    let cats = tercile_categories(&h.scenes.iter().map(|s| s.truth_density).collect::<Vec<_>>());
    h.scenes
        .iter()
        .zip(cats)
        .enumerate()
        .map(|(i, (s, c))| ExperimentSample {
            id: format!("H{i:03}"),
            biomass: s.biomass(1.0),
            category: c,
            source: SampleSource::Image {
                image: s.image.clone(),
                window: None,
            },
        })
        .collect()
}
