//! Brown-grass pixel classification.

mod features;
mod network;
mod train;

use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::image::RasterImage;

pub use features::{extract_features, FeatureMaps, FeatureVector23, FEATURE_LEN, FEATURE_NAMES};
pub use network::{tansig, FeatureNorm, NetworkModel, DEFAULT_HIDDEN};
pub use train::{
    fit_feature_norm, mse, residual_jacobian, residuals, train, train_with_report, Algorithm,
    LabeledSample, StopReason, TrainingConfig, TrainingReport,
};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Per-pixel grass labels with the probabilities they were thresholded from.
#[derive(Debug, Clone, PartialEq)]
pub struct GrassMask {
    labels: Grid<bool>,
    probabilities: Grid<f64>,
}

impl GrassMask {
    pub fn from_probabilities(probabilities: Grid<f64>, threshold: f64) -> Self {
        let labels = probabilities.map(|&p| p >= threshold);
        Self {
            labels,
            probabilities,
        }
    }

    /// Mask from known labels; probabilities are 1 for grass, 0 otherwise.
    pub fn from_labels(labels: Grid<bool>) -> Self {
        let probabilities = labels.map(|&b| if b { 1.0 } else { 0.0 });
        Self {
            labels,
            probabilities,
        }
    }

    pub fn height(&self) -> usize {
        self.labels.height()
    }

    pub fn width(&self) -> usize {
        self.labels.width()
    }

    pub fn labels(&self) -> &Grid<bool> {
        &self.labels
    }

    pub fn probabilities(&self) -> &Grid<f64> {
        &self.probabilities
    }

    pub fn grass_count(&self) -> usize {
        self.labels.as_slice().iter().filter(|&&b| b).count()
    }

    /// Re-threshold the stored probabilities.
    pub fn with_threshold(&self, threshold: f64) -> Self {
        Self::from_probabilities(self.probabilities.clone(), threshold)
    }
}

/// Probabilities for every pixel of a feature map.
pub fn predict(model: &NetworkModel, features: &FeatureMaps) -> Result<Grid<f64>> {
    let (h, w) = (features.height(), features.width());
    let rows: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map(|r| {
            (0..w)
                .map(|c| model.forward(&features.vector(r, c)))
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;
    Grid::from_vec(h, w, rows.concat())
}

pub fn classify(model: &NetworkModel, img: &RasterImage, threshold: f64) -> Result<GrassMask> {
    let features = extract_features(img)?;
    Ok(GrassMask::from_probabilities(
        predict(model, &features)?,
        threshold,
    ))
}

/// Up to `max` labeled pixels drawn without replacement from an image and its
/// ground-truth labels. `max = None` keeps every pixel.
pub fn samples_from_labeled_image(
    img: &RasterImage,
    labels: &Grid<bool>,
    max: Option<usize>,
    seed: u64,
) -> Result<Vec<LabeledSample>> {
    if labels.dims() != (img.height(), img.width()) {
        return Err(Error::ShapeMismatch(
            "labels and image differ in size".into(),
        ));
    }
    let features = extract_features(img)?;
    let n = img.height() * img.width();
    let w = img.width();
    let pick: Vec<usize> = match max {
        Some(m) if m < n => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = sample(&mut rng, n, m).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..n).collect(),
    };
    Ok(pick
        .into_iter()
        .map(|i| (features.vector(i / w, i % w), labels.at(i / w, i % w)))
        .collect())
}

/// Every pixel of every PNG under `dir/grass` (label 1) and `dir/nongrass`
/// (label 0). Files are visited in name order; other folders are ignored.
pub fn samples_from_corpus_dir(dir: impl AsRef<Path>) -> Result<Vec<LabeledSample>> {
    let dir = dir.as_ref();
    let mut out = Vec::new();
    for (sub, label) in [("grass", true), ("nongrass", false)] {
        let path = dir.join(sub);
        if !path.is_dir() {
            continue;
        }
        let mut files: Vec<_> = std::fs::read_dir(&path)
            .map_err(|e| Error::io(&path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
            .collect();
        files.sort();
        for f in files {
            let img = RasterImage::load(&f)?;
            let feats = extract_features(&img)?;
            out.extend(feats.vectors().map(|v| (v, label)));
        }
    }
    Ok(out)
}

/// Loads a binary mask PNG: any pixel brighter than mid-gray is set.
pub fn load_mask(path: impl AsRef<Path>) -> Result<Grid<bool>> {
    let img = RasterImage::load(path)?;
    let data = img.rgb8_data()?;
    let cells = data
        .chunks_exact(3)
        .map(|p| p.iter().any(|&v| v > 127))
        .collect();
    Grid::from_vec(img.height(), img.width(), cells)
}

/// Labeled pixels from `<id>.png` and `<id>_mask.png` pairs, at most
/// `per_image` from each scene.
pub fn samples_from_scene_dir(
    dir: impl AsRef<Path>,
    per_image: usize,
    seed: u64,
) -> Result<Vec<LabeledSample>> {
    let dir = dir.as_ref();
    let mut masks: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with("_mask.png"))
        .collect();
    masks.sort();
    let mut out = Vec::new();
    for (k, m) in masks.iter().enumerate() {
        let name = m
            .file_name()
            .unwrap_or_default()
            .to_string_lossy()
            .replace("_mask.png", ".png");
        let img = RasterImage::load(dir.join(name))?;
        let labels = load_mask(m)?;
        out.extend(samples_from_labeled_image(
            &img,
            &labels,
            Some(per_image),
            seed.wrapping_add(k as u64),
        )?);
    }
    Ok(out)
}

/// Deterministic subsample of at most `max` samples, order preserved.
pub fn subsample(samples: &[LabeledSample], max: usize, seed: u64) -> Vec<LabeledSample> {
    if samples.len() <= max {
        return samples.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, samples.len(), max).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| samples[i]).collect()
}
