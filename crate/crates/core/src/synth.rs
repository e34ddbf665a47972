//! Synthetic roadside grass scenes with exact ground truth.
//!
//! Stems are anti-aliased near-vertical strokes rising from the bottom edge
//! over a soil and/or sky background. The truth mask marks pixels at least
//! half covered by a stem.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{write_manifest, DensityCategory, ManifestRow};
use crate::grid::Grid;
use crate::image::{save_binary_png, RasterImage, WindowSpec};
use crate::segmenter::GrassMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Background {
    #[default]
    Soil,
    Sky,
    /// Sky above, soil below.
    Mixed,
}

/// Mean colour plus independent per-channel Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorModel {
    pub mean: [f64; 3],
    pub noise_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub stem_count: usize,
    /// Inclusive range of vertical stem extents, in pixels.
    pub stem_height_range: (f64, f64),
    pub stem_width: f64,
    /// Standard deviation of per-stem tilt, in degrees.
    pub stem_angle_jitter: f64,
    /// Number of tussocks stems are grouped into; 0 spreads them uniformly.
    pub clumps: usize,
    /// Standard deviation of stem bases around a tussock centre, in pixels.
    pub clump_spread: f64,
    pub grass_color: ColorModel,
    pub background: Background,
    pub soil_color: ColorModel,
    pub sky_color: ColorModel,
    /// Darkening at stem edges relative to the stem centre, in `[0, 1)`.
    pub stem_shading: f64,
    /// Share of rows given to sky in a mixed background.
    pub sky_fraction: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            width: 96,
            height: 96,
            stem_count: 12,
            stem_height_range: (40.0, 70.0),
            stem_width: 4.0,
            stem_angle_jitter: 2.0,
            clumps: 0,
            clump_spread: 4.0,
            grass_color: ColorModel {
                mean: [200.0, 170.0, 100.0],
                noise_std: 8.0,
            },
            background: Background::Soil,
            soil_color: ColorModel {
                mean: [110.0, 80.0, 60.0],
                noise_std: 8.0,
            },
            sky_color: ColorModel {
                mean: [150.0, 185.0, 230.0],
                noise_std: 4.0,
            },
            sky_fraction: 0.4,
            stem_shading: 0.25,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::SpecInfeasible(m));
        let (lo, hi) = self.stem_height_range;
        if self.width == 0 || self.height == 0 {
            return bad("empty frame".into());
        }
        if !(self.stem_width > 0.0) || self.stem_width > self.width as f64 {
            return bad(format!(
                "stem width {} does not fit a {} pixel frame",
                self.stem_width, self.width
            ));
        }
        if !(lo >= 1.0 && lo <= hi && hi <= self.height as f64) {
            return bad(format!(
                "stem heights {lo}..{hi} outside 1..{}",
                self.height
            ));
        }
        if !(self.stem_angle_jitter >= 0.0 && self.stem_angle_jitter < 45.0) {
            return bad(format!(
                "angle jitter {} outside [0, 45)",
                self.stem_angle_jitter
            ));
        }
        if !(0.0..1.0).contains(&self.stem_shading) {
            return bad(format!("stem shading {} outside [0, 1)", self.stem_shading));
        }
        if !(self.clump_spread >= 0.0) {
            return bad(format!("clump spread {} is negative", self.clump_spread));
        }
        if !(0.0..=1.0).contains(&self.sky_fraction) {
            return bad(format!("sky fraction {} outside [0, 1]", self.sky_fraction));
        }
        for c in [&self.grass_color, &self.soil_color, &self.sky_color] {
            if !(c.noise_std >= 0.0) || c.mean.iter().any(|v| !(0.0..=255.0).contains(v)) {
                return bad("colour model out of range".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Stem {
    base_x: f64,
    top_x: f64,
    /// Vertical extent in pixels.
    height: f64,
    brightness: f64,
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub image: RasterImage,
    pub truth: GrassMask,
    /// Longest vertical run of truth pixels in each column.
    pub height_map: Vec<f64>,
    /// Grass pixels over all pixels.
    pub truth_density: f64,
    /// Mean vertical extent of the drawn stems; 0 without stems.
    pub mean_stem_height: f64,
}

impl Scene {
    /// `c × mean stem height × truth density`.
    pub fn biomass(&self, c: f64) -> f64 {
        c * self.mean_stem_height * self.truth_density
    }
}

fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn segment_distance(px: f64, py: f64, ax: f64, ay: f64, bx: f64, by: f64) -> (f64, f64) {
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (ax + t * dx, ay + t * dy);
    // signed offset across the stem, for shading
    let across = if len2 > 0.0 {
        ((px - ax) * dy - (py - ay) * dx) / len2.sqrt()
    } else {
        0.0
    };
    (((px - cx).powi(2) + (py - cy).powi(2)).sqrt(), across)
}

fn place_stems(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Vec<Stem> {
    let hw = spec.stem_width / 2.0;
    let w = spec.width as f64;
    let tilt = Normal::new(0.0, spec.stem_angle_jitter.max(1e-12)).expect("valid std");
    let (lo, hi) = spec.stem_height_range;
    let centres: Vec<f64> = (0..spec.clumps)
        .map(|_| rng.random_range(hw..=w - hw))
        .collect();
    let spread = Normal::new(0.0, spec.clump_spread.max(1e-12)).expect("valid std");
    (0..spec.stem_count)
        .map(|i| {
            let height = if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                lo
            };
            let mut dx = height * tilt.sample(rng).to_radians().tan();
            let (mut a, mut b) = ((hw).max(hw - dx), (w - hw).min(w - hw - dx));
            if a > b {
                dx = 0.0;
                a = hw;
                b = w - hw;
            }
            let base_x = if centres.is_empty() {
                if b > a {
                    rng.random_range(a..=b)
                } else {
                    a
                }
            } else {
                (centres[i % centres.len()] + spread.sample(rng)).clamp(a, b)
            };
            Stem {
                base_x,
                top_x: base_x + dx,
                height,
                brightness: rng.random_range(0.85..1.15),
            }
        })
        .collect()
}

fn background_color(spec: &SceneSpec, r: usize, c: usize, phase: &[f64; 4]) -> ([f64; 3], f64) {
    let sky_rows = (spec.sky_fraction * spec.height as f64).round() as usize;
    let is_sky = match spec.background {
        Background::Soil => false,
        Background::Sky => true,
        Background::Mixed => r < sky_rows,
    };
    let (y, x) = (r as f64, c as f64);
    if is_sky {
        let shade = 1.0 - 0.1 * y / spec.height as f64;
        let m = spec.sky_color.mean;
        (
            [m[0] * shade, m[1] * shade, m[2] * shade],
            spec.sky_color.noise_std,
        )
    } else {
        // blotchy, direction-free soil texture
        let t = 0.5
            * ((x * 0.21 + y * 0.13 + phase[0]).sin() + (x * 0.09 - y * 0.27 + phase[1]).sin())
            + 0.3 * ((x * 0.43 + phase[2]).sin() * (y * 0.39 + phase[3]).sin());
        let m = spec.soil_color.mean;
        let k = 1.0 + 0.12 * t;
        ([m[0] * k, m[1] * k, m[2] * k], spec.soil_color.noise_std)
    }
}

/// Pure function of the spec.
pub fn render(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let stems = place_stems(spec, &mut rng);
    let phase: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.0..std::f64::consts::TAU));
    let (h, w) = (spec.height, spec.width);
    let hf = h as f64;
    let hw = spec.stem_width / 2.0;
    let mut rgb = Vec::with_capacity(h * w * 3);
    let mut mask = Grid::filled(h, w, false);
    for r in 0..h {
        for c in 0..w {
            let (px, py) = (c as f64 + 0.5, r as f64 + 0.5);
            let mut best: Option<(f64, f64, &Stem)> = None;
            for s in &stems {
                let (d, across) = segment_distance(px, py, s.base_x, hf, s.top_x, hf - s.height);
                let cov = (hw + 0.5 - d).clamp(0.0, 1.0);
                if cov > 0.0 && best.is_none_or(|(bc, _, _)| cov > bc) {
                    best = Some((cov, across, s));
                }
            }
            let (bg, bg_std) = background_color(spec, r, c, &phase);
            let bn = Normal::new(0.0, bg_std.max(1e-12)).expect("valid std");
            let mut px_rgb: [f64; 3] = std::array::from_fn(|k| bg[k] + bn.sample(&mut rng));
            if let Some((cov, across, s)) = best {
                // darker towards the stem edges
                let shade = s.brightness
                    * (1.0 - spec.stem_shading * (across / hw.max(0.5)).powi(2).min(1.0));
                let gn =
                    Normal::new(0.0, spec.grass_color.noise_std.max(1e-12)).expect("valid std");
                let g: [f64; 3] =
                    std::array::from_fn(|k| spec.grass_color.mean[k] * shade + gn.sample(&mut rng));
                for k in 0..3 {
                    px_rgb[k] = px_rgb[k] * (1.0 - cov) + g[k] * cov;
                }
                if cov >= 0.5 {
                    mask.set(r, c, true);
                }
            }
            rgb.extend(px_rgb.map(clamp_u8));
        }
    }
    let image = RasterImage::from_rgb8(h, w, rgb)?;
    let height_map = (0..w)
        .map(|c| {
            let (mut best, mut run) = (0usize, 0usize);
            for r in 0..h {
                run = if mask.at(r, c) { run + 1 } else { 0 };
                best = best.max(run);
            }
            best as f64
        })
        .collect();
    let truth_density = mask.as_slice().iter().filter(|&&b| b).count() as f64 / (h * w) as f64;
    let mean_stem_height = if stems.is_empty() {
        0.0
    } else {
        stems.iter().map(|s| s.height).sum::<f64>() / stems.len() as f64
    };
    Ok(Scene {
        image,
        truth: GrassMask::from_labels(mask),
        height_map,
        truth_density,
        mean_stem_height,
    })
}

/// A patch every pixel of which is grass: stems packed side by side.
pub fn grass_swatch(spec: &SceneSpec, size: usize, seed: u64) -> Result<RasterImage> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gn = Normal::new(0.0, spec.grass_color.noise_std.max(1e-12)).expect("valid std");
    let sw = spec.stem_width.max(1.0);
    let offset = rng.random_range(0.0..sw);
    let n = (size as f64 / sw).ceil() as usize + 2;
    let bright: Vec<f64> = (0..n).map(|_| rng.random_range(0.85..1.15)).collect();
    let mut rgb = Vec::with_capacity(size * size * 3);
    for _r in 0..size {
        for c in 0..size {
            let x = c as f64 + 0.5 + offset;
            let k = (x / sw).floor() as usize;
            let across = (x - (k as f64 + 0.5) * sw) / (sw / 2.0);
            let shade = bright[k.min(n - 1)] * (1.0 - spec.stem_shading * across.powi(2).min(1.0));
            for ch in 0..3 {
                rgb.push(clamp_u8(
                    spec.grass_color.mean[ch] * shade + gn.sample(&mut rng),
                ));
            }
        }
    }
    RasterImage::from_rgb8(size, size, rgb)
}

/// A patch of background with no stems.
pub fn background_swatch(spec: &SceneSpec, size: usize, seed: u64) -> Result<RasterImage> {
    let s = SceneSpec {
        width: size,
        height: size,
        stem_count: 0,
        stem_height_range: (1.0, 1.0),
        stem_width: 1.0,
        seed,
        ..spec.clone()
    };
    Ok(render(&s)?.image)
}

/// Category by tercile of truth density over the whole corpus.
pub fn tercile_categories(densities: &[f64]) -> Vec<DensityCategory> {
    let mut order: Vec<usize> = (0..densities.len()).collect();
    order.sort_by(|&a, &b| densities[a].total_cmp(&densities[b]));
    let n = densities.len();
    let mut out = vec![DensityCategory::Sparse; n];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = if rank * 3 < n {
            DensityCategory::Sparse
        } else if rank * 3 < 2 * n {
            DensityCategory::Moderate
        } else {
            DensityCategory::Dense
        };
    }
    out
}

const CORPUS_STEMS_PER_CLUMP: usize = 5;

/// `n` scenes spread over three stem-count bands, with stem height drawn
/// independently of the band. Stems grow in tussocks of about five.

pub fn default_corpus_specs(n: usize, seed: u64) -> Vec<SceneSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bands = [(5usize, 9usize), (11, 16), (18, 26)];
    (0..n)
        .map(|i| {
            let (lo, hi) = bands[i % 3];
            let centre = rng.random_range(28.0..80.0);
            let background = match rng.random_range(0..4) {
                0 => Background::Mixed,
                _ => Background::Soil,
            };
            let stem_count = rng.random_range(lo..=hi);
            SceneSpec {
                stem_count,
                stem_height_range: (centre - 8.0, centre + 8.0),
                clumps: stem_count.div_ceil(CORPUS_STEMS_PER_CLUMP),
                clump_spread: 4.0,
                stem_angle_jitter: 5.0,
                background,
                seed: rng.random(),
                ..SceneSpec::default()
            }
        })
        .collect()
}

/// Ground-truth record written next to each rendered scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneTruth {
    pub id: String,
    pub truth_density: f64,
    pub mean_stem_height: f64,
    pub biomass: f64,
    pub height_map: Vec<f64>,
    pub spec: SceneSpec,
}

#[derive(Debug, Clone)]
pub struct CorpusSummary {
    pub manifest_path: PathBuf,
    pub rows: Vec<ManifestRow>,
    pub truths: Vec<SceneTruth>,
}

pub const BIOMASS_SCALE: f64 = 1.0;
const SWATCH: usize = 16;

fn write_png(img: &RasterImage, path: &Path) -> Result<()> {
    img.save_png(path)
}

fn mkdir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

/// Writes `images/`, `truth/`, `manifest.csv` and a training corpus with
/// `corpus/grass`, `corpus/nongrass` swatches and `corpus/scenes` image and
/// mask pairs.
pub fn render_corpus(specs: &[SceneSpec], out_dir: impl AsRef<Path>) -> Result<CorpusSummary> {
    let out = out_dir.as_ref();
    let dirs = [
        "images",
        "truth",
        "corpus/grass",
        "corpus/nongrass",
        "corpus/scenes",
    ];
    for d in dirs {
        mkdir(&out.join(d))?;
    }
    let truths = specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let id = format!("S{:03}", i + 1);
            let scene = render(spec)?;
            let img_path = out.join("images").join(format!("{id}.png"));
            write_png(&scene.image, &img_path)?;
            save_binary_png(
                scene.truth.labels(),
                out.join("truth").join(format!("{id}_mask.png")),
            )?;
            write_png(
                &scene.image,
                &out.join("corpus/scenes").join(format!("{id}.png")),
            )?;
            save_binary_png(
                scene.truth.labels(),
                out.join("corpus/scenes").join(format!("{id}_mask.png")),
            )?;
            write_png(
                &grass_swatch(spec, SWATCH, spec.seed ^ 0x9e37)?,
                &out.join("corpus/grass").join(format!("{id}.png")),
            )?;
            write_png(
                &background_swatch(spec, SWATCH, spec.seed ^ 0x7f4a)?,
                &out.join("corpus/nongrass").join(format!("{id}.png")),
            )?;
            let truth = SceneTruth {
                id: id.clone(),
                truth_density: scene.truth_density,
                mean_stem_height: scene.mean_stem_height,
                biomass: scene.biomass(BIOMASS_SCALE),
                height_map: scene.height_map.clone(),
                spec: spec.clone(),
            };
            let json_path = out.join("truth").join(format!("{id}.json"));
            std::fs::write(&json_path, serde_json::to_string_pretty(&truth)?)
                .map_err(|e| Error::io(&json_path, e))?;
            Ok(truth)
        })
        .collect::<Result<Vec<_>>>()?;
    let cats = tercile_categories(&truths.iter().map(|t| t.truth_density).collect::<Vec<_>>());
    let rows: Vec<ManifestRow> = truths
        .iter()
        .zip(&cats)
        .map(|(t, &c)| ManifestRow {
            id: t.id.clone(),
            image_path: Some(PathBuf::from("images").join(format!("{}.png", t.id))),
            window: Some(WindowSpec::full(t.spec.width, t.spec.height)),
            biomass: t.biomass,
            density_category: c,
        })
        .collect();
    let manifest_path = out.join("manifest.csv");
    let f = std::fs::File::create(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    write_manifest(&rows, f)?;
    Ok(CorpusSummary {
        manifest_path,
        rows,
        truths,
    })
}
