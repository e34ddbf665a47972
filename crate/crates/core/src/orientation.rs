//! Dominant texture orientation by voting over Gabor response magnitudes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{make_gabor_bank, response_magnitudes, GaborParams, Kernel2D};
use crate::grid::Grid;
use crate::image::RasterImage;

/// How the scales of one orientation are collapsed to a single magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleAggregation {
    #[default]
    Max,
    Average,
}

/// Magnitude planes, orientation-major: plane `o * n_scales + s`.
#[derive(Debug, Clone)]
pub struct GaborMagnitudes {
    pub n_orientations: usize,
    pub n_scales: usize,
    pub planes: Vec<Grid<f64>>,
}

impl GaborMagnitudes {
    pub fn get(&self, orientation: usize, scale: usize) -> &Grid<f64> {
        &self.planes[orientation * self.n_scales + scale]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrientationMap {
    dominant: Grid<u8>,
    vertical: Grid<bool>,
    vertical_index: usize,
}

impl OrientationMap {
    pub fn new(dominant: Grid<u8>, vertical_index: usize) -> Self {
        let vertical = dominant.map(|&d| d as usize == vertical_index);
        Self {
            dominant,
            vertical,
            vertical_index,
        }
    }

    /// Map with every pixel voted vertical (or none), for tests and masks.
    pub fn uniform(height: usize, width: usize, vertical: bool, vertical_index: usize) -> Self {
        let other = if vertical_index == 0 { 1 } else { 0 };
        let d = if vertical { vertical_index } else { other } as u8;
        Self::new(Grid::filled(height, width, d), vertical_index)
    }

    pub fn from_vertical(vertical: Grid<bool>, vertical_index: usize) -> Self {
        let other = if vertical_index == 0 { 1 } else { 0 } as u8;
        let dominant = vertical.map(|&v| if v { vertical_index as u8 } else { other });
        Self::new(dominant, vertical_index)
    }

    pub fn height(&self) -> usize {
        self.dominant.height()
    }

    pub fn width(&self) -> usize {
        self.dominant.width()
    }

    pub fn dominant(&self) -> &Grid<u8> {
        &self.dominant
    }

    pub fn vertical(&self) -> &Grid<bool> {
        &self.vertical
    }

    pub fn vertical_index(&self) -> usize {
        self.vertical_index
    }

    pub fn vertical_fraction(&self) -> f64 {
        let n = self.vertical.as_slice().iter().filter(|&&v| v).count();
        n as f64 / self.vertical.as_slice().len() as f64
    }

    /// Palette PNG, one fixed color per orientation index (cycled past four).
    pub fn save_palette_png(&self, path: impl AsRef<Path>) -> Result<()> {
        const PALETTE: [[u8; 3]; 4] =
            [[230, 25, 75], [60, 180, 75], [255, 255, 255], [0, 130, 200]];
        let data = self
            .dominant
            .as_slice()
            .iter()
            .flat_map(|&d| PALETTE[d as usize % PALETTE.len()])
            .collect();
        RasterImage::from_rgb8(self.height(), self.width(), data)?.save_png(path)
    }

    /// Vertical pixels white, others black.
    pub fn save_vertical_png(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::image::save_binary_png(&self.vertical, path)
    }
}

/// Prebuilt Gabor bank for repeated use.
#[derive(Debug, Clone)]
pub struct GaborBank {
    params: GaborParams,
    kernels: Vec<Kernel2D>,
}

impl GaborBank {
    pub fn new(params: &GaborParams) -> Result<Self> {
        Ok(Self {
            params: params.clone(),
            kernels: make_gabor_bank(params)?,
        })
    }

    pub fn params(&self) -> &GaborParams {
        &self.params
    }

    pub fn kernels(&self) -> &[Kernel2D] {
        &self.kernels
    }

    pub fn magnitudes(&self, gray: &Grid<f64>) -> Result<GaborMagnitudes> {
        Ok(GaborMagnitudes {
            n_orientations: self.params.n_orientations(),
            n_scales: self.params.n_scales(),
            planes: response_magnitudes(gray, &self.kernels)?,
        })
    }
}

pub fn gabor_magnitudes(gray: &RasterImage, bank: &GaborParams) -> Result<GaborMagnitudes> {
    GaborBank::new(bank)?.magnitudes(&gray.gray_grid()?)
}

/// Collapses scales, giving one plane per orientation.
pub fn max_over_scales(mags: &GaborMagnitudes, mode: ScaleAggregation) -> Vec<Grid<f64>> {
    (0..mags.n_orientations)
        .map(|o| {
            let first = mags.get(o, 0).clone();
            let mut acc = first;
            for s in 1..mags.n_scales {
                let next = mags.get(o, s).as_slice();
                for (a, &b) in acc.as_mut_slice().iter_mut().zip(next) {
                    *a = match mode {
                        ScaleAggregation::Max => a.max(b),
                        ScaleAggregation::Average => *a + b,
                    };
                }
            }
            if mode == ScaleAggregation::Average {
                let n = mags.n_scales as f64;
                acc.as_mut_slice().iter_mut().for_each(|a| *a /= n);
            }
            acc
        })
        .collect()
}

/// Index of the largest magnitude. Ties go to `preferred` when it is among
/// the maxima, otherwise to the lowest tied index.
pub fn vote_dominant(magnitudes: &[f64], preferred: Option<usize>) -> usize {
    let max = magnitudes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if let Some(p) = preferred {
        if magnitudes.get(p) == Some(&max) {
            return p;
        }
    }
    magnitudes.iter().position(|&m| m == max).unwrap_or(0)
}

/// Per-pixel vote over already aggregated orientation planes.
pub fn dominant_from_planes(planes: &[Grid<f64>], preferred: Option<usize>) -> Grid<u8> {
    let (h, w) = planes[0].dims();
    let mut buf = vec![0.0; planes.len()];
    Grid::from_fn(h, w, |r, c| {
        for (b, p) in buf.iter_mut().zip(planes) {
            *b = p.at(r, c);
        }
        vote_dominant(&buf, preferred) as u8
    })
}

/// Dominant orientation index per pixel.
pub fn dominant_orientations(
    gray: &Grid<f64>,
    bank: &GaborBank,
    mode: ScaleAggregation,
    preferred: Option<usize>,
) -> Result<Grid<u8>> {
    let mags = bank.magnitudes(gray)?;
    Ok(dominant_from_planes(
        &max_over_scales(&mags, mode),
        preferred,
    ))
}

/// Square-wave bars `bar_width` pixels wide whose stripes run at
/// `angle_deg` (90° = vertical bars).
pub fn bar_pattern(height: usize, width: usize, angle_deg: f64, bar_width: usize) -> Grid<f64> {
    let (s, c) = angle_deg.to_radians().sin_cos();
    Grid::from_fn(height, width, |r, col| {
        let t = col as f64 * s + r as f64 * c;
        if (t / bar_width as f64).floor().rem_euclid(2.0) == 0.0 {
            255.0
        } else {
            0.0
        }
    })
}

/// Interior pixels: at least half a kernel away from every border.
pub fn interior<T: Copy>(grid: &Grid<T>, margin: usize) -> Vec<T> {
    let (h, w) = grid.dims();
    let mut out = Vec::new();
    for r in margin..h.saturating_sub(margin) {
        for c in margin..w.saturating_sub(margin) {
            out.push(grid.at(r, c));
        }
    }
    out
}

/// Strict modal value, or `None` when the two most common values tie.
pub fn strict_mode(values: &[u8]) -> Option<u8> {
    let mut counts = [0usize; 256];
    for &v in values {
        counts[v as usize] += 1;
    }
    let mut order: Vec<usize> = (0..256).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]));
    (counts[order[0]] > counts[order[1]]).then_some(order[0] as u8)
}

const CALIBRATION_SIZE: usize = 48;
const CALIBRATION_BAR: usize = 3;

/// Modal dominant index over the interior of a synthetic bar image at
/// `angle_deg`.
pub fn calibrate_with_pattern(bank: &GaborParams, angle_deg: f64) -> Result<usize> {
    let gb = GaborBank::new(bank)?;
    let img = bar_pattern(
        CALIBRATION_SIZE,
        CALIBRATION_SIZE,
        angle_deg,
        CALIBRATION_BAR,
    );
    let dom = dominant_orientations(&img, &gb, ScaleAggregation::Max, None)?;
    let inner = interior(&dom, bank.kernel_size / 2);
    strict_mode(&inner).map(|v| v as usize).ok_or_else(|| {
        Error::CalibrationAmbiguous(format!("no strict winner for bars at {angle_deg} degrees"))
    })
}

/// Orientation index that fires on vertical bars.
pub fn calibrate_vertical_index(bank: &GaborParams) -> Result<usize> {
    calibrate_with_pattern(bank, 90.0)
}

pub fn orientation_map(
    gray: &RasterImage,
    bank: &GaborParams,
    mode: ScaleAggregation,
    vertical_index: usize,
) -> Result<OrientationMap> {
    if vertical_index >= bank.n_orientations() {
        return Err(Error::InvalidGaborParams(format!(
            "vertical index {vertical_index} out of range"
        )));
    }
    let gb = GaborBank::new(bank)?;
    orientation_map_with(&gray.gray_grid()?, &gb, mode, vertical_index)
}

pub fn orientation_map_with(
    gray: &Grid<f64>,
    bank: &GaborBank,
    mode: ScaleAggregation,
    vertical_index: usize,
) -> Result<OrientationMap> {
    let dom = dominant_orientations(gray, bank, mode, Some(vertical_index))?;
    Ok(OrientationMap::new(dom, vertical_index))
}
