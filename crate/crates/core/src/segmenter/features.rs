use crate::error::{Error, Result};
use crate::filters::{convolve, make_filter_bank_17d, LabChannel, FEATURE_KERNEL_SIZE};
use crate::grid::Grid;
use crate::image::{rgb_to_lab, RasterImage};

pub const FEATURE_LEN: usize = 23;

/// Names in feature order.
pub const FEATURE_NAMES: [&str; FEATURE_LEN] = [
    "R", "G", "B", "L", "a", "b", "G1_L", "G2_L", "G4_L", "G1_a", "G2_a", "G4_a", "G1_b", "G2_b",
    "G4_b", "LoG1_L", "LoG2_L", "LoG4_L", "LoG8_L", "DoG2x_L", "DoG4x_L", "DoG2y_L", "DoG4y_L",
];

/// Per-pixel color and texture descriptor:
/// R, G, B, L, a, b followed by the 17 filter-bank responses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector23(pub [f64; FEATURE_LEN]);

impl FeatureVector23 {
    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Default for FeatureVector23 {
    fn default() -> Self {
        Self([0.0; FEATURE_LEN])
    }
}

/// Feature planes for a whole image, one grid per feature.
#[derive(Debug, Clone)]
pub struct FeatureMaps {
    height: usize,
    width: usize,
    planes: Vec<Grid<f64>>,
}

impl FeatureMaps {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn plane(&self, k: usize) -> &Grid<f64> {
        &self.planes[k]
    }

    pub fn vector(&self, row: usize, col: usize) -> FeatureVector23 {
        let i = row * self.width + col;
        let mut v = [0.0; FEATURE_LEN];
        for (slot, p) in v.iter_mut().zip(&self.planes) {
            *slot = p.as_slice()[i];
        }
        FeatureVector23(v)
    }

    pub fn vectors(&self) -> impl Iterator<Item = FeatureVector23> + '_ {
        (0..self.height * self.width).map(move |i| self.vector(i / self.width, i % self.width))
    }
}

pub fn extract_features(img: &RasterImage) -> Result<FeatureMaps> {
    let (h, w) = (img.height(), img.width());
    if h < FEATURE_KERNEL_SIZE || w < FEATURE_KERNEL_SIZE {
        return Err(Error::ImageTooSmall {
            height: h,
            width: w,
            min_size: FEATURE_KERNEL_SIZE,
        });
    }
    let lab = rgb_to_lab(img)?;
    let mut planes = Vec::with_capacity(FEATURE_LEN);
    for k in 0..3 {
        planes.push(img.channel(k)?);
    }
    let lab_planes = [lab.channel(0)?, lab.channel(1)?, lab.channel(2)?];
    planes.extend(lab_planes.iter().cloned());
    for (kernel, ch) in make_filter_bank_17d() {
        let src = match ch {
            LabChannel::L => &lab_planes[0],
            LabChannel::A => &lab_planes[1],
            LabChannel::B => &lab_planes[2],
        };
        planes.push(convolve(src, &kernel)?);
    }
    debug_assert_eq!(planes.len(), FEATURE_LEN);
    Ok(FeatureMaps {
        height: h,
        width: w,
        planes,
    })
}
