//! Roadside grass biomass estimation from single images.
//!
//! Pixels are classified as brown grass by a small neural network over colour
//! and texture features, each pixel gets a dominant orientation from a Gabor
//! bank, and the two maps are reduced to a DWCGP score: the mean over columns
//! of the longest vertical grass run weighted by local grass density. A
//! calibration factor turns the score into tonnes per hectare.

pub mod config;
pub mod dwcgp;
pub mod error;
pub mod evaluation;
pub mod filters;
pub mod firerisk;
pub mod grid;
pub mod image;
pub mod orientation;
pub mod pipeline;
pub mod segmenter;
pub mod synth;

pub use config::PipelineConfig;
pub use dwcgp::{
    calibrate, compute_dwcgp, CalibrationFactor, DwcgpConfig, DwcgpResult, EstimatorMode,
    LengthAggregation,
};
pub use error::{Error, Result};
pub use grid::Grid;
pub use image::{ColorSpace, RasterImage, WindowSpec};
pub use orientation::{OrientationMap, ScaleAggregation};
pub use pipeline::{Analysis, Pipeline};
pub use segmenter::{GrassMask, NetworkModel};
