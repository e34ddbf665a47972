use std::path::PathBuf;

use crate::image::ColorSpace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("expected a {expected:?} image, got {found:?}")]
    InvalidColorSpace {
        expected: ColorSpace,
        found: ColorSpace,
    },
    #[error("invalid raster: {0}")]
    InvalidRaster(String),
    #[error(
        "window ({x0},{y0}) {width}x{height} does not fit in a {image_width}x{image_height} image"
    )]
    WindowOutOfBounds {
        x0: usize,
        y0: usize,
        width: usize,
        height: usize,
        image_width: usize,
        image_height: usize,
    },
    #[error("rotation of {0} degrees is outside [-45, 45]")]
    RotationOutOfRange(f64),
    #[error("image {height}x{width} is smaller than the required {min_size}x{min_size}")]
    ImageTooSmall {
        height: usize,
        width: usize,
        min_size: usize,
    },
    #[error("invalid Gabor parameters: {0}")]
    InvalidGaborParams(String),
    #[error("feature vector contains a non-finite value")]
    NonFiniteInput,
    #[error("degenerate training set: {0}")]
    DegenerateTrainingSet(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("column {column} out of range for width {width}")]
    ColumnOutOfRange { column: usize, width: usize },
    #[error("region width must be odd and >= 1, got {0}")]
    InvalidRegionWidth(usize),
    #[error("calibration requires a positive total DWCGP")]
    DegenerateCalibration,
    #[error("empty input")]
    EmptyInput,
    #[error("manifest incomplete: {0}")]
    ManifestIncomplete(String),
    #[error("orientation calibration is ambiguous: {0}")]
    CalibrationAmbiguous(String),
    #[error("window grid is infeasible: {0}")]
    GridInfeasible(String),
    #[error("chainage must be non-decreasing (frame {frame_id})")]
    ChainageNotMonotonic { frame_id: String },
    #[error("scene spec infeasible: {0}")]
    SpecInfeasible(String),
    #[error("model format: {0}")]
    ModelFormat(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Image(#[from] ::image::ImageError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
