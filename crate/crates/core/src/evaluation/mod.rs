//! Error statistics, the bundled field-survey table and the parameter sweeps.

mod experiment;
mod stats;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::WindowSpec;

pub use experiment::{
    run_experiment, run_experiment_bundled, CellMode, CellReport, CellSpec, ExperimentPlan,
    ExperimentReport, ExperimentSample, Prediction, SampleIssue, SampleSource, ROTATIONS, WIDTHS,
};
pub use stats::{
    kolmogorov_p, ks_statistic, ks_two_sample, rmse, spearman, KsOutcome, DEFAULT_ALPHA,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityCategory {
    Sparse,
    Moderate,
    Dense,
}

impl DensityCategory {
    pub const ALL: [DensityCategory; 3] = [Self::Sparse, Self::Moderate, Self::Dense];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Sparse => "sparse",
            Self::Moderate => "moderate",
            Self::Dense => "dense",
        }
    }
}

impl fmt::Display for DensityCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DensityCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sparse" => Ok(Self::Sparse),
            "moderate" => Ok(Self::Moderate),
            "dense" => Ok(Self::Dense),
            other => Err(Error::InvalidRaster(format!(
                "unknown density category {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub image_ref: Option<PathBuf>,
    pub dwcgp: Option<f64>,
    /// Tonnes per hectare.
    pub biomass: f64,
    pub density_category: DensityCategory,
}

const SURVEY_CSV: &str = include_str!("../../data/field_survey.csv");

#[derive(Deserialize)]
struct SurveyRow {
    id: String,
    density_category: DensityCategory,
    biomass: f64,
    published_dwcgp: f64,
}

/// The 61 surveyed roadside sites: measured biomass and published DWCGP.
pub fn field_survey() -> Vec<SampleRecord> {
    let mut r = csv::Reader::from_reader(SURVEY_CSV.as_bytes());
    r.deserialize::<SurveyRow>()
        .map(|row| {
            let row = row.expect("bundled table is well formed");
            SampleRecord {
                id: row.id,
                image_ref: None,
                dwcgp: Some(row.published_dwcgp),
                biomass: row.biomass,
                density_category: row.density_category,
            }
        })
        .collect()
}

/// Raw text of the bundled table.
pub fn field_survey_csv() -> &'static str {
    SURVEY_CSV
}

/// Mean of `value` per density category present in `records`.
pub fn category_means(
    records: &[SampleRecord],
    value: impl Fn(&SampleRecord) -> f64,
) -> BTreeMap<DensityCategory, f64> {
    let mut acc: BTreeMap<DensityCategory, (f64, usize)> = BTreeMap::new();
    for r in records {
        let e = acc.entry(r.density_category).or_default();
        e.0 += value(r);
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(k, (s, n))| (k, s / n as f64))
        .collect()
}

/// Each sample predicted as the mean biomass of its density category.
pub fn human_baseline(records: &[SampleRecord]) -> Vec<f64> {
    let means = category_means(records, |r| r.biomass);
    records.iter().map(|r| means[&r.density_category]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub id: String,
    pub image_path: Option<PathBuf>,
    pub window: Option<WindowSpec>,
    pub biomass: f64,
    pub density_category: DensityCategory,
}

#[derive(Serialize, Deserialize)]
struct RawManifestRow {
    id: String,
    image_path: Option<String>,
    window_x: Option<usize>,
    window_y: Option<usize>,
    window_w: Option<usize>,
    window_h: Option<usize>,
    biomass_t_ha: f64,
    density_category: DensityCategory,
}

pub const MANIFEST_HEADER: [&str; 8] = [
    "id",
    "image_path",
    "window_x",
    "window_y",
    "window_w",
    "window_h",
    "biomass_t_ha",
    "density_category",
];

fn parse_manifest<R: std::io::Read>(reader: R, base: Option<&Path>) -> Result<Vec<ManifestRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in r.deserialize::<RawManifestRow>() {
        let row = row?;
        let window = match (row.window_x, row.window_y, row.window_w, row.window_h) {
            (Some(x), Some(y), Some(w), Some(h)) => Some(WindowSpec::new(x, y, w, h)),
            (None, None, None, None) => None,
            _ => {
                return Err(Error::ManifestIncomplete(format!(
                    "{}: partial window",
                    row.id
                )));
            }
        };
        if !(row.biomass_t_ha >= 0.0) {
            return Err(Error::ManifestIncomplete(format!(
                "{}: negative biomass",
                row.id
            )));
        }
        let image_path = row.image_path.filter(|p| !p.trim().is_empty()).map(|p| {
            let p = PathBuf::from(p);
            match base {
                Some(b) if p.is_relative() => b.join(p),
                _ => p,
            }
        });
        out.push(ManifestRow {
            id: row.id,
            image_path,
            window,
            biomass: row.biomass_t_ha,
            density_category: row.density_category,
        });
    }
    Ok(out)
}

/// Reads a manifest; relative image paths resolve against its directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRow>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(file, path.parent())
}

pub fn parse_manifest_str(text: &str) -> Result<Vec<ManifestRow>> {
    parse_manifest(text.as_bytes(), None)
}

pub fn write_manifest<W: Write>(rows: &[ManifestRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(RawManifestRow {
            id: r.id.clone(),
            image_path: r
                .image_path
                .as_ref()
                .map(|p| p.to_string_lossy().into_owned()),
            window_x: r.window.map(|w| w.x0),
            window_y: r.window.map(|w| w.y0),
            window_w: r.window.map(|w| w.width),
            window_h: r.window.map(|w| w.height),
            biomass_t_ha: r.biomass,
            density_category: r.density_category,
        })?;
    }
    if rows.is_empty() {
        w.write_record(MANIFEST_HEADER)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Manifest rows for the bundled table, with no image paths.
pub fn bundled_manifest() -> Vec<ManifestRow> {
    field_survey()
        .into_iter()
        .map(|r| ManifestRow {
            id: r.id,
            image_path: None,
            window: None,
            biomass: r.biomass,
            density_category: r.density_category,
        })
        .collect()
}
