use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use super::stats::{ks_two_sample, rmse, KsOutcome, DEFAULT_ALPHA};
use super::{category_means, field_survey, DensityCategory, ManifestRow, SampleRecord};
use crate::config::PipelineConfig;
use crate::dwcgp::{calibrate, DwcgpConfig, EstimatorMode, LengthAggregation};
use crate::error::{Error, Result};
use crate::image::{crop, rotate, RasterImage, WindowSpec};
use crate::orientation::ScaleAggregation;
use crate::pipeline::{Analysis, Pipeline};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExperimentPlan {
    RotationSweep,
    WidthSweep,
    GaborModeGrid,
    BaselineCompare,
}

impl ExperimentPlan {
    pub fn name(self) -> &'static str {
        match self {
            Self::RotationSweep => "rotation_sweep",
            Self::WidthSweep => "width_sweep",
            Self::GaborModeGrid => "gabor_mode_grid",
            Self::BaselineCompare => "baseline_compare",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [
            Self::RotationSweep,
            Self::WidthSweep,
            Self::GaborModeGrid,
            Self::BaselineCompare,
        ]
        .into_iter()
        .find(|p| p.name() == s.replace('-', "_"))
    }
}

#[derive(Debug, Clone)]
pub enum SampleSource {
    Image {
        image: RasterImage,
        window: Option<WindowSpec>,
    },
    File {
        path: PathBuf,
        window: Option<WindowSpec>,
    },
    /// A precomputed DWCGP value with no image behind it.
    Dwcgp(f64),
    /// Nothing to measure; the reason is reported.
    Missing(String),
}

#[derive(Debug, Clone)]
pub struct ExperimentSample {
    pub id: String,
    pub biomass: f64,
    pub category: DensityCategory,
    pub source: SampleSource,
}

impl ExperimentSample {
    /// Rows without an image take the bundled DWCGP of the same id.
    pub fn from_manifest(rows: &[ManifestRow]) -> Vec<Self> {
        let bundled: HashMap<String, f64> = field_survey()
            .into_iter()
            .filter_map(|r| Some((r.id, r.dwcgp?)))
            .collect();
        rows.iter()
            .map(|r| {
                let source = match &r.image_path {
                    Some(p) => SampleSource::File {
                        path: p.clone(),
                        window: r.window,
                    },
                    None => match bundled.get(&r.id) {
                        Some(&d) => SampleSource::Dwcgp(d),
                        None => SampleSource::Missing(format!(
                            "no image and no bundled value for {}",
                            r.id
                        )),
                    },
                };
                Self {
                    id: r.id.clone(),
                    biomass: r.biomass,
                    category: r.density_category,
                    source,
                }
            })
            .collect()
    }

    /// Samples backed by the bundled table values.
    pub fn bundled() -> Vec<Self> {
        field_survey()
            .into_iter()
            .map(|r| Self {
                id: r.id,
                biomass: r.biomass,
                category: r.density_category,
                source: SampleSource::Dwcgp(r.dwcgp.unwrap_or_default()),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CellMode {
    Dwcgp,
    Vocgp,
    Human,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSpec {
    pub label: String,
    pub rotation_deg: f64,
    pub region_width: usize,
    pub scale_aggregation: ScaleAggregation,
    pub length_agg: LengthAggregation,
    pub mode: CellMode,
}

impl CellSpec {
    fn dwcgp_config(&self, base: &DwcgpConfig) -> DwcgpConfig {
        DwcgpConfig {
            mode: match self.mode {
                CellMode::Vocgp => EstimatorMode::Vocgp,
                _ => EstimatorMode::Dwcgp,
            },
            length_agg: self.length_agg,
            region_width: self.region_width,
            border: base.border,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub id: String,
    /// Absent for the category-mean baseline.
    pub dwcgp: Option<f64>,
    pub predicted: f64,
    pub biomass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub spec: CellSpec,
    pub n_samples: usize,
    pub calibration_a: Option<f64>,
    pub rmse: Option<f64>,
    pub ks: Option<KsOutcome>,
    pub predictions: Vec<Prediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleIssue {
    pub id: String,
    pub cell: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config: PipelineConfig,
    pub cells: Vec<CellReport>,
    pub issues: Vec<SampleIssue>,
}

impl ExperimentReport {
    pub fn cell(&self, label: &str) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.spec.label == label)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per cell.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "experiment",
            "cell",
            "rotation_deg",
            "region_width",
            "scale_aggregation",
            "length_agg",
            "mode",
            "n_samples",
            "calibration_a",
            "rmse",
            "ks_statistic",
            "ks_p_value",
            "ks_reject_h0",
        ])?;
        for c in &self.cells {
            let s = &c.spec;
            w.write_record([
                self.experiment.clone(),
                s.label.clone(),
                s.rotation_deg.to_string(),
                s.region_width.to_string(),
                format!("{:?}", s.scale_aggregation).to_lowercase(),
                format!("{:?}", s.length_agg).to_lowercase(),
                format!("{:?}", s.mode).to_lowercase(),
                c.n_samples.to_string(),
                opt(c.calibration_a),
                opt(c.rmse),
                opt(c.ks.map(|k| k.statistic)),
                opt(c.ks.map(|k| k.p_value)),
                c.ks.map(|k| k.reject_h0.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Per-sample predictions of every cell.
    pub fn write_predictions_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["cell", "id", "dwcgp", "predicted", "biomass"])?;
        for c in &self.cells {
            for p in &c.predictions {
                w.write_record([
                    c.spec.label.clone(),
                    p.id.clone(),
                    p.dwcgp.map(|d| d.to_string()).unwrap_or_default(),
                    p.predicted.to_string(),
                    p.biomass.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

pub const ROTATIONS: [f64; 5] = [-10.0, -5.0, 0.0, 5.0, 10.0];
pub const WIDTHS: [usize; 5] = [1, 3, 5, 7, 9];

fn cells_for(plan: ExperimentPlan, cfg: &PipelineConfig) -> Vec<CellSpec> {
    let base = CellSpec {
        label: String::new(),
        rotation_deg: 0.0,
        region_width: cfg.dwcgp.region_width,
        scale_aggregation: cfg.gabor.scale_aggregation,
        length_agg: cfg.dwcgp.length_agg,
        mode: match cfg.dwcgp.mode {
            EstimatorMode::Dwcgp => CellMode::Dwcgp,
            EstimatorMode::Vocgp => CellMode::Vocgp,
        },
    };
    match plan {
        ExperimentPlan::RotationSweep => ROTATIONS
            .iter()
            .map(|&r| CellSpec {
                label: format!("rotation_{r}"),
                rotation_deg: r,
                ..base.clone()
            })
            .collect(),
        ExperimentPlan::WidthSweep => WIDTHS
            .iter()
            .map(|&w| CellSpec {
                label: format!("width_{w}"),
                region_width: w,
                ..base.clone()
            })
            .collect(),
        ExperimentPlan::GaborModeGrid => [ScaleAggregation::Max, ScaleAggregation::Average]
            .into_iter()
            .flat_map(|s| {
                let base = base.clone();
                [LengthAggregation::Longest, LengthAggregation::Sum]
                    .into_iter()
                    .map(move |l| CellSpec {
                        label: format!("{s:?}_{l:?}").to_lowercase(),
                        scale_aggregation: s,
                        length_agg: l,
                        ..base.clone()
                    })
            })
            .collect(),
        ExperimentPlan::BaselineCompare => [CellMode::Dwcgp, CellMode::Vocgp, CellMode::Human]
            .into_iter()
            .map(|m| CellSpec {
                label: format!("{m:?}").to_lowercase(),
                mode: m,
                ..base.clone()
            })
            .collect(),
    }
}

type CellValues = Vec<std::result::Result<f64, String>>;

/// DWCGP of one sample for every non-baseline cell.
fn measure(
    sample: &ExperimentSample,
    cells: &[CellSpec],
    pipeline: Option<&Pipeline>,
    cfg: &PipelineConfig,
) -> CellValues {
    let fail = |msg: String| {
        cells
            .iter()
            .map(|_| Err(msg.clone()))
            .collect::<CellValues>()
    };
    let (image, window) = match &sample.source {
        SampleSource::Missing(m) => return fail(m.clone()),
        SampleSource::Dwcgp(d) => {
            // published values were measured with the default estimator
            let plain =
                cells_for(ExperimentPlan::BaselineCompare, &PipelineConfig::default()).remove(0);
            return cells
                .iter()
                .map(|c| {
                    if *c == (CellSpec { label: c.label.clone(), ..plain.clone() }) {
                        Ok(*d)
                    } else {
                        Err("precomputed value only covers the default estimator; this cell needs an image".into())
                    }
                })
                .collect();
        }
        SampleSource::Image { image, window } => (std::borrow::Cow::Borrowed(image), *window),
        SampleSource::File { path, window } => match RasterImage::load(path) {
            Ok(img) => (std::borrow::Cow::Owned(img), *window),
            Err(e) => return fail(format!("cannot load {}: {e}", path.display())),
        },
    };
    let Some(p) = pipeline else {
        return fail("no segmentation model configured".into());
    };
    let mut cache: HashMap<(i64, ScaleAggregation), std::result::Result<Analysis, String>> =
        HashMap::new();
    let mut analyse =
        |rotation: f64, agg: ScaleAggregation| -> std::result::Result<Analysis, String> {
            let key = ((rotation * 1000.0).round() as i64, agg);
            cache
                .entry(key)
                .or_insert_with(|| {
                    let rotated = if rotation == 0.0 {
                        image.as_ref().clone()
                    } else {
                        rotate(&image, rotation).map_err(|e| e.to_string())?
                    };
                    let view = match window {
                        Some(w) => crop(&rotated, &w).map_err(|e| e.to_string())?,
                        None => rotated,
                    };
                    let mask = p.segment(&view).map_err(|e| e.to_string())?;
                    let orientation = p
                        .orient_modes(&view, &[agg])
                        .map_err(|e| e.to_string())?
                        .remove(0);
                    Ok(Analysis { mask, orientation })
                })
                .clone()
        };
    cells
        .iter()
        .map(|c| {
            let a = analyse(c.rotation_deg, c.scale_aggregation)?;
            a.dwcgp(&c.dwcgp_config(&cfg.dwcgp))
                .map(|r| r.dwcgp)
                .map_err(|e| e.to_string())
        })
        .collect()
}

fn ks_or_none(pred: &[f64], truth: &[f64]) -> Option<KsOutcome> {
    ks_two_sample(pred, truth, DEFAULT_ALPHA).ok()
}

fn run(
    samples: &[ExperimentSample],
    plan: ExperimentPlan,
    cfg: &PipelineConfig,
    pipeline: Option<&Pipeline>,
) -> ExperimentReport {
    let cells = cells_for(plan, cfg);
    let measured: Vec<CellSpec> = cells
        .iter()
        .filter(|c| c.mode != CellMode::Human)
        .cloned()
        .collect();
    let values: Vec<CellValues> = samples
        .par_iter()
        .map(|s| measure(s, &measured, pipeline, cfg))
        .collect();
    let mut issues = Vec::new();
    let mut reports = Vec::new();
    let mut k = 0;
    for cell in &cells {
        if cell.mode == CellMode::Human {
            let records: Vec<SampleRecord> = samples
                .iter()
                .map(|s| SampleRecord {
                    id: s.id.clone(),
                    image_ref: None,
                    dwcgp: None,
                    biomass: s.biomass,
                    density_category: s.category,
                })
                .collect();
            let means = category_means(&records, |r| r.biomass);
            let predictions: Vec<Prediction> = samples
                .iter()
                .map(|s| Prediction {
                    id: s.id.clone(),
                    dwcgp: None,
                    predicted: means[&s.category],
                    biomass: s.biomass,
                })
                .collect();
            reports.push(finish(cell.clone(), None, predictions));
            continue;
        }
        let mut pairs = Vec::new();
        for (s, v) in samples.iter().zip(&values) {
            match &v[k] {
                Ok(d) => pairs.push((s, *d)),
                Err(m) => issues.push(SampleIssue {
                    id: s.id.clone(),
                    cell: Some(cell.label.clone()),
                    message: m.clone(),
                }),
            }
        }
        k += 1;
        let calib: Vec<(f64, f64)> = pairs.iter().map(|(s, d)| (*d, s.biomass)).collect();
        match calibrate(&calib) {
            Ok(a) => {
                let predictions = pairs
                    .iter()
                    .map(|(s, d)| Prediction {
                        id: s.id.clone(),
                        dwcgp: Some(*d),
                        predicted: a.estimate(*d),
                        biomass: s.biomass,
                    })
                    .collect();
                reports.push(finish(cell.clone(), Some(a.a), predictions));
            }
            Err(e) => {
                if !pairs.is_empty() {
                    issues.push(SampleIssue {
                        id: String::new(),
                        cell: Some(cell.label.clone()),
                        message: e.to_string(),
                    });
                }
                reports.push(CellReport {
                    spec: cell.clone(),
                    n_samples: pairs.len(),
                    calibration_a: None,
                    rmse: None,
                    ks: None,
                    predictions: Vec::new(),
                });
            }
        }
    }
    ExperimentReport {
        experiment: plan.name().to_string(),
        config: cfg.clone(),
        cells: reports,
        issues,
    }
}

fn finish(spec: CellSpec, a: Option<f64>, predictions: Vec<Prediction>) -> CellReport {
    let pred: Vec<f64> = predictions.iter().map(|p| p.predicted).collect();
    let truth: Vec<f64> = predictions.iter().map(|p| p.biomass).collect();
    CellReport {
        spec,
        n_samples: predictions.len(),
        calibration_a: a,
        rmse: rmse(&pred, &truth).ok(),
        ks: ks_or_none(&pred, &truth),
        predictions,
    }
}

/// Runs a plan through the full image pipeline. Each cell is calibrated on
/// its own samples; samples that cannot be measured are listed in `issues`.
pub fn run_experiment(
    samples: &[ExperimentSample],
    plan: ExperimentPlan,
    pipeline: &Pipeline,
) -> ExperimentReport {
    run(samples, plan, pipeline.config(), Some(pipeline))
}

/// Runs a plan with precomputed values only; image-backed samples are
/// reported as issues.
pub fn run_experiment_bundled(
    samples: &[ExperimentSample],
    plan: ExperimentPlan,
    cfg: &PipelineConfig,
) -> ExperimentReport {
    run(samples, plan, cfg, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_layouts() {
        let cfg = PipelineConfig::default();
        assert_eq!(cells_for(ExperimentPlan::RotationSweep, &cfg).len(), 5);
        let w: Vec<usize> = cells_for(ExperimentPlan::WidthSweep, &cfg)
            .iter()
            .map(|c| c.region_width)
            .collect();
        assert_eq!(w, WIDTHS);
        let g: Vec<String> = cells_for(ExperimentPlan::GaborModeGrid, &cfg)
            .into_iter()
            .map(|c| c.label)
            .collect();
        assert_eq!(
            g,
            ["max_longest", "max_sum", "average_longest", "average_sum"]
        );
        let b: Vec<CellMode> = cells_for(ExperimentPlan::BaselineCompare, &cfg)
            .iter()
            .map(|c| c.mode)
            .collect();
        assert_eq!(b, [CellMode::Dwcgp, CellMode::Vocgp, CellMode::Human]);
        assert_eq!(
            ExperimentPlan::from_name("width-sweep"),
            Some(ExperimentPlan::WidthSweep)
        );
    }

    #[test]
    fn bundled_baseline_compare() {
        let r = run_experiment_bundled(
            &ExperimentSample::bundled(),
            ExperimentPlan::BaselineCompare,
            &PipelineConfig::default(),
        );
        let d = r.cell("dwcgp").unwrap();
        assert_eq!(d.n_samples, 61);
        let mean_pred = d.predictions.iter().map(|p| p.predicted).sum::<f64>() / 61.0;
        let mean_truth = d.predictions.iter().map(|p| p.biomass).sum::<f64>() / 61.0;
        assert!((mean_pred - mean_truth).abs() < 1e-12);
        let v = r.cell("vocgp").unwrap();
        assert_eq!(v.n_samples, 0);
        assert!(v.rmse.is_none());
        assert_eq!(r.issues.len(), 61);
        assert_eq!(r.cell("human").unwrap().n_samples, 61);
    }

    #[test]
    fn missing_samples_are_reported_and_skipped() {
        let mut samples = ExperimentSample::bundled();
        samples.truncate(5);
        samples.push(ExperimentSample {
            id: "X".into(),
            biomass: 1.0,
            category: DensityCategory::Sparse,
            source: SampleSource::File {
                path: "/nonexistent/x.png".into(),
                window: None,
            },
        });
        let r = run_experiment_bundled(
            &samples,
            ExperimentPlan::BaselineCompare,
            &PipelineConfig::default(),
        );
        assert_eq!(r.cell("dwcgp").unwrap().n_samples, 5);
        assert!(r
            .issues
            .iter()
            .any(|i| i.id == "X" && i.message.contains("cannot load")));
    }

    #[test]
    fn report_csv_has_one_row_per_cell() {
        let r = run_experiment_bundled(
            &ExperimentSample::bundled(),
            ExperimentPlan::BaselineCompare,
            &PipelineConfig::default(),
        );
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
        let json: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(json["config"]["dwcgp"]["region_width"], 5);
    }
}
