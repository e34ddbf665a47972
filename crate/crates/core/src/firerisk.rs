//! Fire-risk labels from windowed DWCGP and fire-prone road segments.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{RasterImage, WindowSpec};
use crate::pipeline::Pipeline;

const MIN_WINDOW: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowGrid {
    pub rows: usize,
    pub cols: usize,
    /// Fraction of a window shared with its neighbour, in `[0, 0.9)`.
    pub overlap_fraction: f64,
}

impl Default for WindowGrid {
    fn default() -> Self {
        Self {
            rows: 3,
            cols: 5,
            overlap_fraction: 0.5,
        }
    }
}

impl WindowGrid {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::GridInfeasible(
                "grid needs at least one row and column".into(),
            ));
        }
        if !(0.0..0.9).contains(&self.overlap_fraction) {
            return Err(Error::GridInfeasible(format!(
                "overlap {} outside [0, 0.9)",
                self.overlap_fraction
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Window size and start offsets along one axis.
fn axis_layout(extent: usize, n: usize, overlap: f64) -> Result<(usize, Vec<usize>)> {
    let step = 1.0 - overlap;
    let size = (extent as f64 / (1.0 + (n - 1) as f64 * step)).floor() as usize;
    if size < MIN_WINDOW {
        return Err(Error::GridInfeasible(format!(
            "{n} windows over {extent} pixels would be {size} pixels wide"
        )));
    }
    let stride = size as f64 * step;
    let mut starts: Vec<usize> = (0..n)
        .map(|k| (k as f64 * stride).round() as usize)
        .collect();
    if n > 1 {
        starts[n - 1] = extent - size;
    }
    Ok((size, starts))
}

/// Equal-sized overlapping windows in row-major order. The last row and
/// column are snapped to the frame edge.
pub fn make_windows(frame_w: usize, frame_h: usize, grid: &WindowGrid) -> Result<Vec<WindowSpec>> {
    grid.validate()?;
    let (ww, xs) = axis_layout(frame_w, grid.cols, grid.overlap_fraction)?;
    let (wh, ys) = axis_layout(frame_h, grid.rows, grid.overlap_fraction)?;
    Ok(ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| WindowSpec::new(x, y, ww, wh)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RiskLabel {
    High,
    Low,
}

impl RiskLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            RiskLabel::High => "high",
            RiskLabel::Low => "low",
        }
    }
}

/// High when `dwcgp >= threshold`.
pub fn classify_risk(dwcgp: f64, threshold: f64) -> RiskLabel {
    if dwcgp >= threshold {
        RiskLabel::High
    } else {
        RiskLabel::Low
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskOutcome {
    pub window: WindowSpec,
    pub dwcgp: f64,
    pub label: RiskLabel,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionMatrix {
    /// `counts[actual][predicted]`, index 0 = High, 1 = Low.
    pub counts: [[usize; 2]; 2],
    /// Row-normalised percentages; a row with no samples is all zero.
    pub percentages: [[f64; 2]; 2],
    pub accuracy: f64,
}

fn label_index(l: RiskLabel) -> usize {
    match l {
        RiskLabel::High => 0,
        RiskLabel::Low => 1,
    }
}

/// Pairs are `(predicted, actual)`.
pub fn confusion_matrix(outcomes: &[(RiskLabel, RiskLabel)]) -> Result<ConfusionMatrix> {
    if outcomes.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut counts = [[0usize; 2]; 2];
    for &(p, a) in outcomes {
        counts[label_index(a)][label_index(p)] += 1;
    }
    let mut percentages = [[0.0; 2]; 2];
    for (row, pct) in counts.iter().zip(percentages.iter_mut()) {
        let total = row[0] + row[1];
        if total > 0 {
            for k in 0..2 {
                pct[k] = 100.0 * row[k] as f64 / total as f64;
            }
        }
    }
    let correct = counts[0][0] + counts[1][1];
    Ok(ConfusionMatrix {
        counts,
        percentages,
        accuracy: 100.0 * correct as f64 / outcomes.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameProfile {
    pub frame_id: String,
    pub chainage: Option<f64>,
    pub avg_dwcgp: f64,
    pub window_outcomes: Vec<RiskOutcome>,
    pub frame_label: RiskLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FireSegment {
    pub start_chainage: f64,
    pub end_chainage: f64,
    pub frame_count: usize,
    pub peak_dwcgp: f64,
    /// Positions of the first and last frame in the road sequence.
    pub first_frame: usize,
    pub last_frame: usize,
}

/// Frame profile from per-window DWCGP values.
pub fn frame_from_windows(
    frame_id: impl Into<String>,
    chainage: Option<f64>,
    windows: &[(WindowSpec, f64)],
    window_threshold: f64,
    frame_threshold: f64,
) -> Result<FrameProfile> {
    if windows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let window_outcomes: Vec<RiskOutcome> = windows
        .iter()
        .map(|&(window, dwcgp)| RiskOutcome {
            window,
            dwcgp,
            label: classify_risk(dwcgp, window_threshold),
            threshold: window_threshold,
        })
        .collect();
    let avg_dwcgp =
        window_outcomes.iter().map(|o| o.dwcgp).sum::<f64>() / window_outcomes.len() as f64;
    Ok(FrameProfile {
        frame_id: frame_id.into(),
        chainage,
        avg_dwcgp,
        window_outcomes,
        frame_label: classify_risk(avg_dwcgp, frame_threshold),
    })
}

pub fn frame_profile(
    pipeline: &Pipeline,
    frame_id: impl Into<String>,
    img: &RasterImage,
    chainage: Option<f64>,
) -> Result<FrameProfile> {
    let cfg = pipeline.config();
    let windows = make_windows(img.width(), img.height(), &cfg.windows)?;
    let scored = windows
        .par_iter()
        .map(|w| Ok((*w, pipeline.estimate(img, Some(w))?.dwcgp)))
        .collect::<Result<Vec<_>>>()?;
    frame_from_windows(
        frame_id,
        chainage,
        &scored,
        cfg.risk.window_threshold,
        cfg.risk.frame_threshold,
    )
}

/// Chainage of a frame, or its position when no chainage was recorded.
fn position(p: &FrameProfile, index: usize) -> f64 {
    p.chainage.unwrap_or(index as f64)
}

/// Maximal runs of consecutive High frames.
pub fn merge_segments(frames: &[FrameProfile]) -> Vec<FireSegment> {
    let mut out: Vec<FireSegment> = Vec::new();
    let mut open = false;
    for (i, f) in frames.iter().enumerate() {
        if f.frame_label != RiskLabel::High {
            open = false;
            continue;
        }
        let at = position(f, i);
        match out.last_mut() {
            Some(seg) if open => {
                seg.end_chainage = at;
                seg.frame_count += 1;
                seg.last_frame = i;
                seg.peak_dwcgp = seg.peak_dwcgp.max(f.avg_dwcgp);
            }
            _ => out.push(FireSegment {
                start_chainage: at,
                end_chainage: at,
                frame_count: 1,
                peak_dwcgp: f.avg_dwcgp,
                first_frame: i,
                last_frame: i,
            }),
        }
        open = true;
    }
    out
}

fn check_chainage<'a>(items: impl Iterator<Item = (&'a str, Option<f64>)>) -> Result<()> {
    let mut last: Option<f64> = None;
    for (id, c) in items {
        if let Some(c) = c {
            if last.is_some_and(|l| c < l) || !c.is_finite() {
                return Err(Error::ChainageNotMonotonic {
                    frame_id: id.to_string(),
                });
            }
            last = Some(c);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoadProfile {
    pub frames: Vec<FrameProfile>,
    pub segments: Vec<FireSegment>,
}

/// A survey frame: identifier, image and optional chainage in metres.
pub struct RoadFrame {
    pub id: String,
    pub image: RasterImage,
    pub chainage: Option<f64>,
}

pub fn road_profile(frames: &[RoadFrame], pipeline: &Pipeline) -> Result<RoadProfile> {
    check_chainage(frames.iter().map(|f| (f.id.as_str(), f.chainage)))?;
    let profiles = frames
        .par_iter()
        .map(|f| frame_profile(pipeline, f.id.clone(), &f.image, f.chainage))
        .collect::<Result<Vec<_>>>()?;
    let segments = merge_segments(&profiles);
    Ok(RoadProfile {
        frames: profiles,
        segments,
    })
}

impl RoadProfile {
    /// `frame_id,chainage,avg_dwcgp,label`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["frame_id", "chainage", "avg_dwcgp", "label"])?;
        for f in &self.frames {
            w.write_record([
                f.frame_id.clone(),
                f.chainage.map(|c| c.to_string()).unwrap_or_default(),
                f.avg_dwcgp.to_string(),
                f.frame_label.as_str().to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Chainage against average DWCGP, one row per frame.
    pub fn write_plot_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["chainage", "avg_dwcgp"])?;
        for (i, f) in self.frames.iter().enumerate() {
            w.write_record([position(f, i).to_string(), f.avg_dwcgp.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn segments_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.segments)?)
    }
}

/// Reads `frame_id,chainage` rows.
pub fn read_chainage_csv(path: impl AsRef<Path>) -> Result<HashMap<String, f64>> {
    #[derive(Deserialize)]
    struct Row {
        frame_id: String,
        chainage: f64,
    }
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let mut out = HashMap::new();
    for row in r.deserialize() {
        let row: Row = row?;
        out.insert(row.frame_id, row.chainage);
    }
    Ok(out)
}
