//! Image to DWCGP: segmentation, orientation voting and the column estimator.

use crate::config::PipelineConfig;
use crate::dwcgp::{compute_dwcgp, DwcgpConfig, DwcgpResult};
use crate::error::{Error, Result};
use crate::image::{crop, to_gray, ColorSpace, RasterImage, WindowSpec};
use crate::orientation::{
    calibrate_vertical_index, dominant_from_planes, max_over_scales, GaborBank, OrientationMap,
    ScaleAggregation,
};
use crate::segmenter::{classify, GrassMask, NetworkModel};

/// Grass mask and orientation map for one window.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub mask: GrassMask,
    pub orientation: OrientationMap,
}

impl Analysis {
    pub fn dwcgp(&self, cfg: &DwcgpConfig) -> Result<DwcgpResult> {
        compute_dwcgp(&self.mask, &self.orientation, cfg)
    }
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    config: PipelineConfig,
    model: NetworkModel,
    bank: GaborBank,
    vertical_index: usize,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, model: NetworkModel) -> Result<Self> {
        config.validate()?;
        let params = config.gabor.params();
        let bank = GaborBank::new(&params)?;
        let vertical_index = calibrate_vertical_index(&params)?;
        Ok(Self {
            config,
            model,
            bank,
            vertical_index,
        })
    }

    /// Loads the model named in the config.
    pub fn from_config(config: PipelineConfig) -> Result<Self> {
        let path = config
            .model
            .path
            .clone()
            .ok_or_else(|| Error::Config("no model path configured".into()))?;
        let model = NetworkModel::load(&path)?;
        Self::new(config, model)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn model(&self) -> &NetworkModel {
        &self.model
    }

    pub fn bank(&self) -> &GaborBank {
        &self.bank
    }

    pub fn vertical_index(&self) -> usize {
        self.vertical_index
    }

    pub fn segment(&self, img: &RasterImage) -> Result<GrassMask> {
        classify(&self.model, img, self.config.model.threshold)
    }

    /// Orientation maps for each requested scale aggregation, sharing one
    /// set of Gabor responses.
    pub fn orient_modes(
        &self,
        img: &RasterImage,
        modes: &[ScaleAggregation],
    ) -> Result<Vec<OrientationMap>> {
        let gray = match img.space() {
            ColorSpace::Gray => img.gray_grid()?,
            _ => to_gray(img)?.gray_grid()?,
        };
        let mags = self.bank.magnitudes(&gray)?;
        Ok(modes
            .iter()
            .map(|&m| {
                let dom =
                    dominant_from_planes(&max_over_scales(&mags, m), Some(self.vertical_index));
                OrientationMap::new(dom, self.vertical_index)
            })
            .collect())
    }

    pub fn orient(&self, img: &RasterImage) -> Result<OrientationMap> {
        Ok(self
            .orient_modes(img, &[self.config.gabor.scale_aggregation])?
            .remove(0))
    }

    pub fn analyze(&self, img: &RasterImage) -> Result<Analysis> {
        Ok(Analysis {
            mask: self.segment(img)?,
            orientation: self.orient(img)?,
        })
    }

    /// DWCGP of a window (whole image when `window` is `None`).
    pub fn estimate(&self, img: &RasterImage, window: Option<&WindowSpec>) -> Result<DwcgpResult> {
        let view = match window {
            Some(w) => crop(img, w)?,
            None => img.clone(),
        };
        self.analyze(&view)?.dwcgp(&self.config.dwcgp)
    }
}
