//! Run configuration. Every output file embeds the resolved configuration
//! as its provenance block.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DEFAULT_TOP_K;
use crate::scenegraph::PlaceFeatureStrategy;

pub const DEFAULT_ALPHA_OBJECTS: f64 = 0.23;
pub const DEFAULT_THETA_TRACK: f64 = 0.9;
pub const DEFAULT_GAMMA_IOU: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub delta_bar_objects: f64,
    pub delta_bar_regions: f64,
    pub alpha_objects: f64,
    pub alpha_regions: f64,
    pub k: usize,
    pub theta_track: f64,
    pub gamma_iou: f64,
    pub tau_seconds: f64,
    pub place_feature_strategy: PlaceFeatureStrategy,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            delta_bar_objects: 0.01,
            delta_bar_regions: 0.01,
            alpha_objects: DEFAULT_ALPHA_OBJECTS,
            alpha_regions: 0.0,
            k: DEFAULT_TOP_K,
            theta_track: DEFAULT_THETA_TRACK,
            gamma_iou: DEFAULT_GAMMA_IOU,
            tau_seconds: 2.0,
            place_feature_strategy: PlaceFeatureStrategy::Average,
            seed: 0,
        }
    }
}

/// A partial layer of settings (config file, tasks file, command line).
/// Later layers override earlier ones field by field.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigLayer {
    pub delta_bar_objects: Option<f64>,
    pub delta_bar_regions: Option<f64>,
    pub alpha_objects: Option<f64>,
    pub alpha_regions: Option<f64>,
    pub k: Option<usize>,
    pub theta_track: Option<f64>,
    pub gamma_iou: Option<f64>,
    pub tau_seconds: Option<f64>,
    pub place_feature_strategy: Option<PlaceFeatureStrategy>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn apply(&mut self, layer: &ConfigLayer) {
        macro_rules! take {
            ($($f:ident),*) => {$(if let Some(v) = layer.$f { self.$f = v; })*};
        }
        take!(
            delta_bar_objects,
            delta_bar_regions,
            alpha_objects,
            alpha_regions,
            k,
            theta_track,
            gamma_iou,
            tau_seconds,
            place_feature_strategy,
            seed
        );
    }

    pub fn resolve<'a>(layers: impl IntoIterator<Item = &'a ConfigLayer>) -> Result<Self> {
        let mut cfg = Self::default();
        for layer in layers {
            cfg.apply(layer);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} outside [0, 1]")))
            }
        };
        let signed = |name: &str, v: f64| {
            if (-1.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} outside [-1, 1]")))
            }
        };
        unit("delta-bar-objects", self.delta_bar_objects)?;
        unit("delta-bar-regions", self.delta_bar_regions)?;
        unit("gamma-iou", self.gamma_iou)?;
        signed("alpha-objects", self.alpha_objects)?;
        signed("alpha-regions", self.alpha_regions)?;
        // values above 1 are allowed so association can be disabled
        if !self.theta_track.is_finite() || self.theta_track < -1.0 {
            return Err(Error::Config(format!("theta-track = {}", self.theta_track)));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be positive".into()));
        }
        if !(self.tau_seconds.is_finite() && self.tau_seconds > 0.0) {
            return Err(Error::Config(format!(
                "tau-seconds = {} must be positive",
                self.tau_seconds
            )));
        }
        Ok(())
    }
}
