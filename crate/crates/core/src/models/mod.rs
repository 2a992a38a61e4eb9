//! Teacher and student architectures.
//!
//! Three networks share the output contract of logits plus a penultimate
//! feature vector of width `1024 * w`, so fusion and transfer evaluation
//! see a uniform feature space:
//!
//! - DualCamNet: the acoustic-image teacher. A temporal convolution over
//!   12 consecutive MFCC images, two shared 5x5 spatial blocks, temporal
//!   mean pooling, and a fully convolutional 1024/1000/C head.
//! - HearNet: spectrogram student, three 1-D convolutions each downsampled
//!   by factor-5 max pooling, a width-4 valid convolution, and the same
//!   kind of head.
//! - OurSoundNet: raw-waveform student, five strided 1-D convolutions.
//!
//! A width multiplier `w` scales every channel count (never the fixed
//! 12-channel temporal block) for desk-scale runs.

mod dualcamnet;
mod fusion;
mod hearnet;
mod oursoundnet;

pub use dualcamnet::build_dualcamnet;
pub use fusion::build_fusion_head;
pub use hearnet::build_hearnet;
pub use oursoundnet::build_oursoundnet;

use crate::error::{Error, Result};
use crate::graph::ComputationGraph;

/// Architecture selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Architecture {
    DualCamNet,
    HearNet,
    OurSoundNet,
}

impl Architecture {
    pub fn as_str(&self) -> &'static str {
        match self {
            Architecture::DualCamNet => "dualcamnet",
            Architecture::HearNet => "hearnet",
            Architecture::OurSoundNet => "oursoundnet",
        }
    }

    pub fn parse(s: &str) -> Result<Architecture> {
        match s {
            "dualcamnet" => Ok(Architecture::DualCamNet),
            "hearnet" => Ok(Architecture::HearNet),
            "oursoundnet" => Ok(Architecture::OurSoundNet),
            other => Err(Error::Config(format!("unknown architecture `{other}`"))),
        }
    }
}

/// Model configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub architecture: Architecture,
    pub class_count: usize,
    /// Width multiplier in (0, 1] applied to all scalable channel counts.
    pub width: f64,
    /// MFCC channels of the acoustic input (DualCamNet only).
    pub mfcc_coeffs: usize,
    /// Ablation switch: replace the resolution-preserving stride-1 pools
    /// of DualCamNet with ordinary stride-2 pooling.
    pub pool_stride2: bool,
}

impl ModelSpec {
    pub fn new(architecture: Architecture, class_count: usize, width: f64) -> ModelSpec {
        ModelSpec { architecture, class_count, width, mfcc_coeffs: 12, pool_stride2: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_count < 2 {
            return Err(Error::Config("need at least 2 classes".into()));
        }
        if !(self.width > 0.0 && self.width <= 1.0) {
            return Err(Error::Config(format!("width {} outside (0, 1]", self.width)));
        }
        Ok(())
    }

    /// Channel count under the width multiplier, at least 1.
    pub fn scaled(&self, base: usize) -> usize {
        ((base as f64 * self.width).round() as usize).max(1)
    }

    /// Width of the penultimate feature vector.
    pub fn feature_dim(&self) -> usize {
        self.scaled(1024)
    }

    pub fn build(&self) -> Result<ComputationGraph> {
        match self.architecture {
            Architecture::DualCamNet => build_dualcamnet(self),
            Architecture::HearNet => build_hearnet(self),
            Architecture::OurSoundNet => build_oursoundnet(self),
        }
    }

    /// Flat `key = value` form used by the spec files on disk.
    pub fn to_key_values(&self) -> String {
        format!(
            "arch = {}\nclasses = {}\nwidth = {}\nmfcc_coeffs = {}\npool_stride2 = {}\n",
            self.architecture.as_str(),
            self.class_count,
            self.width,
            self.mfcc_coeffs,
            self.pool_stride2
        )
    }

    pub fn parse(text: &str) -> Result<ModelSpec> {
        let mut arch = None;
        let mut spec = ModelSpec::new(Architecture::HearNet, 14, 1.0);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad =
                |what: &str| Error::Config(format!("line {}: bad {what}: {value}", lineno + 1));
            match key {
                "arch" => arch = Some(Architecture::parse(value)?),
                "classes" => spec.class_count = value.parse().map_err(|_| bad("classes"))?,
                "width" => spec.width = value.parse().map_err(|_| bad("width"))?,
                "mfcc_coeffs" => {
                    spec.mfcc_coeffs = value.parse().map_err(|_| bad("mfcc_coeffs"))?
                }
                "pool_stride2" => {
                    spec.pool_stride2 = value.parse().map_err(|_| bad("pool_stride2"))?
                }
                other => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            }
        }
        spec.architecture =
            arch.ok_or_else(|| Error::Config("model spec is missing `arch`".into()))?;
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests;
