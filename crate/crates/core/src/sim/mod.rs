//! Synthetic multi-microphone scene generation.
//!
//! Produces labeled recordings of sound-producing actions as captured by a
//! planar microphone array, under three scenario presets of increasing
//! acoustic difficulty: an anechoic room, a reflective indoor space, and a
//! noisy outdoor setting.

mod actions;
mod dataset;
mod geometry;
mod scene;

pub use actions::{
    class_generator, synthesize_action, ActionGenerator, GeneratorFamily, CLASS_COUNT,
};
pub use dataset::{
    dataset_geometry, plan_dataset, render_take, DatasetSpec, TakePlan, MAX_TAKE_S,
};
pub use geometry::{build_default_geometry, build_geometry, MIN_SPACING};
pub use scene::{
    add_delayed, render_scene, NoiseShape, Reflection, ScenarioPreset, FOV_H_DEG, FOV_V_DEG,
};

use crate::error::{Error, Result};

/// Speed of sound used throughout, m/s.
pub const SOUND_SPEED: f64 = 343.0;

/// Default acquisition rate, Hz.
pub const SAMPLE_RATE: u32 = 12_000;

/// Default microphone count.
pub const MIC_COUNT: usize = 128;

/// Default square aperture edge, meters.
pub const APERTURE: f64 = 0.45;

/// Planar microphone array on the z = 0 plane.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrayGeometry {
    /// Microphone coordinates in meters, `(x, y, 0)`, scene z points at the scene.
    pub mic_positions: Vec<[f64; 3]>,
    pub aperture_width: f64,
    pub aperture_height: f64,
    pub sound_speed: f64,
}

impl ArrayGeometry {
    pub fn mic_count(&self) -> usize {
        self.mic_positions.len()
    }

    /// Validate the type invariants: mics inside the aperture on z = 0,
    /// at least two of them, no duplicates.
    pub fn validate(&self) -> Result<()> {
        if self.mic_positions.len() < 2 {
            return Err(Error::Geometry("need at least 2 microphones".into()));
        }
        let hw = self.aperture_width / 2.0;
        let hh = self.aperture_height / 2.0;
        for (i, p) in self.mic_positions.iter().enumerate() {
            if p[2] != 0.0 {
                return Err(Error::Geometry(format!("mic {i} off the z=0 plane")));
            }
            if p[0].abs() > hw + 1e-12 || p[1].abs() > hh + 1e-12 {
                return Err(Error::Geometry(format!("mic {i} outside the aperture")));
            }
        }
        for i in 0..self.mic_positions.len() {
            for j in (i + 1)..self.mic_positions.len() {
                if self.mic_positions[i] == self.mic_positions[j] {
                    return Err(Error::Geometry(format!("mics {i} and {j} coincide")));
                }
            }
        }
        Ok(())
    }
}

/// One sound source in a scene.
#[derive(Clone, Debug)]
pub struct SourceEvent {
    /// Scene-frame position in meters; z is depth away from the array.
    pub position: [f64; 3],
    pub generator: ActionGenerator,
    /// Event start, seconds from recording start.
    pub onset: f64,
    /// Event length, seconds.
    pub duration: f64,
    /// Linear amplitude applied to the generated waveform.
    pub gain: f64,
}

/// Multi-channel recording of one scene take.
#[derive(Clone, Debug)]
pub struct MicArrayRecording {
    /// `mic_count` channels of equal length, `samples[m][n]`.
    pub samples: Vec<Vec<f64>>,
    pub sample_rate: u32,
    pub geometry: ArrayGeometry,
    pub label: u16,
    pub scenario_id: u8,
    pub subject_id: u16,
    pub take_id: u32,
    /// Set when some event fell outside the nominal field of view.
    pub out_of_fov: bool,
}

impl MicArrayRecording {
    pub fn frames(&self) -> usize {
        self.samples.first().map_or(0, |c| c.len())
    }

    pub fn duration_s(&self) -> f64 {
        self.frames() as f64 / self.sample_rate as f64
    }
}
