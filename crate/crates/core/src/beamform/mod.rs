//! Frequency-domain filter-and-sum acoustic imaging.
//!
//! A recording is windowed into non-overlapping frames at the acoustic
//! frame rate (12 fps by default, 1000 samples at 12 kHz), each frame is
//! Hann-windowed and zero-padded to the FFT size, and every steering-grid
//! pixel accumulates the phase-aligned mean over microphones per frequency
//! bin. The squared magnitude is the acoustic image energy:
//!
//! `B(p, f_k) = | (1/M) sum_m X_m(f_k) * exp(+j 2 pi f_k tau_m(p)) |^2`
//!
//! with uniform weights and 512 positive-frequency bins from a 1024-point
//! FFT by default.

mod grid;
mod heatmap;
mod image;
pub mod reference;

pub use grid::{build_steering_grid, SteeringGrid, GRID_H, GRID_W};
pub use heatmap::{export_heatmap_png, render_heatmap, HeatmapImage};
pub use image::{beamform, pixel_band_energy, AcousticImageVolume, FrameSpectra};

/// Default acoustic frame rate, frames per second.
pub const FRAME_RATE: f64 = 12.0;

/// Default FFT size; yields 512 positive-frequency bins.
pub const FFT_SIZE: usize = 1024;

/// Default visualization band, Hz. The nominal 900-6400 Hz band is clipped
/// to the 6 kHz Nyquist of 12 kHz audio.
pub const VIEW_BAND: (f64, f64) = (900.0, 6000.0);
