//! Time-domain delay-and-sum reference.
//!
//! Slow but direct: every channel is resampled at the pixel's alignment
//! delay with a windowed-sinc interpolator, the aligned channels are
//! averaged in the time domain, and band energy is read off a single FFT
//! of the windowed sum. Used to validate the frequency-domain
//! implementation; the two paths share only the framing constants.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::grid::SteeringGrid;
use crate::error::{Error, Result};
use crate::sim::MicArrayRecording;

const HALF: i64 = 8;

/// Windowed-sinc read of `x` at fractional position `t` (16 taps).
fn sample_at(x: &[f64], t: f64) -> f64 {
    let j0 = t.floor() as i64;
    let mut acc = 0.0;
    for j in (j0 - HALF + 1)..=(j0 + HALF) {
        if j < 0 || j >= x.len() as i64 {
            continue;
        }
        let u = t - j as f64;
        let s = if u == 0.0 {
            1.0
        } else {
            let p = std::f64::consts::PI * u;
            p.sin() / p
        };
        let w = 0.5 * (1.0 + (std::f64::consts::PI * u / HALF as f64).cos());
        acc += x[j as usize] * s * w;
    }
    acc
}

/// Band-summed delay-and-sum energy of one frame for every grid pixel.
pub fn band_energy_frame(
    rec: &MicArrayRecording,
    grid: &SteeringGrid,
    frame: usize,
    frame_rate: f64,
    fft_size: usize,
    band: (f64, f64),
) -> Result<Vec<f64>> {
    if rec.geometry != grid.geometry {
        return Err(Error::Beamform("geometry mismatch".into()));
    }
    let fs = rec.sample_rate as f64;
    let frame_len = (fs / frame_rate).round() as usize;
    let start = frame * frame_len;
    if start >= rec.frames() {
        return Err(Error::Beamform(format!("frame {frame} beyond the recording")));
    }
    let window: Vec<f64> = (0..frame_len)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / frame_len as f64).cos()))
        .collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(fft_size);
    let m = rec.samples.len() as f64;
    let mut out = vec![0.0; grid.pixel_count()];
    let mut buf = vec![Complex::new(0.0f64, 0.0); fft_size];

    for (p, o) in out.iter_mut().enumerate() {
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (i, w) in window.iter().enumerate() {
            let mut y = 0.0;
            for (chan, tau) in rec.samples.iter().zip(&grid.delays[p]) {
                y += sample_at(chan, (start + i) as f64 + tau * fs);
            }
            buf[i] = Complex::new(w * y / m, 0.0);
        }
        fft.process(&mut buf);
        let df = fs / fft_size as f64;
        let mut e = 0.0;
        for (k, c) in buf.iter().enumerate().take(fft_size / 2 + 1).skip(1) {
            let f = k as f64 * df;
            if f >= band.0 && f <= band.1 {
                e += c.norm_sqr();
            }
        }
        *o = e;
    }
    Ok(out)
}
