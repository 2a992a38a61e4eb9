//! The beamforming operation itself.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::grid::{SteeringGrid, GRID_H, GRID_W};
use crate::error::{Error, Result};
use crate::sim::MicArrayRecording;
use crate::tensor::Tensor;

/// Beamformed spatial-spectral energy volume.
#[derive(Clone, Debug)]
pub struct AcousticImageVolume {
    /// `[T, 36, 48, K]`, nonnegative energies.
    pub frames: Tensor,
    /// Acoustic frames per second.
    pub frame_rate: f64,
    /// Center frequency of each of the K bins, strictly increasing, Hz.
    pub bin_frequencies: Vec<f64>,
}

impl AcousticImageVolume {
    pub fn frame_count(&self) -> usize {
        self.frames.shape()[0]
    }

    pub fn bin_count(&self) -> usize {
        self.bin_frequencies.len()
    }
}

/// Per-frame, per-microphone spectra of a windowed recording, stored as
/// separate f32 real/imaginary planes for the accumulation kernel.
pub struct FrameSpectra {
    re: Vec<f32>,
    im: Vec<f32>,
    frame_count: usize,
    mic_count: usize,
    bins: usize,
    /// Bin spacing, Hz.
    pub delta_f: f64,
}

impl FrameSpectra {
    /// Window every channel into Hann frames of `sample_rate / frame_rate`
    /// samples, zero-padded to `fft_size`, and keep the K = fft_size / 2
    /// positive-frequency bins.
    pub fn from_recording(
        rec: &MicArrayRecording,
        frame_rate: f64,
        fft_size: usize,
    ) -> Result<FrameSpectra> {
        let fs = rec.sample_rate as f64;
        let frame_len = (fs / frame_rate).round() as usize;
        if fft_size < frame_len {
            return Err(Error::Beamform(format!(
                "fft size {fft_size} shorter than the {frame_len}-sample frame"
            )));
        }
        let n = rec.frames();
        let frame_count = n.div_ceil(frame_len);
        let mic_count = rec.samples.len();
        let bins = fft_size / 2;
        let window: Vec<f64> = (0..frame_len)
            .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / frame_len as f64).cos()))
            .collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(fft_size);
        let mut re = vec![0f32; frame_count * mic_count * bins];
        let mut im = vec![0f32; frame_count * mic_count * bins];
        let mut buf = vec![Complex::new(0.0f64, 0.0); fft_size];
        for t in 0..frame_count {
            let start = t * frame_len;
            for (m, chan) in rec.samples.iter().enumerate() {
                buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
                // trailing partial frames stay zero-padded
                for i in 0..frame_len.min(n.saturating_sub(start)) {
                    buf[i] = Complex::new(chan[start + i] * window[i], 0.0);
                }
                fft.process(&mut buf);
                let base = (t * mic_count + m) * bins;
                for k in 0..bins {
                    re[base + k] = buf[k + 1].re as f32;
                    im[base + k] = buf[k + 1].im as f32;
                }
            }
        }
        Ok(FrameSpectra {
            re,
            im,
            frame_count,
            mic_count,
            bins,
            delta_f: fs / fft_size as f64,
        })
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// Fill `out` (length `frame_count * bins`) with the beamformed energy
    /// of one pixel across all frames. `mic_delays` are the grid's
    /// alignment delays for that pixel, seconds.
    ///
    /// The per-bin steering phasor is built by a complex recurrence in f64
    /// and the microphone sum runs in f32; summation order is fixed, so
    /// the result is bit-stable.
    pub fn pixel_energies(&self, mic_delays: &[f64], out: &mut [f32]) {
        assert_eq!(mic_delays.len(), self.mic_count);
        assert_eq!(out.len(), self.frame_count * self.bins);
        let k = self.bins;
        let mut ph_re = vec![0f32; self.mic_count * k];
        let mut ph_im = vec![0f32; self.mic_count * k];
        for (m, &tau) in mic_delays.iter().enumerate() {
            let theta = 2.0 * std::f64::consts::PI * self.delta_f * tau;
            let (s, c) = theta.sin_cos();
            let (mut pr, mut pi) = (1.0f64, 0.0f64);
            for kk in 0..k {
                let nr = pr * c - pi * s;
                let ni = pr * s + pi * c;
                pr = nr;
                pi = ni;
                ph_re[m * k + kk] = nr as f32;
                ph_im[m * k + kk] = ni as f32;
            }
        }
        let mut acc_re = vec![0f32; k];
        let mut acc_im = vec![0f32; k];
        let inv_m2 = 1.0f32 / (self.mic_count as f32 * self.mic_count as f32);
        for t in 0..self.frame_count {
            acc_re.iter_mut().for_each(|v| *v = 0.0);
            acc_im.iter_mut().for_each(|v| *v = 0.0);
            for m in 0..self.mic_count {
                let base = (t * self.mic_count + m) * k;
                accumulate_steered(
                    &mut acc_re,
                    &mut acc_im,
                    &self.re[base..base + k],
                    &self.im[base..base + k],
                    &ph_re[m * k..(m + 1) * k],
                    &ph_im[m * k..(m + 1) * k],
                );
            }
            let out_t = &mut out[t * k..(t + 1) * k];
            for i in 0..k {
                out_t[i] = (acc_re[i] * acc_re[i] + acc_im[i] * acc_im[i]) * inv_m2;
            }
        }
    }
}

/// `acc += x * phase` over complex planes.
fn accumulate_steered(
    acc_re: &mut [f32],
    acc_im: &mut [f32],
    xr: &[f32],
    xi: &[f32],
    pr: &[f32],
    pi: &[f32],
) {
    let n = acc_re.len();
    assert!(
        acc_im.len() == n && xr.len() == n && xi.len() == n && pr.len() == n && pi.len() == n
    );
    for i in 0..n {
        acc_re[i] += xr[i] * pr[i] - xi[i] * pi[i];
        acc_im[i] += xr[i] * pi[i] + xi[i] * pr[i];
    }
}

/// Beamform a recording into an acoustic image volume.
pub fn beamform(
    rec: &MicArrayRecording,
    grid: &SteeringGrid,
    frame_rate: f64,
    fft_size: usize,
) -> Result<AcousticImageVolume> {
    if rec.geometry != grid.geometry {
        return Err(Error::Beamform(
            "recording geometry does not match the steering grid".into(),
        ));
    }
    let spectra = FrameSpectra::from_recording(rec, frame_rate, fft_size)?;
    let t_count = spectra.frame_count();
    let bins = spectra.bins();
    let mut volume = Tensor::zeros(&[t_count, GRID_H, GRID_W, bins]);
    let mut scratch = vec![0f32; t_count * bins];
    {
        let data = volume.data_mut();
        for p in 0..grid.pixel_count() {
            spectra.pixel_energies(&grid.delays[p], &mut scratch);
            for t in 0..t_count {
                let dst = (t * GRID_H * GRID_W + p) * bins;
                for k in 0..bins {
                    data[dst + k] = scratch[t * bins + k] as f64;
                }
            }
        }
    }
    let fs = rec.sample_rate as f64;
    Ok(AcousticImageVolume {
        frames: volume,
        frame_rate,
        bin_frequencies: (1..=bins).map(|k| k as f64 * fs / fft_size as f64).collect(),
    })
}

/// Band-summed energy per pixel of one frame, straight off the spectra.
pub fn pixel_band_energy(volume: &AcousticImageVolume, frame: usize, band: (f64, f64)) -> Vec<f64> {
    let bins = volume.bin_count();
    let data = volume.frames.data();
    let mut out = vec![0.0; GRID_H * GRID_W];
    for (p, o) in out.iter_mut().enumerate() {
        let base = (frame * GRID_H * GRID_W + p) * bins;
        for (k, &f) in volume.bin_frequencies.iter().enumerate() {
            if f >= band.0 && f <= band.1 {
                *o += data[base + k];
            }
        }
    }
    out
}
