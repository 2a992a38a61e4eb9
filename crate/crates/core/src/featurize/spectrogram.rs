//! Single-microphone amplitude spectrograms.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::resample::resample;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Spectrogram sample rate after upsampling, Hz.
pub const SPEC_RATE: u32 = 22_000;
/// Analysis window, seconds (440 samples at 22 kHz).
pub const SPEC_WINDOW_S: f64 = 0.020;
/// STFT size; 440-sample windows are zero-padded to this.
pub const SPEC_FFT: usize = 512;
/// One-sided bin count.
pub const SPEC_BINS: usize = SPEC_FFT / 2 + 1;
/// Frames for a 5-second input (10 ms hop).
pub const SPEC_FRAMES: usize = 500;
/// Expected input duration, seconds.
pub const SPEC_INPUT_S: f64 = 5.0;

/// A 500x257 magnitude spectrogram of 5 s of audio at 22 kHz.
#[derive(Clone, Debug)]
pub struct Spectrogram {
    /// `[500, 257]` nonnegative magnitudes.
    pub values: Tensor,
    pub window_s: f64,
    pub sample_rate: u32,
}

/// Compute the standard amplitude spectrogram of a 5 s waveform.
///
/// The input is resampled to 22 kHz, cut into 20 ms Hann windows with a
/// half-window hop, and transformed with a 512-point FFT. Frames are
/// hop-aligned from sample 0; the final windows read past the signal end
/// and are zero-padded, which pins the frame count to exactly 500.
pub fn spectrogram(waveform: &[f64], source_rate: u32) -> Result<Spectrogram> {
    spectrogram_with_options(waveform, source_rate, false)
}

/// As [`spectrogram`], with optional log compression `ln(1 + m)` of the
/// magnitudes (off in the standard pipeline).
pub fn spectrogram_with_options(
    waveform: &[f64],
    source_rate: u32,
    log_compress: bool,
) -> Result<Spectrogram> {
    let expect = (SPEC_INPUT_S * source_rate as f64).round() as usize;
    if waveform.len() != expect {
        return Err(Error::Featurize(format!(
            "expected {expect} samples of {SPEC_INPUT_S} s at {source_rate} Hz, got {}",
            waveform.len()
        )));
    }
    let x = resample(waveform, source_rate, SPEC_RATE)?;
    let win_len = (SPEC_WINDOW_S * SPEC_RATE as f64).round() as usize; // 440
    let hop = win_len / 2; // 220
    debug_assert_eq!(x.len() / hop, SPEC_FRAMES);
    let window: Vec<f64> = (0..win_len)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / win_len as f64).cos()))
        .collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(SPEC_FFT);
    let mut out = Tensor::zeros(&[SPEC_FRAMES, SPEC_BINS]);
    let data = out.data_mut();
    let mut buf = vec![Complex::new(0.0f64, 0.0); SPEC_FFT];
    for frame in 0..SPEC_FRAMES {
        let start = frame * hop;
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for i in 0..win_len {
            if start + i < x.len() {
                buf[i] = Complex::new(x[start + i] * window[i], 0.0);
            }
        }
        fft.process(&mut buf);
        for k in 0..SPEC_BINS {
            let m = buf[k].norm();
            data[frame * SPEC_BINS + k] = if log_compress { (1.0 + m).ln() } else { m };
        }
    }
    Ok(Spectrogram { values: out, window_s: SPEC_WINDOW_S, sample_rate: SPEC_RATE })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_is_500_by_257() {
        let x = vec![0.1; 60_000];
        let s = spectrogram(&x, 12_000).unwrap();
        assert_eq!(s.values.shape(), &[500, 257]);
    }

    #[test]
    fn wrong_duration_is_a_hard_error() {
        assert!(spectrogram(&vec![0.0; 59_999], 12_000).is_err());
        assert!(spectrogram(&vec![0.0; 110_001], 22_000).is_err());
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let s = spectrogram(&vec![0.0; 60_000], 12_000).unwrap();
        assert!(s.values.data().iter().all(|&v| v == 0.0));
    }

    // Analytic bin-center oracle: 1 kHz lands in bin round(1000/(22000/512)).
    #[test]
    fn pure_tone_peaks_in_the_analytic_bin() {
        let x: Vec<f64> = (0..110_000)
            .map(|i| (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / 22_000.0).sin())
            .collect();
        let s = spectrogram(&x, 22_000).unwrap();
        let expected_bin = (1000.0f64 / (22_000.0 / 512.0)).round() as usize;
        assert_eq!(expected_bin, 23);
        for frame in 0..SPEC_FRAMES {
            let row = &s.values.data()[frame * SPEC_BINS..(frame + 1) * SPEC_BINS];
            let argmax = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(argmax, expected_bin, "frame {frame}");
        }
    }

    // Parseval-style check: total squared magnitude matches the windowed
    // signal energy scaled by the FFT length within 10%.
    #[test]
    fn spectral_energy_tracks_signal_energy() {
        let mut rng = crate::rng::stream(8, "spec-test", 0);
        use rand::Rng;
        let x: Vec<f64> = (0..110_000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = spectrogram(&x, 22_000).unwrap();
        let win_len = 440;
        let hop = 220;
        let window: Vec<f64> = (0..win_len)
            .map(|i| {
                0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / win_len as f64).cos())
            })
            .collect();
        let mut windowed_energy = 0.0;
        for frame in 0..SPEC_FRAMES {
            for i in 0..win_len {
                let idx = frame * hop + i;
                if idx < x.len() {
                    windowed_energy += (x[idx] * window[i]).powi(2);
                }
            }
        }
        // reconstruct the two-sided spectral sum from the one-sided store
        let mut spectral = 0.0;
        for frame in 0..SPEC_FRAMES {
            let row = &s.values.data()[frame * SPEC_BINS..(frame + 1) * SPEC_BINS];
            for (k, &m) in row.iter().enumerate() {
                let double = k != 0 && k != SPEC_BINS - 1;
                spectral += m * m * if double { 2.0 } else { 1.0 };
            }
        }
        let ratio = spectral / (SPEC_FFT as f64 * windowed_energy);
        assert!((ratio - 1.0).abs() < 0.1, "Parseval ratio {ratio}");
    }
}
