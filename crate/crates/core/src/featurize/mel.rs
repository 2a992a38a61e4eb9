//! Per-pixel cepstral compression of acoustic image volumes.
//!
//! Each pixel's 512-bin energy spectrum passes through a unit-sum
//! triangular mel filterbank, a floored log, and an orthonormal DCT-II;
//! the first 12 coefficients are kept, taking a T x 36 x 48 x 512 volume
//! to T x 36 x 48 x 12.

use crate::beamform::AcousticImageVolume;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Cepstral coefficients kept per pixel.
pub const MFCC_COEFFS: usize = 12;

/// Default mel filter count.
pub const DEFAULT_MELS: usize = 32;

/// Log floor applied before the DCT.
pub const LOG_FLOOR: f64 = 1e-10;

/// MFCC-compressed acoustic volume.
#[derive(Clone, Debug)]
pub struct MfccVolume {
    /// `[T, 36, 48, coefficient_count]`.
    pub frames: Tensor,
    pub coefficient_count: usize,
    pub mel_filter_count: usize,
    pub frame_rate: f64,
}

impl MfccVolume {
    pub fn frame_count(&self) -> usize {
        self.frames.shape()[0]
    }
}

/// Precomputed filterbank + DCT for one spectrum layout.
pub struct MelCompressor {
    /// Per filter: first bin index and the triangle weights from there.
    filters: Vec<(usize, Vec<f64>)>,
    /// Row-major `[n_coeffs x n_mels]` orthonormal DCT-II matrix.
    dct: Vec<f64>,
    n_mels: usize,
    n_coeffs: usize,
    bins: usize,
}

impl MelCompressor {
    /// Build for `bin_frequencies` (strictly increasing, Hz). Filters span
    /// 0 Hz to the last bin on the mel scale and each row is normalized to
    /// unit sum, so a flat spectrum maps to a flat mel vector.
    pub fn new(bin_frequencies: &[f64], n_mels: usize, n_coeffs: usize) -> Result<MelCompressor> {
        if n_mels == 0 {
            return Err(Error::Featurize("mel filter count must be positive".into()));
        }
        let bins = bin_frequencies.len();
        if !(n_coeffs <= n_mels && n_mels <= bins) {
            return Err(Error::Featurize(format!(
                "need n_coeffs <= n_mels <= bins, got {n_coeffs} / {n_mels} / {bins}"
            )));
        }
        let f_max = *bin_frequencies.last().unwrap();
        let m_max = mel(f_max);
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_inv(m_max * i as f64 / (n_mels + 1) as f64))
            .collect();
        let mut filters = Vec::with_capacity(n_mels);
        for j in 1..=n_mels {
            let (lo, mid, hi) = (edges[j - 1], edges[j], edges[j + 1]);
            let mut start = None;
            let mut weights = Vec::new();
            for (k, &f) in bin_frequencies.iter().enumerate() {
                let w = if f > lo && f < mid {
                    (f - lo) / (mid - lo)
                } else if (f - mid).abs() == 0.0 {
                    1.0
                } else if f > mid && f < hi {
                    (hi - f) / (hi - mid)
                } else {
                    0.0
                };
                if w > 0.0 {
                    if start.is_none() {
                        start = Some(k);
                    }
                    weights.push(w);
                } else if start.is_some() {
                    break;
                }
            }
            let start = start.ok_or_else(|| {
                Error::Featurize(format!(
                    "mel filter {j} covers no bins; reduce the filter count"
                ))
            })?;
            let sum: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= sum;
            }
            filters.push((start, weights));
        }
        let mut dct = vec![0.0; n_coeffs * n_mels];
        for i in 0..n_coeffs {
            let scale = if i == 0 {
                (1.0 / n_mels as f64).sqrt()
            } else {
                (2.0 / n_mels as f64).sqrt()
            };
            for j in 0..n_mels {
                dct[i * n_mels + j] = scale
                    * (std::f64::consts::PI * i as f64 * (2.0 * j as f64 + 1.0)
                        / (2.0 * n_mels as f64))
                        .cos();
            }
        }
        Ok(MelCompressor { filters, dct, n_mels, n_coeffs, bins })
    }

    pub fn coeff_count(&self) -> usize {
        self.n_coeffs
    }

    pub fn mel_count(&self) -> usize {
        self.n_mels
    }

    /// Compress one energy spectrum into `out` (length `n_coeffs`).
    pub fn compress_into(&self, energies: &[f32], out: &mut [f64]) {
        debug_assert_eq!(energies.len(), self.bins);
        debug_assert_eq!(out.len(), self.n_coeffs);
        let mut logs = vec![0.0f64; self.n_mels];
        for (j, (start, weights)) in self.filters.iter().enumerate() {
            let mut acc = 0.0f64;
            for (w, &e) in weights.iter().zip(&energies[*start..]) {
                acc += w * e as f64;
            }
            logs[j] = acc.max(LOG_FLOOR).ln();
        }
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.dct[i * self.n_mels..(i + 1) * self.n_mels];
            *o = row.iter().zip(&logs).map(|(d, l)| d * l).sum();
        }
    }
}

/// Compress a full acoustic image volume.
pub fn mfcc_compress(
    volume: &AcousticImageVolume,
    n_mels: usize,
    n_coeffs: usize,
) -> Result<MfccVolume> {
    let comp = MelCompressor::new(&volume.bin_frequencies, n_mels, n_coeffs)?;
    let shape = volume.frames.shape();
    let (t, h, w, k) = (shape[0], shape[1], shape[2], shape[3]);
    let mut out = Tensor::zeros(&[t, h, w, n_coeffs]);
    let src = volume.frames.data();
    let mut spectrum = vec![0f32; k];
    {
        let dst = out.data_mut();
        for cell in 0..t * h * w {
            for (s, &v) in spectrum.iter_mut().zip(&src[cell * k..(cell + 1) * k]) {
                *s = v as f32;
            }
            comp.compress_into(&spectrum, &mut dst[cell * n_coeffs..(cell + 1) * n_coeffs]);
        }
    }
    Ok(MfccVolume {
        frames: out,
        coefficient_count: n_coeffs,
        mel_filter_count: n_mels,
        frame_rate: volume.frame_rate,
    })
}

fn mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_inv(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn bin_freqs() -> Vec<f64> {
        (1..=512).map(|k| k as f64 * 12_000.0 / 1024.0).collect()
    }

    fn toy_volume(t: usize, fill: impl Fn(usize) -> f64) -> AcousticImageVolume {
        let mut frames = Tensor::zeros(&[t, 36, 48, 512]);
        for (i, v) in frames.data_mut().iter_mut().enumerate() {
            *v = fill(i);
        }
        AcousticImageVolume { frames, frame_rate: 12.0, bin_frequencies: bin_freqs() }
    }

    // DCT of a constant: coefficient 0 carries the log level, the rest
    // vanish because the filter rows are unit-sum.
    #[test]
    fn flat_spectrum_concentrates_in_coefficient_zero() {
        let c = 3.7;
        let vol = toy_volume(1, |_| c);
        let m = mfcc_compress(&vol, 32, 12).unwrap();
        let px = &m.frames.data()[..12];
        let expect_c0 = (32f64).sqrt() * (c as f32 as f64).ln();
        assert!((px[0] - expect_c0).abs() < 1e-6, "c0 {} vs {}", px[0], expect_c0);
        for (i, &v) in px.iter().enumerate().skip(1) {
            assert!(v.abs() < 1e-6, "coefficient {i} = {v}");
        }
    }

    #[test]
    fn output_shape_is_t_36_48_12() {
        let vol = toy_volume(3, |i| (i % 7) as f64);
        let m = mfcc_compress(&vol, 32, 12).unwrap();
        assert_eq!(m.frames.shape(), &[3, 36, 48, 12]);
        assert!(m.frames.all_finite());
    }

    // Naive dense matrix oracle.
    #[test]
    fn matches_dense_matrix_reference() {
        let freqs = bin_freqs();
        let comp = MelCompressor::new(&freqs, 32, 12).unwrap();
        // dense filterbank replicated from first principles
        let f_max = 6000.0;
        let m_max = mel(f_max);
        let edges: Vec<f64> =
            (0..34).map(|i| mel_inv(m_max * i as f64 / 33.0)).collect();
        let mut dense = vec![vec![0.0f64; 512]; 32];
        for j in 1..=32 {
            let (lo, mid, hi) = (edges[j - 1], edges[j], edges[j + 1]);
            for (k, &f) in freqs.iter().enumerate() {
                dense[j - 1][k] = if f > lo && f < mid {
                    (f - lo) / (mid - lo)
                } else if f == mid {
                    1.0
                } else if f > mid && f < hi {
                    (hi - f) / (hi - mid)
                } else {
                    0.0
                };
            }
            let s: f64 = dense[j - 1].iter().sum();
            for w in &mut dense[j - 1] {
                *w /= s;
            }
        }
        let mut rng = crate::rng::stream(5, "mfcc-test", 0);
        let spectrum: Vec<f32> = (0..512).map(|_| rng.gen_range(0.0..4.0)).collect();
        let mut got = vec![0.0; 12];
        comp.compress_into(&spectrum, &mut got);
        for i in 0..12 {
            let scale: f64 =
                if i == 0 { (1.0f64 / 32.0).sqrt() } else { (2.0f64 / 32.0).sqrt() };
            let mut want = 0.0;
            for j in 0..32 {
                let mel_e: f64 =
                    dense[j].iter().zip(&spectrum).map(|(w, &e)| w * e as f64).sum();
                want += scale
                    * (std::f64::consts::PI * i as f64 * (2.0 * j as f64 + 1.0) / 64.0).cos()
                    * mel_e.max(LOG_FLOOR).ln();
            }
            assert!((got[i] - want).abs() < 1e-9, "coeff {i}: {} vs {want}", got[i]);
        }
    }

    #[test]
    fn rejects_bad_filter_counts() {
        let vol = toy_volume(1, |_| 1.0);
        assert!(mfcc_compress(&vol, 0, 12).is_err());
        assert!(mfcc_compress(&vol, 8, 12).is_err());
        assert!(mfcc_compress(&vol, 600, 12).is_err());
    }

    #[test]
    fn compression_is_bitwise_deterministic() {
        let vol = toy_volume(2, |i| ((i * 2654435761) % 1000) as f64 / 1000.0);
        let a = mfcc_compress(&vol, 32, 12).unwrap();
        let b = mfcc_compress(&vol, 32, 12).unwrap();
        assert_eq!(a.frames.data(), b.frames.data());
    }
}
