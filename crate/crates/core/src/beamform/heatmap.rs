//! Band-summed heatmaps and PNG export.

use std::path::Path;

use image::{Rgb, RgbImage};

use super::grid::{GRID_H, GRID_W};
use super::image::{pixel_band_energy, AcousticImageVolume};
use crate::error::{Error, Result};

/// A single-frame, band-summed acoustic image.
#[derive(Clone, Debug)]
pub struct HeatmapImage {
    /// Row-major 36x48 nonnegative values.
    pub pixels: Vec<f64>,
    /// The frequency band that was summed, Hz.
    pub band: (f64, f64),
    /// Location of the highest-intensity pixel, `(row, col)`.
    pub argmax_pixel: (usize, usize),
}

/// Sum the energies of every bin inside `band` for one frame.
pub fn render_heatmap(
    volume: &AcousticImageVolume,
    frame: usize,
    band: (f64, f64),
) -> Result<HeatmapImage> {
    if frame >= volume.frame_count() {
        return Err(Error::Beamform(format!(
            "frame {frame} out of range 0..{}",
            volume.frame_count()
        )));
    }
    let overlaps = volume
        .bin_frequencies
        .iter()
        .any(|&f| f >= band.0 && f <= band.1);
    if band.0 > band.1 || !overlaps {
        return Err(Error::Beamform(format!(
            "band {:?} Hz does not intersect the bin range {:.0}..{:.0} Hz",
            band,
            volume.bin_frequencies.first().unwrap_or(&0.0),
            volume.bin_frequencies.last().unwrap_or(&0.0)
        )));
    }
    let pixels = pixel_band_energy(volume, frame, band);
    let best = pixels
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(HeatmapImage {
        pixels,
        band,
        argmax_pixel: (best / GRID_W, best % GRID_W),
    })
}

/// Write the heatmap as a PNG, optionally alpha-blended over a background
/// video frame with nearest-neighbor upscaling (each acoustic pixel covers
/// width/48 x height/36 visual pixels).
pub fn export_heatmap_png(
    img: &HeatmapImage,
    background: Option<&RgbImage>,
    path: &Path,
) -> Result<()> {
    let max = img.pixels.iter().cloned().fold(0.0f64, f64::max);
    let colored = |row: usize, col: usize| -> [f64; 3] {
        let v = if max > 0.0 { img.pixels[row * GRID_W + col] / max } else { 0.0 };
        heat_color(v)
    };
    let out = match background {
        None => {
            let mut out = RgbImage::new(GRID_W as u32, GRID_H as u32);
            for (x, y, px) in out.enumerate_pixels_mut() {
                let c = colored(y as usize, x as usize);
                *px = Rgb([to_u8(c[0]), to_u8(c[1]), to_u8(c[2])]);
            }
            out
        }
        Some(bg) => {
            let (w, h) = (bg.width(), bg.height());
            let mut out = RgbImage::new(w, h);
            for (x, y, px) in out.enumerate_pixels_mut() {
                let row = (y as usize * GRID_H) / h as usize;
                let col = (x as usize * GRID_W) / w as usize;
                let c = colored(row.min(GRID_H - 1), col.min(GRID_W - 1));
                let b = bg.get_pixel(x, y).0;
                let alpha = 0.55;
                *px = Rgb([
                    to_u8(alpha * c[0] + (1.0 - alpha) * b[0] as f64 / 255.0),
                    to_u8(alpha * c[1] + (1.0 - alpha) * b[1] as f64 / 255.0),
                    to_u8(alpha * c[2] + (1.0 - alpha) * b[2] as f64 / 255.0),
                ]);
            }
            out
        }
    };
    out.save(path)
        .map_err(|e| Error::format(path, format!("png encode failed: {e}")))
}

/// Black -> red -> yellow -> white ramp.
fn heat_color(v: f64) -> [f64; 3] {
    let v = v.clamp(0.0, 1.0);
    [(3.0 * v).min(1.0), (3.0 * v - 1.0).clamp(0.0, 1.0), (3.0 * v - 2.0).clamp(0.0, 1.0)]
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn toy_volume(bins: usize, hot: (usize, usize)) -> AcousticImageVolume {
        let mut frames = Tensor::zeros(&[1, GRID_H, GRID_W, bins]);
        {
            let data = frames.data_mut();
            for p in 0..GRID_H * GRID_W {
                for k in 0..bins {
                    data[p * bins + k] = 0.1;
                }
            }
            let p = hot.0 * GRID_W + hot.1;
            for k in 0..bins {
                data[p * bins + k] = 1.0 + k as f64;
            }
        }
        AcousticImageVolume {
            frames,
            frame_rate: 12.0,
            bin_frequencies: (1..=bins).map(|k| k as f64 * 6000.0 / bins as f64).collect(),
        }
    }

    #[test]
    fn full_band_equals_total_energy_sum() {
        let vol = toy_volume(16, (10, 20));
        let hm = render_heatmap(&vol, 0, (0.0, 6000.0)).unwrap();
        let bins = vol.bin_count();
        for p in 0..GRID_H * GRID_W {
            let expect: f64 = (0..bins).map(|k| vol.frames.data()[p * bins + k]).sum();
            assert!((hm.pixels[p] - expect).abs() < 1e-12);
        }
        assert_eq!(hm.argmax_pixel, (10, 20));
        let peak = hm.pixels[10 * GRID_W + 20];
        assert!(hm.pixels.iter().all(|&v| v <= peak));
    }

    #[test]
    fn disjoint_band_is_an_error() {
        let vol = toy_volume(16, (0, 0));
        assert!(render_heatmap(&vol, 0, (7000.0, 8000.0)).is_err());
        assert!(render_heatmap(&vol, 3, (900.0, 6000.0)).is_err());
    }

    #[test]
    fn export_dimensions_follow_background() {
        let dir = tempfile::tempdir().unwrap();
        let vol = toy_volume(8, (5, 5));
        let hm = render_heatmap(&vol, 0, (0.0, 6000.0)).unwrap();

        let bare = dir.path().join("bare.png");
        export_heatmap_png(&hm, None, &bare).unwrap();
        let img = image::open(&bare).unwrap();
        assert_eq!((img.width(), img.height()), (48, 36));

        let bg = RgbImage::from_pixel(640, 480, Rgb([10, 20, 30]));
        let over = dir.path().join("overlay.png");
        export_heatmap_png(&hm, Some(&bg), &over).unwrap();
        let img = image::open(&over).unwrap();
        assert_eq!((img.width(), img.height()), (640, 480));
    }

    #[test]
    fn constant_field_renders_uniform_color() {
        let mut vol = toy_volume(4, (0, 0));
        for v in vol.frames.data_mut().iter_mut() {
            *v = 0.5;
        }
        let hm = render_heatmap(&vol, 0, (0.0, 6000.0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("flat.png");
        export_heatmap_png(&hm, None, &path).unwrap();
        let img = image::open(&path).unwrap().to_rgb8();
        let first = img.get_pixel(0, 0);
        assert!(img.pixels().all(|p| p == first));
    }
}
