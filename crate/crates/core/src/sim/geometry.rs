//! Aperiodic microphone layout.

use rand::Rng;

use super::{ArrayGeometry, APERTURE, MIC_COUNT, SOUND_SPEED};
use crate::error::{Error, Result};
use crate::rng;

/// Minimum pairwise microphone spacing, meters.
pub const MIN_SPACING: f64 = 0.02;

const MAX_ATTEMPTS_PER_MIC: usize = 20_000;

/// Seeded blue-noise layout: 128 microphones in a 0.45 m x 0.45 m plane
/// with pairwise spacing of at least 2 cm, placed by rejection sampling.
/// Aperiodic placement avoids the grating lobes of a regular grid.
pub fn build_default_geometry(seed: u64) -> ArrayGeometry {
    build_geometry(seed, MIC_COUNT, APERTURE, APERTURE, MIN_SPACING)
        .expect("default layout parameters always admit a placement")
}

/// General form of [`build_default_geometry`]. Fails if rejection sampling
/// cannot place all microphones within a bounded attempt count, which
/// signals that `min_spacing` is too large for the aperture.
pub fn build_geometry(
    seed: u64,
    mics: usize,
    width: f64,
    height: f64,
    min_spacing: f64,
) -> Result<ArrayGeometry> {
    if mics < 2 {
        return Err(Error::Geometry("need at least 2 microphones".into()));
    }
    let mut rng = rng::stream(seed, "geometry", 0);
    let hw = width / 2.0;
    let hh = height / 2.0;
    let mut placed: Vec<[f64; 3]> = Vec::with_capacity(mics);
    for idx in 0..mics {
        let mut ok = false;
        for _ in 0..MAX_ATTEMPTS_PER_MIC {
            let x = rng.gen_range(-hw..=hw);
            let y = rng.gen_range(-hh..=hh);
            let far_enough = placed
                .iter()
                .all(|p| (p[0] - x).hypot(p[1] - y) >= min_spacing);
            if far_enough {
                placed.push([x, y, 0.0]);
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(Error::Geometry(format!(
                "could not place microphone {idx} of {mics}: spacing {min_spacing} m too large \
                 for a {width} m x {height} m aperture"
            )));
        }
    }
    Ok(ArrayGeometry {
        mic_positions: placed,
        aperture_width: width,
        aperture_height: height,
        sound_speed: SOUND_SPEED,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout_is_inside_the_aperture() {
        let g = build_default_geometry(7);
        assert_eq!(g.mic_count(), 128);
        for p in &g.mic_positions {
            assert!(p[0].abs() <= 0.225 && p[1].abs() <= 0.225);
            assert_eq!(p[2], 0.0);
        }
        g.validate().unwrap();
    }

    #[test]
    fn layout_is_deterministic() {
        assert_eq!(
            build_default_geometry(7).mic_positions,
            build_default_geometry(7).mic_positions
        );
    }

    // Exhaustive O(M^2) pair scan.
    #[test]
    fn pairwise_spacing_holds() {
        for seed in [0u64, 7, 123] {
            let g = build_default_geometry(seed);
            for i in 0..g.mic_count() {
                for j in (i + 1)..g.mic_count() {
                    let a = g.mic_positions[i];
                    let b = g.mic_positions[j];
                    let d = (a[0] - b[0]).hypot(a[1] - b[1]);
                    assert!(d >= MIN_SPACING, "seed {seed}: mics {i},{j} at {d} m");
                }
            }
        }
    }

    #[test]
    fn impossible_spacing_is_reported() {
        let err = build_geometry(1, 128, 0.45, 0.45, 0.2);
        assert!(err.is_err());
    }
}
