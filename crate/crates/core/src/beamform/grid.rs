//! Steering grid construction.

use crate::error::{Error, Result};
use crate::sim::ArrayGeometry;

/// Acoustic image height (rows).
pub const GRID_H: usize = 36;
/// Acoustic image width (columns).
pub const GRID_W: usize = 48;

/// A 36x48 grid of steering directions with per-pixel, per-microphone
/// alignment delays.
///
/// Pixel (18, 24) points exactly broadside; azimuth grows with the column
/// index and elevation with decreasing row index (image convention, row 0
/// on top).
#[derive(Clone, Debug)]
pub struct SteeringGrid {
    /// Unit direction per pixel, row-major `[GRID_H * GRID_W]`.
    pub directions: Vec<[f64; 3]>,
    /// Alignment delay in seconds, `delays[pixel][mic]`.
    pub delays: Vec<Vec<f64>>,
    pub fov_h_deg: f64,
    pub fov_v_deg: f64,
    /// Focal range in meters; `None` steers plane waves (far field).
    pub focus_range_m: Option<f64>,
    /// Geometry the delays were computed for.
    pub geometry: ArrayGeometry,
}

impl SteeringGrid {
    pub fn pixel_count(&self) -> usize {
        GRID_H * GRID_W
    }

    pub fn pixel_index(row: usize, col: usize) -> usize {
        row * GRID_W + col
    }

    /// Pixel whose direction is closest to a source at `position` (scene
    /// frame, z forward). Clamped to the grid.
    pub fn pixel_for_position(&self, position: [f64; 3]) -> (usize, usize) {
        let az = (position[0] / position[2]).atan().to_degrees();
        let el = (position[1] / position[2]).atan().to_degrees();
        let dc = self.fov_h_deg / GRID_W as f64;
        let dr = self.fov_v_deg / GRID_H as f64;
        let col = (24.0 + az / dc).round().clamp(0.0, (GRID_W - 1) as f64) as usize;
        let row = (18.0 - el / dr).round().clamp(0.0, (GRID_H - 1) as f64) as usize;
        (row, col)
    }
}

/// Build the steering grid for a geometry and field of view.
///
/// Far-field delays are plane-wave projections `-(r_m . u) / c`; with a
/// focal range they are exact spherical path differences
/// `(|q - r_m| - |q|) / c` for the focal point `q` at that range.
pub fn build_steering_grid(
    geometry: &ArrayGeometry,
    fov_h_deg: f64,
    fov_v_deg: f64,
    focus_range_m: Option<f64>,
) -> Result<SteeringGrid> {
    if !(0.0 < fov_h_deg && fov_h_deg <= 180.0 && 0.0 < fov_v_deg && fov_v_deg <= 180.0) {
        return Err(Error::Beamform("field of view must be in (0, 180] degrees".into()));
    }
    if let Some(r) = focus_range_m {
        if r <= 0.0 {
            return Err(Error::Beamform("focal range must be positive".into()));
        }
    }
    geometry.validate()?;
    let dc = fov_h_deg / GRID_W as f64;
    let dr = fov_v_deg / GRID_H as f64;
    let c = geometry.sound_speed;
    let mut directions = Vec::with_capacity(GRID_H * GRID_W);
    let mut delays = Vec::with_capacity(GRID_H * GRID_W);
    for row in 0..GRID_H {
        for col in 0..GRID_W {
            let az = ((col as f64 - 24.0) * dc).to_radians();
            let el = ((18.0 - row as f64) * dr).to_radians();
            let raw = [az.tan(), el.tan(), 1.0];
            let norm = (raw[0] * raw[0] + raw[1] * raw[1] + 1.0).sqrt();
            let u = [raw[0] / norm, raw[1] / norm, raw[2] / norm];
            directions.push(u);
            let mic_delays: Vec<f64> = match focus_range_m {
                None => geometry
                    .mic_positions
                    .iter()
                    .map(|r| -(r[0] * u[0] + r[1] * u[1] + r[2] * u[2]) / c)
                    .collect(),
                Some(range) => {
                    let q = [u[0] * range, u[1] * range, u[2] * range];
                    geometry
                        .mic_positions
                        .iter()
                        .map(|r| {
                            let d = ((q[0] - r[0]).powi(2)
                                + (q[1] - r[1]).powi(2)
                                + (q[2] - r[2]).powi(2))
                            .sqrt();
                            (d - range) / c
                        })
                        .collect()
                }
            };
            delays.push(mic_delays);
        }
    }
    Ok(SteeringGrid {
        directions,
        delays,
        fov_h_deg,
        fov_v_deg,
        focus_range_m,
        geometry: geometry.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{build_geometry, ArrayGeometry};

    fn small_geometry(seed: u64) -> ArrayGeometry {
        build_geometry(seed, 16, 0.45, 0.45, 0.02).unwrap()
    }

    #[test]
    fn center_pixel_is_broadside() {
        let grid = build_steering_grid(&small_geometry(1), 64.0, 48.0, None).unwrap();
        let u = grid.directions[SteeringGrid::pixel_index(18, 24)];
        assert_eq!(u, [0.0, 0.0, 1.0]);
    }

    #[test]
    fn directions_are_monotonic_along_axes() {
        let grid = build_steering_grid(&small_geometry(1), 64.0, 48.0, None).unwrap();
        for col in 1..GRID_W {
            let a = grid.directions[SteeringGrid::pixel_index(18, col - 1)][0];
            let b = grid.directions[SteeringGrid::pixel_index(18, col)][0];
            assert!(b > a);
        }
        for row in 1..GRID_H {
            let a = grid.directions[SteeringGrid::pixel_index(row - 1, 24)][1];
            let b = grid.directions[SteeringGrid::pixel_index(row, 24)][1];
            assert!(b < a);
        }
    }

    // Mirroring the microphone x coordinates must mirror the delay table
    // across the azimuth axis.
    #[test]
    fn mirrored_positions_mirror_delays() {
        let geom = small_geometry(3);
        let mut mirrored = geom.clone();
        for p in &mut mirrored.mic_positions {
            p[0] = -p[0];
        }
        let g1 = build_steering_grid(&geom, 64.0, 48.0, None).unwrap();
        let g2 = build_steering_grid(&mirrored, 64.0, 48.0, None).unwrap();
        for row in 0..GRID_H {
            for col in 1..GRID_W {
                let p = SteeringGrid::pixel_index(row, col);
                let q = SteeringGrid::pixel_index(row, 48 - col);
                for m in 0..geom.mic_count() {
                    let a = g1.delays[p][m];
                    let b = g2.delays[q][m];
                    assert!((a - b).abs() < 1e-15, "pixel {p}/{q} mic {m}");
                }
            }
        }
    }

    // Closed-form geometry oracle at the center pixel: the near-field
    // delay minus the far-field delay is (sqrt(|r|^2 + R^2) - R)/c there.
    #[test]
    fn near_field_matches_spherical_formula() {
        let geom = small_geometry(5);
        let far = build_steering_grid(&geom, 64.0, 48.0, None).unwrap();
        let near = build_steering_grid(&geom, 64.0, 48.0, Some(2.0)).unwrap();
        let p = SteeringGrid::pixel_index(18, 24);
        for (m, r) in geom.mic_positions.iter().enumerate() {
            let expect = ((r[0] * r[0] + r[1] * r[1] + 4.0).sqrt() - 2.0) / geom.sound_speed;
            let got = near.delays[p][m] - far.delays[p][m];
            assert!((got - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn bad_fov_is_rejected() {
        let geom = small_geometry(1);
        assert!(build_steering_grid(&geom, 0.0, 48.0, None).is_err());
        assert!(build_steering_grid(&geom, 64.0, 200.0, None).is_err());
    }
}
