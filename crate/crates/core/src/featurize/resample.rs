//! Rational-rate polyphase resampler.

use crate::error::{Error, Result};

const HALF: i64 = 16;

/// Windowed-sinc polyphase resampling from `from_hz` to `to_hz`.
///
/// Output sample `n` reads the input at time `n * from / to` through a
/// 32-tap Hann-windowed sinc with cutoff at the lower Nyquist; the tap
/// tables are precomputed per fractional phase, one per residue of the
/// reduced rate ratio.
pub fn resample(x: &[f64], from_hz: u32, to_hz: u32) -> Result<Vec<f64>> {
    if from_hz == 0 || to_hz == 0 {
        return Err(Error::Featurize("sample rates must be positive".into()));
    }
    if from_hz == to_hz {
        return Ok(x.to_vec());
    }
    let g = gcd(from_hz, to_hz);
    let (from_r, to_r) = ((from_hz / g) as u64, (to_hz / g) as u64);
    // anti-aliasing cutoff relative to the input rate
    let cutoff = if to_hz >= from_hz { 1.0 } else { to_hz as f64 / from_hz as f64 };
    let taps: Vec<Vec<f64>> = (0..to_r)
        .map(|phase| {
            let frac = phase as f64 / to_r as f64;
            (-HALF + 1..=HALF)
                .map(|j| kernel(frac - j as f64, cutoff))
                .collect()
        })
        .collect();
    let n_out = (x.len() as u64 * to_r / from_r) as usize;
    let mut out = Vec::with_capacity(n_out);
    for n in 0..n_out as u64 {
        let num = n * from_r;
        let base = (num / to_r) as i64;
        let phase = (num % to_r) as usize;
        let t = &taps[phase];
        let mut acc = 0.0;
        for (ti, j) in (-HALF + 1..=HALF).enumerate() {
            let idx = base + j;
            if idx >= 0 && (idx as usize) < x.len() {
                acc += x[idx as usize] * t[ti];
            }
        }
        out.push(acc);
    }
    Ok(out)
}

fn kernel(u: f64, cutoff: f64) -> f64 {
    if u.abs() >= HALF as f64 {
        return 0.0;
    }
    let s = if u == 0.0 {
        cutoff
    } else {
        let p = std::f64::consts::PI * u * cutoff;
        cutoff * p.sin() / p
    };
    let w = 0.5 * (1.0 + (std::f64::consts::PI * u / HALF as f64).cos());
    s * w
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
