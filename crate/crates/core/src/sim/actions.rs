//! Synthetic action-sound generators.
//!
//! Six parametric families stand in for the recorded action classes. Each
//! class id maps to a fixed template in [`class_generator`]; the seed only
//! drives the stochastic content (noise realizations), so two generators
//! with equal class id and seed produce identical waveforms.

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::rng;

/// Parametric signal family.
#[derive(Clone, Debug, PartialEq)]
pub enum GeneratorFamily {
    /// Periodic decaying clicks (clapping, knocking).
    ImpulseTrain { period_s: f64, decay_s: f64, tone_hz: f64 },
    /// Fundamental plus rolled-off harmonics (whistling, speaking).
    HarmonicTone { f0_hz: f64, harmonics: usize },
    /// Repeating linear frequency sweep.
    Chirp { start_hz: f64, end_hz: f64, sweep_s: f64 },
    /// Periodic gated bursts of band-limited noise (paper ripping, typing).
    BroadbandBurst { low_hz: f64, high_hz: f64, burst_s: f64, period_s: f64 },
    /// Amplitude-modulated band-limited noise (crumpling).
    AmNoise { low_hz: f64, high_hz: f64, mod_hz: f64, mod_depth: f64 },
    /// Damped tonal strikes over a quiet harmonic bed (hammering).
    TonalTransientComposite { f0_hz: f64, period_s: f64, decay_s: f64 },
}

impl GeneratorFamily {
    /// Highest intentional frequency; must stay at or below Nyquist.
    pub fn top_frequency(&self) -> f64 {
        match *self {
            GeneratorFamily::ImpulseTrain { tone_hz, .. } => tone_hz,
            GeneratorFamily::HarmonicTone { f0_hz, .. } => f0_hz,
            GeneratorFamily::Chirp { start_hz, end_hz, .. } => start_hz.max(end_hz),
            GeneratorFamily::BroadbandBurst { high_hz, .. } => high_hz,
            GeneratorFamily::AmNoise { high_hz, .. } => high_hz,
            GeneratorFamily::TonalTransientComposite { f0_hz, .. } => f0_hz * 3.0,
        }
    }
}

/// A labeled, seeded waveform source.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionGenerator {
    pub class_id: u16,
    pub family: GeneratorFamily,
    pub rng_seed: u64,
}

/// Total number of class templates.
pub const CLASS_COUNT: usize = 14;

/// Fixed template table mapping class ids to generator families.
///
/// Classes 10..=13 form two pairs with matching long-term spectra but
/// different temporal structure; they are reserved as the held-out
/// transfer split.
pub fn class_generator(class_id: u16, rng_seed: u64) -> ActionGenerator {
    use GeneratorFamily::*;
    let family = match class_id {
        0 => ImpulseTrain { period_s: 0.23, decay_s: 0.010, tone_hz: 1700.0 },
        1 => HarmonicTone { f0_hz: 950.0, harmonics: 5 },
        2 => Chirp { start_hz: 600.0, end_hz: 2800.0, sweep_s: 0.5 },
        3 => BroadbandBurst { low_hz: 900.0, high_hz: 5200.0, burst_s: 0.12, period_s: 0.45 },
        4 => AmNoise { low_hz: 400.0, high_hz: 2400.0, mod_hz: 6.0, mod_depth: 0.85 },
        5 => TonalTransientComposite { f0_hz: 520.0, period_s: 0.30, decay_s: 0.035 },
        6 => ImpulseTrain { period_s: 0.09, decay_s: 0.004, tone_hz: 2900.0 },
        7 => HarmonicTone { f0_hz: 420.0, harmonics: 7 },
        8 => Chirp { start_hz: 3000.0, end_hz: 1200.0, sweep_s: 0.8 },
        9 => BroadbandBurst { low_hz: 2000.0, high_hz: 5800.0, burst_s: 0.05, period_s: 0.15 },
        10 => AmNoise { low_hz: 800.0, high_hz: 4000.0, mod_hz: 3.0, mod_depth: 0.9 },
        11 => AmNoise { low_hz: 800.0, high_hz: 4000.0, mod_hz: 22.0, mod_depth: 0.9 },
        12 => ImpulseTrain { period_s: 0.30, decay_s: 0.012, tone_hz: 2100.0 },
        13 => ImpulseTrain { period_s: 0.085, decay_s: 0.012, tone_hz: 2100.0 },
        other => panic!("class id {other} out of range 0..{CLASS_COUNT}"),
    };
    ActionGenerator { class_id, family, rng_seed }
}

/// Render a generator to `ceil(duration * sample_rate)` samples in [-1, 1].
pub fn synthesize_action(
    gen: &ActionGenerator,
    duration_s: f64,
    sample_rate: u32,
) -> Result<Vec<f64>> {
    if duration_s <= 0.0 {
        return Err(Error::Generator("duration must be positive".into()));
    }
    let nyquist = sample_rate as f64 / 2.0;
    let top = gen.family.top_frequency();
    if top > nyquist {
        return Err(Error::Generator(format!(
            "generator content at {top} Hz exceeds Nyquist {nyquist} Hz"
        )));
    }
    let n = (duration_s * sample_rate as f64).ceil() as usize;
    let fs = sample_rate as f64;
    let mut rng = rng::stream(gen.rng_seed, "action", gen.class_id as u64);

    let mut w = match gen.family {
        GeneratorFamily::ImpulseTrain { period_s, decay_s, tone_hz } => {
            let mut w = vec![0.0; n];
            add_strikes(&mut w, fs, 0.0, period_s, decay_s, tone_hz, 1.0);
            w
        }
        GeneratorFamily::HarmonicTone { f0_hz, harmonics } => {
            let mut w = vec![0.0; n];
            for (i, s) in w.iter_mut().enumerate() {
                let t = i as f64 / fs;
                *s = (2.0 * std::f64::consts::PI * f0_hz * t).sin();
                for h in 2..=harmonics {
                    let fh = f0_hz * h as f64;
                    if fh <= nyquist {
                        *s += 0.3 / h as f64
                            * (2.0 * std::f64::consts::PI * fh * t).sin();
                    }
                }
            }
            w
        }
        GeneratorFamily::Chirp { start_hz, end_hz, sweep_s } => {
            let mut w = vec![0.0; n];
            for (i, s) in w.iter_mut().enumerate() {
                let t = i as f64 / fs;
                let u = (t / sweep_s).fract() * sweep_s;
                let phase = 2.0
                    * std::f64::consts::PI
                    * (start_hz * u + (end_hz - start_hz) * u * u / (2.0 * sweep_s));
                *s = phase.sin();
            }
            w
        }
        GeneratorFamily::BroadbandBurst { low_hz, high_hz, burst_s, period_s } => {
            let noise = band_noise(&mut rng, n, fs, low_hz, high_hz);
            let mut w = vec![0.0; n];
            let mut t0 = 0.0;
            while t0 < duration_s {
                let i0 = (t0 * fs) as usize;
                let len = (burst_s * fs) as usize;
                for j in 0..len {
                    let i = i0 + j;
                    if i >= n {
                        break;
                    }
                    // raised-cosine gate
                    let g = 0.5
                        * (1.0
                            - (2.0 * std::f64::consts::PI * j as f64 / len as f64).cos());
                    w[i] += noise[i] * g;
                }
                t0 += period_s;
            }
            w
        }
        GeneratorFamily::AmNoise { low_hz, high_hz, mod_hz, mod_depth } => {
            let noise = band_noise(&mut rng, n, fs, low_hz, high_hz);
            noise
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let t = i as f64 / fs;
                    let env = (1.0 - mod_depth)
                        + mod_depth
                            * 0.5
                            * (1.0 - (2.0 * std::f64::consts::PI * mod_hz * t).cos());
                    v * env
                })
                .collect()
        }
        GeneratorFamily::TonalTransientComposite { f0_hz, period_s, decay_s } => {
            let mut w = vec![0.0; n];
            // quiet sustained bed at the fundamental and its third harmonic
            for (i, s) in w.iter_mut().enumerate() {
                let t = i as f64 / fs;
                *s = 0.12 * (2.0 * std::f64::consts::PI * f0_hz * t).sin()
                    + 0.06 * (2.0 * std::f64::consts::PI * 3.0 * f0_hz * t).sin();
            }
            add_strikes(&mut w, fs, 0.0, period_s, decay_s, 2.0 * f0_hz, 1.0);
            w
        }
    };

    normalize_peak(&mut w, 0.9);
    Ok(w)
}

/// Damped-cosine strikes every `period_s` starting at `start_s`.
fn add_strikes(
    w: &mut [f64],
    fs: f64,
    start_s: f64,
    period_s: f64,
    decay_s: f64,
    tone_hz: f64,
    amp: f64,
) {
    let n = w.len();
    let mut t0 = start_s;
    while t0 * fs < n as f64 {
        let i0 = (t0 * fs).round() as usize;
        let len = ((6.0 * decay_s) * fs) as usize;
        for j in 0..len {
            let i = i0 + j;
            if i >= n {
                break;
            }
            let t = j as f64 / fs;
            w[i] += amp
                * (-t / decay_s).exp()
                * (2.0 * std::f64::consts::PI * tone_hz * t).cos();
        }
        t0 += period_s;
    }
}

/// Unit-peak white noise brick-wall filtered to [low, high] Hz.
fn band_noise(rng: &mut impl Rng, n: usize, fs: f64, low_hz: f64, high_hz: f64) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|_| Complex::new(rng.gen_range(-1.0..1.0), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let df = fs / n as f64;
    for (k, v) in buf.iter_mut().enumerate() {
        // mirror index maps bin k to its physical frequency
        let f = if k <= n / 2 { k as f64 * df } else { (n - k) as f64 * df };
        if f < low_hz || f > high_hz {
            *v = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let mut out: Vec<f64> = buf.iter().map(|c| c.re / n as f64).collect();
    normalize_peak(&mut out, 1.0);
    out
}

fn normalize_peak(w: &mut [f64], peak: f64) {
    let max = w.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if max > 0.0 {
        let s = peak / max;
        for v in w.iter_mut() {
            *v *= s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spectrum(w: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = w.iter().map(|&v| Complex::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(w.len()).process(&mut buf);
        buf[..w.len() / 2 + 1].iter().map(|c| c.norm_sqr()).collect()
    }

    // Full-length FFT oracle: 12000 samples at 12 kHz gives 1 Hz bins.
    #[test]
    fn harmonic_tone_peaks_at_fundamental() {
        let gen = ActionGenerator {
            class_id: 1,
            family: GeneratorFamily::HarmonicTone { f0_hz: 1000.0, harmonics: 5 },
            rng_seed: 3,
        };
        let w = synthesize_action(&gen, 1.0, 12_000).unwrap();
        assert_eq!(w.len(), 12_000);
        let spec = spectrum(&w);
        let argmax = spec
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!((argmax as i64 - 1000).abs() <= 1, "peak at bin {argmax}");
    }

    // Peak-picking oracle on the envelope.
    #[test]
    fn impulse_train_has_expected_strike_count() {
        let gen = ActionGenerator {
            class_id: 0,
            family: GeneratorFamily::ImpulseTrain {
                period_s: 0.25,
                decay_s: 0.010,
                tone_hz: 1700.0,
            },
            rng_seed: 0,
        };
        let w = synthesize_action(&gen, 1.0, 12_000).unwrap();
        // envelope: max |w| over 5 ms blocks; count rising crossings of half peak
        let block = 60;
        let env: Vec<f64> = w
            .chunks(block)
            .map(|c| c.iter().fold(0.0f64, |m, &v| m.max(v.abs())))
            .collect();
        let thr = 0.45;
        let mut peaks = 0;
        let mut above = false;
        for &e in &env {
            if e > thr && !above {
                peaks += 1;
                above = true;
            } else if e < thr / 2.0 {
                above = false;
            }
        }
        assert_eq!(peaks, 4);
    }

    #[test]
    fn rejects_content_above_nyquist() {
        let gen = ActionGenerator {
            class_id: 1,
            family: GeneratorFamily::HarmonicTone { f0_hz: 7000.0, harmonics: 2 },
            rng_seed: 0,
        };
        assert!(synthesize_action(&gen, 1.0, 12_000).is_err());
    }

    #[test]
    fn all_templates_are_bounded_and_band_limited() {
        for class in 0..CLASS_COUNT as u16 {
            let gen = class_generator(class, 42);
            let w = synthesize_action(&gen, 1.0, 12_000).unwrap();
            assert!(w.iter().all(|v| v.abs() <= 1.0), "class {class} exceeds [-1,1]");
            let spec = spectrum(&w);
            let total: f64 = spec.iter().sum();
            let below: f64 = spec[..200].iter().sum();
            assert!(
                below <= 0.01 * total,
                "class {class}: {:.2}% of energy below 200 Hz",
                100.0 * below / total
            );
        }
    }

    #[test]
    fn equal_class_and_seed_reproduce_the_waveform() {
        let a = synthesize_action(&class_generator(4, 9), 0.7, 12_000).unwrap();
        let b = synthesize_action(&class_generator(4, 9), 0.7, 12_000).unwrap();
        assert_eq!(a, b);
    }
}
