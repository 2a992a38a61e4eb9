//! Dataset planning and balanced take generation.

use rand::Rng;

use super::scene::{render_scene, ScenarioPreset, FOV_H_DEG, FOV_V_DEG};
use super::{
    class_generator, ActionGenerator, ArrayGeometry, GeneratorFamily, MicArrayRecording,
    SourceEvent,
};
use crate::error::{Error, Result};
use crate::rng;
use crate::sim::geometry::build_default_geometry;

/// Take length cap, seconds.
pub const MAX_TAKE_S: f64 = 30.0;

/// Declarative dataset description, loadable from a flat key-value file.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    /// Number of action classes.
    pub classes: u16,
    /// First class id; nonzero offsets select held-out generator templates.
    pub class_offset: u16,
    /// Distinct subjects; each perturbs the class template deterministically.
    pub subjects: u16,
    /// Scenario presets 1..=scenarios.
    pub scenarios: u8,
    /// Takes per (class, scenario, subject) cell.
    pub takes: u32,
    pub duration_s: f64,
    pub sample_rate: u32,
    /// Override of the preset-3 ambient SNR range, dB.
    pub snr_db: Option<(f64, f64)>,
    /// Override of the preset-2 reflection count (2 or 3).
    pub reflections: Option<usize>,
    pub master_seed: u64,
}

impl Default for DatasetSpec {
    /// The desk-scale benchmark: 6 classes x 3 scenarios x 3 subjects x
    /// 2 takes of 5 s, i.e. 108 takes and 540 one-second records.
    fn default() -> Self {
        DatasetSpec {
            classes: 6,
            class_offset: 0,
            subjects: 3,
            scenarios: 3,
            takes: 2,
            duration_s: 5.0,
            sample_rate: super::SAMPLE_RATE,
            snr_db: None,
            reflections: None,
            master_seed: 1,
        }
    }
}

impl DatasetSpec {
    /// The held-out transfer benchmark: 4 unseen classes, waveform-only use.
    pub fn transfer_default(master_seed: u64) -> Self {
        DatasetSpec {
            classes: 4,
            class_offset: 10,
            subjects: 5,
            scenarios: 3,
            takes: 1,
            duration_s: 10.0,
            sample_rate: super::SAMPLE_RATE,
            snr_db: None,
            reflections: None,
            master_seed,
        }
    }

    /// Parse the flat `key = value` format. Unknown keys are rejected.
    ///
    /// Documented keys: classes, subjects, scenarios, takes, duration_s,
    /// sample_rate, snr_db (`lo..hi`), reflections, master_seed,
    /// class_offset.
    pub fn parse(text: &str) -> Result<DatasetSpec> {
        let mut spec = DatasetSpec::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| Error::Config(format!("line {}: bad {what}: {value}", lineno + 1));
            match key {
                "classes" => spec.classes = value.parse().map_err(|_| bad("classes"))?,
                "class_offset" => {
                    spec.class_offset = value.parse().map_err(|_| bad("class_offset"))?
                }
                "subjects" => spec.subjects = value.parse().map_err(|_| bad("subjects"))?,
                "scenarios" => spec.scenarios = value.parse().map_err(|_| bad("scenarios"))?,
                "takes" => spec.takes = value.parse().map_err(|_| bad("takes"))?,
                "duration_s" => spec.duration_s = value.parse().map_err(|_| bad("duration_s"))?,
                "sample_rate" => {
                    spec.sample_rate = value.parse().map_err(|_| bad("sample_rate"))?
                }
                "snr_db" => {
                    let (lo, hi) = value.split_once("..").ok_or_else(|| bad("snr_db range"))?;
                    spec.snr_db = Some((
                        lo.trim().parse().map_err(|_| bad("snr_db low"))?,
                        hi.trim().parse().map_err(|_| bad("snr_db high"))?,
                    ));
                }
                "reflections" => {
                    spec.reflections = Some(value.parse().map_err(|_| bad("reflections"))?)
                }
                "master_seed" => spec.master_seed = value.parse().map_err(|_| bad("master_seed"))?,
                other => {
                    return Err(Error::Config(format!("line {}: unknown key `{other}`", lineno + 1)))
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("classes = {}\n", self.classes));
        s.push_str(&format!("class_offset = {}\n", self.class_offset));
        s.push_str(&format!("subjects = {}\n", self.subjects));
        s.push_str(&format!("scenarios = {}\n", self.scenarios));
        s.push_str(&format!("takes = {}\n", self.takes));
        s.push_str(&format!("duration_s = {}\n", self.duration_s));
        s.push_str(&format!("sample_rate = {}\n", self.sample_rate));
        if let Some((lo, hi)) = self.snr_db {
            s.push_str(&format!("snr_db = {lo}..{hi}\n"));
        }
        if let Some(r) = self.reflections {
            s.push_str(&format!("reflections = {r}\n"));
        }
        s.push_str(&format!("master_seed = {}\n", self.master_seed));
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 {
            return Err(Error::Config("dataset needs at least one class".into()));
        }
        if self.takes == 0 {
            return Err(Error::Config("dataset needs at least one take per cell".into()));
        }
        if self.subjects == 0 || self.scenarios == 0 || self.scenarios > 3 {
            return Err(Error::Config("subjects must be >= 1 and scenarios in 1..=3".into()));
        }
        if self.duration_s <= 0.0 {
            return Err(Error::Config("duration_s must be positive".into()));
        }
        if usize::from(self.class_offset) + usize::from(self.classes)
            > super::actions::CLASS_COUNT
        {
            return Err(Error::Config(format!(
                "class range {}..{} exceeds the {} templates",
                self.class_offset,
                self.class_offset + self.classes,
                super::actions::CLASS_COUNT
            )));
        }
        if let Some(r) = self.reflections {
            if !(2..=3).contains(&r) {
                return Err(Error::Config("reflections override must be 2 or 3".into()));
            }
        }
        Ok(())
    }

    /// Effective take length after the 30 s cap.
    pub fn capped_duration_s(&self) -> f64 {
        self.duration_s.min(MAX_TAKE_S)
    }

    pub fn scenario_preset(&self, id: u8) -> ScenarioPreset {
        let mut p = ScenarioPreset::standard(id);
        if id == 3 {
            if let Some(range) = self.snr_db {
                p.snr_db = range;
            }
        }
        if id == 2 {
            if let Some(r) = self.reflections {
                p.reflections.truncate(r);
            }
        }
        p
    }
}

/// One planned take: everything needed to render it independently.
#[derive(Clone, Debug, PartialEq)]
pub struct TakePlan {
    pub take_id: u32,
    pub class_id: u16,
    pub scenario_id: u8,
    pub subject_id: u16,
    pub duration_s: f64,
    pub sample_rate: u32,
    /// Derived from the master seed by a fixed rule, so takes render
    /// identically under any evaluation order.
    pub seed: u64,
}

/// Enumerate the balanced take grid.
pub fn plan_dataset(spec: &DatasetSpec) -> Result<Vec<TakePlan>> {
    spec.validate()?;
    let mut plans = Vec::new();
    let mut take_id = 0u32;
    for class in 0..spec.classes {
        for scenario in 1..=spec.scenarios {
            for subject in 0..spec.subjects {
                for _ in 0..spec.takes {
                    plans.push(TakePlan {
                        take_id,
                        class_id: spec.class_offset + class,
                        scenario_id: scenario,
                        subject_id: subject,
                        duration_s: spec.capped_duration_s(),
                        sample_rate: spec.sample_rate,
                        seed: rng::derive_seed(spec.master_seed, "take", take_id as u64),
                    });
                    take_id += 1;
                }
            }
        }
    }
    Ok(plans)
}

/// The dataset geometry for a given spec.
pub fn dataset_geometry(spec: &DatasetSpec) -> ArrayGeometry {
    build_default_geometry(rng::derive_seed(spec.master_seed, "geometry", 0))
}

/// Render one planned take: a single action event at a random in-view
/// position, depth >= 2 m, with a subject-specific template perturbation.
pub fn render_take(
    plan: &TakePlan,
    spec: &DatasetSpec,
    geometry: &ArrayGeometry,
) -> Result<MicArrayRecording> {
    let preset = spec.scenario_preset(plan.scenario_id);
    let mut r = rng::stream(plan.seed, "scene", 0);
    let az: f64 = r.gen_range(-0.40 * FOV_H_DEG..=0.40 * FOV_H_DEG).to_radians();
    let el: f64 = r.gen_range(-0.40 * FOV_V_DEG..=0.40 * FOV_V_DEG).to_radians();
    let depth: f64 = r.gen_range(2.0..=3.5);
    let position = [depth * az.tan(), depth * el.tan(), depth];
    let onset: f64 = r.gen_range(0.0..=(0.4f64).min(plan.duration_s * 0.2));
    let gain: f64 = r.gen_range(0.7..=1.3);

    let base = class_generator(plan.class_id, rng::derive_seed(plan.seed, "gen", 0));
    let generator = subject_variant(
        base,
        plan.class_id,
        plan.subject_id,
        spec.master_seed,
        plan.sample_rate,
    );

    let event = SourceEvent {
        position,
        generator,
        onset,
        duration: plan.duration_s - onset,
        gain,
    };
    let mut rec = render_scene(
        &[event],
        &preset,
        geometry,
        plan.duration_s,
        plan.sample_rate,
        plan.seed,
    )?;
    rec.label = plan.class_id;
    rec.scenario_id = plan.scenario_id;
    rec.subject_id = plan.subject_id;
    rec.take_id = plan.take_id;
    Ok(rec)
}

/// Deterministic per-subject template perturbation: periods and
/// frequencies move by up to +/-6%, clamped below Nyquist.
fn subject_variant(
    mut gen: ActionGenerator,
    class_id: u16,
    subject_id: u16,
    master_seed: u64,
    sample_rate: u32,
) -> ActionGenerator {
    let mut r = rng::stream(
        rng::derive_seed(master_seed, "subject", subject_id as u64),
        "variant",
        class_id as u64,
    );
    let mut j = || 1.0 + r.gen_range(-0.06..=0.06);
    let cap = 0.98 * sample_rate as f64 / 2.0;
    match &mut gen.family {
        GeneratorFamily::ImpulseTrain { period_s, decay_s, tone_hz } => {
            *period_s *= j();
            *decay_s *= j();
            *tone_hz = (*tone_hz * j()).min(cap);
        }
        GeneratorFamily::HarmonicTone { f0_hz, .. } => {
            *f0_hz = (*f0_hz * j()).min(cap);
        }
        GeneratorFamily::Chirp { start_hz, end_hz, sweep_s } => {
            *start_hz = (*start_hz * j()).min(cap);
            *end_hz = (*end_hz * j()).min(cap);
            *sweep_s *= j();
        }
        GeneratorFamily::BroadbandBurst { low_hz, high_hz, burst_s, period_s } => {
            *low_hz *= j();
            *high_hz = (*high_hz * j()).min(cap);
            *burst_s *= j();
            *period_s *= j();
        }
        GeneratorFamily::AmNoise { low_hz, high_hz, mod_hz, .. } => {
            *low_hz *= j();
            *high_hz = (*high_hz * j()).min(cap);
            *mod_hz *= j();
        }
        GeneratorFamily::TonalTransientComposite { f0_hz, period_s, decay_s } => {
            *f0_hz = (*f0_hz * j()).min(cap / 3.0);
            *period_s *= j();
            *decay_s *= j();
        }
    }
    gen
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn desk_grid_has_expected_counts() {
        let spec = DatasetSpec { takes: 1, duration_s: 10.0, ..DatasetSpec::default() };
        let plans = plan_dataset(&spec).unwrap();
        assert_eq!(plans.len(), 54); // 6 classes x 3 scenarios x 3 subjects
    }

    #[test]
    fn paper_scale_grid_has_378_takes() {
        let spec = DatasetSpec {
            classes: 14,
            subjects: 9,
            takes: 1,
            duration_s: 30.0,
            ..DatasetSpec::default()
        };
        assert_eq!(plan_dataset(&spec).unwrap().len(), 378);
    }

    // Counting oracle: tally per class over the emitted plan.
    #[test]
    fn per_class_counts_are_balanced() {
        let plans = plan_dataset(&DatasetSpec::default()).unwrap();
        let mut tally: BTreeMap<u16, usize> = BTreeMap::new();
        for p in &plans {
            *tally.entry(p.class_id).or_default() += 1;
        }
        let counts: Vec<usize> = tally.values().copied().collect();
        assert!(counts.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(counts[0] * counts.len(), plans.len());
    }

    #[test]
    fn degenerate_specs_are_rejected() {
        assert!(plan_dataset(&DatasetSpec { classes: 0, ..DatasetSpec::default() }).is_err());
        assert!(plan_dataset(&DatasetSpec { takes: 0, ..DatasetSpec::default() }).is_err());
    }

    #[test]
    fn take_length_is_capped_at_30s() {
        let spec = DatasetSpec { duration_s: 45.0, ..DatasetSpec::default() };
        let plans = plan_dataset(&spec).unwrap();
        assert_eq!(plans[0].duration_s, 30.0);
    }

    #[test]
    fn key_value_roundtrip() {
        let spec = DatasetSpec {
            classes: 4,
            class_offset: 10,
            snr_db: Some((5.0, 20.0)),
            reflections: Some(2),
            ..DatasetSpec::default()
        };
        let parsed = DatasetSpec::parse(&spec.to_key_values()).unwrap();
        assert_eq!(parsed, spec);
        assert!(DatasetSpec::parse("mystery = 3").is_err());
    }

    #[test]
    fn rendered_take_carries_plan_metadata() {
        let mut spec = DatasetSpec { takes: 1, duration_s: 1.0, ..DatasetSpec::default() };
        spec.subjects = 1;
        spec.scenarios = 1;
        spec.classes = 2;
        let geometry = crate::sim::build_default_geometry(3);
        let plans = plan_dataset(&spec).unwrap();
        let rec = render_take(&plans[1], &spec, &geometry).unwrap();
        assert_eq!(rec.label, 1);
        assert_eq!(rec.take_id, 1);
        assert_eq!(rec.frames(), 12_000);
        assert!(!rec.out_of_fov);
    }
}
