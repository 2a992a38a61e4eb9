//! Synchronized one-second records and multi-second sampling.

use rand::seq::SliceRandom;

use super::mel::MfccVolume;
use crate::error::{Error, Result};
use crate::rng;
use crate::sim::MicArrayRecording;

/// Acoustic frames per record (1 s at 12 fps).
pub const ACOUSTIC_FPS: usize = 12;
/// Waveform samples per record (1 s at 12 kHz).
pub const RECORD_SAMPLES: usize = 12_000;

/// One second of synchronized data: a mono waveform from the selected
/// microphone plus the matching 12-frame MFCC acoustic sub-volume.
///
/// Stored as `f32`, matching the on-disk record format bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRecord {
    pub waveform: Vec<f32>,
    /// `[12, 36, 48, C]` row-major.
    pub acoustic_dims: [u16; 4],
    pub acoustic: Vec<f32>,
    pub label: u16,
    pub scenario_id: u8,
    pub subject_id: u16,
    pub take_id: u32,
    pub chunk_index: u16,
}

impl FeatureRecord {
    pub fn acoustic_len(dims: [u16; 4]) -> usize {
        dims.iter().map(|&d| d as usize).product()
    }
}

/// Stable identifier for a `length_s`-second window of a take starting at
/// `offset_s`; used to key soft labels to student samples.
pub fn sample_id(take_id: u32, offset_s: u16, length_s: u8) -> u64 {
    ((take_id as u64) << 24) | ((offset_s as u64) << 8) | length_s as u64
}

/// Cut a take into whole-second records; the trailing partial second is
/// discarded. The mono waveform is channel `mic_index` of the recording.
pub fn chunk_records(
    recording: &MicArrayRecording,
    volume: &MfccVolume,
    mic_index: usize,
) -> Result<Vec<FeatureRecord>> {
    if mic_index >= recording.samples.len() {
        return Err(Error::Featurize(format!(
            "mic index {mic_index} out of range 0..{}",
            recording.samples.len()
        )));
    }
    if recording.sample_rate as usize != RECORD_SAMPLES {
        return Err(Error::Featurize(format!(
            "records are defined at 12 kHz, recording is {} Hz",
            recording.sample_rate
        )));
    }
    let t = volume.frame_count();
    let expected_t = (recording.duration_s() * ACOUSTIC_FPS as f64).ceil() as usize;
    if t.abs_diff(expected_t) > 1 {
        return Err(Error::Featurize(format!(
            "modalities disagree: {t} acoustic frames vs {expected_t} expected from \
             {:.2} s of audio",
            recording.duration_s()
        )));
    }
    let shape = volume.frames.shape();
    let (h, w, c) = (shape[1], shape[2], shape[3]);
    let seconds = (recording.frames() / RECORD_SAMPLES).min(t / ACOUSTIC_FPS);
    let chan = &recording.samples[mic_index];
    let frame_len = h * w * c;
    let mut out = Vec::with_capacity(seconds);
    for s in 0..seconds {
        let waveform: Vec<f32> = chan[s * RECORD_SAMPLES..(s + 1) * RECORD_SAMPLES]
            .iter()
            .map(|&v| v as f32)
            .collect();
        let acoustic: Vec<f32> = volume.frames.data()
            [s * ACOUSTIC_FPS * frame_len..(s + 1) * ACOUSTIC_FPS * frame_len]
            .iter()
            .map(|&v| v as f32)
            .collect();
        out.push(FeatureRecord {
            waveform,
            acoustic_dims: [ACOUSTIC_FPS as u16, h as u16, w as u16, c as u16],
            acoustic,
            label: recording.label,
            scenario_id: recording.scenario_id,
            subject_id: recording.subject_id,
            take_id: recording.take_id,
            chunk_index: s as u16,
        });
    }
    Ok(out)
}

/// A multi-second window over one take's contiguous records.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceSample {
    pub take_id: u32,
    pub offset_s: u16,
    pub length_s: u8,
    /// Indices into the record list passed to [`sample_sequence`].
    pub record_indices: Vec<usize>,
}

impl SequenceSample {
    pub fn id(&self) -> u64 {
        sample_id(self.take_id, self.offset_s, self.length_s)
    }
}

/// Extract `floor(take_len / length_s)` non-overlapping `length_s`-second
/// windows from one take's records, with any slack distributed at seeded
/// random between them. A 30 s take yields 30 one-second or 6 five-second
/// samples; a take exactly `length_s` long yields the whole take.
pub fn sample_sequence(
    records: &[FeatureRecord],
    length_s: usize,
    seed: u64,
) -> Result<Vec<SequenceSample>> {
    if records.is_empty() {
        return Err(Error::Featurize("no records to sample from".into()));
    }
    let take_id = records[0].take_id;
    for (i, r) in records.iter().enumerate() {
        if r.take_id != take_id || r.chunk_index as usize != i {
            return Err(Error::Featurize(
                "records must be one take's chunks in order".into(),
            ));
        }
    }
    let take_len = records.len();
    if length_s == 0 || length_s > take_len {
        return Err(Error::Featurize(format!(
            "cannot cut {length_s}-second samples from a {take_len}-second take"
        )));
    }
    let count = take_len / length_s;
    let slack = take_len - count * length_s;
    // split the slack into count+1 gaps via a seeded composition
    let mut rng = rng::stream(seed, "crop", take_id as u64);
    let mut gaps = vec![0usize; count + 1];
    if slack > 0 {
        let mut marks: Vec<usize> =
            (0..count).map(|_| rand::Rng::gen_range(&mut rng, 0..=slack)).collect();
        marks.sort_unstable();
        let mut prev = 0;
        for (g, &m) in gaps.iter_mut().zip(marks.iter()) {
            *g = m - prev;
            prev = m;
        }
        gaps[count] = slack - prev;
    }
    let mut out = Vec::with_capacity(count);
    let mut cursor = 0usize;
    for i in 0..count {
        cursor += gaps[i];
        out.push(SequenceSample {
            take_id,
            offset_s: cursor as u16,
            length_s: length_s as u8,
            record_indices: (cursor..cursor + length_s).collect(),
        });
        cursor += length_s;
    }
    Ok(out)
}

/// Seeded in-place shuffle shared by the split and training code.
pub(crate) fn seeded_shuffle<T>(items: &mut [T], seed: u64, tag: &str, index: u64) {
    items.shuffle(&mut rng::stream(seed, tag, index));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{ArrayGeometry, SOUND_SPEED};
    use crate::tensor::Tensor;

    fn fake_take(seconds: f64) -> (MicArrayRecording, MfccVolume) {
        let n = (seconds * 12_000.0).round() as usize;
        let samples: Vec<Vec<f64>> = (0..2)
            .map(|m| (0..n).map(|i| (m * 100_000 + i) as f64).collect())
            .collect();
        let rec = MicArrayRecording {
            samples,
            sample_rate: 12_000,
            geometry: ArrayGeometry {
                mic_positions: vec![[0.0, 0.0, 0.0], [0.1, 0.0, 0.0]],
                aperture_width: 0.45,
                aperture_height: 0.45,
                sound_speed: SOUND_SPEED,
            },
            label: 4,
            scenario_id: 2,
            subject_id: 1,
            take_id: 9,
            out_of_fov: false,
        };
        let t = (seconds * 12.0).ceil() as usize;
        let mut frames = Tensor::zeros(&[t, 36, 48, 12]);
        for (i, v) in frames.data_mut().iter_mut().enumerate() {
            *v = i as f64;
        }
        let vol = MfccVolume {
            frames,
            coefficient_count: 12,
            mel_filter_count: 32,
            frame_rate: 12.0,
        };
        (rec, vol)
    }

    #[test]
    fn thirty_second_take_gives_thirty_records() {
        let (rec, vol) = fake_take(30.0);
        let recs = chunk_records(&rec, &vol, 0).unwrap();
        assert_eq!(recs.len(), 30);
        assert_eq!(recs[7].chunk_index, 7);
        assert_eq!(recs[0].acoustic_dims, [12, 36, 48, 12]);
    }

    #[test]
    fn partial_second_yields_nothing() {
        let (rec, vol) = fake_take(0.9);
        assert!(chunk_records(&rec, &vol, 0).unwrap().is_empty());
    }

    // Slice-equality oracle against the source channel.
    #[test]
    fn waveform_is_the_selected_channel_slice() {
        let (rec, vol) = fake_take(3.0);
        let recs = chunk_records(&rec, &vol, 1).unwrap();
        for (i, r) in recs.iter().enumerate() {
            let want: Vec<f32> = rec.samples[1][i * 12_000..(i + 1) * 12_000]
                .iter()
                .map(|&v| v as f32)
                .collect();
            assert_eq!(r.waveform, want);
            let afirst = vol.frames.data()[i * 12 * 36 * 48 * 12] as f32;
            assert_eq!(r.acoustic[0], afirst);
        }
    }

    #[test]
    fn modality_mismatch_is_detected() {
        let (rec, vol) = fake_take(3.0);
        let (_, short_vol) = fake_take(1.0);
        assert!(chunk_records(&rec, &short_vol, 0).is_err());
        assert!(chunk_records(&rec, &vol, 5).is_err());
    }

    #[test]
    fn five_second_samples_from_thirty_seconds() {
        let (rec, vol) = fake_take(30.0);
        let recs = chunk_records(&rec, &vol, 0).unwrap();
        let samples = sample_sequence(&recs, 5, 77).unwrap();
        assert_eq!(samples.len(), 6);
        // non-overlapping and in order
        for w in samples.windows(2) {
            assert!(w[1].offset_s >= w[0].offset_s + 5);
        }
        // deterministic for a fixed seed
        assert_eq!(samples, sample_sequence(&recs, 5, 77).unwrap());
    }

    #[test]
    fn full_length_sample_is_the_whole_take() {
        let (rec, vol) = fake_take(30.0);
        let recs = chunk_records(&rec, &vol, 0).unwrap();
        let samples = sample_sequence(&recs, 30, 1).unwrap();
        assert_eq!(samples.len(), 1);
        assert_eq!(samples[0].offset_s, 0);
        assert_eq!(samples[0].record_indices, (0..30).collect::<Vec<_>>());
        assert!(sample_sequence(&recs, 31, 1).is_err());
    }

    #[test]
    fn sample_ids_are_unique_per_window() {
        assert_ne!(sample_id(1, 0, 5), sample_id(1, 5, 5));
        assert_ne!(sample_id(1, 0, 5), sample_id(2, 0, 5));
        assert_ne!(sample_id(1, 0, 5), sample_id(1, 0, 1));
    }
}
