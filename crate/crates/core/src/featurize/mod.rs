//! Model-ready features and synchronized records.
//!
//! The beamformed 512-bin acoustic volumes are compressed per pixel to 12
//! mel-frequency cepstral coefficients; single-microphone waveforms become
//! 500x257 amplitude spectrograms; both are chunked into synchronized
//! one-second records and partitioned into leakage-free splits by take.

mod mel;
mod records;
mod resample;
mod spectrogram;
mod split;

pub use mel::{mfcc_compress, MelCompressor, MfccVolume, MFCC_COEFFS};
pub use records::{
    chunk_records, sample_id, sample_sequence, FeatureRecord, SequenceSample, ACOUSTIC_FPS,
    RECORD_SAMPLES,
};
pub use resample::resample;
pub use spectrogram::{
    spectrogram, spectrogram_with_options, Spectrogram, SPEC_BINS, SPEC_FRAMES, SPEC_RATE,
};
pub use split::{make_splits, SplitAssignment, TakeKey};
