//! Voice analysis: prosodic and energy descriptors, comparison against
//! prototype utterances, and traffic-light feedback.

pub mod dsp;
mod prototype;
mod wav;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::keyvalue::KeyValueError;

pub use dsp::{band_energies, f0_contour, f0_onset_length, frame_signal, rms_energy, summarize, Frame, BAND_COUNT};
pub use prototype::{
    compare_to_prototype, estimate_emotion, Light, ParamFeedback, PrototypeEntry, PrototypeLibrary, TrafficFeedback,
    VoiceEstimate, COMPARED_PARAMS, PARAMS_FILE, REFERENCE_WAV,
};
pub use wav::{read_wav, read_wav_bytes, write_wav, wav_bytes};

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Error)]
pub enum VoiceError {
    #[error("clip has {samples} samples, need at least {needed}")]
    TooShort { samples: usize, needed: usize },
    #[error("sample rate {0} Hz is below 16 kHz")]
    RateTooLow(u32),
    #[error("invalid clip: {0}")]
    InvalidClip(String),
    #[error("prototype library is empty")]
    EmptyLibrary,
    #[error("duplicate prototype label `{0}`")]
    DuplicateLabel(String),
    #[error("no canonical arousal/valence point for `{0}`")]
    UnknownEmotion(String),
    #[error("unsupported WAV format: {0}")]
    UnsupportedWav(String),
    #[error(transparent)]
    Wav(#[from] hound::Error),
    #[error(transparent)]
    Params(#[from] KeyValueError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Mono PCM samples normalized to [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Self {
        AudioClip { samples, sample_rate_hz }
    }

    pub fn duration_ms(&self) -> f64 {
        self.samples.len() as f64 * 1000.0 / self.sample_rate_hz as f64
    }

    pub fn validate(&self) -> Result<(), VoiceError> {
        if self.sample_rate_hz == 0 {
            return Err(VoiceError::InvalidClip("sample rate must be positive".into()));
        }
        if self.samples.is_empty() {
            return Err(VoiceError::InvalidClip("no samples".into()));
        }
        if let Some(i) = self.samples.iter().position(|s| !s.is_finite()) {
            return Err(VoiceError::InvalidClip(format!("sample {i} is not finite")));
        }
        Ok(())
    }
}

/// Utterance-level descriptors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoiceParams {
    pub mean_rms: f64,
    pub band_energies: [f64; BAND_COUNT],
    pub f0_mean_hz: f64,
    pub f0_std_hz: f64,
    pub f0_onset_len_ms: f64,
    pub voiced_ratio: f64,
}

impl VoiceParams {
    pub fn is_valid(&self) -> bool {
        let f0_ok = |f: f64| f == 0.0 || (dsp::F0_MIN_HZ..=dsp::F0_MAX_HZ).contains(&f);
        self.mean_rms >= 0.0
            && self.band_energies.iter().all(|e| *e >= 0.0 && e.is_finite())
            && f0_ok(self.f0_mean_hz)
            && self.f0_std_hz >= 0.0
            && self.f0_onset_len_ms >= 0.0
            && (0.0..=1.0).contains(&self.voiced_ratio)
    }
}
