//! Framing, energy, band energies and autocorrelation pitch.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{AudioClip, VoiceError, VoiceParams};

pub const DEFAULT_FRAME_MS: f64 = 25.0;
pub const DEFAULT_HOP_MS: f64 = 10.0;

/// Band edges in Hz: eight log-spaced bands covering 20 Hz to 8 kHz.
pub const BAND_EDGES_HZ: [f64; 9] = [20.0, 50.0, 125.0, 315.0, 800.0, 1600.0, 3200.0, 5000.0, 8000.0];
pub const BAND_COUNT: usize = 8;

pub const F0_MIN_HZ: f64 = 50.0;
pub const F0_MAX_HZ: f64 = 600.0;
/// Minimum normalized autocorrelation peak for a voiced frame.
pub const VOICING_THRESHOLD: f64 = 0.45;
/// Minimum frame RMS for a voiced frame.
pub const VOICING_MIN_RMS: f64 = 0.01;

/// One analysis frame: the raw samples and their Hann-windowed copy.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub raw: Vec<f64>,
    pub windowed: Vec<f64>,
}

fn hann(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let denom = (len - 1) as f64;
    (0..len).map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / denom).cos())).collect()
}

pub fn samples_for_ms(ms: f64, sample_rate_hz: u32) -> usize {
    (ms * sample_rate_hz as f64 / 1000.0).round() as usize
}

/// Splits a clip into overlapping Hann-windowed frames;
/// `count = 1 + floor((N - frame) / hop)`.
pub fn frame_signal(clip: &AudioClip, frame_ms: f64, hop_ms: f64) -> Result<Vec<Frame>, VoiceError> {
    let frame_len = samples_for_ms(frame_ms, clip.sample_rate_hz);
    let hop = samples_for_ms(hop_ms, clip.sample_rate_hz).max(1);
    let n = clip.samples.len();
    if frame_len == 0 || n < frame_len {
        return Err(VoiceError::TooShort { samples: n, needed: frame_len.max(1) });
    }
    let window = hann(frame_len);
    let count = 1 + (n - frame_len) / hop;
    Ok((0..count)
        .map(|i| {
            let raw = clip.samples[i * hop..i * hop + frame_len].to_vec();
            let windowed = raw.iter().zip(&window).map(|(x, w)| x * w).collect();
            Frame { raw, windowed }
        })
        .collect())
}

/// Root mean square of the un-windowed samples.
pub fn rms_energy(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    (samples.iter().map(|x| x * x).sum::<f64>() / samples.len() as f64).sqrt()
}

/// FFT length used for spectra of a frame with `len` samples.
pub fn fft_len(len: usize) -> usize {
    len.next_power_of_two()
}

/// Band index for a frequency, or `None` outside 20 Hz..=8 kHz.
pub fn band_of(freq_hz: f64) -> Option<usize> {
    if !(BAND_EDGES_HZ[0]..=BAND_EDGES_HZ[BAND_COUNT]).contains(&freq_hz) {
        return None;
    }
    Some(BAND_EDGES_HZ[1..].iter().position(|&hi| freq_hz < hi).unwrap_or(BAND_COUNT - 1))
}

/// Power spectrum of the windowed frame summed per band. The eight bands
/// partition the in-range one-sided spectrum.
pub fn band_energies(frame: &Frame, sample_rate_hz: u32) -> Result<[f64; BAND_COUNT], VoiceError> {
    if sample_rate_hz < 16_000 {
        return Err(VoiceError::RateTooLow(sample_rate_hz));
    }
    let n = fft_len(frame.windowed.len());
    let mut buf: Vec<Complex<f64>> = frame.windowed.iter().map(|&x| Complex::new(x, 0.0)).collect();
    buf.resize(n, Complex::new(0.0, 0.0));
    FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);

    let mut bands = [0.0; BAND_COUNT];
    for (k, c) in buf.iter().enumerate().take(n / 2 + 1) {
        let freq = k as f64 * sample_rate_hz as f64 / n as f64;
        if let Some(b) = band_of(freq) {
            bands[b] += c.norm_sqr();
        }
    }
    Ok(bands)
}

/// Normalized autocorrelation of `x` at integer lag over the overlapping part.
fn normalized_autocorrelation(x: &[f64], lag: usize) -> f64 {
    if lag >= x.len() {
        return 0.0;
    }
    let (a, b) = (&x[..x.len() - lag], &x[lag..]);
    let (mut num, mut ea, mut eb) = (0.0, 0.0, 0.0);
    for (p, q) in a.iter().zip(b) {
        num += p * q;
        ea += p * p;
        eb += q * q;
    }
    let den = (ea * eb).sqrt();
    if den <= f64::EPSILON {
        0.0
    } else {
        num / den
    }
}

/// F0 estimate of a single frame in Hz, 0 when unvoiced.
pub fn frame_f0(frame: &Frame, sample_rate_hz: u32) -> f64 {
    if rms_energy(&frame.raw) < VOICING_MIN_RMS {
        return 0.0;
    }
    let mean = frame.raw.iter().sum::<f64>() / frame.raw.len() as f64;
    let x: Vec<f64> = frame.raw.iter().map(|v| v - mean).collect();
    let sr = sample_rate_hz as f64;
    let min_lag = ((sr / F0_MAX_HZ).floor() as usize).max(2);
    let max_lag = ((sr / F0_MIN_HZ).ceil() as usize).min(x.len().saturating_sub(2));
    if max_lag <= min_lag {
        return 0.0;
    }
    let r: Vec<f64> = (0..=max_lag + 1).map(|lag| if lag < min_lag - 1 { 0.0 } else { normalized_autocorrelation(&x, lag) }).collect();

    let peaks: Vec<usize> =
        (min_lag..=max_lag).filter(|&t| r[t] >= r[t - 1] && r[t] > r[t + 1] && r[t] > 0.0).collect();
    let Some(best) = peaks.iter().map(|&t| r[t]).fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
    else {
        return 0.0;
    };
    if best < VOICING_THRESHOLD {
        return 0.0;
    }
    // Earliest peak close to the best one avoids picking a multiple of the period.
    let lag = *peaks.iter().find(|&&t| r[t] >= 0.9 * best).expect("best is among the peaks");
    let (a, b, c) = (r[lag - 1], r[lag], r[lag + 1]);
    let curvature = a - 2.0 * b + c;
    let shift = if curvature.abs() > 1e-12 { (0.5 * (a - c) / curvature).clamp(-0.5, 0.5) } else { 0.0 };
    let f0 = sr / (lag as f64 + shift);
    if (F0_MIN_HZ..=F0_MAX_HZ).contains(&f0) {
        f0
    } else {
        0.0
    }
}

/// Per-frame F0 in Hz (0 = unvoiced).
pub fn f0_contour(frames: &[Frame], sample_rate_hz: u32) -> Vec<f64> {
    frames.iter().map(|f| frame_f0(f, sample_rate_hz)).collect()
}

/// Duration of the first maximal run of voiced frames.
pub fn f0_onset_length(contour: &[f64], hop_ms: f64) -> f64 {
    let run = contour.iter().skip_while(|&&f| f <= 0.0).take_while(|&&f| f > 0.0).count();
    run as f64 * hop_ms
}

/// Aggregates framing, energies and pitch into [`VoiceParams`].
pub fn summarize(clip: &AudioClip) -> Result<VoiceParams, VoiceError> {
    clip.validate()?;
    let frames = frame_signal(clip, DEFAULT_FRAME_MS, DEFAULT_HOP_MS)?;
    let count = frames.len() as f64;
    let mean_rms = frames.iter().map(|f| rms_energy(&f.raw)).sum::<f64>() / count;
    let mut band_energies_mean = [0.0; BAND_COUNT];
    for f in &frames {
        for (acc, e) in band_energies_mean.iter_mut().zip(band_energies(f, clip.sample_rate_hz)?) {
            *acc += e;
        }
    }
    band_energies_mean.iter_mut().for_each(|e| *e /= count);

    let contour = f0_contour(&frames, clip.sample_rate_hz);
    let voiced: Vec<f64> = contour.iter().copied().filter(|&f| f > 0.0).collect();
    let (f0_mean_hz, f0_std_hz) = if voiced.is_empty() {
        (0.0, 0.0)
    } else {
        let m = voiced.iter().sum::<f64>() / voiced.len() as f64;
        let var = voiced.iter().map(|f| (f - m).powi(2)).sum::<f64>() / voiced.len() as f64;
        (m, var.sqrt())
    };
    Ok(VoiceParams {
        mean_rms,
        band_energies: band_energies_mean,
        f0_mean_hz,
        f0_std_hz,
        f0_onset_len_ms: f0_onset_length(&contour, DEFAULT_HOP_MS),
        voiced_ratio: voiced.len() as f64 / count,
    })
}
