use std::io::{Cursor, Read, Seek};
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{AudioClip, VoiceError, DEFAULT_SAMPLE_RATE};

fn from_reader<R: Read>(reader: WavReader<R>) -> Result<AudioClip, VoiceError> {
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(VoiceError::UnsupportedWav(format!("{} channels, expected mono", spec.channels)));
    }
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(VoiceError::UnsupportedWav(format!(
            "{}-bit {:?} samples, expected 16-bit signed PCM",
            spec.bits_per_sample, spec.sample_format
        )));
    }
    if spec.sample_rate != DEFAULT_SAMPLE_RATE {
        return Err(VoiceError::UnsupportedWav(format!("{} Hz, expected {DEFAULT_SAMPLE_RATE} Hz", spec.sample_rate)));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<Result<Vec<_>, _>>()?;
    let clip = AudioClip::new(samples, spec.sample_rate);
    clip.validate()?;
    Ok(clip)
}

/// Reads 16-bit signed mono PCM at 16 kHz; anything else is rejected.
pub fn read_wav(path: &Path) -> Result<AudioClip, VoiceError> {
    from_reader(WavReader::open(path)?)
}

pub fn read_wav_bytes(bytes: &[u8]) -> Result<AudioClip, VoiceError> {
    from_reader(WavReader::new(Cursor::new(bytes))?)
}

fn write_to<W: std::io::Write + Seek>(clip: &AudioClip, w: W) -> Result<(), VoiceError> {
    let spec = WavSpec { channels: 1, sample_rate: clip.sample_rate_hz, bits_per_sample: 16, sample_format: SampleFormat::Int };
    let mut writer = WavWriter::new(w, spec)?;
    for s in &clip.samples {
        writer.write_sample((s.clamp(-1.0, 1.0) * 32767.0).round() as i16)?;
    }
    writer.finalize()?;
    Ok(())
}

pub fn wav_bytes(clip: &AudioClip) -> Result<Vec<u8>, VoiceError> {
    let mut cursor = Cursor::new(Vec::new());
    write_to(clip, &mut cursor)?;
    Ok(cursor.into_inner())
}

pub fn write_wav(clip: &AudioClip, path: &Path) -> Result<(), VoiceError> {
    std::fs::write(path, wav_bytes(clip)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_quantized() {
        let clip = AudioClip::new(vec![0.0, 0.5, -0.5, 0.999], 16_000);
        let back = read_wav_bytes(&wav_bytes(&clip).unwrap()).unwrap();
        for (a, b) in clip.samples.iter().zip(&back.samples) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn rejects_other_rates_and_layouts() {
        let clip = AudioClip::new(vec![0.1; 100], 8_000);
        assert!(matches!(read_wav_bytes(&wav_bytes(&clip).unwrap()), Err(VoiceError::UnsupportedWav(_))));

        let mut cursor = Cursor::new(Vec::new());
        let spec = WavSpec { channels: 2, sample_rate: 16_000, bits_per_sample: 16, sample_format: SampleFormat::Int };
        let mut w = WavWriter::new(&mut cursor, spec).unwrap();
        w.write_sample(0i16).unwrap();
        w.write_sample(0i16).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav_bytes(cursor.get_ref()), Err(VoiceError::UnsupportedWav(_))));
    }
}
