//! WAV reading/writing (PCM16 and float32) for scene input and inspection
//! output.

use std::path::Path;

use crate::error::{Error, Result};
use crate::wola::TimeSignal;

/// Reads a mono WAV file; rejects multichannel input.
pub fn read_mono(path: &Path) -> Result<(Vec<f64>, u32)> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::InvalidConfig(format!(
            "{} has {} channels, expected mono",
            path.display(),
            spec.channels
        )));
    }
    let samples = read_samples(&mut reader)?;
    Ok((samples, spec.sample_rate))
}

/// Reads a WAV of any channel count into a channels × time signal
/// (samples are interleaved on disk).
pub fn read_multichannel(path: &Path) -> Result<TimeSignal> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    let interleaved = read_samples(&mut reader)?;
    let len = interleaved.len() / channels;
    let mut sig = TimeSignal::zeros(channels, len, spec.sample_rate);
    for n in 0..len {
        for m in 0..channels {
            sig.samples[(m, n)] = interleaved[n * channels + m];
        }
    }
    Ok(sig)
}

fn read_samples(reader: &mut hound::WavReader<std::io::BufReader<std::fs::File>>) -> Result<Vec<f64>> {
    let spec = reader.spec();
    let samples = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<Vec<_>, _>>()?,
        hound::SampleFormat::Int => {
            let scale = 1.0 / f64::from(1i32 << (spec.bits_per_sample - 1));
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) * scale))
                .collect::<std::result::Result<Vec<_>, _>>()?
        }
    };
    Ok(samples)
}

/// Writes a signal as 32-bit float WAV, interleaving channels.
pub fn write(path: &Path, signal: &TimeSignal) -> Result<()> {
    let spec = hound::WavSpec {
        channels: signal.channels() as u16,
        sample_rate: signal.sample_rate_hz,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for n in 0..signal.len() {
        for m in 0..signal.channels() {
            writer.write_sample(signal.samples[(m, n)] as f32)?;
        }
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_multichannel_float() {
        let dir = std::env::temp_dir().join("occbeam_wav_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("rt.wav");
        let mut sig = TimeSignal::zeros(3, 100, 16_000);
        for n in 0..100 {
            for m in 0..3 {
                sig.samples[(m, n)] = ((n * (m + 1)) as f64 * 0.01).sin() * 0.5;
            }
        }
        write(&path, &sig).unwrap();
        let back = read_multichannel(&path).unwrap();
        assert_eq!(back.channels(), 3);
        assert_eq!(back.len(), 100);
        for n in 0..100 {
            for m in 0..3 {
                assert!((back.samples[(m, n)] - sig.samples[(m, n)]).abs() < 1e-6);
            }
        }
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn mono_reader_rejects_multichannel() {
        let dir = std::env::temp_dir().join("occbeam_wav_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("stereo.wav");
        write(&path, &TimeSignal::zeros(2, 10, 16_000)).unwrap();
        assert!(read_mono(&path).is_err());
        std::fs::remove_file(&path).ok();
    }
}
