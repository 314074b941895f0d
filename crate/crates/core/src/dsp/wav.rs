use std::path::Path;

use super::AudioClip;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavSampleFormat {
    Int16,
    Int24,
    Float32,
}

fn wav_err(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::file(path, io),
        other => Error::Format(format!("{}: {other}", path.display())),
    }
}

/// Reads integer (8/16/24/32-bit) or 32-bit float PCM, scaling integers to
/// `[-1, 1)`.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let mut reader = hound::WavReader::open(path).map_err(|e| wav_err(path, e))?;
    let spec = reader.spec();
    let n_ch = spec.channels as usize;
    if n_ch == 0 {
        return Err(Error::Format(format!("{}: no channels", path.display())));
    }
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| wav_err(path, e))?,
        hound::SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| wav_err(path, e))?
        }
    };
    let mut channels = vec![Vec::with_capacity(interleaved.len() / n_ch); n_ch];
    for frame in interleaved.chunks_exact(n_ch) {
        for (c, v) in frame.iter().enumerate() {
            channels[c].push(*v);
        }
    }
    AudioClip::new(channels, spec.sample_rate)
}

pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip, format: WavSampleFormat) -> Result<()> {
    let path = path.as_ref();
    let (bits, sample_format) = match format {
        WavSampleFormat::Int16 => (16, hound::SampleFormat::Int),
        WavSampleFormat::Int24 => (24, hound::SampleFormat::Int),
        WavSampleFormat::Float32 => (32, hound::SampleFormat::Float),
    };
    let spec = hound::WavSpec {
        channels: clip.num_channels() as u16,
        sample_rate: clip.sample_rate(),
        bits_per_sample: bits,
        sample_format,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| wav_err(path, e))?;
    let full_scale = (1i64 << (bits - 1)) as f64;
    for i in 0..clip.len() {
        for c in clip.channels() {
            let v = c[i].clamp(-1.0, 1.0);
            match format {
                WavSampleFormat::Float32 => writer.write_sample(v as f32),
                _ => writer.write_sample((v * full_scale).round().min(full_scale - 1.0) as i32),
            }
            .map_err(|e| wav_err(path, e))?;
        }
    }
    writer.finalize().map_err(|e| wav_err(path, e))
}
