//! WAV I/O: reads 16-bit PCM and 32-bit IEEE float, mono or multichannel;
//! always writes 32-bit float.

use crate::error::{Error, Result};
use std::path::Path;

pub struct WavData {
    pub sample_rate: u32,
    /// One waveform per channel, de-interleaved.
    pub channels: Vec<Vec<f64>>,
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<WavData> {
    let path = path.as_ref();
    let mut reader = hound::WavReader::open(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let spec = reader.spec();
    let n_channels = spec.channels as usize;
    if n_channels == 0 {
        return Err(Error::Config(format!("{}: zero channels", path.display())));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
        (fmt, bits) => {
            return Err(Error::Config(format!(
                "{}: unsupported WAV encoding ({fmt:?}, {bits} bits)",
                path.display()
            )))
        }
    };
    let frames = interleaved.len() / n_channels;
    let mut channels = vec![Vec::with_capacity(frames); n_channels];
    for (i, v) in interleaved.into_iter().enumerate() {
        channels[i % n_channels].push(v);
    }
    Ok(WavData {
        sample_rate: spec.sample_rate,
        channels,
    })
}

/// Write channels as interleaved 32-bit float WAV.
pub fn write_wav(path: impl AsRef<Path>, sample_rate: u32, channels: &[Vec<f64>]) -> Result<()> {
    let path = path.as_ref();
    if channels.is_empty() {
        return Err(Error::Config("write_wav: no channels".into()));
    }
    let frames = channels[0].len();
    if channels.iter().any(|c| c.len() != frames) {
        return Err(Error::Dimension("write_wav: unequal channel lengths".into()));
    }
    let spec = hound::WavSpec {
        channels: channels.len() as u16,
        sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    for frame in 0..frames {
        for ch in channels {
            writer
                .write_sample(ch[frame] as f32)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        }
    }
    writer
        .finalize()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_roundtrip_multichannel() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        let ch0: Vec<f64> = (0..100).map(|i| (i as f64 * 0.01).sin()).collect();
        let ch1: Vec<f64> = (0..100).map(|i| (i as f64 * 0.02).cos()).collect();
        write_wav(&path, 48_000, &[ch0.clone(), ch1.clone()]).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.sample_rate, 48_000);
        assert_eq!(back.channels.len(), 2);
        for (a, b) in ch0.iter().zip(&back.channels[0]) {
            assert!((a - b).abs() < 1e-7); // f32 quantization
        }
        for (a, b) in ch1.iter().zip(&back.channels[1]) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn reads_pcm16() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.wav");
        // hand-build a tiny PCM16 mono file
        let samples: Vec<i16> = vec![0, 16384, -16384, 32767];
        let data_len = (samples.len() * 2) as u32;
        let mut bytes = Vec::new();
        bytes.extend(b"RIFF");
        bytes.extend((36 + data_len).to_le_bytes());
        bytes.extend(b"WAVEfmt ");
        bytes.extend(16u32.to_le_bytes());
        bytes.extend(1u16.to_le_bytes());
        bytes.extend(1u16.to_le_bytes());
        bytes.extend(48_000u32.to_le_bytes());
        bytes.extend(96_000u32.to_le_bytes());
        bytes.extend(2u16.to_le_bytes());
        bytes.extend(16u16.to_le_bytes());
        bytes.extend(b"data");
        bytes.extend(data_len.to_le_bytes());
        for s in &samples {
            bytes.extend(s.to_le_bytes());
        }
        std::fs::write(&path, bytes).unwrap();
        let wav = read_wav(&path).unwrap();
        assert_eq!(wav.channels.len(), 1);
        assert!((wav.channels[0][1] - 0.5).abs() < 1e-4);
        assert!((wav.channels[0][2] + 0.5).abs() < 1e-4);
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.wav");
        std::fs::write(&path, b"not a wav file at all........................").unwrap();
        assert!(read_wav(&path).is_err());
    }
}
