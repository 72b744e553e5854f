//! RIFF/WAVE input and output.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};
use crate::signal::Signal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WavEncoding {
    #[default]
    Pcm16,
    Float32,
}

fn wav_err(path: &Path, source: hound::Error) -> Error {
    Error::Wav {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads a mono or stereo file as mono samples in [-1, 1].
///
/// Accepts 16- and 24-bit integer PCM and 32-bit float. Stereo is averaged.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Signal> {
    let path = path.as_ref();
    let mut reader = WavReader::open(path).map_err(|e| wav_err(path, e))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if !(1..=2).contains(&channels) {
        return Err(Error::UnsupportedWav(format!(
            "{}: {channels} channels (expected mono or stereo)",
            path.display()
        )));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, bits @ (16 | 24)) => {
            let full_scale = (1i64 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / full_scale))
                .collect::<std::result::Result<_, _>>()
        }
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>(),
        (format, bits) => {
            return Err(Error::UnsupportedWav(format!(
                "{}: format chunk declares {format:?} with {bits} bits per sample, {} channel(s) at {} Hz",
                path.display(),
                spec.channels,
                spec.sample_rate
            )))
        }
    }
    .map_err(|e| wav_err(path, e))?;

    let mono = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(2)
            .map(|f| 0.5 * (f[0] + f[1]))
            .collect()
    };
    Signal::new(mono, spec.sample_rate)
}

/// Writes a mono file. Samples outside [-1, 1] are clipped.
pub fn write_wav(path: impl AsRef<Path>, signal: &Signal, encoding: WavEncoding) -> Result<()> {
    let path = path.as_ref();
    let (bits, format) = match encoding {
        WavEncoding::Pcm16 => (16, SampleFormat::Int),
        WavEncoding::Float32 => (32, SampleFormat::Float),
    };
    let spec = WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate(),
        bits_per_sample: bits,
        sample_format: format,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| wav_err(path, e))?;
    for &x in signal.samples() {
        let x = x.clamp(-1.0, 1.0);
        match encoding {
            WavEncoding::Pcm16 => writer.write_sample((x * 32768.0).round().min(32767.0) as i16),
            WavEncoding::Float32 => writer.write_sample(x as f32),
        }
        .map_err(|e| wav_err(path, e))?;
    }
    writer.finalize().map_err(|e| wav_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{harmonic_tone, HarmonicSpec};

    fn sine() -> Signal {
        harmonic_tone(&HarmonicSpec::new(440.0, vec![1.0], 0.1), 16000).unwrap()
    }

    #[test]
    fn pcm16_round_trip_within_one_lsb() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let s = sine();
        write_wav(&path, &s, WavEncoding::Pcm16).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.sample_rate(), 16000);
        assert_eq!(back.len(), s.len());
        for (a, b) in s.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() <= 1.0 / 32768.0 + 1e-12);
        }
    }

    #[test]
    fn float_round_trip_is_single_precision() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.wav");
        let s = sine();
        write_wav(&path, &s, WavEncoding::Float32).unwrap();
        let back = read_wav(&path).unwrap();
        for (a, b) in s.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() <= 1e-7);
        }
    }

    #[test]
    fn identical_stereo_channels_equal_mono() {
        let dir = tempfile::tempdir().unwrap();
        let stereo = dir.path().join("s.wav");
        let mono = dir.path().join("m.wav");
        let s = sine();
        write_wav(&mono, &s, WavEncoding::Pcm16).unwrap();
        let spec = WavSpec {
            channels: 2,
            sample_rate: 16000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&stereo, spec).unwrap();
        for &x in s.samples() {
            let v = (x * 32768.0).round().min(32767.0) as i16;
            w.write_sample(v).unwrap();
            w.write_sample(v).unwrap();
        }
        w.finalize().unwrap();
        assert_eq!(read_wav(&stereo).unwrap(), read_wav(&mono).unwrap());
    }

    #[test]
    fn reads_24_bit_pcm() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p24.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 24,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&path, spec).unwrap();
        for v in [0i32, 1 << 22, -(1 << 23)] {
            w.write_sample(v).unwrap();
        }
        w.finalize().unwrap();
        assert_eq!(read_wav(&path).unwrap().samples(), &[0.0, 0.5, -1.0]);
    }

    #[test]
    fn rejects_unsupported_and_truncated_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p8.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 8,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&path, spec).unwrap();
        w.write_sample(3i8).unwrap();
        w.finalize().unwrap();
        let err = read_wav(&path).unwrap_err();
        assert!(matches!(err, Error::UnsupportedWav(ref m) if m.contains("8 bits")));

        let good = dir.path().join("g.wav");
        write_wav(&good, &sine(), WavEncoding::Pcm16).unwrap();
        let bytes = std::fs::read(&good).unwrap();
        let cut = dir.path().join("cut.wav");
        std::fs::write(&cut, &bytes[..20]).unwrap();
        assert!(matches!(read_wav(&cut), Err(Error::Wav { .. })));
    }
}
