use crate::error::{Error, Result};

/// A mono waveform with its sample rate.
///
/// Samples are finite amplitudes, nominally within [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Signal {
    pub const MIN_SAMPLE_RATE: u32 = 8000;

    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate < Self::MIN_SAMPLE_RATE {
            return Err(Error::InvalidSignal(format!(
                "sample rate {sample_rate} Hz is below {} Hz",
                Self::MIN_SAMPLE_RATE
            )));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidSignal(format!(
                "sample {i} is not finite ({})",
                samples[i]
            )));
        }
        Ok(Signal {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn nyquist(&self) -> f64 {
        self.sample_rate as f64 / 2.0
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Copy of this signal with `before` and `after` zero samples added.
    pub fn zero_padded(&self, before: usize, after: usize) -> Signal {
        let mut samples = vec![0.0; before];
        samples.extend_from_slice(&self.samples);
        samples.resize(samples.len() + after, 0.0);
        Signal {
            samples,
            sample_rate: self.sample_rate,
        }
    }
}
