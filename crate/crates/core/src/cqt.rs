//! Constant-Q wavelet filterbank and scalogram extraction.
//!
//! Bin `u` (zero-based here) is centred at `f_min * 2^(u / Q)`. Its kernel is
//! a Hann window modulated to that frequency, long enough that the kernel
//! bandwidth is a fixed fraction of the centre frequency. Kernels have unit
//! L1 norm, so a unit-amplitude sinusoid at the centre of any bin produces a
//! response of magnitude close to 1/2 regardless of the bin.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::signal::Signal;

/// Pitch C1, the default lowest centre frequency.
pub const C1_HZ: f64 = 32.703_195_662_574_83;

/// Short-term energy window used to locate the region of interest of a note.
pub const PEAK_WINDOW_SECONDS: f64 = 0.093;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Hann,
}

impl Window {
    /// Periodic window of length `len`.
    pub fn taps(self, len: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterbankParams {
    /// Bins per octave, Q.
    pub bins_per_octave: usize,
    /// Number of octaves, J.
    pub octaves: usize,
    /// Centre frequency of the lowest bin, in Hz.
    pub f_min: f64,
    pub sample_rate: u32,
    pub window: Window,
    /// Kernel length relative to the constant-Q length
    /// `sample_rate / (f_c * (2^(1/Q) - 1))`.
    pub filter_scale: f64,
}

impl FilterbankParams {
    pub fn new(bins_per_octave: usize, octaves: usize, f_min: f64, sample_rate: u32) -> Self {
        FilterbankParams {
            bins_per_octave,
            octaves,
            f_min,
            sample_rate,
            window: Window::Hann,
            filter_scale: 1.0,
        }
    }

    pub fn n_bins(&self) -> usize {
        self.bins_per_octave * self.octaves
    }

    /// Centre frequency of zero-based bin `u`.
    pub fn center_frequency(&self, u: usize) -> f64 {
        self.f_min * 2f64.powf(u as f64 / self.bins_per_octave as f64)
    }

    /// Ratio of centre frequency to kernel bandwidth, in the constant-Q
    /// convention where adjacent bins are one bandwidth apart.
    pub fn quality(&self) -> f64 {
        self.filter_scale / (2f64.powf(1.0 / self.bins_per_octave as f64) - 1.0)
    }

    pub fn kernel_length(&self, u: usize) -> usize {
        (self.quality() * self.sample_rate as f64 / self.center_frequency(u)).ceil() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins_per_octave == 0 {
            return Err(Error::param("bins_per_octave", "must be at least 1"));
        }
        if self.octaves == 0 {
            return Err(Error::param("octaves", "must be at least 1"));
        }
        if !(self.f_min > 0.0 && self.f_min.is_finite()) {
            return Err(Error::param(
                "f_min",
                format!("must be positive, got {}", self.f_min),
            ));
        }
        if !(self.filter_scale > 0.0 && self.filter_scale.is_finite()) {
            return Err(Error::param(
                "filter_scale",
                format!("must be positive, got {}", self.filter_scale),
            ));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        let top = self.f_min * 2f64.powi(self.octaves as i32);
        if top > nyquist {
            return Err(Error::param(
                "f_min",
                format!("f_min * 2^J = {top:.2} Hz exceeds the Nyquist frequency {nyquist:.2} Hz"),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Kernel {
    pub center_frequency: f64,
    pub taps: Vec<Complex64>,
}

impl Kernel {
    fn half(&self) -> usize {
        self.taps.len() / 2
    }
}

/// Immutable bank of constant-Q kernels; cheap to share across threads.
#[derive(Debug, Clone)]
pub struct Filterbank {
    params: FilterbankParams,
    kernels: Vec<Kernel>,
}

pub fn build_filterbank(params: &FilterbankParams) -> Result<Filterbank> {
    params.validate()?;
    let sr = params.sample_rate as f64;
    let kernels = (0..params.n_bins())
        .map(|u| {
            let fc = params.center_frequency(u);
            let len = params.kernel_length(u);
            let half = len / 2;
            let window = params.window.taps(len);
            let norm: f64 = window.iter().sum();
            let taps = window
                .iter()
                .enumerate()
                .map(|(n, w)| {
                    let phase = 2.0 * PI * fc * (n as f64 - half as f64) / sr;
                    Complex64::from_polar(w / norm, phase)
                })
                .collect();
            Kernel {
                center_frequency: fc,
                taps,
            }
        })
        .collect();
    Ok(Filterbank {
        params: params.clone(),
        kernels,
    })
}

impl Filterbank {
    pub fn params(&self) -> &FilterbankParams {
        &self.params
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    pub fn n_bins(&self) -> usize {
        self.kernels.len()
    }

    pub fn longest_kernel(&self) -> usize {
        self.kernels.iter().map(|k| k.taps.len()).max().unwrap_or(0)
    }

    /// Reflect padding applied on both sides of the signal.
    pub fn padding(&self) -> usize {
        self.longest_kernel().div_ceil(2)
    }

    fn check_signal(&self, signal: &Signal) -> Result<()> {
        if signal.sample_rate() != self.params.sample_rate {
            return Err(Error::param(
                "sample_rate",
                format!(
                    "signal is sampled at {} Hz but the filterbank was built for {} Hz",
                    signal.sample_rate(),
                    self.params.sample_rate
                ),
            ));
        }
        let required = self.longest_kernel();
        if signal.len() < required {
            return Err(Error::SignalTooShort {
                required,
                actual: signal.len(),
            });
        }
        Ok(())
    }
}

/// Complex CQT coefficients, one row per bin and one column per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CqtMatrix {
    pub values: Array2<Complex64>,
    pub hop: usize,
}

impl CqtMatrix {
    pub fn n_frames(&self) -> usize {
        self.values.ncols()
    }

    /// Sample index, in the unpadded signal, at which frame `t` is centred.
    pub fn frame_center(&self, t: usize) -> usize {
        t * self.hop
    }
}

fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let j = i.rem_euclid(period);
    if j < n as isize {
        j as usize
    } else {
        (period - j) as usize
    }
}

fn reflect_pad(x: &[f64], pad: usize) -> Vec<f64> {
    (-(pad as isize)..(x.len() + pad) as isize)
        .map(|i| x[reflect_index(i, x.len())])
        .collect()
}

fn frame_count(len: usize, hop: usize) -> usize {
    1 + len / hop
}

/// Inner product of the padded signal with `kernel` centred at `center`.
fn response(padded: &[f64], kernel: &Kernel, center: usize) -> Complex64 {
    let start = center - kernel.half();
    padded[start..start + kernel.taps.len()]
        .iter()
        .zip(&kernel.taps)
        .fold(Complex64::new(0.0, 0.0), |acc, (x, k)| acc + k.conj() * x)
}

/// Full constant-Q transform by FFT convolution, with frames every `hop`
/// samples starting at the first sample.
pub fn cqt_transform(signal: &Signal, fb: &Filterbank, hop: usize) -> Result<CqtMatrix> {
    if hop == 0 {
        return Err(Error::param("hop", "must be at least 1"));
    }
    fb.check_signal(signal)?;
    let pad = fb.padding();
    let padded = reflect_pad(signal.samples(), pad);
    let n_frames = frame_count(signal.len(), hop);
    let nfft = (padded.len() + fb.longest_kernel()).next_power_of_two();

    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(nfft);
    let inverse = planner.plan_fft_inverse(nfft);

    let mut spectrum: Vec<Complex64> = padded.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    spectrum.resize(nfft, Complex64::new(0.0, 0.0));
    forward.process(&mut spectrum);

    let mut values = Array2::zeros((fb.n_bins(), n_frames));
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    let scale = 1.0 / nfft as f64;
    for (u, kernel) in fb.kernels.iter().enumerate() {
        // correlation with the kernel is convolution with its conjugate reversal
        let len = kernel.taps.len();
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        for (j, k) in kernel.taps.iter().rev().enumerate() {
            buf[j] = k.conj();
        }
        forward.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&spectrum) {
            *b *= s;
        }
        inverse.process(&mut buf);
        let offset = len - 1 - kernel.half();
        for t in 0..n_frames {
            values[[u, t]] = buf[pad + t * hop + offset] * scale;
        }
    }
    Ok(CqtMatrix { values, hop })
}

/// Reference transform evaluating every inner product in the time domain.
pub fn cqt_transform_direct(signal: &Signal, fb: &Filterbank, hop: usize) -> Result<CqtMatrix> {
    if hop == 0 {
        return Err(Error::param("hop", "must be at least 1"));
    }
    fb.check_signal(signal)?;
    let pad = fb.padding();
    let padded = reflect_pad(signal.samples(), pad);
    let n_frames = frame_count(signal.len(), hop);
    let mut values = Array2::zeros((fb.n_bins(), n_frames));
    for (u, kernel) in fb.kernels.iter().enumerate() {
        for t in 0..n_frames {
            values[[u, t]] = response(&padded, kernel, pad + t * hop);
        }
    }
    Ok(CqtMatrix { values, hop })
}

/// CQT column centred at sample `center` of the unpadded signal.
pub fn cqt_at(signal: &Signal, fb: &Filterbank, center: usize) -> Result<Vec<Complex64>> {
    fb.check_signal(signal)?;
    if center > signal.len() {
        return Err(Error::param(
            "center",
            format!(
                "sample {center} is past the end of a {}-sample signal",
                signal.len()
            ),
        ));
    }
    let pad = fb.padding();
    let padded = reflect_pad(signal.samples(), pad);
    Ok(fb
        .kernels
        .iter()
        .map(|k| response(&padded, k, pad + center))
        .collect())
}

/// Frame of highest short-term energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeakFrame {
    pub index: usize,
    pub start: usize,
    pub length: usize,
}

impl PeakFrame {
    pub fn center(&self) -> usize {
        self.start + self.length / 2
    }
}

/// Index of the rectangular frame of `window_seconds` (hop of half a window)
/// with the largest RMS energy. Ties go to the earliest frame.
pub fn peak_frame(signal: &Signal, window_seconds: f64) -> Result<PeakFrame> {
    if !(window_seconds > 0.0 && window_seconds.is_finite()) {
        return Err(Error::param(
            "window",
            format!("must be positive, got {window_seconds}"),
        ));
    }
    let length = ((window_seconds * signal.sample_rate() as f64).round() as usize).max(1);
    if signal.len() <= length {
        return Err(Error::SignalTooShort {
            required: length + 1,
            actual: signal.len(),
        });
    }
    let hop = (length / 2).max(1);
    let x = signal.samples();
    let mut best = (0, f64::NEG_INFINITY);
    let mut start = 0;
    let mut index = 0;
    while start + length <= x.len() {
        let energy: f64 = x[start..start + length].iter().map(|v| v * v).sum();
        if energy > best.1 {
            best = (index, energy);
        }
        start += hop;
        index += 1;
    }
    Ok(PeakFrame {
        index: best.0,
        start: best.0 * hop,
        length,
    })
}

/// CQT magnitudes at the centre of the peak-energy frame.
pub fn scalogram_row(signal: &Signal, fb: &Filterbank) -> Result<Vec<f64>> {
    fb.check_signal(signal)?;
    let frame = peak_frame(signal, PEAK_WINDOW_SECONDS)?;
    Ok(cqt_at(signal, fb, frame.center())?
        .iter()
        .map(|c| c.norm())
        .collect())
}

/// N x (QJ) matrix of non-negative CQT magnitudes, one row per signal.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalogramMatrix {
    values: Array2<f64>,
    labels: Vec<String>,
}

impl ScalogramMatrix {
    pub fn new(values: Array2<f64>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != values.nrows() {
            return Err(Error::param(
                "labels",
                format!("{} labels for {} rows", labels.len(), values.nrows()),
            ));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::param(
                "values",
                format!("scalogram entries must be finite and non-negative, found {v}"),
            ));
        }
        Ok(ScalogramMatrix { values, labels })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::param("rows", "rows have different lengths"));
        }
        let n_rows = rows.len();
        let flat = rows.into_iter().flatten().collect();
        let values = Array2::from_shape_vec((n_rows, n_cols), flat)
            .map_err(|e| Error::param("rows", e.to_string()))?;
        ScalogramMatrix::new(values, labels)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_signals(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.values.ncols()
    }
}

/// Scalogram rows of many signals sharing one filterbank.
pub fn scalogram(
    signals: &[Signal],
    labels: Vec<String>,
    fb: &Filterbank,
    exec: Execution,
) -> Result<ScalogramMatrix> {
    let rows = par::try_map_indexed(signals.len(), exec, |i| scalogram_row(&signals[i], fb))?;
    ScalogramMatrix::from_rows(rows, labels)
}
