//! Synthetic stimuli: harmonic tones, odd-partial morphs, exponential
//! glissandi, and seeded corpora of isolated notes.

use std::f64::consts::{LN_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::signal::Signal;

/// Peak level every synthesized signal is normalized to.
pub const PEAK_LEVEL: f64 = 0.9;

/// Default raised-cosine fade length, in seconds.
pub const DEFAULT_FADE: f64 = 0.010;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicSpec {
    pub f0: f64,
    /// Amplitude of partial `(p + 1) * f0` at index `p`.
    pub partial_amplitudes: Vec<f64>,
    pub duration: f64,
    pub fade: f64,
}

impl HarmonicSpec {
    pub fn new(f0: f64, partial_amplitudes: Vec<f64>, duration: f64) -> Self {
        HarmonicSpec {
            f0,
            partial_amplitudes,
            duration,
            fade: DEFAULT_FADE,
        }
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        if !(self.f0 > 0.0 && self.f0.is_finite()) {
            return Err(Error::param(
                "f0",
                format!("must be positive, got {}", self.f0),
            ));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::param(
                "duration",
                format!("must be positive, got {}", self.duration),
            ));
        }
        if !(self.fade >= 0.0 && 2.0 * self.fade <= self.duration) {
            return Err(Error::param(
                "fade",
                format!("must lie in [0, duration / 2], got {}", self.fade),
            ));
        }
        if self
            .partial_amplitudes
            .iter()
            .any(|a| !(a.is_finite() && *a >= 0.0))
        {
            return Err(Error::param(
                "partial_amplitudes",
                "amplitudes must be finite and non-negative",
            ));
        }
        if !self.partial_amplitudes.iter().any(|a| *a > 0.0) {
            return Err(Error::param(
                "partial_amplitudes",
                "at least one amplitude must be positive",
            ));
        }
        check_nyquist(self.f0, self.partial_amplitudes.len(), sample_rate)
    }
}

fn check_nyquist(f0: f64, n_partials: usize, sample_rate: u32) -> Result<()> {
    let nyquist = sample_rate as f64 / 2.0;
    match (0..n_partials).find(|p| (*p + 1) as f64 * f0 >= nyquist) {
        Some(index) => Err(Error::AboveNyquist {
            index,
            frequency: (index + 1) as f64 * f0,
            nyquist,
        }),
        None => Ok(()),
    }
}

fn n_samples(duration: f64, sample_rate: u32) -> usize {
    (duration * sample_rate as f64).round() as usize
}

fn render_partials(
    f0: f64,
    amplitudes: &[f64],
    phases: &[f64],
    n: usize,
    sample_rate: u32,
) -> Vec<f64> {
    let mut out = vec![0.0; n];
    let sr = sample_rate as f64;
    for (p, (&a, &phi)) in amplitudes.iter().zip(phases).enumerate() {
        if a == 0.0 {
            continue;
        }
        let w = 2.0 * PI * (p + 1) as f64 * f0 / sr;
        for (i, x) in out.iter_mut().enumerate() {
            *x += a * (w * i as f64 + phi).sin();
        }
    }
    out
}

/// Raised-cosine fade-in and fade-out of `fade_len` samples each.
fn apply_fades(x: &mut [f64], fade_len: usize) {
    let m = fade_len.min(x.len() / 2);
    let n = x.len();
    for k in 0..m {
        let g = 0.5 - 0.5 * (PI * k as f64 / m as f64).cos();
        x[k] *= g;
        x[n - 1 - k] *= g;
    }
}

fn normalize_peak(x: &mut [f64], level: f64) -> Result<()> {
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Err(Error::Degenerate("synthesized signal is silent".into()));
    }
    let g = level / peak;
    x.iter_mut().for_each(|v| *v *= g);
    Ok(())
}

/// Sum of sine partials at integer multiples of `f0`, faded and
/// peak-normalized to [`PEAK_LEVEL`].
pub fn harmonic_tone(spec: &HarmonicSpec, sample_rate: u32) -> Result<Signal> {
    spec.validate(sample_rate)?;
    let n = n_samples(spec.duration, sample_rate);
    let phases = vec![0.0; spec.partial_amplitudes.len()];
    let mut x = render_partials(spec.f0, &spec.partial_amplitudes, &phases, n, sample_rate);
    apply_fades(&mut x, n_samples(spec.fade, sample_rate));
    normalize_peak(&mut x, PEAK_LEVEL)?;
    Signal::new(x, sample_rate)
}

/// Harmonic tone with `n_partials` unit partials whose odd-numbered members
/// (f0, 3 f0, 5 f0, ...) are scaled by `alpha`.
///
/// At `alpha = 0` only the even partials remain, which is the full harmonic
/// series of `2 f0`.
pub fn odd_partial_morph(
    f0: f64,
    alpha: f64,
    n_partials: usize,
    duration: f64,
    sample_rate: u32,
) -> Result<Signal> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::param(
            "alpha",
            format!("must lie in [0, 1], got {alpha}"),
        ));
    }
    if n_partials == 0 {
        return Err(Error::param("n_partials", "must be at least 1"));
    }
    let amplitudes = (0..n_partials)
        .map(|p| if p % 2 == 0 { alpha } else { 1.0 })
        .collect();
    harmonic_tone(&HarmonicSpec::new(f0, amplitudes, duration), sample_rate)
}

/// Exponential chirp whose instantaneous frequency is
/// `f_start * 2^(octaves * t / duration)`.
pub fn octave_glissando(
    f_start: f64,
    octaves: f64,
    duration: f64,
    sample_rate: u32,
) -> Result<Signal> {
    if !(f_start > 0.0 && f_start.is_finite()) {
        return Err(Error::param(
            "f_start",
            format!("must be positive, got {f_start}"),
        ));
    }
    if !(duration > 0.0 && duration.is_finite()) || !octaves.is_finite() {
        return Err(Error::param(
            "duration",
            "duration and octaves must be finite, duration positive",
        ));
    }
    let nyquist = sample_rate as f64 / 2.0;
    let f_max = f_start * 2f64.powf(octaves.max(0.0));
    if f_max >= nyquist {
        return Err(Error::AboveNyquist {
            index: 0,
            frequency: f_max,
            nyquist,
        });
    }
    let n = n_samples(duration, sample_rate);
    let sr = sample_rate as f64;
    // rate of the exponent, in nepers per second
    let k = octaves * LN_2 / duration;
    let mut x: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let phase = if k.abs() < 1e-12 {
                2.0 * PI * f_start * t
            } else {
                2.0 * PI * f_start * (k * t).exp_m1() / k
            };
            phase.sin()
        })
        .collect();
    apply_fades(
        &mut x,
        n_samples(DEFAULT_FADE.min(duration / 2.0), sample_rate),
    );
    normalize_peak(&mut x, PEAK_LEVEL)?;
    Signal::new(x, sample_rate)
}

/// Parameters of a seeded corpus of isolated harmonic notes.
///
/// Each note has a fundamental drawn log-uniformly from `f0_range` and
/// partial amplitudes `r^p` with `r` drawn uniformly from
/// `partial_decay_range`. The remaining fields shape the notes the way a
/// recorded corpus would: a playing level drawn uniformly in dB from
/// `[-dynamics_db, 0]`, independent log-normal deviations of each overtone
/// around the `r^p` envelope, random partial phases, and an additive white
/// noise floor of fixed RMS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub n_notes: usize,
    pub f0_range: (f64, f64),
    pub partial_decay_range: (f64, f64),
    pub seed: u64,
    pub sample_rate: u32,
    pub duration: f64,
    pub fade: f64,
    pub max_partials: usize,
    pub dynamics_db: f64,
    pub partial_jitter_db: f64,
    pub noise_floor: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            n_notes: 1200,
            f0_range: (65.4, 523.2),
            partial_decay_range: (0.5, 0.9),
            seed: 42,
            sample_rate: 22050,
            duration: 1.5,
            fade: DEFAULT_FADE,
            max_partials: 12,
            dynamics_db: 33.0,
            partial_jitter_db: 7.5,
            noise_floor: 0.014,
        }
    }
}

impl CorpusSpec {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if self.n_notes == 0 {
            return Err(Error::param("n_notes", "must be at least 1"));
        }
        if self.sample_rate < Signal::MIN_SAMPLE_RATE {
            return Err(Error::param(
                "sample_rate",
                format!("must be at least {} Hz", Signal::MIN_SAMPLE_RATE),
            ));
        }
        let (lo, hi) = self.f0_range;
        if !(lo <= hi) {
            return Err(Error::param(
                "f0_range",
                format!("empty range [{lo}, {hi}]"),
            ));
        }
        let limit = self.sample_rate as f64 / 16.0;
        if !(lo > 20.0 && hi < limit) {
            return Err(Error::param(
                "f0_range",
                format!("[{lo}, {hi}] must lie within (20, {limit}) Hz"),
            ));
        }
        let (rlo, rhi) = self.partial_decay_range;
        if !(rlo <= rhi) {
            return Err(Error::param(
                "partial_decay_range",
                format!("empty range [{rlo}, {rhi}]"),
            ));
        }
        if !(rlo >= 0.0 && rhi.is_finite()) {
            return Err(Error::param(
                "partial_decay_range",
                "decay factors must be finite and non-negative",
            ));
        }
        if self.max_partials == 0 {
            return Err(Error::param("max_partials", "must be at least 1"));
        }
        let non_negative = [
            ("dynamics_db", self.dynamics_db),
            ("partial_jitter_db", self.partial_jitter_db),
            ("noise_floor", self.noise_floor),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(
                    name,
                    format!("must be finite and non-negative, got {v}"),
                ));
            }
        }
        HarmonicSpec {
            f0: hi,
            partial_amplitudes: vec![1.0],
            duration: self.duration,
            fade: self.fade,
        }
        .validate(self.sample_rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteMetadata {
    pub index: usize,
    pub f0: f64,
    pub decay: f64,
    pub level_db: f64,
}

impl NoteMetadata {
    pub fn label(&self) -> String {
        format!("synth-{:04}-f0={:.3}", self.index, self.f0)
    }
}

struct NoteDraw {
    meta: NoteMetadata,
    seed: u64,
}

/// Seeded corpus of isolated notes; a pure function of `spec`.
pub fn synth_corpus(spec: &CorpusSpec, exec: Execution) -> Result<Vec<(Signal, NoteMetadata)>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (lo, hi) = spec.f0_range;
    let (rlo, rhi) = spec.partial_decay_range;
    let draws: Vec<NoteDraw> = (0..spec.n_notes)
        .map(|index| {
            let f0 = (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>()).exp();
            let decay = rlo + (rhi - rlo) * rng.random::<f64>();
            let level_db = -spec.dynamics_db * rng.random::<f64>();
            NoteDraw {
                meta: NoteMetadata {
                    index,
                    f0,
                    decay,
                    level_db,
                },
                seed: rng.random(),
            }
        })
        .collect();
    par::try_map_indexed(draws.len(), exec, |i| {
        let d = &draws[i];
        Ok((render_note(spec, d)?, d.meta.clone()))
    })
}

fn render_note(spec: &CorpusSpec, draw: &NoteDraw) -> Result<Signal> {
    let meta = &draw.meta;
    let mut rng = ChaCha8Rng::seed_from_u64(draw.seed);
    let nyquist = spec.sample_rate as f64 / 2.0;
    let n_partials = (0..spec.max_partials)
        .take_while(|p| (*p + 1) as f64 * meta.f0 < nyquist)
        .count();
    let mut amplitudes = Vec::with_capacity(n_partials);
    let mut phases = Vec::with_capacity(n_partials);
    for p in 0..n_partials {
        let jitter: f64 = rng.sample(StandardNormal);
        let a = if p == 0 {
            1.0
        } else {
            meta.decay.powi(p as i32) * 10f64.powf(spec.partial_jitter_db * jitter / 20.0)
        };
        amplitudes.push(a);
        phases.push(2.0 * PI * rng.random::<f64>());
    }
    let n = n_samples(spec.duration, spec.sample_rate);
    let mut x = render_partials(meta.f0, &amplitudes, &phases, n, spec.sample_rate);
    apply_fades(&mut x, n_samples(spec.fade, spec.sample_rate));
    normalize_peak(&mut x, PEAK_LEVEL * 10f64.powf(meta.level_db / 20.0))?;
    if spec.noise_floor > 0.0 {
        for v in x.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += spec.noise_floor * z;
        }
        let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak > PEAK_LEVEL {
            let g = PEAK_LEVEL / peak;
            x.iter_mut().for_each(|v| *v *= g);
        }
    }
    Signal::new(x, spec.sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tone_above_nyquist_names_the_partial() {
        let spec = HarmonicSpec::new(30000.0, vec![1.0], 1.0);
        match harmonic_tone(&spec, 44100) {
            Err(Error::AboveNyquist { index, .. }) => assert_eq!(index, 0),
            other => panic!("unexpected {other:?}"),
        }
        let spec = HarmonicSpec::new(8000.0, vec![1.0, 0.5, 0.2], 1.0);
        match harmonic_tone(&spec, 44100) {
            Err(Error::AboveNyquist { index, .. }) => assert_eq!(index, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tone_rejects_silent_or_negative_amplitudes() {
        assert!(harmonic_tone(&HarmonicSpec::new(220.0, vec![0.0, 0.0], 1.0), 44100).is_err());
        assert!(harmonic_tone(&HarmonicSpec::new(220.0, vec![1.0, -0.1], 1.0), 44100).is_err());
        assert!(harmonic_tone(&HarmonicSpec::new(220.0, vec![], 1.0), 44100).is_err());
    }

    #[test]
    fn tone_is_peak_normalized_and_faded() {
        let s = harmonic_tone(&HarmonicSpec::new(440.0, vec![1.0, 0.3], 0.5), 44100).unwrap();
        assert!((s.peak() - PEAK_LEVEL).abs() < 1e-12);
        assert_eq!(s.len(), 22050);
        assert_eq!(s.samples()[0], 0.0);
        assert!(s.samples()[s.len() - 1].abs() < 1e-3);
    }

    #[test]
    fn morph_at_unity_matches_uniform_tone() {
        let a = odd_partial_morph(200.0, 1.0, 6, 0.5, 22050).unwrap();
        let b = harmonic_tone(&HarmonicSpec::new(200.0, vec![1.0; 6], 0.5), 22050).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn morph_rejects_alpha_outside_unit_interval() {
        assert!(odd_partial_morph(200.0, 1.5, 6, 0.5, 22050).is_err());
        assert!(odd_partial_morph(200.0, -0.1, 6, 0.5, 22050).is_err());
    }

    #[test]
    fn flat_glissando_is_a_sine() {
        let g = octave_glissando(220.0, 0.0, 0.5, 22050).unwrap();
        let s = harmonic_tone(&HarmonicSpec::new(220.0, vec![1.0], 0.5), 22050).unwrap();
        for (a, b) in g.samples().iter().zip(s.samples()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn glissando_rejects_nyquist_violation() {
        assert!(octave_glissando(5000.0, 2.0, 1.0, 22050).is_err());
        assert!(octave_glissando(5000.0, -2.0, 1.0, 22050).is_ok());
    }

    #[test]
    fn corpus_validation() {
        let mut spec = CorpusSpec {
            n_notes: 0,
            ..CorpusSpec::default()
        };
        assert!(synth_corpus(&spec, Execution::Sequential).is_err());
        spec.n_notes = 3;
        spec.f0_range = (300.0, 200.0);
        assert!(synth_corpus(&spec, Execution::Sequential).is_err());
        spec.f0_range = (10.0, 200.0);
        assert!(synth_corpus(&spec, Execution::Sequential).is_err());
        spec.f0_range = (100.0, 200.0);
        spec.partial_decay_range = (0.9, 0.5);
        assert!(synth_corpus(&spec, Execution::Sequential).is_err());
    }

    #[test]
    fn corpus_is_deterministic_and_bounded() {
        let spec = CorpusSpec {
            n_notes: 12,
            duration: 0.25,
            ..CorpusSpec::default()
        };
        let a = synth_corpus(&spec, Execution::Parallel).unwrap();
        let b = synth_corpus(&spec, Execution::Sequential).unwrap();
        assert_eq!(a, b);
        for (s, m) in &a {
            assert!(s.peak() <= PEAK_LEVEL + 1e-12);
            assert!(m.f0 >= 65.4 && m.f0 <= 523.2);
            assert!(m.decay >= 0.5 && m.decay <= 0.9);
        }
    }

    #[test]
    fn zero_decay_gives_pure_tones_with_same_pitches() {
        let base = CorpusSpec {
            n_notes: 5,
            duration: 0.25,
            noise_floor: 0.0,
            ..CorpusSpec::default()
        };
        let pure = CorpusSpec {
            partial_decay_range: (0.0, 0.0),
            ..base.clone()
        };
        let a = synth_corpus(&base, Execution::Sequential).unwrap();
        let b = synth_corpus(&pure, Execution::Sequential).unwrap();
        for ((_, ma), (_, mb)) in a.iter().zip(&b) {
            assert_eq!(ma.f0, mb.f0);
            assert_eq!(mb.decay, 0.0);
        }
    }
}
