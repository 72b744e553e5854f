//! Pointwise loudness mappings applied to scalogram magnitudes.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::cqt::ScalogramMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_CLIP_DB: f64 = -100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LoudnessMode {
    /// `max(clip_floor, 10 log10(x))`
    Logarithmic {
        clip_floor: f64,
    },
    Linear,
    CubicRoot,
}

impl Default for LoudnessMode {
    fn default() -> Self {
        LoudnessMode::Logarithmic {
            clip_floor: DEFAULT_CLIP_DB,
        }
    }
}

impl LoudnessMode {
    pub fn logarithmic(clip_floor: f64) -> Result<Self> {
        if !(clip_floor < 0.0 && clip_floor.is_finite()) {
            return Err(Error::param(
                "clip_floor",
                format!("must be a finite negative dB value, got {clip_floor}"),
            ));
        }
        Ok(LoudnessMode::Logarithmic { clip_floor })
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            LoudnessMode::Logarithmic { clip_floor } => {
                if x > 0.0 {
                    (10.0 * x.log10()).max(clip_floor)
                } else {
                    clip_floor
                }
            }
            LoudnessMode::Linear => x,
            LoudnessMode::CubicRoot => x.cbrt(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LoudnessMode::Logarithmic { .. } => "log",
            LoudnessMode::Linear => "linear",
            LoudnessMode::CubicRoot => "cbrt",
        }
    }
}

impl fmt::Display for LoudnessMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LoudnessMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log" | "logarithmic" => Ok(LoudnessMode::default()),
            "linear" => Ok(LoudnessMode::Linear),
            "cbrt" | "cubic_root" => Ok(LoudnessMode::CubicRoot),
            other => Err(Error::param(
                "loudness",
                format!("unknown mode `{other}` (expected log, linear or cbrt)"),
            )),
        }
    }
}

pub fn loudness_map(x: &ScalogramMatrix, mode: LoudnessMode) -> Array2<f64> {
    x.values().mapv(|v| mode.apply(v))
}
