//! Pitch-helix recovery from isolated musical notes.
//!
//! The pipeline computes a constant-Q scalogram row per note, compresses its
//! loudness, correlates subbands across the corpus, links each subband to its
//! nearest neighbours and runs classical MDS on the resulting geodesics. On
//! harmonic-rich corpora the 3-D embedding is a helix: azimuth follows pitch
//! chroma and one axis follows pitch height.

pub mod corpus;
pub mod correlation;
pub mod cqt;
pub mod error;
pub mod export;
pub mod graph;
pub mod loudness;
pub mod mds;
pub mod metrics;
pub mod par;
pub mod pipeline;
pub mod signal;
pub mod synth;
pub mod wav;

pub use error::{Error, Result};
pub use par::Execution;
pub use signal::Signal;
