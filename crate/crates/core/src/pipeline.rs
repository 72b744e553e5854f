//! End-to-end orchestration: notes to scalogram, correlations, graph and
//! helix embedding.

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::correlation::{center_features, pearson_squared, rho_to_distance, CorrelationMatrix};
use crate::cqt::{
    build_filterbank, scalogram_row, Filterbank, FilterbankParams, ScalogramMatrix, C1_HZ,
};
use crate::error::{Error, Result};
use crate::graph::{connected_components, geodesics, knn_graph, GeodesicMatrix, NeighborGraph};
use crate::loudness::{loudness_map, LoudnessMode};
use crate::mds::{embed, CoordinateScaling, Embedding};
use crate::metrics::{helicity_report_for_bins, HelicityReport};
use crate::par::{self, Execution};
use crate::signal::Signal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub bins_per_octave: usize,
    pub octaves: usize,
    pub f_min: f64,
    pub filter_scale: f64,
    pub loudness: LoudnessMode,
    pub k: usize,
    pub dims: usize,
    pub seed: u64,
    pub scaling: CoordinateScaling,
    /// Embed only the largest connected component instead of failing.
    pub largest_component: bool,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            bins_per_octave: 24,
            octaves: 3,
            f_min: C1_HZ,
            filter_scale: 1.0,
            loudness: LoudnessMode::default(),
            k: 3,
            dims: 3,
            seed: 42,
            scaling: CoordinateScaling::Torgerson,
            largest_component: false,
            execution: Execution::default(),
        }
    }
}

impl PipelineConfig {
    pub fn n_bins(&self) -> usize {
        self.bins_per_octave * self.octaves
    }

    pub fn filterbank_params(&self, sample_rate: u32) -> FilterbankParams {
        FilterbankParams {
            filter_scale: self.filter_scale,
            ..FilterbankParams::new(self.bins_per_octave, self.octaves, self.f_min, sample_rate)
        }
    }

    /// Checks everything that does not depend on the corpus.
    pub fn validate(&self) -> Result<()> {
        // the Nyquist bound is checked per file once sample rates are known
        self.filterbank_params(u32::MAX).validate()?;
        let n = self.n_bins();
        if self.k == 0 || self.k >= n {
            return Err(Error::param(
                "k",
                format!("need 1 <= k < {n}, got {}", self.k),
            ));
        }
        if self.dims < 3 || self.dims > n {
            return Err(Error::param(
                "dims",
                format!("need 3 <= dims <= {n}, got {}", self.dims),
            ));
        }
        if let LoudnessMode::Logarithmic { clip_floor } = self.loudness {
            LoudnessMode::logarithmic(clip_floor)?;
        }
        Ok(())
    }
}

/// Scalogram rows of `signals`, building one filterbank per sample rate.
pub fn compute_scalogram(
    signals: &[Signal],
    labels: Vec<String>,
    config: &PipelineConfig,
) -> Result<ScalogramMatrix> {
    let mut banks: BTreeMap<u32, Filterbank> = BTreeMap::new();
    for s in signals {
        if let std::collections::btree_map::Entry::Vacant(e) = banks.entry(s.sample_rate()) {
            e.insert(build_filterbank(
                &config.filterbank_params(s.sample_rate()),
            )?);
        }
    }
    let rows = par::try_map_indexed(signals.len(), config.execution, |i| {
        scalogram_row(&signals[i], &banks[&signals[i].sample_rate()])
    })?;
    if rows.is_empty() {
        return ScalogramMatrix::new(Array2::zeros((0, config.n_bins())), labels);
    }
    ScalogramMatrix::from_rows(rows, labels)
}

/// Squared subband correlations of a scalogram after loudness compression.
pub fn correlate(x: &ScalogramMatrix, config: &PipelineConfig) -> Result<CorrelationMatrix> {
    let features = loudness_map(x, config.loudness);
    let centered = center_features(features.view())?;
    Ok(pearson_squared(centered.view(), config.execution))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStage {
    pub graph: NeighborGraph,
    pub geodesics: GeodesicMatrix,
    /// Subband index of every embedded point.
    pub bins: Vec<usize>,
    /// Component partition when the graph was disconnected.
    pub components: Vec<Vec<usize>>,
    pub embedding: Embedding,
}

impl EmbeddingStage {
    pub fn restricted(&self) -> bool {
        self.components.len() > 1
    }
}

/// Graph, geodesics and MDS. A disconnected graph is an error unless
/// `largest_component` is set, in which case the largest component (the one
/// with the smallest member on ties) is embedded alone.
pub fn embed_correlations(
    rho2: &CorrelationMatrix,
    config: &PipelineConfig,
) -> Result<EmbeddingStage> {
    let distances = rho_to_distance(rho2);
    let graph = knn_graph(&distances, config.k)?;
    let geo = geodesics(&graph, config.execution);
    let components = connected_components(&graph);
    let bins: Vec<usize> = if components.len() == 1 {
        (0..graph.n_vertices()).collect()
    } else if config.largest_component {
        let largest =
            components.iter().fold(
                &components[0],
                |best, c| if c.len() > best.len() { c } else { best },
            );
        log::warn!(
            "graph has {} components; embedding the largest ({} of {} vertices)",
            components.len(),
            largest.len(),
            graph.n_vertices()
        );
        largest.clone()
    } else {
        return Err(Error::Disconnected { components });
    };
    let sub = if bins.len() == graph.n_vertices() {
        geo.clone()
    } else {
        geo.submatrix(&bins)
    };
    if config.dims > bins.len() {
        return Err(Error::param(
            "dims",
            format!(
                "{} dimensions requested for {} vertices",
                config.dims,
                bins.len()
            ),
        ));
    }
    let embedding = embed(&sub, config.dims, config.scaling)?;
    Ok(EmbeddingStage {
        graph,
        geodesics: geo,
        bins,
        components: if components.len() > 1 {
            components
        } else {
            Vec::new()
        },
        embedding,
    })
}

/// Contents of `helicity.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    #[serde(flatten)]
    pub helicity: HelicityReport,
    pub loudness: String,
    pub k: usize,
    pub n_vertices: usize,
    pub restricted_to_largest_component: bool,
    pub excluded_bins: Vec<usize>,
}

pub fn report(
    embedding: &Embedding,
    bins: &[usize],
    n_vertices: usize,
    config: &PipelineConfig,
) -> Result<RunReport> {
    let helicity = helicity_report_for_bins(embedding, config.bins_per_octave, bins)?;
    let kept: std::collections::BTreeSet<usize> = bins.iter().copied().collect();
    let excluded_bins: Vec<usize> = (0..n_vertices).filter(|u| !kept.contains(u)).collect();
    Ok(RunReport {
        helicity,
        loudness: config.loudness.name().to_string(),
        k: config.k,
        n_vertices,
        restricted_to_largest_component: !excluded_bins.is_empty(),
        excluded_bins,
    })
}

/// Everything the pipeline produces for one corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub scalogram: ScalogramMatrix,
    pub rho2: CorrelationMatrix,
    pub stage: EmbeddingStage,
    pub report: RunReport,
}

pub fn run_pipeline(
    signals: &[Signal],
    labels: Vec<String>,
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    config.validate()?;
    let scalogram = compute_scalogram(signals, labels, config)?;
    let rho2 = correlate(&scalogram, config)?;
    let stage = embed_correlations(&rho2, config)?;
    let report = report(
        &stage.embedding,
        &stage.bins,
        stage.graph.n_vertices(),
        config,
    )?;
    Ok(PipelineOutput {
        scalogram,
        rho2,
        stage,
        report,
    })
}

/// `e1 A% e2 B% e3 C%` with one decimal.
pub fn variance_line(explained_variance: &[f64]) -> String {
    explained_variance
        .iter()
        .enumerate()
        .map(|(m, r)| format!("e{} {:.1}%", m + 1, 100.0 * r))
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{harmonic_tone, HarmonicSpec};

    #[test]
    fn default_config_matches_protocol() {
        let c = PipelineConfig::default();
        assert_eq!((c.bins_per_octave, c.octaves, c.k, c.dims), (24, 3, 3, 3));
        assert_eq!(c.loudness.name(), "log");
        c.validate().unwrap();
    }

    #[test]
    fn config_validation() {
        let bad_k = PipelineConfig {
            k: 72,
            ..Default::default()
        };
        assert!(bad_k.validate().is_err());
        let bad_dims = PipelineConfig {
            dims: 2,
            ..Default::default()
        };
        assert!(bad_dims.validate().is_err());
        let bad_q = PipelineConfig {
            bins_per_octave: 0,
            ..Default::default()
        };
        assert!(bad_q.validate().is_err());
    }

    #[test]
    fn variance_line_format() {
        assert_eq!(
            variance_line(&[0.36, 0.35, 0.09]),
            "e1 36.0% e2 35.0% e3 9.0%"
        );
    }

    #[test]
    fn mixed_sample_rates_share_bin_layout() {
        let c = PipelineConfig {
            bins_per_octave: 12,
            octaves: 2,
            f_min: 110.0,
            ..Default::default()
        };
        let a = harmonic_tone(&HarmonicSpec::new(220.0, vec![1.0], 0.5), 16000).unwrap();
        let b = harmonic_tone(&HarmonicSpec::new(220.0, vec![1.0], 0.5), 22050).unwrap();
        let x = compute_scalogram(&[a, b], vec!["a".into(), "b".into()], &c).unwrap();
        let argmax = |r: usize| {
            (0..24)
                .max_by(|&i, &j| x.values()[[r, i]].total_cmp(&x.values()[[r, j]]))
                .unwrap()
        };
        assert_eq!(argmax(0), 12);
        assert_eq!(argmax(1), 12);
    }
}
