use std::path::{Path, PathBuf};

use pitch_helix::corpus::{load_corpus, CorpusManifest, Dynamics, ManifestEntry};
use pitch_helix::export::{
    export_plot, read_embedding_csv, read_rho2_csv, write_edges_csv, write_embedding_csv,
    write_geodesics_csv, write_json, write_rho2_csv, write_scalogram_csv,
};
use pitch_helix::pipeline::{
    compute_scalogram, correlate, embed_correlations, report as run_report, variance_line,
    PipelineConfig,
};
use pitch_helix::synth::{synth_corpus, CorpusSpec, NoteMetadata};
use pitch_helix::wav::{write_wav, WavEncoding};
use pitch_helix::{Error, Signal};

use crate::Options;

pub const SCALOGRAM: &str = "scalogram.csv";
pub const RHO2: &str = "rho2.csv";
pub const EDGES: &str = "edges.csv";
pub const GEODESICS: &str = "geodesics.csv";
pub const EMBEDDING: &str = "embedding.csv";
pub const HELICITY: &str = "helicity.json";

fn corpus_spec(opts: &Options, config: &PipelineConfig) -> CorpusSpec {
    CorpusSpec {
        n_notes: opts.synth_notes.unwrap_or(CorpusSpec::default().n_notes),
        seed: config.seed,
        ..CorpusSpec::default()
    }
}

/// Playing level in thirds of the dynamic range.
fn dynamics_of(meta: &NoteMetadata, spec: &CorpusSpec) -> Dynamics {
    let t = if spec.dynamics_db > 0.0 {
        -meta.level_db / spec.dynamics_db
    } else {
        0.0
    };
    if t < 1.0 / 3.0 {
        Dynamics::Ff
    } else if t < 2.0 / 3.0 {
        Dynamics::Mf
    } else {
        Dynamics::Pp
    }
}

pub fn synth(opts: &Options, config: &PipelineConfig) -> Result<(), Error> {
    let spec = corpus_spec(opts, config);
    let notes = synth_corpus(&spec, config.execution)?;
    let dir = opts.out.join("corpus");
    std::fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    let mut entries = Vec::with_capacity(notes.len());
    for (signal, meta) in &notes {
        let path = PathBuf::from(format!("note_{:04}.wav", meta.index));
        write_wav(dir.join(&path), signal, WavEncoding::Pcm16)?;
        entries.push(ManifestEntry {
            path,
            instrument: "synth".into(),
            dynamics: dynamics_of(meta, &spec),
            technique: "ordinario".into(),
            f0_label: Some(meta.f0),
        });
    }
    let manifest = CorpusManifest::new(entries, &dir)?;
    let path = dir.join("manifest.json");
    std::fs::write(&path, manifest.to_json()? + "\n").map_err(|e| io_error(&path, e))?;
    println!("wrote {} notes and {}", notes.len(), path.display());
    Ok(())
}

fn corpus(opts: &Options, config: &PipelineConfig) -> Result<(Vec<Signal>, Vec<String>), Error> {
    match &opts.manifest {
        Some(path) => {
            let manifest = CorpusManifest::load(path)?;
            let loaded = load_corpus(&manifest, &opts.filter()?, config.execution)?;
            Ok(loaded
                .into_iter()
                .map(|(s, e)| (s, e.path.display().to_string()))
                .unzip())
        }
        None => {
            let notes = synth_corpus(&corpus_spec(opts, config), config.execution)?;
            Ok(notes
                .into_iter()
                .map(|(s, m)| {
                    let label = m.label();
                    (s, label)
                })
                .unzip())
        }
    }
}

pub fn analyze(opts: &Options, config: &PipelineConfig) -> Result<(), Error> {
    let (signals, labels) = corpus(opts, config)?;
    log::info!("analyzing {} notes", signals.len());
    let x = compute_scalogram(&signals, labels, config)?;
    write_scalogram_csv(opts.out.join(SCALOGRAM), &x)?;
    let rho2 = correlate(&x, config)?;
    write_rho2_csv(opts.out.join(RHO2), &rho2)?;
    let flagged = rho2.degenerate_columns();
    if !flagged.is_empty() {
        log::warn!("constant subbands (no correlation): {flagged:?}");
    }
    println!("{} notes x {} subbands", x.n_signals(), x.n_bins());
    Ok(())
}

pub fn embed(opts: &Options, config: &PipelineConfig) -> Result<(), Error> {
    let rho2 = read_rho2_csv(opts.out.join(RHO2))?;
    if rho2.len() != config.n_bins() {
        return Err(Error::InvalidParameter {
            name: "q",
            reason: format!(
                "{} has {} subbands but --q and --octaves give {}",
                RHO2,
                rho2.len(),
                config.n_bins()
            ),
        });
    }
    let stage = embed_correlations(&rho2, config)?;
    write_edges_csv(opts.out.join(EDGES), &stage.graph)?;
    write_geodesics_csv(opts.out.join(GEODESICS), &stage.geodesics)?;
    write_embedding_csv(
        opts.out.join(EMBEDDING),
        &stage.embedding,
        &stage.bins,
        config.bins_per_octave,
    )?;
    println!("{}", variance_line(&stage.embedding.explained_variance));
    Ok(())
}

fn embedding(
    opts: &Options,
    config: &PipelineConfig,
) -> Result<(pitch_helix::mds::Embedding, Vec<usize>), Error> {
    let (emb, bins, q) = read_embedding_csv(opts.out.join(EMBEDDING))?;
    if q != config.bins_per_octave {
        return Err(Error::InvalidParameter {
            name: "q",
            reason: format!(
                "{EMBEDDING} was computed with {q} bins per octave, not {}",
                config.bins_per_octave
            ),
        });
    }
    Ok((emb, bins))
}

pub fn report(opts: &Options, config: &PipelineConfig) -> Result<(), Error> {
    let (emb, bins) = embedding(opts, config)?;
    let r = run_report(&emb, &bins, config.n_bins(), config)?;
    write_json(opts.out.join(HELICITY), &r)?;
    let h = &r.helicity;
    println!(
        "chroma alignment {:.3}, height monotonicity {:+.3} (axis e{})",
        h.chroma_alignment,
        h.height_monotonicity,
        h.height_axis + 1
    );
    Ok(())
}

pub fn plot(opts: &Options, config: &PipelineConfig) -> Result<(), Error> {
    let (emb, bins) = embedding(opts, config)?;
    let format = opts.plot_format();
    let path = opts.out.join(format!("helix.{}", format.extension()));
    export_plot(&path, &emb, &bins, config.bins_per_octave, format)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}
