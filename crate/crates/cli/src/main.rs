use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pitch_helix::corpus::{CorpusFilter, Dynamics};
use pitch_helix::cqt::C1_HZ;
use pitch_helix::export::PlotFormat;
use pitch_helix::loudness::{LoudnessMode, DEFAULT_CLIP_DB};
use pitch_helix::pipeline::PipelineConfig;
use pitch_helix::{Error, Execution};

mod stages;

/// Recover the pitch helix from a corpus of isolated notes.
#[derive(Debug, Parser)]
#[command(name = "pitch-helix", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Options,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render the synthetic corpus to WAV files and a manifest
    Synth,
    /// Corpus to scalogram.csv and rho2.csv
    Analyze,
    /// rho2.csv to edges.csv, geodesics.csv and embedding.csv
    Embed,
    /// embedding.csv to helicity.json
    Report,
    /// embedding.csv to a PLY or SVG plot
    Plot,
    /// Every stage in sequence
    All,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Loudness {
    Log,
    Linear,
    Cbrt,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Plot {
    Ply,
    Svg,
}

#[derive(Debug, Args)]
struct Options {
    /// Bins per octave
    #[arg(long, global = true, default_value_t = 24)]
    q: usize,
    /// Number of octaves
    #[arg(long, global = true, default_value_t = 3)]
    octaves: usize,
    /// Centre frequency of the lowest bin in Hz
    #[arg(long, global = true, default_value_t = C1_HZ)]
    fmin: f64,
    /// Kernel length relative to the constant-Q length
    #[arg(long, global = true, default_value_t = 1.0)]
    filter_scale: f64,
    #[arg(long, global = true, value_enum, default_value_t = Loudness::Log)]
    loudness: Loudness,
    /// Floor of the logarithmic loudness map in dB
    #[arg(long, global = true, default_value_t = DEFAULT_CLIP_DB, allow_hyphen_values = true)]
    clip_db: f64,
    /// Neighbours per subband in the graph
    #[arg(long = "knn", global = true, default_value_t = 3)]
    k: usize,
    /// Embedding dimensions
    #[arg(long, global = true, default_value_t = 3)]
    dims: usize,
    /// Seed of the synthetic corpus
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Corpus manifest (JSON)
    #[arg(long, global = true, conflicts_with = "synth_notes")]
    manifest: Option<PathBuf>,
    /// Size of the synthetic corpus used when no manifest is given
    #[arg(long, global = true)]
    synth_notes: Option<usize>,
    /// Keep only these instruments (repeatable)
    #[arg(long = "instrument", global = true)]
    instruments: Vec<String>,
    /// Keep only these dynamics (repeatable: pp, mf, ff)
    #[arg(long = "dynamics", global = true)]
    dynamics: Vec<String>,
    /// Keep only this playing technique
    #[arg(long, global = true)]
    technique: Option<String>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Plot::Svg)]
    plot: Plot,
    /// Embed the largest connected component instead of failing on a disconnected graph
    #[arg(long, global = true)]
    largest_component: bool,
    /// Run every stage on one thread
    #[arg(long, global = true)]
    sequential: bool,
}

impl Options {
    fn config(&self) -> Result<PipelineConfig, Error> {
        let loudness = match self.loudness {
            Loudness::Log => LoudnessMode::logarithmic(self.clip_db)?,
            Loudness::Linear => LoudnessMode::Linear,
            Loudness::Cbrt => LoudnessMode::CubicRoot,
        };
        let config = PipelineConfig {
            bins_per_octave: self.q,
            octaves: self.octaves,
            f_min: self.fmin,
            filter_scale: self.filter_scale,
            loudness,
            k: self.k,
            dims: self.dims,
            seed: self.seed,
            largest_component: self.largest_component,
            execution: if self.sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            },
            ..PipelineConfig::default()
        };
        config.validate()?;
        Ok(config)
    }

    fn filter(&self) -> Result<CorpusFilter, Error> {
        let dynamics = self
            .dynamics
            .iter()
            .map(|d| d.parse::<Dynamics>())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CorpusFilter {
            instruments: (!self.instruments.is_empty()).then(|| self.instruments.clone()),
            dynamics: (!dynamics.is_empty()).then_some(dynamics),
            technique: self.technique.clone(),
        })
    }

    fn plot_format(&self) -> PlotFormat {
        match self.plot {
            Plot::Ply => PlotFormat::Ply,
            Plot::Svg => PlotFormat::Svg,
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Disconnected { .. } | Error::InsufficientNeighbors { .. } => 3,
        Error::Io { .. }
        | Error::Wav { .. }
        | Error::UnsupportedWav(_)
        | Error::Json(_)
        | Error::Parse { .. } => 4,
        _ => 2,
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let config = cli.opts.config()?;
    let opts = &cli.opts;
    std::fs::create_dir_all(&opts.out).map_err(|e| Error::Io {
        path: opts.out.clone(),
        source: e,
    })?;
    match cli.command {
        Command::Synth => stages::synth(opts, &config),
        Command::Analyze => stages::analyze(opts, &config),
        Command::Embed => stages::embed(opts, &config),
        Command::Report => stages::report(opts, &config),
        Command::Plot => stages::plot(opts, &config),
        Command::All => {
            stages::analyze(opts, &config)?;
            stages::embed(opts, &config)?;
            stages::report(opts, &config)?;
            stages::plot(opts, &config)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Error::Disconnected { components } = &e {
                eprintln!(
                    "E_DISCONNECTED: neighbour graph has {} components",
                    components.len()
                );
                for (i, c) in components.iter().enumerate() {
                    eprintln!("  component {i}: {c:?}");
                }
                eprintln!("rerun with a larger --knn or pass --largest-component");
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
