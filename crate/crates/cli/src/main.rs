//! Batch pipeline over decompiler AST documents: vectorize, train, score,
//! similarity, dedup, and synthetic corpus generation.

mod commands;
mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pmiv::config::Mode;

/// Exit codes: 0 success, 2 usage or configuration, 3 input parsing,
/// 4 data or processing.
#[derive(Debug)]
pub enum CliError {
    Usage(anyhow::Error),
    Parse(anyhow::Error),
    Data(anyhow::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Parse(_) => 3,
            CliError::Data(_) => 4,
        }
    }

    fn message(&self) -> &anyhow::Error {
        match self {
            CliError::Usage(e) | CliError::Parse(e) | CliError::Data(e) => e,
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Data(e)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OutputFormat {
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Preset {
    Texture,
    Topology,
}

#[derive(Parser)]
#[command(name = "pmiv", about = "Graph-integration vectorization of AST documents", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Vectorize documents into fixed-length feature vectors.
    Vectorize {
        /// Input files or directories of .json documents.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "jsonl")]
        format: OutputFormat,
        /// Integration measure: pmiv or umiv.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Worker threads; 0 means one per core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Write the column schema here instead of <out>.schema.json.
        #[arg(long)]
        schema_out: Option<PathBuf>,
        /// Dump per-function SDFGs and the call graph as DOT under this dir.
        #[arg(long)]
        dump_dot: Option<PathBuf>,
    },
    /// Train the random forest on vectorized files.
    Train {
        #[arg(long)]
        vectors: PathBuf,
        /// Labels manifest: {"labels": {file_id: benign|malicious}} or a
        /// plain file_id-to-label map.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        model_out: PathBuf,
        #[arg(long)]
        report_out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Vectorize and score documents with a trained model.
    Score {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Also write the timing summary JSON here.
        #[arg(long)]
        timing_out: Option<PathBuf>,
    },
    /// Pairwise Lp distance matrix over vectorized files.
    Similarity {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Norm order, p >= 1.
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Content digests with duplicate grouping.
    Dedup {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a labeled synthetic corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "texture")]
        preset: Preset,
        /// Files per class.
        #[arg(long, default_value_t = 100)]
        files: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Full corpus spec JSON; overrides the preset.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
}

fn parse_mode(mode: &Option<String>) -> Result<Option<Mode>, CliError> {
    match mode {
        None => Ok(None),
        Some(raw) => raw
            .parse::<Mode>()
            .map(Some)
            .map_err(|e| CliError::Usage(e.into())),
    }
}

fn load_config(
    path: &Option<PathBuf>,
    mode: Option<Mode>,
    seed: Option<u64>,
) -> Result<config::PipelineConfig, CliError> {
    let mut cfg = match path {
        Some(p) => config::PipelineConfig::load(p).map_err(CliError::Usage)?,
        None => config::PipelineConfig::default(),
    };
    if let Some(mode) = mode {
        cfg.vectorize.mode = mode;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(CliError::Usage)?;
    Ok(cfg)
}

fn init_workers(workers: usize) {
    if workers > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Vectorize {
            inputs,
            out,
            format,
            mode,
            config,
            workers,
            schema_out,
            dump_dot,
        } => {
            init_workers(workers);
            let cfg = load_config(&config, parse_mode(&mode)?, None)?;
            commands::vectorize(&inputs, &out, format, &cfg, schema_out, dump_dot)
        }
        Command::Train {
            vectors,
            labels,
            model_out,
            report_out,
            config,
            seed,
        } => {
            let cfg = load_config(&config, None, seed)?;
            commands::train(&vectors, &labels, &model_out, report_out, cfg)
        }
        Command::Score {
            inputs,
            model,
            out,
            workers,
            timing_out,
        } => {
            init_workers(workers);
            commands::score(&inputs, &model, &out, timing_out)
        }
        Command::Similarity {
            inputs,
            out,
            p,
            mode,
            config,
            workers,
        } => {
            init_workers(workers);
            let cfg = load_config(&config, parse_mode(&mode)?, None)?;
            commands::similarity(&inputs, &out, p, &cfg)
        }
        Command::Dedup { inputs, out } => commands::dedup(&inputs, out.as_deref()),
        Command::Synth {
            out,
            preset,
            files,
            seed,
            spec,
        } => commands::synth(&out, preset, files, seed, spec.as_deref()),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.message());
            ExitCode::from(e.code())
        }
    }
}
