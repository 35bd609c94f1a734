//! Command-line front end for the data-preparation pipeline.
//!
//! Configuration is layered: built-in defaults, then an optional
//! `key = value` config file, then individual flags. `--write-demo DIR`
//! generates a small synthetic corpus so the whole pipeline can be
//! exercised without any external data.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use svs_core::pipeline::{run, ConfigError, PipelineConfig, PipelineError};

#[derive(Parser, Debug)]
#[command(
    name = "svs-pipe",
    version,
    about = "Nine-stage singing-voice data preparation pipeline"
)]
struct Cli {
    /// `key = value` config file; the flags below override it.
    #[arg(short, long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Directory holding the raw split subdirectories (train/dev/eval).
    #[arg(long, value_name = "DIR")]
    data_dir: Option<PathBuf>,

    /// Directory receiving per-stage outputs.
    #[arg(long, value_name = "DIR")]
    work_dir: Option<PathBuf>,

    /// First stage to run (1-9).
    #[arg(long)]
    stage: Option<u32>,

    /// Last stage to run (1-9).
    #[arg(long)]
    stop_stage: Option<u32>,

    /// Worker threads for per-utterance work.
    #[arg(long)]
    workers: Option<usize>,

    /// Semitone shift applied to train-split scores in stage 2.
    #[arg(long, value_name = "SEMITONES", allow_hyphen_values = true)]
    pitch_shift: Option<i32>,

    /// Seed for randomized steps (demo generation, augmentation sampling).
    #[arg(long)]
    seed: Option<u64>,

    /// Write a synthetic demo corpus under DIR and exit.
    #[arg(long, value_name = "DIR")]
    write_demo: Option<PathBuf>,
}

fn build_config(cli: &Cli) -> Result<PipelineConfig, ConfigError> {
    let mut cfg = PipelineConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?;
        cfg.apply_file(&text)?;
    }
    if let Some(dir) = &cli.data_dir {
        cfg.data_dir = dir.clone();
    }
    if let Some(dir) = &cli.work_dir {
        cfg.work_dir = dir.clone();
    }
    if let Some(stage) = cli.stage {
        cfg.stage = stage;
    }
    if let Some(stop) = cli.stop_stage {
        cfg.stop_stage = stop;
    }
    if let Some(workers) = cli.workers {
        cfg.n_workers = workers;
    }
    if let Some(shift) = cli.pitch_shift {
        cfg.augment.pitch_shift_semitones = shift;
    }
    if let Some(seed) = cli.seed {
        cfg.augment.seed = seed;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Some(dir) = &cli.write_demo {
        return match svs_core::demo::write_demo_corpus(dir, cli.seed.unwrap_or(0)) {
            Ok(demo) => {
                let n: usize = demo.splits.iter().map(|(_, songs)| songs.len()).sum();
                eprintln!("svs-pipe: wrote {n} demo songs under {}", dir.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("svs-pipe: demo corpus: {e}");
                ExitCode::from(1)
            }
        };
    }

    let cfg = match build_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("svs-pipe: config: {e}");
            return ExitCode::from(2);
        }
    };

    eprintln!(
        "svs-pipe: running stages {}..={} in {}",
        cfg.stage,
        cfg.stop_stage,
        cfg.work_dir.display()
    );
    match run(&cfg) {
        Ok(()) => {
            eprintln!("svs-pipe: done");
            ExitCode::SUCCESS
        }
        Err(PipelineError::Config(e)) => {
            eprintln!("svs-pipe: config: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("svs-pipe: {e}");
            ExitCode::from(1)
        }
    }
}
