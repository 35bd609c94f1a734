//! Stage-addressable recipe runner.
//!
//! The pipeline is a fixed sequence of nine stages, each one writing its
//! results under `work_dir/stageN/` and consuming only the outputs of
//! earlier stages. [`run`] executes the configured `stage..=stop_stage`
//! window inside a worker pool of the configured size; since every stage
//! collects parallel work back in input order before touching the
//! filesystem, the artifacts on disk do not depend on the worker count.
//!
//! | stage | role |
//! |-------|------|
//! | 1 | validate the raw data dir, absolutize manifests |
//! | 2 | resample, segment at silences, write per-segment files |
//! | 3 | length-filter train/dev segments |
//! | 4 | build the token list from the train split |
//! | 5 | dump log-mel + score features, train statistics |
//! | 6 | training placeholder (copies eval mels through) |
//! | 7 | Griffin-Lim vocoding |
//! | 8 | MCD / VUV / F0-RMSE report |
//! | 9 | deterministic tar of the run's artifacts |

pub mod archive;
pub mod config;
pub mod stages;

pub use archive::{pack, unpack, ArchiveEntry, ArchiveError};
pub use config::{ConfigError, PipelineConfig};
pub use stages::{RunningStats, StageError, StatsSummary};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("stage {stage} failed: {source}")]
    StageFailed { stage: u32, source: StageError },
}

/// Runs stages `config.stage ..= config.stop_stage` in order, stopping at
/// the first failure.
pub fn run(config: &PipelineConfig) -> Result<(), PipelineError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.n_workers)
        .build()
        .map_err(|e| PipelineError::Config(ConfigError::Invalid(format!("worker pool: {e}"))))?;
    for stage in config.stage..=config.stop_stage {
        pool.install(|| match stage {
            1 => stages::run_prepare(config),
            2 => stages::run_format(config),
            3 => stages::run_filter(config),
            4 => stages::run_tokens(config),
            5 => stages::run_features(config),
            6 => stages::run_train_stub(config),
            7 => stages::run_vocoder(config),
            8 => stages::run_evaluate(config),
            9 => stages::run_pack(config),
            _ => unreachable!("validate() bounds the stage range"),
        })
        .map_err(|source| PipelineError::StageFailed { stage, source })?;
    }
    Ok(())
}
