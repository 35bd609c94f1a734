//! Deterministic building blocks for singing-voice-synthesis data preparation.
//!
//! The crate covers the non-neural part of an SVS recipe: score and label
//! parsing, Kaldi-style corpus manifests, signal processing (STFT, log-mel,
//! F0 tracking, Griffin-Lim), score featurization, score-level augmentation,
//! objective metrics, and a stage-addressable pipeline that wires it all
//! together. Model training itself is out of scope; the pipeline's training
//! stage is a stub that passes ground-truth features through so synthesis and
//! evaluation stay runnable.
//!
//! Everything here is deterministic: the same inputs, configuration, and seed
//! produce byte-identical outputs regardless of worker count.

pub mod augment;
pub mod corpus;
pub mod demo;
pub mod dsp;
pub mod featurize;
pub mod metrics;
pub mod pipeline;
pub mod score;

pub use corpus::{Corpus, TokenList, Utterance};
pub use dsp::{AudioBuffer, F0Track, FrameParams, MelSpectrogram};
pub use pipeline::{PipelineConfig, PipelineError};
pub use score::{LabelEntry, LabelSequence, NoteEvent, NoteSequence, Pitch};
