//! Generate assert statements for Java unit tests with a denoising
//! sequence-to-sequence transformer, end to end and at desk scale.
//!
//! The pipeline: mine Test-Assert Pairs from Java test code ([`mining`]),
//! train a shared byte-level BPE vocabulary ([`textprep`]), corrupt corpora
//! for denoising pretraining ([`noising`]), train the encoder-decoder model
//! with exact hand-derived gradients ([`model`], [`training`]), decode
//! ranked candidates by beam search ([`generation`]), score them
//! ([`evaluation`]), and insert the winners into existing tests
//! ([`augmentation`]). The [`cli`] module wires the stages into the
//! `assert-forge` binary; `examples/` holds one runnable program per stage.

pub mod augmentation;
pub mod cli;
pub mod evaluation;
pub mod generation;
pub mod java;
pub mod manifest;
pub mod mining;
pub mod model;
pub mod noising;
pub mod textprep;
pub mod training;
